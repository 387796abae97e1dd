"""Exact arithmetic, word metrics, windows and escape sequences on Z^N and H3(Z).

Elements, windows and sequences are immutable and hashable; every operation
is pure.  The only shared mutable state is the Heisenberg word-metric cache,
which is guarded by a lock so values can be used freely across threads.

Conventions
-----------
The group operation is written additively even for the non-abelian Heisenberg
group: ``compose(g, h)`` is the matrix product g.h in that order, where
(a, b, c) encodes the upper unipotent matrix [[1, a, c], [0, 1, b], [0, 0, 1]].
Canonical element order is lexicographic on coordinates, which pins matrix
row/column order bit-exactly for reproducible numerics.
"""

from __future__ import annotations

import functools as _functools
import math
import threading
from dataclasses import dataclass, field
from itertools import product as _cartesian
from typing import Optional, Sequence

__all__ = [
    "GroupError",
    "RadiusExceededError",
    "ResourceBudgetError",
    "GroupSpec",
    "GroupElement",
    "Window",
    "EscapeSequence",
    "AngularCap",
    "lattice",
    "heisenberg",
    "compose",
    "inverse",
    "word_length",
    "ball",
    "box",
    "centered_interval",
    "translate",
    "shell_count",
    "direction_memberships",
    "validate_claimed_direction",
    "escape_cutoff",
    "escapes",
    "ray_sequence",
    "multiples_sequence",
    "fibonacci_numbers",
    "fibonacci_shift_sequence",
    "group_to_json",
    "group_from_json",
    "window_to_json",
    "window_from_json",
]

MAX_BALL_ELEMENTS = 2_000_000
DEFAULT_SEARCH_RADIUS = 24


class GroupError(ValueError):
    """Operands from incompatible groups or an unsupported group operation."""


class RadiusExceededError(LookupError):
    """Word-length query fell outside the precomputed search radius."""

    def __init__(self, radius: int):
        super().__init__(f"radius exceeded: element not found within radius {radius}")
        self.radius = radius


class ResourceBudgetError(RuntimeError):
    """Enumeration request beyond the configured desk-scale budget."""


@dataclass(frozen=True)
class GroupSpec:
    """A discrete group: ``lattice`` (Z^N) or ``heisenberg`` (H3(Z))."""

    kind: str
    n: int = 0

    def __post_init__(self):
        if self.kind == "lattice":
            if self.n < 1:
                raise GroupError("lattice dimension must be positive")
        elif self.kind == "heisenberg":
            if self.n not in (0, 3):
                raise GroupError("heisenberg carries fixed coordinate arity 3")
            object.__setattr__(self, "n", 3)
        else:
            raise GroupError(f"unknown group kind {self.kind!r}")

    @property
    def arity(self) -> int:
        return self.n

    def element(self, coords: Sequence[int]) -> "GroupElement":
        coords = tuple(int(c) for c in coords)
        if len(coords) != self.arity:
            raise GroupError(
                f"expected {self.arity} coordinates for {self.kind}, got {len(coords)}"
            )
        return GroupElement(self, coords)

    def identity(self) -> "GroupElement":
        return GroupElement(self, (0,) * self.arity)

    @property
    def generators(self) -> tuple["GroupElement", ...]:
        if self.kind == "lattice":
            basis = []
            for j in range(self.n):
                coords = [0] * self.n
                coords[j] = 1
                basis.append(GroupElement(self, tuple(coords)))
            return tuple(basis)
        return (GroupElement(self, (1, 0, 0)), GroupElement(self, (0, 1, 0)))

    @property
    def generators_and_inverses(self) -> tuple["GroupElement", ...]:
        gens = self.generators
        return gens + tuple(inverse(g) for g in gens)


def lattice(n: int) -> GroupSpec:
    return GroupSpec("lattice", n)


def heisenberg() -> GroupSpec:
    return GroupSpec("heisenberg")


@dataclass(frozen=True)
class GroupElement:
    spec: GroupSpec
    coords: tuple[int, ...]

    def is_identity(self) -> bool:
        return all(c == 0 for c in self.coords)

    def __repr__(self):  # compact; the spec field is implied by context
        return f"g{self.coords}"


def _check_same_spec(g: GroupElement, h: GroupElement) -> GroupSpec:
    if g.spec != h.spec:
        raise GroupError(f"mixed group kinds: {g.spec} vs {h.spec}")
    return g.spec


def compose(g: GroupElement, h: GroupElement) -> GroupElement:
    """Group product g.h (coordinate sum on the lattice)."""
    spec = _check_same_spec(g, h)
    if spec.kind == "lattice":
        return GroupElement(spec, tuple(a + b for a, b in zip(g.coords, h.coords)))
    a, b, c = g.coords
    a2, b2, c2 = h.coords
    return GroupElement(spec, (a + a2, b + b2, c + c2 + a * b2))


def inverse(g: GroupElement) -> GroupElement:
    if g.spec.kind == "lattice":
        return GroupElement(g.spec, tuple(-c for c in g.coords))
    a, b, c = g.coords
    return GroupElement(g.spec, (-a, -b, a * b - c))


class _HeisenbergMetric:
    """Incremental BFS over the Cayley graph of H3(Z) from the identity.

    Expansion is synchronized; lookups against the frozen distance map are
    safe without the lock once the wanted radius has been reached.
    """

    def __init__(self, spec: GroupSpec):
        self.spec = spec
        self.lock = threading.Lock()
        self.dist: dict[tuple[int, int, int], int] = {(0, 0, 0): 0}
        self.frontier: list[tuple[int, int, int]] = [(0, 0, 0)]
        self.radius = 0
        self.steps = [s.coords for s in spec.generators_and_inverses]

    def expand_to(self, radius: int) -> None:
        with self.lock:
            while self.radius < radius:
                nxt = []
                r = self.radius + 1
                for ga, gb, gc in self.frontier:
                    for sa, sb, sc in self.steps:
                        cand = (ga + sa, gb + sb, gc + sc + ga * sb)
                        if cand not in self.dist:
                            self.dist[cand] = r
                            nxt.append(cand)
                if len(self.dist) > MAX_BALL_ELEMENTS:
                    raise ResourceBudgetError(
                        f"heisenberg ball of radius {r} exceeds element budget"
                    )
                self.frontier = nxt
                self.radius = r


_METRICS: dict[GroupSpec, _HeisenbergMetric] = {}
_METRICS_LOCK = threading.Lock()


def _metric(spec: GroupSpec) -> _HeisenbergMetric:
    with _METRICS_LOCK:
        m = _METRICS.get(spec)
        if m is None:
            m = _HeisenbergMetric(spec)
            _METRICS[spec] = m
        return m


def word_length(g: GroupElement, max_radius: int = DEFAULT_SEARCH_RADIUS) -> int:
    """Length of the shortest word over generators and inverses equal to g.

    On the lattice this is the l1 norm (closed form; the BFS over the Cayley
    graph gives the same value and is used as a cross-check in the tests).
    On H3(Z) it is computed by breadth-first search, memoized per ball.
    """
    if g.spec.kind == "lattice":
        return sum(abs(c) for c in g.coords)
    metric = _metric(g.spec)
    d = metric.dist.get(g.coords)
    if d is not None:
        return d
    metric.expand_to(max_radius)
    d = metric.dist.get(g.coords)
    if d is None:
        raise RadiusExceededError(max_radius)
    return d


@dataclass(frozen=True)
class Window:
    """A finite, ordered index set carrying the exhaustion and projections.

    Ball and box windows are sorted lexicographically; ``translate`` windows
    inherit the base order through the translation map so that section
    matrices re-index positionally (translation by right multiplication is
    not order preserving on the Heisenberg group).
    """

    spec: GroupSpec
    elements: tuple[GroupElement, ...]
    descriptor: tuple
    index: dict = field(compare=False, repr=False, hash=False, default=None)

    def __post_init__(self):
        if self.index is None:
            idx = {g.coords: i for i, g in enumerate(self.elements)}
            if len(idx) != len(self.elements):
                raise GroupError("window elements must be distinct")
            object.__setattr__(self, "index", idx)

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, g: GroupElement) -> bool:
        return g.coords in self.index

    def position(self, g: GroupElement) -> Optional[int]:
        return self.index.get(g.coords)


def _lattice_ball_coords(n: int, r: int) -> list[tuple[int, ...]]:
    if n == 1:
        return [(k,) for k in range(-r, r + 1)]
    out = []
    for head in range(-r, r + 1):
        for rest in _lattice_ball_coords(n - 1, r - abs(head)):
            out.append((head,) + rest)
    return out


def lattice_ball_size(n: int, r: int) -> int:
    return sum(shell_count(n, j) for j in range(r + 1))


def shell_count(n: int, j: int) -> int:
    """Number of lattice points in Z^n with l1 norm exactly j."""
    if j == 0:
        return 1
    return sum(
        math.comb(n, i) * math.comb(j - 1, i - 1) * 2**i
        for i in range(1, min(n, j) + 1)
    )


def ball(spec: GroupSpec, r: int) -> Window:
    """Word-metric ball of radius r, canonically ordered.

    Results are memoized (windows are immutable and shared); the cache is
    safe because enumeration itself synchronizes on the metric cache.
    """
    if r < 0:
        raise GroupError("ball radius must be nonnegative")
    return _ball_cached(spec, r)


@_functools.lru_cache(maxsize=512)
def _ball_cached(spec: GroupSpec, r: int) -> Window:
    if spec.kind == "lattice":
        if lattice_ball_size(spec.n, r) > MAX_BALL_ELEMENTS:
            raise ResourceBudgetError(f"lattice ball radius {r} over element budget")
        coords = sorted(_lattice_ball_coords(spec.n, r))
    else:
        metric = _metric(spec)
        metric.expand_to(r)
        coords = sorted(c for c, d in metric.dist.items() if d <= r)
    elems = tuple(GroupElement(spec, c) for c in coords)
    return Window(spec, elems, ("ball", r))


def box(spec: GroupSpec, bounds: Sequence[tuple[int, int]]) -> Window:
    """Axis-aligned box window on the lattice, per-axis inclusive bounds."""
    if spec.kind != "lattice":
        raise GroupError("box windows are defined on lattice groups only")
    bounds = tuple((int(lo), int(hi)) for lo, hi in bounds)
    if len(bounds) != spec.n:
        raise GroupError(f"expected {spec.n} bound pairs, got {len(bounds)}")
    size = 1
    for lo, hi in bounds:
        if hi < lo:
            raise GroupError("box bounds must satisfy lo <= hi")
        size *= hi - lo + 1
    if size > MAX_BALL_ELEMENTS:
        raise ResourceBudgetError("box window over element budget")
    coords = _cartesian(*(range(lo, hi + 1) for lo, hi in bounds))
    elems = tuple(GroupElement(spec, c) for c in coords)
    return Window(spec, elems, ("box", bounds))


def centered_interval(spec: GroupSpec, size: int) -> Window:
    """Length-``size`` interval around the origin of Z (even sizes lean left)."""
    if spec.kind != "lattice" or spec.n != 1:
        raise GroupError("centered_interval is a Z window helper")
    lo = -(size // 2)
    return box(spec, [(lo, lo + size - 1)])


def translate(window: Window, g: GroupElement) -> Window:
    """Right translate W.g, keeping the base window's element order."""
    if g.spec != window.spec:
        raise GroupError("translation element must belong to the window's group")
    elems = tuple(compose(w, g) for w in window.elements)
    return Window(window.spec, elems, ("translate", window.descriptor, g.coords))


@dataclass(frozen=True)
class AngularCap:
    """Directions within ``half_angle`` of the unit vector ``eta``."""

    eta: tuple[float, ...]
    half_angle: float

    def __post_init__(self):
        norm = math.sqrt(sum(x * x for x in self.eta))
        if norm == 0:
            raise GroupError("cap direction must be nonzero")
        object.__setattr__(self, "eta", tuple(x / norm for x in self.eta))

    def contains_unit(self, u: Sequence[float]) -> bool:
        dot = sum(a * b for a, b in zip(self.eta, u))
        return dot >= math.cos(self.half_angle)


@dataclass(frozen=True)
class EscapeSequence:
    """A finite surrogate for a sequence leaving every finite set.

    ``claimed_direction`` (lattice only) asserts the terms escape inside every
    angular cap around it; ``validate_claimed_direction`` checks one cap.
    """

    spec: GroupSpec
    terms: tuple[GroupElement, ...]
    claimed_direction: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        for t in self.terms:
            if t.spec != self.spec:
                raise GroupError("sequence terms must share the sequence's group")
        if self.claimed_direction is not None:
            if self.spec.kind != "lattice":
                raise GroupError("directions undefined for this group")
            norm = math.sqrt(sum(x * x for x in self.claimed_direction))
            if norm == 0:
                raise GroupError("claimed direction must be nonzero")
            object.__setattr__(
                self, "claimed_direction", tuple(x / norm for x in self.claimed_direction)
            )

    def __len__(self):
        return len(self.terms)


def escape_cutoff(seq: EscapeSequence, radius: int) -> Optional[int]:
    """Smallest index past which every term has word length > radius."""
    cutoff = None
    for i, t in enumerate(seq.terms):
        if _inside_radius(t, radius):
            cutoff = None
        elif cutoff is None:
            cutoff = i
    return cutoff


def _inside_radius(g: GroupElement, radius: int) -> bool:
    if g.spec.kind == "lattice":
        return word_length(g) <= radius
    metric = _metric(g.spec)
    metric.expand_to(radius)
    d = metric.dist.get(g.coords)
    return d is not None and d <= radius


def escapes(seq: EscapeSequence, radius: int) -> bool:
    return escape_cutoff(seq, radius) is not None


def _euclid(coords: Sequence[int]) -> float:
    return math.sqrt(sum(c * c for c in coords))


def direction_memberships(
    seq: EscapeSequence, radius: float, cap: AngularCap
) -> tuple[bool, ...]:
    """Per-term membership in the neighborhood at infinity W_{R,U}.

    A term k qualifies iff |k| > R (Euclidean) and k/|k| lies in the cap.
    """
    if seq.spec.kind != "lattice":
        raise GroupError("directions undefined for this group")
    out = []
    for t in seq.terms:
        norm = _euclid(t.coords)
        if norm <= radius:
            out.append(False)
            continue
        out.append(cap.contains_unit(tuple(c / norm for c in t.coords)))
    return tuple(out)


def validate_claimed_direction(
    seq: EscapeSequence, radius: float, cap: AngularCap
) -> bool:
    """True iff every term beyond radius R lies in the configured cap."""
    if seq.claimed_direction is None:
        raise GroupError("sequence carries no claimed direction")
    member = direction_memberships(seq, radius, cap)
    for t, ok in zip(seq.terms, member):
        if _euclid(t.coords) > radius and not ok:
            return False
    return True


def ray_sequence(
    spec: GroupSpec,
    step: Sequence[int],
    count: int,
    stride: int = 1,
    offset: Optional[Sequence[int]] = None,
    claimed_direction: Optional[Sequence[float]] = None,
) -> EscapeSequence:
    """Lattice ray g_n = offset + n*stride*step for n = 1..count."""
    if spec.kind != "lattice":
        raise GroupError("ray sequences are lattice-only")
    off = tuple(offset) if offset is not None else (0,) * spec.n
    terms = []
    for n in range(1, count + 1):
        terms.append(
            spec.element(tuple(o + n * stride * s for o, s in zip(off, step)))
        )
    direction = tuple(claimed_direction) if claimed_direction is not None else None
    return EscapeSequence(spec, tuple(terms), direction)


def multiples_sequence(g: GroupElement, count: int) -> EscapeSequence:
    """Powers g, g^2, ..., g^count (works on both groups)."""
    terms = []
    acc = g
    for _ in range(count):
        terms.append(acc)
        acc = compose(acc, g)
    return EscapeSequence(g.spec, tuple(terms))


def fibonacci_numbers(count: int, start_index: int = 1, step: int = 1) -> list[int]:
    """F_1, F_2, ... = 1, 1, 2, 3, 5, ... sampled from ``start_index`` by ``step``."""
    fibs = [1, 1]
    needed = start_index + step * (count - 1)
    while len(fibs) < needed:
        fibs.append(fibs[-1] + fibs[-2])
    return [fibs[start_index - 1 + i * step] for i in range(count)]


def fibonacci_shift_sequence(
    count: int, start_index: int = 8, step: int = 2, sign: int = 1
) -> EscapeSequence:
    """Shifts along Fibonacci numbers on Z.

    The default samples every other Fibonacci number: the fixed point of the
    Fibonacci substitution recurs near F_n, but the letters just left of F_n
    alternate with the parity of n, so probes along consecutive Fibonacci
    numbers flip between two patterns and only the even-index subsequence
    stabilizes two-sidedly.
    """
    z = lattice(1)
    vals = fibonacci_numbers(count, start_index=start_index, step=step)
    return EscapeSequence(z, tuple(z.element((sign * v,)) for v in vals))


def group_to_json(spec: GroupSpec) -> dict:
    d: dict = {"group": spec.kind}
    if spec.kind == "lattice":
        d["n"] = spec.n
    return d


def group_from_json(d: dict) -> GroupSpec:
    kind = d["group"]
    if kind == "lattice":
        return lattice(int(d["n"]))
    if kind == "heisenberg":
        return heisenberg()
    raise GroupError(f"unknown group kind {kind!r}")


def window_to_json(window: Window) -> dict:
    d = group_to_json(window.spec)
    kind = window.descriptor[0]
    if kind == "ball":
        d["window"] = {"kind": "ball", "radius": window.descriptor[1]}
    elif kind == "box":
        bounds = window.descriptor[1]
        if all(lo == -hi for lo, hi in bounds):
            d["window"] = {"kind": "box", "halfwidths": [hi for _, hi in bounds]}
        else:
            d["window"] = {"kind": "box", "bounds": [list(b) for b in bounds]}
    else:
        raise GroupError("translate windows have no standalone serialization")
    return d


def window_from_json(d: dict) -> Window:
    spec = group_from_json(d)
    w = d["window"]
    if w["kind"] == "ball":
        return ball(spec, int(w["radius"]))
    if w["kind"] == "box":
        if "halfwidths" in w:
            bounds = [(-int(h), int(h)) for h in w["halfwidths"]]
        else:
            bounds = [tuple(b) for b in w["bounds"]]
        return box(spec, bounds)
    raise GroupError(f"unknown window kind {w['kind']!r}")
