"""Subshift hulls over discrete groups: configurations, languages, certificates.

A hull is never materialized as a set of points; it is presented through its
language (the legal patterns per finite window), which is the only finitely
checkable presentation of a compact subshift.  Configurations are rule-backed
points with total, deterministic evaluation; the shift action is implemented
so that ``evaluate(shift(w, g), h) == evaluate(w, h + g)``.

Bounded searches cannot refute density: pseudoergodicity refutations are
flagged inconclusive unless the configuration is periodic (where absence is
decidable from one period).
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from itertools import product as _cartesian
from typing import Iterable, Mapping, Optional, Sequence

from .groups import (
    EscapeSequence,
    GroupElement,
    GroupError,
    GroupSpec,
    ResourceBudgetError,
    Window,
    ball as _ball,
    box,
    compose,
    inverse,
    lattice,
    shell_count,
    word_length,
)
from .seeding import letter_index as _seeded_letter

__all__ = [
    "Alphabet",
    "Substitution",
    "Configuration",
    "PeriodicConfiguration",
    "SubstitutionFixedPointConfiguration",
    "ExplicitConfiguration",
    "ThresholdConfiguration",
    "ShiftedConfiguration",
    "PatchedConfiguration",
    "ExtendPrefixError",
    "Pattern",
    "SubshiftSpec",
    "FullShiftHull",
    "SubstitutionHullSpec",
    "PeriodicHullSpec",
    "ForbiddenPatternsHull",
    "MinimalityCertificate",
    "PseudoergodicityCertificate",
    "LimitProbe",
    "LimitSetSample",
    "evaluate",
    "shift",
    "pattern_of",
    "restrict",
    "metric_distance",
    "legal_patterns",
    "certify_minimal",
    "certify_pseudoergodic",
    "sample_limit_set",
    "binary_alphabet",
    "fibonacci_substitution",
    "thue_morse_substitution",
    "fibonacci_hull",
    "thue_morse_hull",
    "period_q_hull",
    "full_shift_hull",
    "full_pm1_hull",
    "halfplane_ab_hull",
    "periodic_word",
    "hull_from_json",
    "hull_to_json",
    "configuration_from_json",
    "configuration_to_json",
]

MAX_ENUMERATION = 1 << 21
MAX_WORD_EXPANSION = 1 << 24


class ExtendPrefixError(LookupError):
    """Evaluation outside an explicit rule's supported radius."""

    def __init__(self, needed_radius: int):
        super().__init__(f"extend prefix: evaluation needs radius {needed_radius}")
        self.needed_radius = needed_radius


@dataclass(frozen=True)
class Alphabet:
    """Finite ordered alphabet with scalar letter values in [0, value_cap]."""

    letters: tuple[str, ...]
    values: tuple[float, ...]
    value_cap: float = 1.0

    def __post_init__(self):
        if len(set(self.letters)) != len(self.letters):
            raise ValueError("alphabet letters must be distinct")
        if len(self.values) != len(self.letters):
            raise ValueError("one value per letter required")
        for v in self.values:
            if not (0.0 <= v <= self.value_cap):
                raise ValueError(f"letter value {v} outside [0, {self.value_cap}]")

    def __len__(self):
        return len(self.letters)

    def index(self, letter: str) -> int:
        try:
            return self.letters.index(letter)
        except ValueError:
            raise ValueError(f"unknown letter {letter!r}") from None

    def value(self, idx: int) -> float:
        return self.values[idx]


def binary_alphabet(a: str = "a", b: str = "b", values=(0.0, 1.0), cap: float = 1.0) -> Alphabet:
    return Alphabet((a, b), tuple(float(v) for v in values), cap)


# ---------------------------------------------------------------------------
# substitutions


@dataclass(frozen=True)
class Substitution:
    """A substitution on a finite alphabet, images as tuples of letter indices."""

    alphabet: Alphabet
    images: tuple[tuple[int, ...], ...]
    name: str = "substitution"

    def __post_init__(self):
        if len(self.images) != len(self.alphabet):
            raise ValueError("one image word per letter required")
        for img in self.images:
            if not img:
                raise ValueError("images must be nonempty")
        object.__setattr__(self, "_factor_cache", {})
        object.__setattr__(self, "_factor_lock", threading.Lock())

    def apply(self, word: Sequence[int]) -> tuple[int, ...]:
        out: list[int] = []
        for c in word:
            out.extend(self.images[c])
        return tuple(out)

    def apply_power(self, word: Sequence[int], power: int) -> tuple[int, ...]:
        w = tuple(word)
        for _ in range(power):
            if len(w) > MAX_WORD_EXPANSION:
                raise ResourceBudgetError("substitution word expansion over budget")
            w = self.apply(w)
        return w

    def incidence_matrix(self) -> tuple[tuple[int, ...], ...]:
        """M[i][j] counts letter i in the image of letter j."""
        k = len(self.alphabet)
        return tuple(
            tuple(self.images[j].count(i) for j in range(k)) for i in range(k)
        )

    def primitivity_witness(self) -> Optional[tuple[int, tuple[tuple[int, ...], ...]]]:
        """Smallest power <= |A|^2 with entrywise positive incidence matrix.

        Primitivity is a classical sufficient condition for minimality of the
        hull; it is reported as a shortcut next to the uniform-recurrence
        certificate, not as a replacement for it.
        """
        k = len(self.alphabet)
        m = self.incidence_matrix()
        power = m
        for p in range(1, k * k + 1):
            if all(x > 0 for row in power for x in row):
                return p, power
            power = tuple(
                tuple(sum(power[i][t] * m[t][j] for t in range(k)) for j in range(k))
                for i in range(k)
            )
        return None

    def factors(self, length: int) -> frozenset[tuple[int, ...]]:
        """All length-``length`` factors of the substitution language.

        Iterates the substitution from every letter until the factor set is
        identical for two consecutive iterations.  Results are cached per
        instance (under a lock, so hulls can be shared across threads).
        """
        if length < 1:
            raise ValueError("factor length must be positive")
        with self._factor_lock:
            hit = self._factor_cache.get(length)
        if hit is not None:
            return hit
        result = self._compute_factors(length)
        with self._factor_lock:
            self._factor_cache[length] = result
        return result

    def _compute_factors(self, length: int) -> frozenset[tuple[int, ...]]:
        words = [(j,) for j in range(len(self.alphabet))]
        prev: Optional[frozenset] = None
        for _ in range(64):
            words = [self.apply(w) for w in words]
            if max(len(w) for w in words) > MAX_WORD_EXPANSION:
                raise ResourceBudgetError("factor enumeration over budget")
            current = set()
            for w in words:
                for i in range(len(w) - length + 1):
                    current.add(w[i : i + length])
            current = frozenset(current)
            if prev is not None and current == prev and max(len(w) for w in words) >= length:
                return current
            prev = current
        raise ResourceBudgetError("factor set failed to stabilize")

    def two_sided_seed(self, seed_letter_idx: int) -> tuple[int, int]:
        """Power p and left letter l so that (l | seed) generates a two-sided
        fixed point of the p-th substitution power: sigma^p(seed) starts with
        seed, sigma^p(l) ends with l, and the seam word (l, seed) is legal."""
        two_factors = self.factors(2)
        k = len(self.alphabet)
        for p in range(1, 2 * k * k + 1):
            right = self.apply_power((seed_letter_idx,), p)
            if right[0] != seed_letter_idx or len(right) < 2:
                continue
            for l in range(k):
                left = self.apply_power((l,), p)
                if left[-1] != l or len(left) < 2:
                    continue
                if (l, seed_letter_idx) in two_factors:
                    return p, l
        raise ValueError("no two-sided fixed point seed found for this letter")


def fibonacci_substitution(values=(0.0, 1.0)) -> Substitution:
    alph = binary_alphabet(values=values)
    return Substitution(alph, ((0, 1), (0,)), name="fibonacci")


def thue_morse_substitution(values=(0.0, 1.0)) -> Substitution:
    alph = binary_alphabet(values=values)
    return Substitution(alph, ((0, 1), (1, 0)), name="thue_morse")


# ---------------------------------------------------------------------------
# configurations


class Configuration:
    """A point of the hull: a rule-backed map from group elements to letters."""

    group: GroupSpec
    alphabet: Alphabet
    label: str

    def letter_index(self, g: GroupElement) -> int:
        raise NotImplementedError


class PeriodicConfiguration(Configuration):
    """Axis-aligned periodic configuration on Z^N."""

    def __init__(self, group: GroupSpec, alphabet: Alphabet, periods: Sequence[int],
                 table: Mapping[tuple[int, ...], int], label: Optional[str] = None):
        if group.kind != "lattice":
            raise GroupError("periodic rules are lattice-only")
        self.group = group
        self.alphabet = alphabet
        self.periods = tuple(int(q) for q in periods)
        if len(self.periods) != group.n or any(q < 1 for q in self.periods):
            raise ValueError("need one positive period per axis")
        self.table = dict(table)
        expected = 1
        for q in self.periods:
            expected *= q
        if len(self.table) != expected:
            raise ValueError("pattern table must cover the fundamental box")
        self.label = label or f"periodic{self.periods}"

    def letter_index(self, g: GroupElement) -> int:
        key = tuple(c % q for c, q in zip(g.coords, self.periods))
        return self.table[key]


def periodic_word(alphabet: Alphabet, word: str | Sequence[str]) -> PeriodicConfiguration:
    """Periodic point of Z with the given word as fundamental pattern."""
    letters = list(word)
    table = {(i,): alphabet.index(ch) for i, ch in enumerate(letters)}
    return PeriodicConfiguration(
        lattice(1), alphabet, (len(letters),), table, label=f"periodic[{''.join(letters)}]"
    )


class SubstitutionFixedPointConfiguration(Configuration):
    """Two-sided fixed point of a substitution power, lazily expanded.

    The right side is the fixed point of sigma^p from the seed letter; the
    left side grows from a letter whose sigma^p image ends with it, with the
    seam chosen legal, so every factor of the configuration is a factor of
    the substitution language.
    """

    def __init__(self, substitution: Substitution, seed_letter: str):
        self.group = lattice(1)
        self.substitution = substitution
        self.alphabet = substitution.alphabet
        self.seed = substitution.alphabet.index(seed_letter)
        self.power, self.left_seed = substitution.two_sided_seed(self.seed)
        self._lock = threading.Lock()
        self._right: tuple[int, ...] = (self.seed,)
        self._left: tuple[int, ...] = (self.left_seed,)
        self.label = f"{substitution.name}_fixed_point[{seed_letter}]"

    def _ensure(self, n: int) -> None:
        with self._lock:
            while n >= 0 and len(self._right) <= n:
                if len(self._right) > MAX_WORD_EXPANSION:
                    raise ResourceBudgetError("fixed point expansion over budget")
                self._right = self.substitution.apply_power(self._right, self.power)
            while n < 0 and len(self._left) < -n:
                if len(self._left) > MAX_WORD_EXPANSION:
                    raise ResourceBudgetError("fixed point expansion over budget")
                self._left = self.substitution.apply_power(self._left, self.power)

    def letter_index(self, g: GroupElement) -> int:
        n = g.coords[0]
        self._ensure(n)
        if n >= 0:
            return self._right[n]
        return self._left[len(self._left) + n]


class ExplicitConfiguration(Configuration):
    """Seeded pseudorandom point of a full shift.

    Letters come from a pinned counter-based generator (see ``seeding``), so
    evaluation is total and identical across runs and implementations.  An
    optional ``max_radius`` keeps the historical prefix-bound contract: beyond
    it, evaluation raises ``ExtendPrefixError`` naming the needed radius.
    """

    def __init__(self, group: GroupSpec, alphabet: Alphabet, seed: int,
                 max_radius: Optional[int] = None):
        self.group = group
        self.alphabet = alphabet
        self.seed = int(seed)
        self.max_radius = max_radius
        self.label = f"explicit[seed={seed}]"

    def letter_index(self, g: GroupElement) -> int:
        if self.max_radius is not None:
            needed = word_length(g, max_radius=max(self.max_radius * 4, 32))
            if needed > self.max_radius:
                raise ExtendPrefixError(needed)
        return _seeded_letter(self.seed, g.coords, len(self.alphabet))


class ThresholdConfiguration(Configuration):
    """Half-space configuration on Z^N: high letter where coords[axis] >= threshold."""

    def __init__(self, group: GroupSpec, alphabet: Alphabet, axis: int = 0,
                 threshold: int = 0, low: str = "b", high: str = "a"):
        if group.kind != "lattice":
            raise GroupError("threshold rules are lattice-only")
        self.group = group
        self.alphabet = alphabet
        self.axis = axis
        self.threshold = threshold
        self.low_idx = alphabet.index(low)
        self.high_idx = alphabet.index(high)
        self.label = f"halfplane[{high}|{low},axis={axis},t={threshold}]"

    def letter_index(self, g: GroupElement) -> int:
        return self.high_idx if g.coords[self.axis] >= self.threshold else self.low_idx


class ShiftedConfiguration(Configuration):
    def __init__(self, base: Configuration, offset: GroupElement):
        self.base = base
        self.offset = offset
        self.group = base.group
        self.alphabet = base.alphabet
        self.label = f"{base.label}<<{offset.coords}"

    def letter_index(self, g: GroupElement) -> int:
        return self.base.letter_index(compose(g, self.offset))


class PatchedConfiguration(Configuration):
    """Base configuration with a finite override pattern (not a hull point)."""

    def __init__(self, base: Configuration, overrides: Mapping[GroupElement, str]):
        self.base = base
        self.group = base.group
        self.alphabet = base.alphabet
        self.overrides = {
            g.coords: base.alphabet.index(letter) for g, letter in overrides.items()
        }
        self.label = f"patched[{base.label},{len(self.overrides)}]"

    def letter_index(self, g: GroupElement) -> int:
        hit = self.overrides.get(g.coords)
        if hit is not None:
            return hit
        return self.base.letter_index(g)


def shift(config: Configuration, g: GroupElement) -> Configuration:
    """Shifted configuration: evaluate(shift(w, g), h) = evaluate(w, h + g)."""
    if g.spec != config.group:
        raise GroupError("shift element must belong to the configuration's group")
    if g.is_identity():
        return config
    if isinstance(config, ShiftedConfiguration):
        return ShiftedConfiguration(config.base, compose(g, config.offset))
    return ShiftedConfiguration(config, g)


def evaluate(config: Configuration, g: GroupElement) -> str:
    return config.alphabet.letters[config.letter_index(g)]


# ---------------------------------------------------------------------------
# patterns


@dataclass(frozen=True)
class Pattern:
    """Letters (as alphabet indices) on a finite window, aligned with its order."""

    window: Window
    letters: tuple[int, ...]

    def __post_init__(self):
        if len(self.letters) != len(self.window):
            raise ValueError("pattern must cover the window exactly")

    def letter_at(self, g: GroupElement) -> int:
        pos = self.window.position(g)
        if pos is None:
            raise KeyError(f"{g} outside pattern window")
        return self.letters[pos]

    def as_dict(self, alphabet: Alphabet) -> dict:
        return {
            g.coords: alphabet.letters[i]
            for g, i in zip(self.window.elements, self.letters)
        }


def pattern_of(config: Configuration, window: Window) -> Pattern:
    return Pattern(window, tuple(config.letter_index(g) for g in window.elements))


def restrict(pattern: Pattern, subwindow: Window) -> Pattern:
    letters = []
    for g in subwindow.elements:
        pos = pattern.window.position(g)
        if pos is None:
            raise KeyError(f"{g} outside pattern window")
        letters.append(pattern.letters[pos])
    return Pattern(subwindow, tuple(letters))


def _interval(lo: int, hi: int) -> Window:
    return box(lattice(1), [(lo, hi)])


def read_word(config: Configuration, start: int, length: int) -> tuple[int, ...]:
    z = config.group
    return tuple(
        config.letter_index(z.element((start + i,))) for i in range(length)
    )


# ---------------------------------------------------------------------------
# hulls


class SubshiftSpec:
    """A compact hull presented through its language."""

    group: GroupSpec
    alphabet: Alphabet
    name: str

    def legal_patterns(self, window: Window) -> frozenset[Pattern]:
        raise NotImplementedError

    def is_legal(self, pattern: Pattern) -> bool:
        raise NotImplementedError

    def language(self, length: int) -> frozenset[tuple[int, ...]]:
        """Legal interval words (Z hulls only)."""
        raise GroupError(f"{self.name} has no interval language")


def _all_patterns(alphabet: Alphabet, window: Window) -> Iterable[Pattern]:
    if len(alphabet) ** len(window) > MAX_ENUMERATION:
        raise ResourceBudgetError("pattern enumeration over budget")
    for letters in _cartesian(range(len(alphabet)), repeat=len(window)):
        yield Pattern(window, letters)


class FullShiftHull(SubshiftSpec):
    def __init__(self, group: GroupSpec, alphabet: Alphabet, name: str = "full_shift"):
        self.group = group
        self.alphabet = alphabet
        self.name = name

    def legal_patterns(self, window: Window) -> frozenset[Pattern]:
        return frozenset(_all_patterns(self.alphabet, window))

    def is_legal(self, pattern: Pattern) -> bool:
        return True

    def language(self, length: int) -> frozenset[tuple[int, ...]]:
        if self.group != lattice(1):
            raise GroupError("interval language requires the Z full shift")
        if len(self.alphabet) ** length > MAX_ENUMERATION:
            raise ResourceBudgetError("language enumeration over budget")
        return frozenset(_cartesian(range(len(self.alphabet)), repeat=length))


class SubstitutionHullSpec(SubshiftSpec):
    def __init__(self, substitution: Substitution, name: Optional[str] = None):
        self.group = lattice(1)
        self.substitution = substitution
        self.alphabet = substitution.alphabet
        self.name = name or substitution.name

    def language(self, length: int) -> frozenset[tuple[int, ...]]:
        return self.substitution.factors(length)

    def legal_patterns(self, window: Window) -> frozenset[Pattern]:
        coords = [g.coords[0] for g in window.elements]
        lo, hi = min(coords), max(coords)
        words = self.language(hi - lo + 1)
        pats = set()
        for w in words:
            pats.add(Pattern(window, tuple(w[c - lo] for c in coords)))
        return frozenset(pats)

    def is_legal(self, pattern: Pattern) -> bool:
        coords = [g.coords[0] for g in pattern.window.elements]
        lo, hi = min(coords), max(coords)
        words = self.language(hi - lo + 1)
        for w in words:
            if all(w[c - lo] == x for c, x in zip(coords, pattern.letters)):
                return True
        return False

    def fixed_point(self, seed_letter: Optional[str] = None) -> SubstitutionFixedPointConfiguration:
        seed = seed_letter or self.alphabet.letters[0]
        return SubstitutionFixedPointConfiguration(self.substitution, seed)


class PeriodicHullSpec(SubshiftSpec):
    """Finite orbit closure of a periodic configuration."""

    def __init__(self, base: PeriodicConfiguration, name: Optional[str] = None):
        self.group = base.group
        self.alphabet = base.alphabet
        self.base = base
        self.name = name or f"periodic_hull[{base.label}]"

    def orbit_points(self) -> list[Configuration]:
        offsets = _cartesian(*(range(q) for q in self.base.periods))
        return [shift(self.base, self.group.element(o)) for o in offsets]

    def legal_patterns(self, window: Window) -> frozenset[Pattern]:
        return frozenset(pattern_of(p, window) for p in self.orbit_points())

    def is_legal(self, pattern: Pattern) -> bool:
        return pattern in self.legal_patterns(pattern.window)

    def language(self, length: int) -> frozenset[tuple[int, ...]]:
        if self.group != lattice(1):
            raise GroupError("interval language requires a Z hull")
        return frozenset(read_word(p, 0, length) for p in self.orbit_points())


class ForbiddenPatternsHull(SubshiftSpec):
    """Subshift of finite type given by a finite list of forbidden patterns."""

    def __init__(self, group: GroupSpec, alphabet: Alphabet,
                 forbidden: Sequence[Pattern], name: str = "forbidden_patterns"):
        self.group = group
        self.alphabet = alphabet
        self.forbidden = tuple(forbidden)
        self.name = name

    def is_legal(self, pattern: Pattern) -> bool:
        for f in self.forbidden:
            anchor = f.window.elements[0]
            for w in pattern.window.elements:
                g = compose(inverse(anchor), w)
                ok = True
                match = True
                for fe, fl in zip(f.window.elements, f.letters):
                    target = compose(fe, g)
                    pos = pattern.window.position(target)
                    if pos is None:
                        ok = False
                        break
                    if pattern.letters[pos] != fl:
                        match = False
                        break
                if ok and match:
                    return False
        return True

    def legal_patterns(self, window: Window) -> frozenset[Pattern]:
        return frozenset(p for p in _all_patterns(self.alphabet, window) if self.is_legal(p))

    def language(self, length: int) -> frozenset[tuple[int, ...]]:
        if self.group != lattice(1):
            raise GroupError("interval language requires a Z hull")
        return frozenset(
            p.letters for p in self.legal_patterns(_interval(0, length - 1))
        )


def legal_patterns(hull: SubshiftSpec, window: Window) -> frozenset[Pattern]:
    return hull.legal_patterns(window)


# ---------------------------------------------------------------------------
# metric


def metric_distance(
    cfg1: Configuration, cfg2: Configuration, truncation: int
) -> tuple[float, float]:
    """Product-topology metric, truncated to ball(M), plus a certified tail bound.

    d(w, v) = sum_k 2^(-|k|) min(|w_k - v_k|, 1) with |k| the l1 word length
    and letter values from the alphabets.  Returns (partial sum, tail bound);
    the bound dominates the true remainder: each omitted term is at most
    min(cap, 1) 2^(-|k|), shells are counted exactly out to M+41, and the
    remaining series is bounded by shell(j) <= 2^N C(j+N-1, N-1) summed in
    closed form.
    """
    if cfg1.group.kind != "lattice" or cfg2.group.kind != "lattice":
        raise GroupError("the product metric is defined on lattice hulls only")
    if cfg1.group != cfg2.group:
        raise GroupError("configurations live over different groups")
    n = cfg1.group.n
    window = _ball(cfg1.group, truncation)
    terms = []
    for g in window.elements:
        v1 = cfg1.alphabet.value(cfg1.letter_index(g))
        v2 = cfg2.alphabet.value(cfg2.letter_index(g))
        gap = min(abs(v1 - v2), 1.0)
        if gap:
            terms.append(2.0 ** (-word_length(g)) * gap)
    value = math.fsum(terms)

    cap = min(max(cfg1.alphabet.value_cap, cfg2.alphabet.value_cap), 1.0)
    j_stop = truncation + 41
    exact = math.fsum(
        shell_count(n, j) * 2.0 ** (-j) for j in range(truncation + 1, j_stop + 1)
    )
    bound_j = (2**n) * math.comb(j_stop + n, n - 1)
    gamma = (1.0 + 1.0 / (j_stop + 1)) ** max(n - 1, 1)
    remainder = bound_j * 2.0 ** (-(j_stop + 1)) / (1.0 - gamma / 2.0)
    tail = cap * (exact + remainder) * (1.0 + 1e-12)
    return value, tail


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class MinimalityCertificate:
    status: str  # "certified" | "refuted"
    n: int
    big_n: int
    hull_name: str
    witness_word: Optional[tuple[int, ...]] = None
    missing_word: Optional[tuple[int, ...]] = None
    primitivity: Optional[tuple[int, tuple[tuple[int, ...], ...]]] = None
    recurrence_radius: Optional[int] = None

    @property
    def certified(self) -> bool:
        return self.status == "certified"


def certify_minimal(hull: SubshiftSpec, n: int, big_n: int) -> MinimalityCertificate:
    """Uniform recurrence at finite level: every legal n-word occurs in every
    legal N-word.  Substitution hulls also report the primitivity shortcut."""
    if hull.group != lattice(1):
        raise GroupError("minimality certification is implemented for Z hulls")
    small = sorted(hull.language(n))
    big = sorted(hull.language(big_n))
    primitivity = None
    if isinstance(hull, SubstitutionHullSpec):
        primitivity = hull.substitution.primitivity_witness()
    for big_word in big:
        text = bytes(big_word)
        for small_word in small:
            if bytes(small_word) not in text:
                return MinimalityCertificate(
                    "refuted", n, big_n, hull.name,
                    witness_word=big_word, missing_word=small_word,
                    primitivity=primitivity,
                )
    return MinimalityCertificate(
        "certified", n, big_n, hull.name,
        primitivity=primitivity, recurrence_radius=n + big_n,
    )


@dataclass(frozen=True)
class PseudoergodicityCertificate:
    status: str  # "certified" | "refuted" | "inconclusive"
    n: int
    radius: int
    config_label: str
    occurrences: tuple[tuple[tuple[int, ...], int], ...] = ()
    missing: tuple[tuple[int, ...], ...] = ()

    @property
    def certified(self) -> bool:
        return self.status == "certified"


def certify_pseudoergodic(
    config: Configuration, hull: SubshiftSpec, n: int, radius: int
) -> PseudoergodicityCertificate:
    """Every legal n-word of the hull occurs in the configuration within
    ball(radius) at a position of word length >= n.

    A miss is only "not found up to radius": it is flagged inconclusive unless
    the configuration is periodic, where absence is decidable, and the result
    is a definite refutation.
    """
    if config.group != lattice(1):
        raise GroupError("pseudoergodicity certification is implemented for Z")
    targets = set(hull.language(n))
    found: dict[tuple[int, ...], int] = {}
    positions = sorted(range(-radius, radius + 1), key=lambda p: (abs(p), p))
    for pos in positions:
        if abs(pos) < n:
            continue
        w = read_word(config, pos, n)
        if w in targets and w not in found:
            found[w] = pos
            if len(found) == len(targets):
                break
    missing = tuple(sorted(targets - set(found)))
    occurrences = tuple(sorted(found.items()))
    if not missing:
        status = "certified"
    else:
        base = config.base if isinstance(config, ShiftedConfiguration) else config
        definite = isinstance(base, PeriodicConfiguration) and radius >= n + max(base.periods)
        status = "refuted" if definite else "inconclusive"
    return PseudoergodicityCertificate(
        status, n, radius, config.label, occurrences, missing
    )


# ---------------------------------------------------------------------------
# limit sets


@dataclass(frozen=True)
class LimitProbe:
    sequence: EscapeSequence
    stabilized: bool
    pattern: Optional[Pattern]
    term_index: Optional[int]


@dataclass(frozen=True)
class LimitSetSample:
    source_label: str
    window: Window
    probes: tuple[LimitProbe, ...]

    def stabilized_patterns(self) -> list[Pattern]:
        return [p.pattern for p in self.probes if p.stabilized]

    def directional_patterns(self) -> dict[tuple[float, ...], list[Pattern]]:
        out: dict[tuple[float, ...], list[Pattern]] = {}
        for p in self.probes:
            if p.stabilized and p.sequence.claimed_direction is not None:
                out.setdefault(p.sequence.claimed_direction, []).append(p.pattern)
        return out


def sample_limit_set(
    config: Configuration,
    window: Window,
    sequences: Sequence[EscapeSequence],
    stability_runs: int = 3,
    hull: Optional[SubshiftSpec] = None,
) -> LimitSetSample:
    """Patterns that translated copies of the configuration stabilize to.

    A sequence counts as stabilized when its last ``stability_runs`` probe
    patterns agree; the recorded pattern is the one at the final term.  When a
    hull is supplied, recorded patterns are checked legal (the finite-level
    shadow of the limit set being contained in the hull).
    """
    probes = []
    for seq in sequences:
        pats = [pattern_of(shift(config, g), window) for g in seq.terms]
        ok = len(pats) >= stability_runs and all(
            p == pats[-1] for p in pats[-stability_runs:]
        )
        if ok:
            if hull is not None and not hull.is_legal(pats[-1]):
                raise ValueError(
                    f"limit probe along {seq.terms[-3:]} produced an illegal pattern"
                )
            probes.append(LimitProbe(seq, True, pats[-1], len(pats) - 1))
        else:
            probes.append(LimitProbe(seq, False, None, None))
    return LimitSetSample(config.label, window, tuple(probes))


# ---------------------------------------------------------------------------
# catalog


def fibonacci_hull(values=(0.0, 1.0)) -> SubstitutionHullSpec:
    return SubstitutionHullSpec(fibonacci_substitution(values), name="fibonacci")


def thue_morse_hull(values=(0.0, 1.0)) -> SubstitutionHullSpec:
    return SubstitutionHullSpec(thue_morse_substitution(values), name="thue_morse")


def period_q_hull(word: str = "ab", values=(0.0, 1.0)) -> PeriodicHullSpec:
    letters = tuple(sorted(set(word)))
    if letters == ("a", "b"):
        alph = binary_alphabet(values=values, cap=max(1.0, *values))
    else:
        vals = tuple(values) if len(values) == len(letters) else tuple(
            i / max(len(letters) - 1, 1) for i in range(len(letters))
        )
        alph = Alphabet(letters, vals, max(1.0, *vals))
    return PeriodicHullSpec(periodic_word(alph, word), name=f"period_q[{word}]")


def pm1_alphabet() -> Alphabet:
    return Alphabet(("-1", "1"), (0.0, 1.0), 1.0)


def full_shift_hull(group: GroupSpec, alphabet: Alphabet) -> FullShiftHull:
    return FullShiftHull(group, alphabet)


def full_pm1_hull(group: Optional[GroupSpec] = None) -> FullShiftHull:
    return FullShiftHull(group or lattice(1), pm1_alphabet(), name="full_pm1")


def halfplane_ab_hull() -> ForbiddenPatternsHull:
    """Hull of the vertical half-plane split on Z^2: columns constant, rows
    switch from b to a once, left to right."""
    z2 = lattice(2)
    alph = binary_alphabet()
    a, b = 0, 1
    right = box(z2, [(0, 1), (0, 0)])
    up = box(z2, [(0, 0), (0, 1)])
    forbidden = (
        Pattern(right, (a, b)),  # a may not sit left of b
        Pattern(up, (a, b)),     # columns must be constant
        Pattern(up, (b, a)),
    )
    return ForbiddenPatternsHull(z2, alph, forbidden, name="halfplane_ab")


# ---------------------------------------------------------------------------
# serialization

_HULL_BUILDERS = {
    "fibonacci": lambda d: fibonacci_hull(tuple(d.get("values", (0.0, 1.0)))),
    "thue_morse": lambda d: thue_morse_hull(tuple(d.get("values", (0.0, 1.0)))),
    "period_q": lambda d: period_q_hull(d.get("word", "ab"), tuple(d.get("values", (0.0, 1.0)))),
    "full_pm1": lambda d: full_pm1_hull(
        lattice(int(d["n"])) if "n" in d else lattice(1)
    ),
    "halfplane_ab": lambda d: halfplane_ab_hull(),
}


def hull_from_json(d: Mapping) -> SubshiftSpec:
    name = d["hull"]
    if name in _HULL_BUILDERS:
        return _HULL_BUILDERS[name](d)
    if name == "full_shift":
        from .groups import group_from_json

        group = group_from_json(d.get("group", {"group": "lattice", "n": 1}))
        letters = tuple(d["alphabet"])
        values = tuple(d.get("values", tuple(i / max(len(letters) - 1, 1) for i in range(len(letters)))))
        cap = float(d.get("value_cap", max(1.0, *values)))
        return FullShiftHull(group, Alphabet(letters, values, cap))
    raise ValueError(f"unknown hull {name!r}")


def hull_to_json(hull: SubshiftSpec) -> dict:
    if isinstance(hull, PeriodicHullSpec) and hull.group == lattice(1):
        word = "".join(
            hull.alphabet.letters[i] for i in read_word(hull.base, 0, hull.base.periods[0])
        )
        return {"hull": "period_q", "word": word, "values": list(hull.alphabet.values)}
    if hull.name in ("fibonacci", "thue_morse"):
        return {"hull": hull.name, "values": list(hull.alphabet.values)}
    if hull.name == "full_pm1":
        d: dict = {"hull": "full_pm1"}
        if hull.group.kind == "lattice" and hull.group.n != 1:
            d["n"] = hull.group.n
        return d
    if hull.name == "halfplane_ab":
        return {"hull": "halfplane_ab"}
    if isinstance(hull, FullShiftHull):
        from .groups import group_to_json

        return {
            "hull": "full_shift",
            "group": group_to_json(hull.group),
            "alphabet": list(hull.alphabet.letters),
            "values": list(hull.alphabet.values),
        }
    raise ValueError(f"hull {hull.name!r} has no serialization")


def configuration_from_json(hull: SubshiftSpec, d: Mapping) -> Configuration:
    spec = d["config"] if "config" in d else d
    rule = spec["rule"]
    cfg: Configuration
    if rule == "fixed_point":
        if not isinstance(hull, SubstitutionHullSpec):
            raise ValueError("fixed_point rule requires a substitution hull")
        cfg = hull.fixed_point(spec.get("seed_letter"))
    elif rule == "periodic":
        alph = hull.alphabet
        cfg = periodic_word(alph, spec["word"])
    elif rule == "explicit":
        cfg = ExplicitConfiguration(
            hull.group, hull.alphabet, int(spec["seed"]), spec.get("max_radius")
        )
    elif rule == "halfplane":
        cfg = ThresholdConfiguration(
            hull.group, hull.alphabet,
            axis=int(spec.get("axis", 0)), threshold=int(spec.get("threshold", 0)),
            low=spec.get("low", "b"), high=spec.get("high", "a"),
        )
    elif rule == "patched":
        base = configuration_from_json(hull, {"config": spec["base"]})
        overrides = {
            hull.group.element(tuple(coords)): letter
            for coords, letter in spec["overrides"]
        }
        return PatchedConfiguration(base, overrides)
    else:
        raise ValueError(f"unknown configuration rule {rule!r}")
    offset = spec.get("shift")
    if offset:
        coords = (offset,) if isinstance(offset, int) else tuple(offset)
        cfg = shift(cfg, hull.group.element(coords))
    return cfg


def configuration_to_json(config: Configuration) -> dict:
    offset = None
    if isinstance(config, ShiftedConfiguration):
        offset = list(config.offset.coords)
        config = config.base
    spec: dict
    if isinstance(config, SubstitutionFixedPointConfiguration):
        spec = {"rule": "fixed_point",
                "seed_letter": config.alphabet.letters[config.seed]}
    elif isinstance(config, PeriodicConfiguration):
        if config.group != lattice(1):
            raise ValueError("only Z periodic rules serialize")
        word = "".join(
            config.alphabet.letters[config.table[(i,)]] for i in range(config.periods[0])
        )
        spec = {"rule": "periodic", "word": word}
    elif isinstance(config, ExplicitConfiguration):
        spec = {"rule": "explicit", "seed": config.seed}
        if config.max_radius is not None:
            spec["max_radius"] = config.max_radius
    elif isinstance(config, ThresholdConfiguration):
        spec = {
            "rule": "halfplane", "axis": config.axis, "threshold": config.threshold,
            "low": config.alphabet.letters[config.low_idx],
            "high": config.alphabet.letters[config.high_idx],
        }
    else:
        raise ValueError(f"configuration {config.label!r} has no serialization")
    if offset is not None:
        spec["shift"] = offset[0] if len(offset) == 1 else offset
    return {"config": spec}
