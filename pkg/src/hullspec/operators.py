"""Equivariant band-operator families of finite propagation over hulls.

An operator family is stored as a coefficient scheme: a finite offset set S,
a locality radius r, and per-offset maps from local patterns to d x d complex
blocks.  The matrix entry at (k, h) is nonzero only for h = s + k with s in S
and then equals coeff(s, pattern of the shifted configuration on ball(r)).
This parametrization makes shift equivariance an exact algebraic identity,

    entry(shift(w, g), k, h) == entry(w, k + g, h + g),

including on non-abelian groups: h + g = s + (k + g) iff h = s + k by right
cancellation, and local patterns transport along the same translation.
Coefficient maps are exact functions of the pattern (no hidden randomness),
so equivariance is tested bit-for-bit with zero tolerance.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import (
    Alphabet,
    Configuration,
    Pattern,
    SubshiftSpec,
    binary_alphabet,
    pattern_of,
    pm1_alphabet,
    shift,
)
from .groups import (
    EscapeSequence,
    GroupElement,
    GroupError,
    GroupSpec,
    Window,
    ball,
    compose,
    heisenberg,
    inverse,
    lattice,
    word_length,
)

__all__ = [
    "CoefficientScheme",
    "FiniteSection",
    "LimitOperatorProbe",
    "local_pattern",
    "entry",
    "section",
    "verify_equivariance",
    "window_seminorm",
    "norm_upper_bound",
    "approximate_limit_operator",
    "operator_spectrum_sample",
    "free_laplacian",
    "identity_scheme",
    "diagonal_letter_scheme",
    "letter_diagonal_jacobi",
    "fibonacci_jacobi",
    "period_q_jacobi",
    "feinberg_zee",
    "heisenberg_adjacency",
    "scheme_from_toml",
    "section_to_csv",
    "section_to_binary",
    "section_from_binary",
]

MAX_SECTION_SIZE = 4000


@dataclass(frozen=True)
class CoefficientScheme:
    """The data of an equivariant finite-propagation family A(.)."""

    name: str
    group: GroupSpec
    offsets: tuple[GroupElement, ...]
    locality_radius: int
    block_dim: int
    coeff_fns: tuple[Callable[[Pattern], np.ndarray], ...] = field(compare=False)
    offset_bounds: tuple[float, ...]
    params: tuple = ()

    def __post_init__(self):
        if len(self.coeff_fns) != len(self.offsets):
            raise ValueError("one coefficient map per offset required")
        if len(self.offset_bounds) != len(self.offsets):
            raise ValueError("one norm bound per offset required")
        if len({s.coords for s in self.offsets}) != len(self.offsets):
            raise ValueError("offsets must be distinct")

    @property
    def propagation(self) -> int:
        return max(word_length(s) for s in self.offsets)

    @property
    def scheme_id(self) -> str:
        params = ",".join(f"{k}={v}" for k, v in self.params)
        return f"{self.name}({params})" if params else self.name


def norm_upper_bound(scheme: CoefficientScheme) -> float:
    """Triangle-inequality bound over the shift components, valid on l2."""
    return float(sum(scheme.offset_bounds))


def local_pattern(config: Configuration, k: GroupElement, radius: int) -> Pattern:
    """Pattern of shift(config, k) on ball(radius): the coefficients' input."""
    return pattern_of(shift(config, k), ball(config.group, radius))


def entry(
    scheme: CoefficientScheme, config: Configuration, k: GroupElement, h: GroupElement
) -> np.ndarray:
    """d x d block at row k, column h; zero unless h = s + k for some offset s."""
    d = scheme.block_dim
    pat = None
    for s, fn in zip(scheme.offsets, scheme.coeff_fns):
        if compose(s, k).coords == h.coords:
            if pat is None:
                pat = local_pattern(config, k, scheme.locality_radius)
            return np.array(fn(pat), dtype=complex)
    return np.zeros((d, d), dtype=complex)


@dataclass(frozen=True)
class FiniteSection:
    """Compression of A(config) to a finite window, dense complex matrix.

    Row/column order follows the window's canonical element order, blocks
    contiguous.  Truncate boundaries drop couplings leaving the window;
    periodic boundaries (lattice boxes only) wrap offsets modulo the box
    dimensions, accumulating collisions.
    """

    window: Window
    boundary: str
    matrix: np.ndarray = field(compare=False)
    provenance: tuple[str, str] = ("", "")

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def _wrap_position(window: Window, coords: tuple[int, ...]) -> int:
    bounds = window.descriptor[1]
    wrapped = tuple(
        lo + ((c - lo) % (hi - lo + 1)) for c, (lo, hi) in zip(coords, bounds)
    )
    pos = window.position(window.spec.element(wrapped))
    assert pos is not None
    return pos


def _periodic_precheck(config: Configuration, window: Window) -> None:
    from .dynamics import PeriodicConfiguration, ShiftedConfiguration

    if window.descriptor[0] != "box" or window.spec.kind != "lattice":
        raise GroupError("periodic boundaries need a lattice box window")
    base = config
    while isinstance(base, ShiftedConfiguration):
        base = base.base
    if not isinstance(base, PeriodicConfiguration):
        raise GroupError("periodic boundaries need a periodic configuration")
    bounds = window.descriptor[1]
    for (lo, hi), q in zip(bounds, base.periods):
        if (hi - lo + 1) % q:
            raise GroupError(
                f"box length {hi - lo + 1} not a multiple of period {q}"
            )


def section(
    scheme: CoefficientScheme,
    config: Configuration,
    window: Window,
    boundary: str = "truncate",
) -> FiniteSection:
    if boundary not in ("truncate", "periodic"):
        raise ValueError(f"unknown boundary {boundary!r}")
    if scheme.group != config.group or scheme.group != window.spec:
        raise GroupError("scheme, configuration and window must share a group")
    d = scheme.block_dim
    n = len(window)
    if n * d > MAX_SECTION_SIZE:
        raise GroupError(f"section size {n * d} over desk budget {MAX_SECTION_SIZE}")
    if boundary == "periodic":
        _periodic_precheck(config, window)
    mat = np.zeros((n * d, n * d), dtype=complex)
    r = scheme.locality_radius
    for i, k in enumerate(window.elements):
        pat = local_pattern(config, k, r)
        for s, fn in zip(scheme.offsets, scheme.coeff_fns):
            h = compose(s, k)
            if boundary == "truncate":
                j = window.position(h)
                if j is None:
                    continue
            else:
                j = _wrap_position(window, h.coords)
            mat[i * d : (i + 1) * d, j * d : (j + 1) * d] += fn(pat)
    mat.flags.writeable = False
    return FiniteSection(window, boundary, mat, (scheme.scheme_id, config.label))


def verify_equivariance(
    scheme: CoefficientScheme, config: Configuration, g: GroupElement, window: Window
) -> bool:
    """Exact check of entry(shift(w,g), k, h) == entry(w, k+g, h+g) on the window.

    Every band position (k, s + k) inside the window is compared bit-for-bit
    (no tolerance; the identity is algebraic).  Off-band entries vanish on
    both sides by right cancellation, the same argument a dense assembly of
    both sections would rely on, so only band entries carry information.
    """
    shifted = shift(config, g)
    r = scheme.locality_radius
    for k in window.elements:
        left_pattern = local_pattern(shifted, k, r)
        right_pattern = local_pattern(config, compose(k, g), r)
        for s, fn in zip(scheme.offsets, scheme.coeff_fns):
            if compose(s, k) not in window:
                continue
            left_block = fn(left_pattern)
            right_block = fn(right_pattern)
            if left_block is right_block:
                continue
            if not np.array_equal(left_block, right_block):
                return False
    return True


def _rect_difference(
    scheme: CoefficientScheme,
    cfg1: Configuration,
    cfg2: Configuration,
    rows: Window,
    cols: Window,
) -> np.ndarray:
    d = scheme.block_dim
    out = np.zeros((len(rows) * d, len(cols) * d), dtype=complex)
    r = scheme.locality_radius
    for i, k in enumerate(rows.elements):
        p1 = local_pattern(cfg1, k, r)
        p2 = local_pattern(cfg2, k, r)
        if p1.letters == p2.letters:
            continue
        for s, fn in zip(scheme.offsets, scheme.coeff_fns):
            j = cols.position(compose(s, k))
            if j is None:
                continue
            out[i * d : (i + 1) * d, j * d : (j + 1) * d] += fn(p1) - fn(p2)
    return out


def _sigma_max(mat: np.ndarray) -> float:
    if not mat.size or not np.any(mat):
        return 0.0
    return float(np.linalg.svd(mat, compute_uv=False)[0])


def window_seminorm(
    scheme: CoefficientScheme, cfg1: Configuration, cfg2: Configuration, m: int
) -> float:
    """p_m(A(w) - A(v)) = ||P_m D P_M|| + ||P_M D P_m|| with M = m + propagation.

    Exact for band operators: rows and columns meeting ball(m) couple to
    nothing beyond ball(M), so the rectangular compressions capture the full
    seminorm and the value is 0.0 exactly when the configurations agree on
    ball(m + locality radius + propagation).
    """
    group = scheme.group
    inner = ball(group, m)
    outer = ball(group, m + scheme.propagation)
    first = _rect_difference(scheme, cfg1, cfg2, inner, outer)
    second = _rect_difference(scheme, cfg1, cfg2, outer, inner)
    return _sigma_max(first) + _sigma_max(second)


@dataclass(frozen=True)
class LimitOperatorProbe:
    """Finite-scale approximation of one limit operator along a sequence.

    The probe tracks the pattern of the translated configuration on the
    window that determines the section on ball(m); it is stabilized when the
    last ``stability_runs`` patterns agree.  The window-seminorm trace between
    consecutive translates is the convergence evidence a stricter caller can
    inspect, and the per-term translated sections feed the norm-dominance
    check (a limit operator's norm never exceeds the source's).
    """

    sequence: EscapeSequence
    m: int
    stabilized: bool
    stabilized_at: Optional[int]
    limit_pattern: Optional[Pattern]
    limit_section: Optional[FiniteSection]
    seminorm_trace: tuple[float, ...]
    translated_sections: tuple[FiniteSection, ...]

    @property
    def translated_sigma_max(self) -> tuple[float, ...]:
        return tuple(_sigma_max(s.matrix) for s in self.translated_sections)


def _max_offset_length(scheme: CoefficientScheme) -> int:
    return max(word_length(s) for s in scheme.offsets)


def approximate_limit_operator(
    scheme: CoefficientScheme,
    config: Configuration,
    sequence: EscapeSequence,
    m: int,
    stability_runs: int = 3,
    record_seminorms: bool = True,
) -> LimitOperatorProbe:
    """Track V_{g_n} A(w) V_{-g_n} along the sequence at observation level m.

    For pattern-local band operators, convergence against every window
    projection is equivalent to eventual agreement of the translated patterns
    on ball(r + max offset length + m); stabilization is declared when the
    last ``stability_runs`` probes agree exactly.  Never errors: unstabilized
    probes are returned with ``stabilized=False``.
    """
    rho = scheme.locality_radius + _max_offset_length(scheme) + m
    obs = ball(scheme.group, rho)
    small = ball(scheme.group, m)
    patterns: list[Pattern] = []
    sections: list[FiniteSection] = []
    seminorms: list[float] = []
    prev_cfg: Optional[Configuration] = None
    for g in sequence.terms:
        shifted = shift(config, g)
        patterns.append(pattern_of(shifted, obs))
        sections.append(section(scheme, shifted, small))
        if record_seminorms and prev_cfg is not None:
            if patterns[-1].letters == patterns[-2].letters:
                seminorms.append(0.0)
            else:
                seminorms.append(window_seminorm(scheme, prev_cfg, shifted, m))
        prev_cfg = shifted
    stable = len(patterns) >= stability_runs and all(
        p.letters == patterns[-1].letters for p in patterns[-stability_runs:]
    )
    if not stable:
        return LimitOperatorProbe(
            sequence, m, False, None, None, None, tuple(seminorms), tuple(sections)
        )
    first_stable = len(patterns) - 1
    while first_stable > 0 and patterns[first_stable - 1].letters == patterns[-1].letters:
        first_stable -= 1
    return LimitOperatorProbe(
        sequence, m, True, first_stable, patterns[-1], sections[-1],
        tuple(seminorms), tuple(sections),
    )


def operator_spectrum_sample(
    scheme: CoefficientScheme,
    config: Configuration,
    sequences: Sequence[EscapeSequence],
    m: int,
    hull: Optional[SubshiftSpec] = None,
    stability_runs: int = 3,
) -> list[LimitOperatorProbe]:
    """Stabilized limit-operator probes along the given sequences.

    Each stabilized limit pattern must be legal in the hull when one is
    supplied: the probes realize the identification of limit operators with
    the family evaluated at limit points of the configuration's orbit.
    """
    probes = []
    for seq in sequences:
        probe = approximate_limit_operator(
            scheme, config, seq, m, stability_runs=stability_runs
        )
        if not probe.stabilized:
            continue
        if hull is not None and not hull.is_legal(probe.limit_pattern):
            raise ValueError(
                f"limit pattern along {seq.terms[-1]} is illegal in {hull.name}"
            )
        probes.append(probe)
    return probes


# ---------------------------------------------------------------------------
# coefficient map helpers


def _origin_letter(pattern: Pattern) -> int:
    pos = pattern.window.position(pattern.window.spec.identity())
    return pattern.letters[pos]


def _const_fn(block: np.ndarray) -> Callable[[Pattern], np.ndarray]:
    block = np.asarray(block, dtype=complex)
    block.flags.writeable = False
    return lambda pattern: block


def _letter_fn(per_letter: Sequence[np.ndarray]) -> Callable[[Pattern], np.ndarray]:
    table = []
    for b in per_letter:
        b = np.asarray(b, dtype=complex)
        b.flags.writeable = False
        table.append(b)
    table = tuple(table)
    return lambda pattern: table[_origin_letter(pattern)]


# ---------------------------------------------------------------------------
# catalog


def identity_scheme(group: GroupSpec, block_dim: int = 1) -> CoefficientScheme:
    eye = np.eye(block_dim, dtype=complex)
    return CoefficientScheme(
        "identity", group, (group.identity(),), 0, block_dim,
        (_const_fn(eye),), (1.0,), (("d", block_dim),),
    )


def diagonal_letter_scheme(
    group: GroupSpec, alphabet: Alphabet, name: str = "diagonal"
) -> CoefficientScheme:
    """Pure potential: diagonal block = value of the letter at the origin."""
    blocks = [np.array([[v]], dtype=complex) for v in alphabet.values]
    bound = max(abs(v) for v in alphabet.values)
    return CoefficientScheme(
        name, group, (group.identity(),), 0, 1,
        (_letter_fn(blocks),), (bound,), (("values", alphabet.values),),
    )


def free_laplacian(group: GroupSpec, block_dim: int = 1) -> CoefficientScheme:
    """Hopping 1 to every generator neighbor, zero on-site term."""
    eye = np.eye(block_dim, dtype=complex)
    zero = np.zeros((block_dim, block_dim), dtype=complex)
    offsets = [group.identity()] + list(group.generators_and_inverses)
    fns = [_const_fn(zero)] + [_const_fn(eye)] * (len(offsets) - 1)
    bounds = (0.0,) + (1.0,) * (len(offsets) - 1)
    return CoefficientScheme(
        "free_laplacian", group, tuple(offsets), 0, block_dim,
        tuple(fns), bounds, (("d", block_dim), ("group", group.kind)),
    )


def letter_diagonal_jacobi(
    group: GroupSpec, alphabet: Alphabet, name: str = "letter_diagonal"
) -> CoefficientScheme:
    """Unit hopping over generators and inverses plus letter-valued diagonal."""
    one = np.eye(1, dtype=complex)
    diag_blocks = [np.array([[v]], dtype=complex) for v in alphabet.values]
    offsets = [group.identity()] + list(group.generators_and_inverses)
    fns = [_letter_fn(diag_blocks)] + [_const_fn(one)] * (len(offsets) - 1)
    bounds = (max(abs(v) for v in alphabet.values),) + (1.0,) * (len(offsets) - 1)
    return CoefficientScheme(
        name, group, tuple(offsets), 0, 1, tuple(fns), bounds,
        (("values", alphabet.values), ("group", group.kind)),
    )


def fibonacci_jacobi(values=(0.0, 1.0)) -> CoefficientScheme:
    return letter_diagonal_jacobi(
        lattice(1), binary_alphabet(values=values), name="fibonacci_jacobi"
    )


def period_q_jacobi(values=(0.0, 1.0), letters=("a", "b")) -> CoefficientScheme:
    alph = Alphabet(tuple(letters), tuple(float(v) for v in values),
                    max(1.0, *(float(v) for v in values)))
    return letter_diagonal_jacobi(lattice(1), alph, name="period_q_jacobi")


def feinberg_zee(group: Optional[GroupSpec] = None) -> CoefficientScheme:
    """Random hopping model: backward hops carry the +-1 letter at the origin,
    forward hops are 1.  Letters must parse as the sign values."""
    group = group or lattice(1)
    alphabet = pm1_alphabet()
    signs = [np.array([[float(letter)]], dtype=complex) for letter in alphabet.letters]
    one = np.eye(1, dtype=complex)
    offsets: list[GroupElement] = []
    fns = []
    bounds = []
    for gen in group.generators:
        offsets.append(gen)
        fns.append(_const_fn(one))
        bounds.append(1.0)
    for gen in group.generators:
        offsets.append(inverse(gen))
        fns.append(_letter_fn(signs))
        bounds.append(max(abs(float(letter)) for letter in alphabet.letters))
    return CoefficientScheme(
        "feinberg_zee", group, tuple(offsets), 0, 1, tuple(fns), tuple(bounds),
        (("group", group.kind),),
    )


def heisenberg_adjacency(values=(0.0, 1.0)) -> CoefficientScheme:
    """Adjacency of the H3(Z) Cayley graph plus a letter-valued on-site term."""
    return letter_diagonal_jacobi(
        heisenberg(), binary_alphabet(values=values), name="heisenberg_adjacency"
    )


def scheme_from_toml(table: dict, group: Optional[GroupSpec] = None) -> CoefficientScheme:
    """Build a catalog scheme from its TOML table ([scheme] name = ... )."""
    table = dict(table)
    name = table.pop("name")
    values = tuple(table.pop("letter_values", (0.0, 1.0)))
    block_dim = int(table.pop("block_dim", 1))
    letters = tuple(table.pop("letters", ("a", "b")))
    if table:
        raise ValueError(f"unknown scheme keys: {sorted(table)}")
    if name == "fibonacci_jacobi":
        return fibonacci_jacobi(values)
    if name == "period_q_jacobi":
        return period_q_jacobi(values, letters)
    if name == "free_laplacian":
        return free_laplacian(group or lattice(1), block_dim)
    if name == "feinberg_zee":
        return feinberg_zee(group or lattice(1))
    if name == "heisenberg_adjacency":
        return heisenberg_adjacency(values)
    if name == "identity":
        return identity_scheme(group or lattice(1), block_dim)
    if name == "letter_diagonal":
        alph = Alphabet(letters, tuple(float(v) for v in values),
                        max(1.0, *(float(v) for v in values)))
        return letter_diagonal_jacobi(group or lattice(1), alph)
    raise ValueError(f"unknown scheme {name!r}")


# ---------------------------------------------------------------------------
# section export


def section_to_csv(sec: FiniteSection, path) -> None:
    """Dense (row, col, re, im) dump in row-major order."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("row,col,re,im\n")
        mat = sec.matrix
        for i in range(mat.shape[0]):
            for j in range(mat.shape[1]):
                z = mat[i, j]
                fh.write(f"{i},{j},{float(z.real)!r},{float(z.imag)!r}\n")


_FSEC_MAGIC = b"FSEC"


def section_to_binary(sec: FiniteSection, path) -> None:
    """Header: magic FSEC, u32 matrix size, u32 block dim; body: row-major
    interleaved (re, im) little-endian float64."""
    mat = sec.matrix
    with open(path, "wb") as fh:
        fh.write(_FSEC_MAGIC)
        fh.write(struct.pack("<II", mat.shape[0], _block_dim_of(sec)))
        interleaved = np.empty(mat.size * 2, dtype="<f8")
        interleaved[0::2] = mat.real.ravel()
        interleaved[1::2] = mat.imag.ravel()
        fh.write(interleaved.tobytes())


def _block_dim_of(sec: FiniteSection) -> int:
    return sec.matrix.shape[0] // len(sec.window)


def section_from_binary(path) -> tuple[np.ndarray, int]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _FSEC_MAGIC:
            raise ValueError("not a finite-section dump")
        size, block_dim = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<f8")
    mat = (data[0::2] + 1j * data[1::2]).reshape(size, size)
    return mat, block_dim
