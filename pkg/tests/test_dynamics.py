import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hullspec.dynamics import (
    Alphabet,
    ExplicitConfiguration,
    ExtendPrefixError,
    PatchedConfiguration,
    Pattern,
    binary_alphabet,
    certify_minimal,
    certify_pseudoergodic,
    configuration_from_json,
    configuration_to_json,
    evaluate,
    fibonacci_hull,
    fibonacci_substitution,
    full_pm1_hull,
    halfplane_ab_hull,
    hull_from_json,
    hull_to_json,
    metric_distance,
    pattern_of,
    period_q_hull,
    periodic_word,
    pm1_alphabet,
    read_word,
    restrict,
    sample_limit_set,
    shift,
    thue_morse_hull,
    thue_morse_substitution,
)
from hullspec.groups import (
    GroupError,
    ball,
    box,
    heisenberg,
    lattice,
    ray_sequence,
    shell_count,
)

Z = lattice(1)
Z2 = lattice(2)
H3 = heisenberg()


def thue_morse_oracle(n: int) -> str:
    """Independent: the parity of binary ones decides the letter."""
    return "a" if bin(n).count("1") % 2 == 0 else "b"


def sturmian_oracle(n: int) -> str:
    """Independent mechanical-word description of the Fibonacci word.

    Uses an exact rational convergent of 1/golden-ratio; floors are computed
    in integer arithmetic, and the approximation error cannot cross an
    integer boundary at these positions.
    """
    fibs = [1, 1]
    while len(fibs) < 62:
        fibs.append(fibs[-1] + fibs[-2])
    tau = Fraction(fibs[59], fibs[60])
    step = math.floor((n + 2) * tau) - math.floor((n + 1) * tau)
    return "a" if step == 1 else "b"


class TestAlphabet:
    def test_validation(self):
        with pytest.raises(ValueError):
            Alphabet(("a", "a"), (0.0, 1.0))
        with pytest.raises(ValueError):
            Alphabet(("a", "b"), (0.0, 2.0), value_cap=1.0)
        with pytest.raises(ValueError):
            Alphabet(("a", "b"), (0.0,))

    def test_lookup(self):
        alph = binary_alphabet(values=(0.0, 0.5))
        assert alph.index("b") == 1
        assert alph.value(1) == 0.5


class TestSubstitutions:
    def test_fibonacci_fixed_point_prefix(self, fib_fixed_point):
        word = "".join(evaluate(fib_fixed_point, Z.element((k,))) for k in range(8))
        assert word == "abaababa"

    def test_fixed_point_matches_mechanical_oracle(self, fib_fixed_point):
        for n in range(0, 300):
            assert evaluate(fib_fixed_point, Z.element((n,))) == sturmian_oracle(n)

    def test_fixed_point_reproduced_by_substitution(self, fib_fixed_point):
        # applying sigma^p to the window word regenerates the configuration
        sub = fib_fixed_point.substitution
        p = fib_fixed_point.power
        right = read_word(fib_fixed_point, 0, 30)
        expanded = sub.apply_power(right, p)
        assert expanded[: len(right)][: 30] == read_word(fib_fixed_point, 0, 30)

    def test_thue_morse_against_popcount(self):
        hull = thue_morse_hull()
        fp = hull.fixed_point("a")
        for n in range(0, 256):
            assert evaluate(fp, Z.element((n,))) == thue_morse_oracle(n)

    def test_fibonacci_incidence_and_primitivity(self):
        sub = fibonacci_substitution()
        assert sub.incidence_matrix() == ((1, 1), (1, 0))
        power, matrix = sub.primitivity_witness()
        assert power == 2
        assert matrix == ((2, 1), (1, 1))

    def test_thue_morse_primitive_at_one(self):
        assert thue_morse_substitution().primitivity_witness()[0] == 1

    def test_factor_counts_fibonacci(self, fib_hull):
        for n in range(1, 9):
            assert len(fib_hull.language(n)) == n + 1

    def test_factor_counts_thue_morse(self):
        # independent enumeration over a long popcount-generated prefix
        hull = thue_morse_hull()
        text = "".join(thue_morse_oracle(n) for n in range(4096))
        for n in range(1, 9):
            brute = {text[i : i + n] for i in range(len(text) - n)}
            mine = {
                "".join(hull.alphabet.letters[i] for i in w)
                for w in hull.language(n)
            }
            assert mine == brute


class TestConfigurations:
    def test_periodic_evaluation(self):
        cfg = periodic_word(binary_alphabet(), "ab")
        assert evaluate(cfg, Z.element((7,))) == "b"
        for k in range(-6, 6):
            assert evaluate(cfg, Z.element((k,))) == evaluate(cfg, Z.element((k + 2,)))

    def test_patched_override(self):
        base = periodic_word(binary_alphabet(), "a")
        patched = PatchedConfiguration(base, {Z.element((0,)): "b"})
        assert evaluate(patched, Z.element((0,))) == "b"
        assert evaluate(patched, Z.element((1,))) == "a"

    def test_explicit_deterministic_and_total(self, pm1_hull):
        a = ExplicitConfiguration(Z, pm1_hull.alphabet, 42)
        b = ExplicitConfiguration(Z, pm1_hull.alphabet, 42)
        assert read_word(a, -50, 100) == read_word(b, -50, 100)
        c = ExplicitConfiguration(Z, pm1_hull.alphabet, 43)
        assert read_word(a, -50, 100) != read_word(c, -50, 100)

    def test_explicit_prefix_bound(self, pm1_hull):
        cfg = ExplicitConfiguration(Z, pm1_hull.alphabet, 7, max_radius=5)
        assert evaluate(cfg, Z.element((5,))) in ("-1", "1")
        with pytest.raises(ExtendPrefixError) as err:
            evaluate(cfg, Z.element((9,)))
        assert err.value.needed_radius == 9

    def test_shift_flattens_to_action_law(self, fib_fixed_point):
        g, h = Z.element((3,)), Z.element((-5,))
        lhs = shift(shift(fib_fixed_point, g), h)
        rhs = shift(fib_fixed_point, Z.element((-2,)))
        for k in range(-10, 10):
            assert lhs.letter_index(Z.element((k,))) == rhs.letter_index(Z.element((k,)))

    def test_shift_by_identity_is_same_object(self, fib_fixed_point):
        assert shift(fib_fixed_point, Z.identity()) is fib_fixed_point

    def test_period2_shift_flips_origin(self):
        cfg = periodic_word(binary_alphabet(), "ab")
        assert evaluate(cfg, Z.element((0,))) == "a"
        assert evaluate(shift(cfg, Z.element((1,))), Z.element((0,))) == "b"

    @given(st.tuples(*[st.integers(-4, 4)] * 3), st.tuples(*[st.integers(-4, 4)] * 3))
    @settings(max_examples=40, deadline=None)
    def test_action_law_heisenberg(self, gc, hc):
        alph = binary_alphabet()
        cfg = ExplicitConfiguration(H3, alph, 11)
        g, h = H3.element(gc), H3.element(hc)
        from hullspec.groups import compose

        lhs = shift(shift(cfg, g), h)
        rhs = shift(cfg, compose(h, g))
        for u in ball(H3, 2).elements:
            assert lhs.letter_index(u) == rhs.letter_index(u)


class TestMetric:
    def test_equal_configurations(self):
        cfg = periodic_word(binary_alphabet(), "ab")
        value, tail = metric_distance(cfg, cfg, 8)
        assert value == 0.0 and tail > 0.0

    def test_single_difference_at_origin(self):
        base = periodic_word(binary_alphabet(), "a")
        other = PatchedConfiguration(base, {Z.element((0,)): "b"})
        value, _ = metric_distance(base, other, 8)
        assert value == 1.0

    def test_gap_half_at_three(self):
        alph = Alphabet(("a", "b"), (0.0, 0.5), 1.0)
        base = periodic_word(alph, "a")
        other = PatchedConfiguration(base, {Z.element((3,)): "b"})
        value, _ = metric_distance(base, other, 8)
        assert value == pytest.approx(0.0625, abs=1e-15)

    def test_tail_bound_dominates_true_remainder(self):
        # all-a vs all-b: every term contributes 2^(-|k|), so the full series
        # is 3 on Z and the truncation remainder is computable exactly
        pa = periodic_word(binary_alphabet(), "a")
        pb = periodic_word(binary_alphabet(), "b")
        for m in (2, 4, 8, 16):
            value, tail = metric_distance(pa, pb, m)
            remainder = 3.0 - value
            assert tail >= remainder > 0.0

    def test_tail_bound_within_documented_growth_factor(self):
        pa2 = periodic_word(binary_alphabet(), "a")
        pb2 = periodic_word(binary_alphabet(), "b")
        for n, hull_group in ((1, Z), (2, Z2)):
            if n == 2:
                alph = binary_alphabet()
                table_a = {(i, j): 0 for i in range(1) for j in range(1)}
                from hullspec.dynamics import PeriodicConfiguration

                pa2 = PeriodicConfiguration(Z2, alph, (1, 1), table_a)
                pb2 = PeriodicConfiguration(Z2, alph, (1, 1), {(0, 0): 1})
            for m in (3, 6):
                _, tail = metric_distance(pa2, pb2, m)
                ball_size = sum(shell_count(n, j) for j in range(m + 2))
                assert tail <= ball_size * 2.0 ** (-(m + 1)) * 1.0 * 8

    def test_heisenberg_unsupported(self):
        alph = binary_alphabet()
        cfg = ExplicitConfiguration(H3, alph, 1)
        with pytest.raises(GroupError):
            metric_distance(cfg, cfg, 3)


class TestLegalPatterns:
    def test_full_shift_counts(self, pm1_hull):
        window = box(Z, [(0, 2)])
        assert len(pm1_hull.legal_patterns(window)) == 8

    def test_fibonacci_two_factors(self, fib_hull):
        pats = fib_hull.legal_patterns(box(Z, [(0, 1)]))
        words = {
            tuple(fib_hull.alphabet.letters[i] for i in p.letters) for p in pats
        }
        assert words == {("a", "b"), ("b", "a"), ("a", "a")}

    def test_fibonacci_window_with_hole(self, fib_hull):
        window = box(Z, [(0, 2)])
        hole = type(window)(Z, (window.elements[0], window.elements[2]), ("box", ((0, 2),)))
        # restriction of every legal pattern must be legal (sub-pattern closure)
        for pat in fib_hull.legal_patterns(window):
            sub = restrict(pat, hole)
            assert fib_hull.is_legal(sub)

    def test_shift_consistency(self, fib_hull):
        from hullspec.groups import translate

        w = box(Z, [(0, 3)])
        t = translate(w, Z.element((5,)))
        base = {p.letters for p in fib_hull.legal_patterns(w)}
        moved = {p.letters for p in fib_hull.legal_patterns(t)}
        assert base == moved

    def test_periodic_hull_patterns(self):
        hull = period_q_hull("ab")
        assert len(hull.legal_patterns(box(Z, [(0, 3)]))) == 2
        assert len(hull.language(5)) == 2

    def test_halfplane_threshold_patterns(self):
        hull = halfplane_ab_hull()
        w = box(Z2, [(0, 1), (0, 1)])
        pats = hull.legal_patterns(w)
        assert len(pats) == 3  # all-a, all-b, split along the vertical line
        config_pats = set()
        from hullspec.dynamics import ThresholdConfiguration

        for t in (-5, 0, 1, 2, 9):
            cfg = ThresholdConfiguration(Z2, hull.alphabet, threshold=t)
            config_pats.add(pattern_of(cfg, w).letters)
        assert {p.letters for p in pats} == config_pats

    def test_enumeration_budget(self, pm1_hull):
        from hullspec.groups import ResourceBudgetError

        with pytest.raises(ResourceBudgetError):
            pm1_hull.legal_patterns(box(Z, [(0, 40)]))


class TestCertificates:
    def test_periodic_certificates_all_levels(self):
        # every n-pattern recurs with gap 2, so any window of length >= n + 2
        # contains all of them (N = n alone cannot: "ab" does not contain "ba")
        hull = period_q_hull("ab")
        for n in range(1, 6):
            for big in range(n + 2, 13):
                assert certify_minimal(hull, n, big).certified
        assert certify_minimal(hull, 2, 2).status == "refuted"

    def test_fibonacci_certified_with_primitivity(self, fib_hull):
        cert = certify_minimal(fib_hull, 6, 200)
        assert cert.certified
        assert cert.primitivity == (2, ((2, 1), (1, 1)))
        assert cert.recurrence_radius == 206

    def test_full_shift_refuted(self, pm1_hull):
        cert = certify_minimal(pm1_hull, 1, 3)
        assert cert.status == "refuted"
        assert cert.witness_word in {(0, 0, 0), (1, 1, 1)}
        assert len(cert.missing_word) == 1

    def test_fibonacci_pseudoergodic(self, fib_hull, fib_fixed_point):
        cert = certify_pseudoergodic(fib_fixed_point, fib_hull, 6, 200)
        assert cert.certified
        assert len(cert.occurrences) == 7
        for _, pos in cert.occurrences:
            assert abs(pos) >= 6

    def test_constant_refuted_definitely(self, pm1_hull):
        constant = periodic_word(pm1_hull.alphabet, "1")
        cert = certify_pseudoergodic(constant, pm1_hull, 1, 50)
        assert cert.status == "refuted"
        assert cert.missing == ((0,),)

    def test_bounded_search_is_inconclusive_for_aperiodic(self, pm1_hull):
        cfg = ExplicitConfiguration(Z, pm1_hull.alphabet, 5)
        cert = certify_pseudoergodic(cfg, pm1_hull, 12, 30)  # hopeless radius
        assert cert.status == "inconclusive"

    def test_seed_42_certificate(self, pm1_hull):
        cfg = ExplicitConfiguration(Z, pm1_hull.alphabet, 42)
        cert = certify_pseudoergodic(cfg, pm1_hull, 3, 1000)
        assert cert.certified and len(cert.occurrences) == 8

    def test_minimality_implies_pseudoergodicity_chain(self, fib_hull, fib_fixed_point):
        cert = certify_minimal(fib_hull, 4, 60)
        assert cert.certified
        radius = cert.recurrence_radius
        for k in (0, 2, 7, 20, 55):
            point = shift(fib_fixed_point, Z.element((k,)))
            assert certify_pseudoergodic(point, fib_hull, 4, radius).certified

    def test_fixed_point_certifies_many_levels(self, fib_hull, fib_fixed_point):
        for n in (2, 4, 6):
            assert certify_pseudoergodic(fib_fixed_point, fib_hull, n, 300).certified


class TestLimitSets:
    def test_periodic_even_escape(self):
        cfg = periodic_word(binary_alphabet(), "ab")
        window = box(Z, [(0, 3)])
        even = ray_sequence(Z, (1,), 6, stride=2)
        sample = sample_limit_set(cfg, window, [even])
        probe = sample.probes[0]
        assert probe.stabilized and probe.pattern == pattern_of(cfg, window)

    def test_periodic_odd_escape(self):
        cfg = periodic_word(binary_alphabet(), "ab")
        window = box(Z, [(0, 3)])
        odd = ray_sequence(Z, (1,), 6, stride=2, offset=(1,))
        sample = sample_limit_set(cfg, window, [odd])
        shifted = pattern_of(shift(cfg, Z.element((1,))), window)
        assert sample.probes[0].pattern == shifted

    def test_halfplane_directional_limits(self):
        from hullspec.dynamics import ThresholdConfiguration

        hull = halfplane_ab_hull()
        cfg = ThresholdConfiguration(Z2, hull.alphabet)
        window = ball(Z2, 2)
        east = ray_sequence(Z2, (1, 0), 6, stride=3, claimed_direction=(1.0, 0.0))
        west = ray_sequence(Z2, (-1, 0), 6, stride=3, claimed_direction=(-1.0, 0.0))
        sample = sample_limit_set(cfg, window, [east, west], hull=hull)
        a, b = hull.alphabet.index("a"), hull.alphabet.index("b")
        directions = sample.directional_patterns()
        assert directions[(1.0, 0.0)][0].letters == (a,) * len(window)
        assert directions[(-1.0, 0.0)][0].letters == (b,) * len(window)

    def test_probe_patterns_remain_legal_under_generator_translation(
        self, fib_hull, fib_fixed_point
    ):
        # finite-level shadow of shift invariance of the limit set
        from hullspec.groups import fibonacci_shift_sequence, translate

        window = box(Z, [(-4, 4)])
        seq = fibonacci_shift_sequence(count=6)
        sample = sample_limit_set(fib_fixed_point, window, [seq], hull=fib_hull)
        probe = sample.probes[0]
        assert probe.stabilized
        last = shift(fib_fixed_point, seq.terms[-1])
        for gen in Z.generators:
            moved = pattern_of(last, translate(window, gen))
            assert fib_hull.is_legal(moved)

    def test_unstabilized_reported(self, pm1_hull):
        cfg = ExplicitConfiguration(Z, pm1_hull.alphabet, 9)
        window = box(Z, [(-2, 2)])
        seq = ray_sequence(Z, (1,), 4, stride=17)
        sample = sample_limit_set(cfg, window, [seq])
        assert not sample.probes[0].stabilized


class TestSerializationDynamics:
    def test_hull_round_trips(self):
        for hull in (
            fibonacci_hull(), thue_morse_hull(), period_q_hull("ab"),
            full_pm1_hull(), halfplane_ab_hull(),
        ):
            data = json.loads(json.dumps(hull_to_json(hull)))
            again = hull_from_json(data)
            assert again.name == hull.name
            assert again.alphabet.letters == hull.alphabet.letters

    def test_configuration_round_trips(self, fib_hull):
        specs = [
            {"config": {"rule": "fixed_point", "seed_letter": "a", "shift": 3}},
            {"config": {"rule": "periodic", "word": "ab"}},
            {"config": {"rule": "explicit", "seed": 42}},
        ]
        for spec in specs:
            cfg = configuration_from_json(fib_hull, spec)
            again = configuration_from_json(fib_hull, configuration_to_json(cfg))
            for k in range(-8, 8):
                assert cfg.letter_index(Z.element((k,))) == again.letter_index(Z.element((k,)))

    def test_catalog_names(self):
        assert hull_from_json({"hull": "fibonacci"}).name == "fibonacci"
        assert hull_from_json({"hull": "full_pm1"}).alphabet.letters == ("-1", "1")
        cfg = configuration_from_json(
            full_pm1_hull(), {"config": {"rule": "explicit", "seed": 42}}
        )
        assert cfg.seed == 42
