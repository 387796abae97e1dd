import math

import numpy as np
import pytest

from hullspec.dynamics import (
    ExplicitConfiguration,
    binary_alphabet,
    periodic_word,
    shift,
)
from hullspec.groups import (
    GroupError,
    ResourceBudgetError,
    ball,
    box,
    centered_interval,
    lattice,
    ray_sequence,
)
from hullspec.operators import (
    approximate_limit_operator,
    diagonal_letter_scheme,
    feinberg_zee,
    fibonacci_jacobi,
    free_laplacian,
    identity_scheme,
    norm_upper_bound,
    period_q_jacobi,
    section,
)
from hullspec.spectra import (
    GridSpec,
    SigmaMinSolver,
    constancy_report,
    directed_hausdorff,
    eigenvalue_residuals,
    eigenvalues,
    floquet_oracle,
    grid_to_csv,
    hausdorff_distance,
    inclusion_check,
    persistent_points,
    persistent_spectrum,
    pseudospectrum_grid,
    smallest_singular_value,
    spectrum_to_csv,
)

Z = lattice(1)


@pytest.fixture(scope="module")
def all_a():
    return periodic_word(binary_alphabet(), "a")


@pytest.fixture(scope="module")
def period2():
    return periodic_word(binary_alphabet(), "ab")


class TestEigenvalues:
    def test_periodic_laplacian_box4(self, all_a):
        sec = section(free_laplacian(Z), all_a, box(Z, [(0, 3)]), "periodic")
        got = sorted(eigenvalues(sec).points.real)
        # circulant formula: 2 cos(2 pi j / 4)
        assert np.allclose(got, [-2.0, 0.0, 0.0, 2.0], atol=1e-12)

    def test_zero_matrix(self, all_a):
        sec = section(diagonal_letter_scheme(Z, binary_alphabet()), all_a, box(Z, [(0, 2)]))
        assert np.array_equal(sec.matrix, np.zeros((3, 3), complex))
        assert list(eigenvalues(sec).points) == [0.0, 0.0, 0.0]

    def test_diagonal_period2(self, period2):
        sec = section(diagonal_letter_scheme(Z, binary_alphabet()), period2, box(Z, [(0, 3)]))
        assert sorted(eigenvalues(sec).points.real) == [0.0, 0.0, 1.0, 1.0]

    def test_multiplicity_count(self, period2):
        sec = section(fibonacci_jacobi(), period2, centered_interval(Z, 55))
        sample = eigenvalues(sec)
        assert len(sample.points) == 55

    def test_size_budget(self, all_a):
        sec = section(free_laplacian(Z), all_a, box(Z, [(0, 500)]))
        with pytest.raises(ResourceBudgetError):
            eigenvalues(sec, max_size=100)

    def test_residual_contract(self, pm1_hull, fib_fixed_point):
        # backward stability: residuals dominate sigma_min(lambda I - M)
        fz_cfg = ExplicitConfiguration(Z, pm1_hull.alphabet, 42)
        cases = [
            section(feinberg_zee(), fz_cfg, centered_interval(Z, 200)),
            section(fibonacci_jacobi(), fib_fixed_point, centered_interval(Z, 233)),
        ]
        for sec in cases:
            scale = max(1.0, np.linalg.norm(sec.matrix, 2))
            res = eigenvalue_residuals(sec)
            assert res.max() <= 1e-8 * scale


class TestFloquet:
    def test_q1_band(self, all_a):
        sample = floquet_oracle(free_laplacian(Z), all_a, 128)
        assert np.all(np.abs(sample.points.imag) < 1e-12)
        assert np.all(np.abs(sample.points.real) <= 2.0 + 1e-12)

    def test_q2_symbol_by_hand(self, period2):
        # [[0, 1+e^{-it}], [1+e^{it}, 1]] at t = pi has eigenvalues {0, 1}
        scheme = period_q_jacobi((0.0, 1.0))
        sample = floquet_oracle(scheme, period2, 2)
        at_pi = sorted(p.real for p in sample.points if True)
        assert any(abs(p) < 1e-12 for p in sample.points)
        assert any(abs(p - 1.0) < 1e-12 for p in sample.points)

    def test_theta_one_equals_periodic_section(self, period2):
        scheme = period_q_jacobi((0.0, 1.0))
        oracle = floquet_oracle(scheme, period2, 1)
        sec = eigenvalues(section(scheme, period2, box(Z, [(0, 1)]), "periodic"))
        assert hausdorff_distance(oracle, sec) < 1e-12

    @pytest.mark.parametrize("word", ["a", "ab", "abb", "abab", "aabab", "aababb"])
    def test_oracle_equivalence_up_to_q6(self, word):
        scheme = period_q_jacobi((0.0, 1.0))
        cfg = periodic_word(binary_alphabet(), word)
        q = len(word)
        for m in (2, 3):
            sec = eigenvalues(section(scheme, cfg, box(Z, [(0, m * q - 1)]), "periodic"))
            oracle = floquet_oracle(scheme, cfg, m)
            assert directed_hausdorff(sec, oracle) < 1e-8

    def test_requires_periodic(self, pm1_hull):
        cfg = ExplicitConfiguration(Z, pm1_hull.alphabet, 1)
        with pytest.raises(GroupError):
            floquet_oracle(feinberg_zee(), cfg, 4)


class TestSigmaMin:
    def test_identity(self):
        assert smallest_singular_value(np.eye(5)) == 1.0

    def test_diagonal(self):
        assert smallest_singular_value(np.diag([3.0, 1.0, 0.5])) == 0.5

    def test_shifted_jordan_block(self):
        # Gram matrix of I - J is [[1,-1],[-1,2]]; its eigenvalues are
        # (3 +- sqrt 5)/2, so sigma_min = sqrt((3 - sqrt 5)/2)
        J = np.array([[0, 1], [0, 0]], dtype=complex)
        expected = math.sqrt((3 - math.sqrt(5)) / 2)
        assert smallest_singular_value(np.eye(2) - J) == pytest.approx(expected, abs=1e-14)

    def test_square_required(self):
        with pytest.raises(ValueError):
            smallest_singular_value(np.ones((2, 3)))

    def test_solver_cross_check_small(self, pm1_hull):
        # iterative engine against the full decomposition on sizes <= 200
        rng = np.random.default_rng(7)
        cfg = ExplicitConfiguration(Z, pm1_hull.alphabet, 42)
        for size, strategy in ((120, "banded"), (120, "schur"), (48, "direct")):
            sec = section(feinberg_zee(), cfg, centered_interval(Z, size))
            solver = SigmaMinSolver(sec.matrix, strategy=strategy)
            for _ in range(12):
                lam = complex(rng.uniform(-2.5, 2.5), rng.uniform(-2.5, 2.5))
                ref = smallest_singular_value(lam * np.eye(size) - sec.matrix)
                assert solver.sigma_min(lam) == pytest.approx(ref, rel=1e-8, abs=1e-12)

    def test_singular_node_returns_zero(self, all_a):
        sec = section(identity_scheme(Z), all_a, box(Z, [(0, 99)]))
        solver = SigmaMinSolver(sec.matrix)
        assert solver.sigma_min(1.0 + 0.0j) == 0.0


class TestPseudospectrumGrid:
    def test_identity_scheme_distance(self, all_a):
        grid = GridSpec((0.0, 2.0, -1.0, 1.0), (21, 21))
        psg = pseudospectrum_grid(
            identity_scheme(Z), all_a, centered_interval(Z, 40), "truncate", grid
        )
        res, ims = grid.axes()
        expected = np.abs(res[None, :] + 1j * ims[:, None] - 1.0)
        assert np.abs(psg.sigma_min - expected).max() < 1e-10

    def test_eigenvalue_nodes_vanish(self, all_a):
        # periodic box of 4: eigenvalues {2, 0, 0, -2} lie on grid nodes
        grid = GridSpec((-2.0, 2.0, 0.0, 0.0), (3, 1))
        psg = pseudospectrum_grid(
            free_laplacian(Z), all_a, box(Z, [(0, 3)]), "periodic", grid
        )
        assert psg.sigma_min.max() <= 1e-8

    def test_neumann_far_field_bound(self, pm1_hull):
        cfg = ExplicitConfiguration(Z, pm1_hull.alphabet, 42)
        fz = feinberg_zee()
        sec_win = centered_interval(Z, 120)
        grid = GridSpec((3.0, 3.0, 0.0, 0.0), (1, 1))
        psg = pseudospectrum_grid(fz, cfg, sec_win, "truncate", grid)
        assert psg.sigma_min[0, 0] >= abs(3.0) - norm_upper_bound(fz)

    def test_budget_error_suggests_resolution(self, all_a):
        grid = GridSpec((-1, 1, -1, 1), (4000, 4000))
        with pytest.raises(ResourceBudgetError, match="resolution"):
            pseudospectrum_grid(
                free_laplacian(Z), all_a, centered_interval(Z, 64), "truncate", grid
            )

    def test_thread_determinism(self, pm1_hull):
        cfg = ExplicitConfiguration(Z, pm1_hull.alphabet, 3)
        grid = GridSpec((-2.0, 2.0, -1.0, 1.0), (12, 10))
        win = centered_interval(Z, 90)
        a = pseudospectrum_grid(feinberg_zee(), cfg, win, "truncate", grid, threads=1)
        b = pseudospectrum_grid(feinberg_zee(), cfg, win, "truncate", grid, threads=4)
        assert np.array_equal(a.sigma_min, b.sigma_min)

    def test_resolvent_clamp(self, all_a):
        grid = GridSpec((1.0, 1.0, 0.0, 0.0), (1, 1))
        psg = pseudospectrum_grid(
            identity_scheme(Z), all_a, centered_interval(Z, 30), "truncate", grid
        )
        norms, clamped = psg.resolvent_norms()
        assert norms[0, 0] == 1e16 and bool(clamped[0, 0])

    def test_normality_law(self, fib_fixed_point):
        # real symmetric sections: sigma_min(lambda I - M) equals the
        # distance from lambda to the spectrum
        sec = section(fibonacci_jacobi(), fib_fixed_point, centered_interval(Z, 89))
        eigs = eigenvalues(sec).points
        rng = np.random.default_rng(11)
        for _ in range(200):
            lam = complex(rng.uniform(-2, 3), rng.uniform(-2, 2))
            sigma = smallest_singular_value(lam * np.eye(89) - sec.matrix)
            dist = np.abs(eigs - lam).min()
            assert abs(sigma - dist) <= 1e-8

    def test_monotone_grids_valid_direction(self, fib_fixed_point):
        # sigma_min on the small window >= sigma_min on the larger window
        # minus the norm of the discarded coupling block
        fj = fibonacci_jacobi()
        small = centered_interval(Z, 40)
        large = centered_interval(Z, 60)
        sec_small = section(fj, fib_fixed_point, small)
        sec_large = section(fj, fib_fixed_point, large)
        inner = [large.position(g) for g in small.elements]
        outer = [i for i in range(60) if i not in set(inner)]
        coupling = max(
            np.linalg.norm(sec_large.matrix[np.ix_(inner, outer)], 2),
            np.linalg.norm(sec_large.matrix[np.ix_(outer, inner)], 2),
        )
        rng = np.random.default_rng(2)
        for _ in range(20):
            lam = complex(rng.uniform(-2, 3), rng.uniform(-1, 1))
            s_small = smallest_singular_value(lam * np.eye(40) - sec_small.matrix)
            s_large = smallest_singular_value(lam * np.eye(60) - sec_large.matrix)
            assert s_small >= s_large - coupling - 1e-12


class TestHausdorff:
    def test_identical(self):
        pts = np.array([1 + 1j, 2.0, -1j])
        assert hausdorff_distance(pts, pts) == 0.0

    def test_three_four_five(self):
        assert hausdorff_distance(np.array([0j]), np.array([3 + 4j])) == 5.0

    def test_asymmetric_point(self):
        p = np.array([0j, 1 + 0j])
        q = np.array([0j, 1 + 0j, 1.1 + 0j])
        assert hausdorff_distance(p, q) == pytest.approx(0.1, abs=1e-15)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            hausdorff_distance(np.array([]), np.array([1j]))

    def test_persistence_filter(self):
        pts = np.array([0j, 1.0 + 0j, 5.0 + 0j])
        ref = np.array([0.001 + 0j, 1.002 + 0j])
        kept = persistent_points(pts, ref, 0.01)
        assert list(kept) == [0j, 1.0 + 0j]


class TestConstancyReport:
    def test_periodic_hull_distances_vanish(self):
        from hullspec.dynamics import period_q_hull

        hull = period_q_hull("ab")
        scheme = period_q_jacobi((0.0, 1.0))
        configs = hull.orbit_points()
        report = constancy_report(
            scheme, hull, configs, [8, 12], boundary="periodic",
            tolerance=1e-10, hypothesis=("minimal", 2, 12),
        )
        assert report.hypothesis_verified
        assert report.passed
        for dists in report.pair_distances.values():
            assert max(dists) <= 1e-12  # cyclic-permutation similar sections

    def test_hypothesis_unverified_still_produced(self, pm1_hull):
        configs = [
            ExplicitConfiguration(Z, pm1_hull.alphabet, 1),
            ExplicitConfiguration(Z, pm1_hull.alphabet, 2),
        ]
        report = constancy_report(
            feinberg_zee(), pm1_hull, configs, [40, 60],
            hypothesis=("pseudoergodic", 9, 40),  # hopeless level
        )
        assert not report.hypothesis_verified
        assert report.pair_distances  # report still carries the data

    def test_needs_two_configs(self, pm1_hull):
        with pytest.raises(ValueError):
            constancy_report(feinberg_zee(), pm1_hull,
                             [ExplicitConfiguration(Z, pm1_hull.alphabet, 1)], [20])


class TestInclusion:
    def test_periodic_translates_exact_zero(self):
        scheme = period_q_jacobi((0.0, 1.0))
        cfg = periodic_word(binary_alphabet(), "ab")
        seqs = [ray_sequence(Z, (2,), 5)]
        probes = [approximate_limit_operator(scheme, cfg, s, 6) for s in seqs]
        report = inclusion_check(
            scheme, cfg, probes, ball(Z, 6), tol=1e-12, persist_delta=None
        )
        assert report.max_distance == 0.0
        assert report.all_consistent

    def test_unstabilized_probe_rejected(self, pm1_hull):
        cfg = ExplicitConfiguration(Z, pm1_hull.alphabet, 5)
        seq = ray_sequence(Z, (1,), 4, stride=11)
        probe = approximate_limit_operator(feinberg_zee(), cfg, seq, 3)
        assert not probe.stabilized
        with pytest.raises(ValueError, match="stabilized"):
            inclusion_check(feinberg_zee(), cfg, [probe], ball(Z, 8), tol=0.1)


class TestExports:
    def test_spectrum_csv_sorted_and_stable(self, tmp_path, period2):
        sec = section(fibonacci_jacobi(), period2, centered_interval(Z, 34))
        sample = eigenvalues(sec)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        spectrum_to_csv(sample, p1)
        spectrum_to_csv(eigenvalues(sec), p2)
        assert p1.read_bytes() == p2.read_bytes()
        lines = p1.read_text().splitlines()
        assert lines[0] == "re,im"
        res = [float(line.split(",")[0]) for line in lines[1:]]
        assert res == sorted(res)

    def test_grid_csv_layout(self, tmp_path, all_a):
        grid = GridSpec((0.0, 1.0, -0.5, 0.5), (3, 2))
        psg = pseudospectrum_grid(
            identity_scheme(Z), all_a, centered_interval(Z, 20), "truncate", grid
        )
        path = tmp_path / "grid.csv"
        grid_to_csv(psg, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "re,im,sigma_min"
        assert len(lines) == 1 + 6
        first = lines[1].split(",")
        assert float(first[0]) == 0.0 and float(first[1]) == -0.5


class TestHalfplaneInclusion:
    def test_dirichlet_product_cosine_oracle(self):
        # the constant-a limit operator is the plain Z^2 hopping operator;
        # its truncate box section separates, with eigenvalues
        # 2 cos(pi j/(L+1)) + 2 cos(pi k/(L+1))
        from hullspec.dynamics import halfplane_ab_hull, periodic_word
        from hullspec.groups import lattice
        from hullspec.operators import letter_diagonal_jacobi

        z2 = lattice(2)
        hull = halfplane_ab_hull()
        scheme = letter_diagonal_jacobi(z2, hull.alphabet)
        from hullspec.dynamics import ThresholdConfiguration

        all_a = ThresholdConfiguration(z2, hull.alphabet, threshold=-10**6)
        L = 9
        win = box(z2, [(0, L - 1), (0, L - 1)])
        got = np.sort(eigenvalues(section(scheme, all_a, win)).points.real)
        js = np.arange(1, L + 1)
        expected = np.sort(
            (2 * np.cos(np.pi * js / (L + 1))[:, None]
             + 2 * np.cos(np.pi * js / (L + 1))[None, :]).ravel()
        )
        assert np.abs(got - expected).max() < 1e-8

    def test_constant_limit_spectrum_inside_glued_operator(self, tolerances):
        from hullspec.cli import measure_halfplane_inclusion

        report = measure_halfplane_inclusion()
        threshold = tolerances["halfplane_inclusion"]["threshold"]
        assert report.max_distance <= threshold
        assert report.probe_count >= 1


class TestPersistentSpectrum:
    def test_keeps_bulk_of_large_windows(self, fib_fixed_point):
        fj = fibonacci_jacobi()
        pts = persistent_spectrum(fj, fib_fixed_point, centered_interval(Z, 233))
        assert 150 <= len(pts) <= 233

    def test_needs_box_window(self, fib_fixed_point):
        with pytest.raises(GroupError):
            persistent_spectrum(fibonacci_jacobi(), fib_fixed_point, ball(Z, 10))
