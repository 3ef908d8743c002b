import numpy as np
import pytest

from pbnc import errors
from pbnc.coeff_systems import car_jordan_wigner
from pbnc.hankel import LacunarySpec, MultiplierSeq, build_hankel, lacunary_default
from pbnc.martingale import (
    MartingaleConfig,
    block_modulus_sup,
    conditional_multiplicativity_check,
    eta_modulus,
    eta_modulus_sup,
    eta_weights,
    fourier_extract,
    hankel_bridge_check,
    mobius,
    multiplier_extract,
    orthogonality_check,
    radial_mean_check,
    radius,
    simulate_paths,
    stderr_halving_ratios,
)
from pbnc.numkit import Polynomial


def _rng(seed):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed))


def _paths(L=5, n=40_000, seed=3):
    return simulate_paths(MartingaleConfig(L=L, n_samples=n, seed=seed))


@pytest.fixture(scope="module")
def paths():
    return _paths()


class TestConfig:
    def test_radius(self):
        assert radius(1) == 0.5 and radius(3) == 0.875

    def test_radii_autofill(self):
        cfg = MartingaleConfig(L=3, n_samples=10)
        assert cfg.radii == (0.5, 0.75, 0.875)

    def test_radii_validated(self):
        with pytest.raises(errors.ConfigurationError):
            MartingaleConfig(L=2, n_samples=10, radii=(0.5, 0.7))
        MartingaleConfig(L=2, n_samples=10, radii=(0.5, 0.75))

    def test_basic_validation(self):
        with pytest.raises(errors.ConfigurationError):
            MartingaleConfig(L=0)
        with pytest.raises(errors.ConfigurationError):
            MartingaleConfig(L=2, n_samples=0)


class TestMobius:
    def test_fixes_circle(self):
        rng = _rng(1)
        z = 0.3 - 0.4j
        zeta = np.exp(1j * rng.uniform(0, 2 * np.pi, 50))
        assert np.abs(np.abs(mobius(z, zeta)) - 1.0).max() <= 1e-14

    def test_zero_base_is_identity(self):
        assert mobius(0.0, 1j) == pytest.approx(1j)

    def test_domain_errors(self):
        with pytest.raises(errors.DomainError):
            mobius(1.0, 1.0)
        with pytest.raises(errors.DomainError):
            mobius(-0.999999999999999, 1.0 + 0j)  # denominator collapses

    def test_scalar_and_array_forms(self):
        out = mobius(0.2, np.array([1.0 + 0j, -1.0 + 0j]))
        assert out.shape == (2,)
        assert isinstance(mobius(0.2, 1.0 + 0j), complex)


class TestSimulation:
    def test_radial_invariant(self, paths):
        assert paths.max_radial_drift() <= 1e-12
        assert not paths.psi[:, 0].any()

    def test_deterministic(self):
        a = _paths(L=3, n=5000, seed=7)
        b = _paths(L=3, n=5000, seed=7)
        assert np.array_equal(a.Z, b.Z) and np.array_equal(a.psi, b.psi)
        c = _paths(L=3, n=5000, seed=8)
        assert not np.array_equal(a.Z, c.Z)

    def test_block_count_invariance(self):
        # 40000 samples span multiple 16384-blocks; prefix must not depend on total
        a = _paths(L=2, n=40_000, seed=5)
        b = _paths(L=2, n=20_000, seed=5)
        assert np.array_equal(a.Z[:16384], b.Z[:16384])

    def test_uniform_angles(self, paths):
        # psi_k is uniform on its circle: first moment ~ 0
        m = np.abs(paths.psi[:, 2].mean())
        assert m <= 5.0 * radius(2) / np.sqrt(paths.n_samples)


class TestRadialMeans:
    def test_zero_mean_identity(self, paths):
        rng = _rng(11)
        for k in (1, 3, 5):
            f = Polynomial(rng.standard_normal(7) + 1j * rng.standard_normal(7))
            est = radial_mean_check(paths, f, k)
            assert abs(est.mean) <= 4.0 * est.stderr

    def test_constant_poly_exact(self, paths):
        est = radial_mean_check(paths, Polynomial([2.5 + 1j]), 2)
        assert est.mean == 0 and est.stderr == 0

    def test_level_bounds(self, paths):
        with pytest.raises(errors.ConfigurationError):
            radial_mean_check(paths, Polynomial([1.0]), 6)


class TestEtaWeights:
    def test_modulus_closed_form(self):
        # r_2/( (r_2^2 - r_1^2) * k * r_1^{k-1} ) at k = 4
        assert eta_modulus(2, 4) == pytest.approx(0.75 / (0.3125 * 4 * 0.125), rel=1e-14)

    def test_sup_is_peak_at_level_two(self):
        sup = eta_modulus_sup(20)
        assert sup == pytest.approx(4.8, abs=1e-12)
        assert sup == pytest.approx(eta_modulus(2, 4), abs=1e-12)

    def test_limit(self):
        # dyadic weights settle toward e^2/2 from below the level-2 peak
        assert eta_modulus(30, 2**30) == pytest.approx(np.exp(2.0) / 2.0, rel=1e-6)
        with pytest.raises(errors.DomainError):
            eta_modulus_sup(1)

    def test_block_sup(self):
        assert block_modulus_sup(2) >= eta_modulus(2, 4)
        with pytest.raises(errors.DomainError):
            block_modulus_sup(1)

    def test_weights_unimodular_factor(self, paths):
        w = eta_weights(paths, lacunary_default(5), 3)
        assert w.level == 3
        assert np.abs(np.abs(w.values) - w.modulus_bound).max() <= 1e-9

    def test_level_validation(self, paths):
        spec = lacunary_default(5)
        with pytest.raises(errors.ConfigurationError):
            eta_weights(paths, spec, 1)
        with pytest.raises(errors.ConfigurationError):
            eta_weights(paths, spec, 6)
        with pytest.raises(errors.ConfigurationError):
            eta_weights(paths, lacunary_default(2), 3)


class TestFourierExtraction:
    def test_recovers_coefficients(self, paths):
        rng = _rng(13)
        spec = lacunary_default(5)
        f = Polynomial(rng.standard_normal(35) + 1j * rng.standard_normal(35))
        for n in (2, 3, 4, 5):
            est = fourier_extract(paths, f, spec, n)
            target = f.coeffs[spec.K[n - 1]]
            assert abs(est.mean - target) <= 4.0 * est.stderr

    def test_level_one_requires_unit_frequency(self, paths):
        f = Polynomial([0.0, 3.0 - 1j, 0.5])
        with pytest.raises(errors.ConfigurationError):
            fourier_extract(paths, f, lacunary_default(5), 1)
        est = fourier_extract(paths, f, LacunarySpec((1, 4, 8)), 1)
        assert abs(est.mean - (3.0 - 1j)) <= 4.0 * est.stderr

    def test_linearity(self, paths):
        # the estimator is linear in the coefficient vector up to rounding
        spec = lacunary_default(5)
        f = Polynomial([0.0, 1.0, 2.0, 0.0, 1j])
        g = Polynomial([1.0, 0.0, 0.0, 4.0, 0.0, 2.0])
        c = np.zeros(6, dtype=np.complex128)
        c[: f.coeffs.size] += 2.0 * f.coeffs
        c[: g.coeffs.size] += 1j * g.coeffs
        a = fourier_extract(paths, f, spec, 2)
        b = fourier_extract(paths, g, spec, 2)
        combo = fourier_extract(paths, Polynomial(c), spec, 2)
        assert abs(combo.mean - (2.0 * a.mean + 1j * b.mean)) <= 1e-10

    def test_out_of_range_coefficient_is_zero(self, paths):
        spec = lacunary_default(5)
        f = Polynomial([0.0, 1.0, 1.0])  # no frequency-8 coefficient
        est = fourier_extract(paths, f, spec, 3)
        assert abs(est.mean) <= 4.0 * est.stderr


class TestMultiplierExtraction:
    def test_matches_fourier_at_block_top(self, paths):
        spec = lacunary_default(5)
        rng = _rng(14)
        f = Polynomial(rng.standard_normal(20) + 1j * rng.standard_normal(20))
        n = 4
        a = fourier_extract(paths, f, spec, n)
        b = multiplier_extract(paths, f, n, spec.K[n - 1])
        assert a.mean == b.mean and a.stderr == b.stderr

    def test_in_block_frequency(self, paths):
        rng = _rng(15)
        f = Polynomial(rng.standard_normal(9) + 1j * rng.standard_normal(9))
        est = multiplier_extract(paths, f, 3, 6)
        assert abs(est.mean - f.coeffs[6]) <= 4.0 * est.stderr

    def test_block_validation(self, paths):
        f = Polynomial([1.0, 1.0])
        with pytest.raises(errors.ConfigurationError):
            multiplier_extract(paths, f, 3, 4)  # 4 <= 2^{3-1}
        with pytest.raises(errors.ConfigurationError):
            multiplier_extract(paths, f, 3, 9)
        with pytest.raises(errors.ConfigurationError):
            multiplier_extract(paths, f, 1, 1)


class TestOrthogonality:
    def test_vanishes(self, paths):
        rng = _rng(16)
        for n in (2, 4):
            f = Polynomial(rng.standard_normal(6) + 1j * rng.standard_normal(6))
            g = Polynomial(rng.standard_normal(5) + 1j * rng.standard_normal(5))
            est = orthogonality_check(paths, f, g, n)
            assert abs(est.mean) <= 4.0 * est.stderr

    def test_with_predictable_weight(self, paths):
        f = Polynomial([0.0, 1.0, 0.5])
        g = Polynomial([0.0, 2.0])
        est = orthogonality_check(paths, f, g, 3, phi=lambda w: w**2)
        assert abs(est.mean) <= 4.0 * est.stderr


class TestConditionalMultiplicativity:
    def test_binned_identity(self, paths):
        f = Polynomial([0.5, 1.0])
        g = Polynomial([0.0, 1.0, 0.25])
        out = conditional_multiplicativity_check(paths, f, g, 3, bins=32)
        assert out["bins_checked"] > 0
        assert out["max_z"] <= 5.0


class TestBridge:
    def test_exact_side_matches_direct_sum(self, paths):
        spec = LacunarySpec((1, 4, 8))
        system = car_jordan_wigner(3)
        g = build_hankel(MultiplierSeq.indicator(spec), spec, system, D=9)
        rng = _rng(17)
        x = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        y = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        p = Polynomial(rng.standard_normal(12) + 1j * rng.standard_normal(12))
        out = hankel_bridge_check(paths, g, p, x, y, spec)
        direct = sum(
            complex(g.multiplier(kt)) * complex(p.coeffs[kt] if kt <= p.degree else 0.0)
            * complex(y @ (system.elements[t - 1] @ x))
            for t, kt in enumerate(spec.K, start=1)
        )
        assert abs(out["exact"] - direct) <= 1e-10 * max(1.0, abs(direct))

    def test_mc_agrees_with_exact(self, paths):
        spec = LacunarySpec((1, 4, 8))
        system = car_jordan_wigner(3)
        g = build_hankel(MultiplierSeq.indicator(spec), spec, system, D=9)
        rng = _rng(18)
        x = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        y = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        p = Polynomial(rng.standard_normal(10) + 1j * rng.standard_normal(10))
        out = hankel_bridge_check(paths, g, p, x, y, spec)
        assert abs(out["mc"].mean - out["exact"]) <= 4.0 * out["mc"].stderr

    def test_monomial_probe(self, paths):
        spec = LacunarySpec((1, 4, 8))
        system = car_jordan_wigner(3)
        g = build_hankel(MultiplierSeq.indicator(spec), spec, system, D=9)
        x = np.zeros(8, dtype=np.complex128)
        x[0] = 1.0
        y = np.zeros(8, dtype=np.complex128)
        y[1] = 1.0
        out = hankel_bridge_check(paths, g, Polynomial.monomial(4), x, y, spec)
        expected = complex(y @ (system.elements[1] @ x))
        assert abs(out["exact"] - expected) <= 1e-12

    def test_validation(self, paths):
        spec = LacunarySpec((1, 4, 8))
        other = lacunary_default(3)
        system = car_jordan_wigner(3)
        g = build_hankel(MultiplierSeq.indicator(spec), spec, system, D=9)
        x = np.ones(8, dtype=np.complex128)
        with pytest.raises(errors.ConfigurationError):
            hankel_bridge_check(paths, g, Polynomial([1.0]), x, x, other)
        with pytest.raises(errors.DomainError):
            hankel_bridge_check(paths, g, Polynomial.monomial(18), x, x, spec)


class TestStderrScaling:
    def test_halving_ratio_near_sqrt2(self):
        cfg = MartingaleConfig(L=3, n_samples=20_000, seed=2)
        f = Polynomial([0.0, 1.0, 0.5, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0])
        ratios = stderr_halving_ratios(cfg, f, lacunary_default(3), 3, repetitions=6)
        assert len(ratios) == 6
        assert 1.2 <= float(np.mean(ratios)) <= 1.7
