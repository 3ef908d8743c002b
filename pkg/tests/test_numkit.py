import json

import numpy as np
import pytest

from pbnc import errors, numkit
from pbnc.numkit import (
    NormEstimate,
    Polynomial,
    default_grid_points,
    load_cmat,
    op_norm,
    poly_derivative,
    poly_eval,
    poly_of_matrix,
    save_cmat,
    sup_norm,
    toeplitz,
)


def _rng(seed):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed))


def _random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestOpNorm:
    def test_diagonal(self):
        est = op_norm(np.diag([3.0, -4.0, 1.0]))
        assert est.value == pytest.approx(4.0, abs=1e-13)
        assert est.method == "exact-eigensolve"

    def test_matches_svd(self):
        rng = _rng(101)
        for shape in [(5, 5), (3, 8), (8, 3), (1, 1)]:
            a = _random_complex(rng, shape)
            ref = np.linalg.svd(a, compute_uv=False)[0]
            assert float(op_norm(a)) == pytest.approx(ref, rel=1e-12)

    def test_empty_and_zero(self):
        assert float(op_norm(np.zeros((4, 4)))) == 0.0
        assert float(op_norm(np.zeros((0, 3)))) == 0.0

    def test_power_iteration_route(self):
        rng = _rng(7)
        a = _random_complex(rng, (40, 40))
        ref = float(op_norm(a))
        est = numkit._power_iteration(np.asarray(a, dtype=np.complex128), 1e-12, seed=3)
        assert est.method == "power-iteration"
        assert est.value == pytest.approx(ref, rel=1e-9)

    def test_float_protocol(self):
        est = NormEstimate(2.5, "exact-eigensolve", 1e-12, 0)
        assert float(est) == 2.5

    def test_rejects_bad_input(self):
        with pytest.raises(errors.DimensionError):
            op_norm(np.zeros(3))
        with pytest.raises(errors.DomainError):
            op_norm(np.array([[np.inf, 0.0], [0.0, 1.0]]))
        with pytest.raises(errors.DomainError):
            op_norm(np.eye(2), tol=0.0)


class TestPolynomial:
    def test_trims_trailing_zeros(self):
        p = Polynomial([1.0, 2.0, 0.0, 0.0])
        assert p.degree == 1
        assert np.array_equal(p.coeffs, np.array([1.0, 2.0], dtype=np.complex128))

    def test_zero_polynomial(self):
        p = Polynomial([0.0, 0.0])
        assert p.is_zero and p.degree == 0
        assert not Polynomial([0.0, 1e-300]).is_zero

    def test_monomial(self):
        p = Polynomial.monomial(3, 2.0)
        assert p.degree == 3 and p.coeffs[3] == 2.0 and p.coeffs[0] == 0.0
        with pytest.raises(errors.DomainError):
            Polynomial.monomial(-1)

    def test_eq_hash(self):
        assert Polynomial([1, 2]) == Polynomial([1.0, 2.0, 0.0])
        assert hash(Polynomial([1, 2])) == hash(Polynomial([1, 2, 0]))
        assert Polynomial([1]) != Polynomial([2])

    def test_immutable_coeffs(self):
        p = Polynomial([1.0, 2.0])
        with pytest.raises(ValueError):
            p.coeffs[0] = 5.0

    def test_degree_cap(self):
        with pytest.raises(errors.ConfigurationError):
            c = np.zeros(numkit.DEGREE_CAP + 2)
            c[-1] = 1.0
            Polynomial(c)

    def test_nonfinite_rejected(self):
        with pytest.raises(errors.DomainError):
            Polynomial([1.0, np.nan])


class TestPolyOps:
    def test_derivative(self):
        p = Polynomial([5.0, 1.0, 2.0, 3.0])
        dp = poly_derivative(p)
        assert np.allclose(dp.coeffs, [1.0, 4.0, 9.0])
        assert poly_derivative(Polynomial([7.0])).is_zero

    def test_eval_matches_reference(self):
        rng = _rng(5)
        c = _random_complex(rng, 6)
        p = Polynomial(c)
        z = _random_complex(rng, 10)
        ref = np.polyval(p.coeffs[::-1], z)
        assert np.allclose(poly_eval(p, z), ref, atol=1e-12)
        assert isinstance(poly_eval(p, 0.5 + 0.1j), complex)

    def test_poly_of_matrix(self):
        rng = _rng(6)
        a = _random_complex(rng, (5, 5))
        p = Polynomial([2.0, 0.0, 1.0])  # 2 + z^2
        ref = 2.0 * np.eye(5) + a @ a
        assert np.allclose(poly_of_matrix(p, a), ref, atol=1e-12)
        with pytest.raises(errors.DimensionError):
            poly_of_matrix(p, np.zeros((2, 3)))


class TestSupNorm:
    def test_monomial_is_one(self):
        b = sup_norm(Polynomial.monomial(7))
        assert b.grid_max == pytest.approx(1.0, abs=1e-14)
        assert b.certified_upper >= 1.0

    def test_known_maximum_on_grid(self):
        # sup |1 + z| = 2, attained at z = 1 which every grid contains
        b = sup_norm(Polynomial([1.0, 1.0]))
        assert b.grid_max == pytest.approx(2.0, abs=1e-12)
        assert 2.0 <= b.certified_upper <= 2.0 * 1.01

    def test_sandwich(self):
        rng = _rng(12)
        for _ in range(5):
            p = Polynomial(_random_complex(rng, 9))
            b = sup_norm(p)
            dense = np.abs(poly_eval(p, np.exp(2j * np.pi * rng.random(2000)))).max()
            assert dense <= b.certified_upper + 1e-12
            assert b.grid_max <= b.certified_upper

    def test_coarse_grid_rejected(self):
        with pytest.raises(errors.DomainError):
            sup_norm(Polynomial.monomial(100), grid_points=64)

    def test_default_grid_points(self):
        for deg in [0, 1, 10, 1000]:
            n = default_grid_points(deg)
            assert n & (n - 1) == 0  # power of two
            assert np.pi * deg / n < 0.02


class TestToeplitz:
    def test_entries(self):
        f = Polynomial([1.0, 2.0, 3.0])
        t = toeplitz(f, 4)
        for i in range(4):
            for j in range(4):
                expected = f.coeffs[i - j] if 0 <= i - j <= f.degree else 0.0
                assert t[i, j] == expected

    def test_multiplicative(self):
        rng = _rng(77)
        f = Polynomial(_random_complex(rng, 4))
        g = Polynomial(_random_complex(rng, 5))
        fg = Polynomial(np.convolve(f.coeffs, g.coeffs))
        d = 11
        assert np.allclose(toeplitz(fg, d), toeplitz(f, d) @ toeplitz(g, d), atol=1e-13)

    def test_needs_positive_dim(self):
        with pytest.raises(errors.DomainError):
            toeplitz(Polynomial([1.0]), 0)


class TestCmat:
    def test_roundtrip(self, tmp_path):
        rng = _rng(4)
        a = _random_complex(rng, (5, 3))
        path = tmp_path / "a.cmat"
        save_cmat(path, a, label="test", seed=4)
        b, meta = load_cmat(path)
        assert np.array_equal(a.astype(np.complex128), b)
        assert meta == {"rows": 5, "cols": 3, "label": "test", "seed": 4}

    def test_sidecar_json(self, tmp_path):
        save_cmat(tmp_path / "m.cmat", np.eye(2))
        meta = json.loads((tmp_path / "m.cmat.json").read_text())
        assert meta["rows"] == 2 and meta["cols"] == 2

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.cmat"
        p.write_bytes(b"XXXX" + b"\x00" * 16)
        with pytest.raises(errors.ConfigurationError):
            load_cmat(p)

    def test_truncated_body(self, tmp_path):
        p = tmp_path / "t.cmat"
        save_cmat(p, np.eye(3))
        raw = p.read_bytes()
        p.write_bytes(raw[:-8])
        with pytest.raises(errors.ConfigurationError):
            load_cmat(p)
