"""Dense complex matrix arithmetic, spectral norms, and analytic polynomials.

Conventions fixed here and relied on everywhere else:

  * A matrix is a 2-d numpy array of complex128 values, row-major.
  * ``transpose`` never conjugates; ``adjoint`` is conj o transpose.
  * ``op_norm`` returns the largest singular value: an exact Hermitian
    eigensolve of A*A up to dimension 4096, seeded power iteration beyond.
  * Analytic polynomials are Taylor coefficient vectors P-hat(0..deg); the
    sup norm over the unit circle is certified from a roots-of-unity grid
    through the Bernstein derivative bound ||P'|| <= deg * ||P||.
  * The binary matrix format is a 16-byte header (magic "CMAT", u32 rows,
    u32 cols, u32 flags, little-endian) followed by row-major interleaved
    (re, im) float64, with a JSON metadata sidecar.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ConfigurationError,
    DimensionError,
    DomainError,
    NonConvergenceError,
)

OP_NORM_EXACT_MAX_DIM = 4096
POWER_ITERATION_CAP = 100_000
DEGREE_CAP = 1 << 16

_CMAT_MAGIC = b"CMAT"


def as_matrix(a) -> np.ndarray:
    """Coerce to a C-ordered complex128 2-d array and require finite entries."""
    m = np.ascontiguousarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got ndim={m.ndim}")
    if m.size and not np.isfinite(m).all():
        raise DomainError("matrix has non-finite entries")
    return m


@dataclass(frozen=True)
class NormEstimate:
    value: float
    method: str  # "exact-eigensolve" | "power-iteration"
    tolerance: float
    iterations: int

    def __float__(self) -> float:
        return self.value


def op_norm(a, tol: float = 1e-12, seed: int = 0) -> NormEstimate:
    """Largest singular value of ``a``.

    Exact route (max dimension <= 4096): Hermitian eigensolve of the Gram
    matrix on the smaller side, largest eigenvalue, square root.  Iterative
    route: power iteration on A*A with a seeded start vector, converged when
    successive Rayleigh quotients agree to relative ``tol``; the hard cap of
    1e5 iterations raises NonConvergenceError rather than returning a value.
    """
    a = as_matrix(a)
    if tol <= 0:
        raise DomainError("tol must be positive")
    if a.size == 0:
        return NormEstimate(0.0, "exact-eigensolve", tol, 0)
    if max(a.shape) <= OP_NORM_EXACT_MAX_DIM:
        # Gram matrix on the smaller side has the same nonzero spectrum.
        if a.shape[0] <= a.shape[1]:
            gram = a @ a.conj().T
        else:
            gram = a.conj().T @ a
        w = np.linalg.eigvalsh(gram)
        value = float(np.sqrt(max(w[-1], 0.0)))
        return NormEstimate(value, "exact-eigensolve", tol, 0)
    return _power_iteration(a, tol, seed)


def _power_iteration(a: np.ndarray, tol: float, seed: int) -> NormEstimate:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    v = rng.standard_normal(a.shape[1]) + 1j * rng.standard_normal(a.shape[1])
    v /= np.linalg.norm(v)
    rho_prev = -1.0
    rho = 0.0
    for it in range(1, POWER_ITERATION_CAP + 1):
        w = a @ v
        rho = float(np.real(np.vdot(w, w)))  # v unit, so this is the Rayleigh quotient of A*A
        if rho == 0.0:
            return NormEstimate(0.0, "power-iteration", tol, it)
        u = a.conj().T @ w
        v = u / np.linalg.norm(u)
        if abs(rho - rho_prev) < tol * rho:
            return NormEstimate(float(np.sqrt(rho)), "power-iteration", tol, it)
        rho_prev = rho
    raise NonConvergenceError(
        f"power iteration did not converge in {POWER_ITERATION_CAP} iterations",
        POWER_ITERATION_CAP,
        float(np.sqrt(rho)),
    )


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def conj(a) -> np.ndarray:
    return np.conj(as_matrix(a))


def transpose(a) -> np.ndarray:
    """Plain transpose, no conjugation."""
    return as_matrix(a).T.copy()


def adjoint(a) -> np.ndarray:
    return as_matrix(a).conj().T.copy()


def block_matrix(blocks) -> np.ndarray:
    try:
        return as_matrix(np.block([[as_matrix(b) for b in row] for row in blocks]))
    except ValueError as exc:
        raise DimensionError(f"block shapes do not conform: {exc}") from exc


# ---------------------------------------------------------------------------
# analytic polynomials


class Polynomial:
    """Analytic polynomial sum_k c_k z^k held as its coefficient vector.

    Exact trailing zeros are trimmed on construction so ``degree`` is honest;
    the zero polynomial is kept as the single coefficient 0.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=np.complex128)).ravel()
        if c.size == 0:
            c = np.zeros(1, dtype=np.complex128)
        if not np.isfinite(c).all():
            raise DomainError("polynomial has non-finite coefficients")
        nz = np.nonzero(c)[0]
        c = c[: nz[-1] + 1] if nz.size else c[:1]
        if c.size - 1 > DEGREE_CAP:
            raise ConfigurationError(f"degree {c.size - 1} exceeds cap {DEGREE_CAP}")
        c = c.copy()
        c.setflags(write=False)
        self.coeffs = c

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs.size == 1 and self.coeffs[0] == 0

    @classmethod
    def monomial(cls, k: int, coeff: complex = 1.0) -> "Polynomial":
        if k < 0:
            raise DomainError("monomial exponent must be >= 0")
        c = np.zeros(k + 1, dtype=np.complex128)
        c[k] = coeff
        return cls(c)

    def __eq__(self, other) -> bool:
        return isinstance(other, Polynomial) and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def __repr__(self) -> str:
        return f"Polynomial(degree={self.degree})"


def poly_derivative(p: Polynomial) -> Polynomial:
    c = p.coeffs
    if c.size == 1:
        return Polynomial([0.0])
    return Polynomial(c[1:] * np.arange(1, c.size))


def poly_eval(p: Polynomial, z):
    """Horner evaluation; ``z`` may be a scalar or an ndarray."""
    z = np.asarray(z, dtype=np.complex128)
    acc = np.full(z.shape, p.coeffs[-1], dtype=np.complex128)
    for c in p.coeffs[-2::-1]:
        acc = acc * z + c
    return acc if acc.shape else complex(acc)


def poly_of_matrix(p: Polynomial, a) -> np.ndarray:
    """Horner evaluation of P(A)."""
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError("poly_of_matrix needs a square matrix")
    eye = np.eye(a.shape[0], dtype=np.complex128)
    acc = p.coeffs[-1] * eye
    for c in p.coeffs[-2::-1]:
        acc = acc @ a + c * eye
    return acc


@dataclass(frozen=True)
class SupNormBound:
    grid_max: float
    certified_upper: float
    grid_points: int


def default_grid_points(degree: int) -> int:
    """Power-of-two grid keeping the Bernstein slack ~1% (pi*deg/N <= ~0.016)."""
    target = max(4096, int(np.ceil(64 * np.pi * (degree + 1))))
    return 1 << int(np.ceil(np.log2(target)))


def sup_norm(p: Polynomial, grid_points: int | None = None) -> SupNormBound:
    """Max of |P| over the N-th roots of unity plus a certified upper bound.

    grid_max <= sup|P| <= grid_max / (1 - pi*deg/N): between adjacent grid
    points (arc length 2pi/N) the Bernstein bound ||P'|| <= deg*||P|| limits
    the drop from the true maximum.  Requires N > pi*deg.
    """
    if grid_points is None:
        grid_points = default_grid_points(p.degree)
    slack = np.pi * p.degree / grid_points
    if slack >= 1.0:
        raise DomainError(
            f"grid too coarse: {grid_points} points for degree {p.degree} "
            f"(need grid_points > pi*deg)"
        )
    vals = np.abs(np.fft.fft(p.coeffs, n=grid_points))
    grid_max = float(vals.max())
    return SupNormBound(grid_max, grid_max / (1.0 - slack), grid_points)


def toeplitz(f: Polynomial, d: int) -> np.ndarray:
    """D x D lower-triangular Toeplitz matrix T_{ij} = f-hat(i-j).

    Represents multiplication by f on analytic polynomials truncated at
    degree < D, which is why T(f*g) = T(f)T(g) exactly.
    """
    if d < 1:
        raise DomainError("toeplitz needs D >= 1")
    t = np.zeros((d, d), dtype=np.complex128)
    c = f.coeffs
    for k in range(min(f.degree, d - 1) + 1):
        idx = np.arange(d - k)
        t[idx + k, idx] = c[k]
    return t


# ---------------------------------------------------------------------------
# CMAT persistence


def save_cmat(path, a, label: str | None = None, seed: int | None = None) -> None:
    a = as_matrix(a)
    rows, cols = a.shape
    path = Path(path)
    header = _CMAT_MAGIC + struct.pack("<III", rows, cols, 0)
    body = a.astype("<c16", copy=False).tobytes(order="C")
    path.write_bytes(header + body)
    sidecar = {"rows": rows, "cols": cols, "label": label, "seed": seed}
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(sidecar, sort_keys=True, indent=2) + "\n"
    )


def load_cmat(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 16 or raw[:4] != _CMAT_MAGIC:
        raise ConfigurationError(f"{path} is not a CMAT file")
    rows, cols, _flags = struct.unpack("<III", raw[4:16])
    expected = 16 + rows * cols * 16
    if len(raw) != expected:
        raise ConfigurationError(
            f"{path}: expected {expected} bytes for {rows}x{cols}, got {len(raw)}"
        )
    a = np.frombuffer(raw[16:], dtype="<c16").reshape(rows, cols).astype(np.complex128)
    sidecar_path = path.with_suffix(path.suffix + ".json")
    meta = json.loads(sidecar_path.read_text()) if sidecar_path.exists() else {}
    return a, meta
