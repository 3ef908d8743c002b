"""Monte Carlo engine for the dyadic Moebius martingale.

Paths follow psi_0 = 0, psi_n = r_n * Phi(psi_{n-1}/r_n, Z_n) with
Phi(z, zeta) = (zeta + z)/(1 + conj(z) zeta), r_n = 1 - 2^{-n}, and Z_n
independent uniform on the unit circle.  |psi_n| = r_n identically (Moebius
maps preserve the circle), so each level lives on its own centered circle
and psi_n is uniformly distributed on it.

The engine verifies, at sampling accuracy, the identities this construction
is built to satisfy:

* radial means: E[F(psi_k)] = F-hat(0) for analytic polynomials F;
* Fourier extraction: predictable weights eta_{n-1} make
  E[eta_{n-1} conj(Z_n) (F(psi_n) - F(psi_{n-1}))] = F-hat(K_n),
  with |eta_{n-1}| path-independent and explicitly bounded;
* orthogonality: E[conj(Z_n) dF_n dG_n phi_{n-1}] = 0, because both
  increments are analytic in Z_n with zero constant term, so their product
  has no Z_n^1 coefficient;
* the bridge to the Hankel matrix: the extracted coefficients assemble the
  same bilinear form that the flattened matrix computes exactly.

Level 1 is special: predictable weights are constants there, so only the
frequency-1 coefficient can be extracted, and the weight is 1/r_1 (the
choice that makes E[(1/r_1) conj(Z_1) F(r_1 Z_1)] = F-hat(1) on the nose).
Extraction at level 1 therefore requires K_1 = 1.

In-block extraction at frequency k with 2^{n-1} < k <= 2^n uses the weight
conj(xi_{n-1})^{k-1} * r_n / ((r_n^2 - r_{n-1}^2) * k * r_{n-1}^{k-1});
the k-1 exponent is forced by consistency with the K_n case.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError
from .hankel import BlockHankel, LacunarySpec
from .numkit import Polynomial, poly_derivative, poly_eval, toeplitz

SIM_BLOCK = 1 << 14
RENORM_TOL = 1e-12


def radius(k: int) -> float:
    return 1.0 - 2.0 ** (-k)


@dataclass(frozen=True)
class MartingaleConfig:
    L: int
    n_samples: int = 100_000
    seed: int = 0
    radii: tuple[float, ...] = ()

    def __post_init__(self):
        if self.L < 1:
            raise ConfigurationError("MartingaleConfig needs L >= 1")
        if self.n_samples < 1:
            raise ConfigurationError("n_samples must be positive")
        want = tuple(radius(k) for k in range(1, self.L + 1))
        if self.radii:
            if tuple(self.radii) != want:
                raise ConfigurationError("radii must equal 1 - 2^{-k} exactly")
        else:
            object.__setattr__(self, "radii", want)


@dataclass
class PathBatch:
    """n_samples simulated paths: Z unimodular draws (N x L), psi values
    (N x (L+1), column 0 identically zero)."""

    config: MartingaleConfig
    Z: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    renorm_count: int = 0

    @property
    def L(self) -> int:
        return self.config.L

    @property
    def n_samples(self) -> int:
        return self.config.n_samples

    def r(self, k: int) -> float:
        if k == 0:
            return 0.0
        return self.config.radii[k - 1]

    def max_radial_drift(self) -> float:
        drift = 0.0
        for k in range(1, self.L + 1):
            drift = max(drift, float(np.abs(np.abs(self.psi[:, k]) - self.r(k)).max()))
        return drift


@dataclass(frozen=True)
class McEstimate:
    mean: complex
    stderr: float
    n_samples: int
    seed: int


@dataclass(frozen=True)
class EtaWeight:
    level: int
    values: np.ndarray
    modulus_bound: float


def _mc(samples: np.ndarray, seed: int) -> McEstimate:
    n = samples.size
    mean = complex(samples.mean())
    if n > 1:
        sd = float(np.sqrt(np.abs(samples - mean).__pow__(2).sum() / (n - 1)))
    else:
        sd = 0.0
    return McEstimate(mean=mean, stderr=sd / np.sqrt(n), n_samples=n, seed=seed)


def mobius(z, zeta):
    """Phi(z, zeta) = (zeta + z) / (1 + conj(z) zeta); maps the circle to
    itself for |z| < 1."""
    z = np.asarray(z, dtype=np.complex128)
    zeta = np.asarray(zeta, dtype=np.complex128)
    if np.any(np.abs(z) >= 1.0):
        raise DomainError("mobius base point must satisfy |z| < 1")
    den = 1.0 + np.conj(z) * zeta
    if np.any(np.abs(den) < 1e-14):
        raise DomainError("mobius pole: 1 + conj(z) zeta vanished")
    out = (zeta + z) / den
    return complex(out) if out.ndim == 0 else out


def simulate_paths(cfg: MartingaleConfig) -> PathBatch:
    """Independent paths in fixed-size blocks with per-block derived seeds;
    accumulation order is fixed, so results are bit-stable per seed.  The
    modulus invariant |psi_k| = r_k is enforced by renormalization whenever
    rounding drifts past 1e-12; occurrences are counted."""
    n, L = cfg.n_samples, cfg.L
    n_blocks = (n + SIM_BLOCK - 1) // SIM_BLOCK
    children = np.random.SeedSequence(entropy=cfg.seed).spawn(n_blocks)
    Z = np.empty((n, L), dtype=np.complex128)
    psi = np.zeros((n, L + 1), dtype=np.complex128)
    renorms = 0
    for b, child in enumerate(children):
        lo, hi = b * SIM_BLOCK, min((b + 1) * SIM_BLOCK, n)
        rng = np.random.default_rng(child)
        theta = rng.uniform(0.0, 2.0 * np.pi, size=(hi - lo, L))
        zb = np.exp(1j * theta)
        Z[lo:hi] = zb
        prev = np.zeros(hi - lo, dtype=np.complex128)
        for k in range(1, L + 1):
            rk = cfg.radii[k - 1]
            w = prev / rk
            cur = rk * (zb[:, k - 1] + w) / (1.0 + np.conj(w) * zb[:, k - 1])
            drift = np.abs(np.abs(cur) - rk)
            bad = drift > RENORM_TOL
            if np.any(bad):
                renorms += int(bad.sum())
                cur[bad] = cur[bad] / np.abs(cur[bad]) * rk
            psi[lo:hi, k] = cur
            prev = cur
    return PathBatch(config=cfg, Z=Z, psi=psi, renorm_count=renorms)


# ---------------------------------------------------------------------------
# mean identities


def radial_mean_check(paths: PathBatch, f: Polynomial, k: int) -> McEstimate:
    """MC estimate of E[F(psi_k)] - F-hat(0); contract: compatible with 0."""
    if not 0 <= k <= paths.L:
        raise ConfigurationError(f"level {k} outside 0..{paths.L}")
    vals = poly_eval(f, paths.psi[:, k]) - f.coeffs[0]
    return _mc(np.asarray(vals, dtype=np.complex128), paths.config.seed)


# ---------------------------------------------------------------------------
# eta weights and Fourier extraction


def eta_modulus(n: int, k: int) -> float:
    """|eta_{n-1}| for extraction at frequency k from level n; path-
    independent closed form."""
    rn, rp = radius(n), radius(n - 1)
    return rn / ((rn * rn - rp * rp) * k * rp ** (k - 1))


def eta_modulus_sup(n_max: int, freq_of_level=lambda n: 2**n) -> float:
    """sup over 2 <= n <= n_max of the extraction-weight modulus; with the
    dyadic frequencies the sequence tends to e^2/2 from a one-time peak at
    n = 2."""
    if n_max < 2:
        raise DomainError("n_max must be >= 2")
    return max(eta_modulus(n, freq_of_level(n)) for n in range(2, n_max + 1))


def eta_weights(paths: PathBatch, spec: LacunarySpec, n: int) -> EtaWeight:
    """Per-path predictable weight for level n >= 2: unimodular factor
    conj(xi_{n-1})^{K_n - 1} times the closed-form modulus."""
    if n < 2:
        raise ConfigurationError("eta_weights needs level n >= 2; level 1 uses the constant 1/r_1")
    if n > paths.L:
        raise ConfigurationError(f"level {n} beyond simulated depth {paths.L}")
    if n > spec.L:
        raise ConfigurationError(f"level {n} beyond spec depth {spec.L}")
    kn = spec.K[n - 1]
    return _eta_weights_at(paths, n, kn)


def _eta_weights_at(paths: PathBatch, n: int, k: int) -> EtaWeight:
    rp = paths.r(n - 1)
    xi = paths.psi[:, n - 1] / rp
    mod = eta_modulus(n, k)
    vals = np.conj(xi) ** (k - 1) * (paths.r(n) / ((paths.r(n) ** 2 - rp**2) * k * rp ** (k - 1)))
    return EtaWeight(level=n, values=vals, modulus_bound=mod)


def fourier_extract(paths: PathBatch, f: Polynomial, spec: LacunarySpec, n: int) -> McEstimate:
    """MC estimate of E[eta_{n-1} conj(Z_n) (F(psi_n) - F(psi_{n-1}))],
    which equals F-hat(K_n).  Level 1 requires K_1 = 1 (predictable weights
    are constant there) and uses eta_0 = 1/r_1."""
    if not 1 <= n <= paths.L:
        raise ConfigurationError(f"level {n} outside 1..{paths.L}")
    if n > spec.L:
        raise ConfigurationError(f"level {n} beyond spec depth {spec.L}")
    if n == 1:
        if spec.K[0] != 1:
            raise ConfigurationError(
                "level-1 extraction requires K_1 = 1: constant weights only reach frequency 1"
            )
        df = poly_eval(f, paths.psi[:, 1]) - poly_eval(f, paths.psi[:, 0])
        samples = (1.0 / paths.r(1)) * np.conj(paths.Z[:, 0]) * df
        return _mc(np.asarray(samples, dtype=np.complex128), paths.config.seed)
    # the block-top case is in-block extraction at k = K_n; one code path
    # keeps the two estimators bit-identical there
    return multiplier_extract(paths, f, n, spec.K[n - 1])


def multiplier_extract(paths: PathBatch, f: Polynomial, n: int, k: int) -> McEstimate:
    """Extraction at any frequency k in the level-n dyadic block
    2^{n-1} < k <= 2^n; the weight swaps K_n for k in both the exponent
    (k - 1) and the modulus."""
    if n < 2:
        raise ConfigurationError("multiplier_extract needs level n >= 2")
    if not (2 ** (n - 1) < k <= 2**n):
        raise ConfigurationError(
            f"frequency {k} outside the level-{n} dyadic block (2^{n-1}, 2^{n}]"
        )
    if n > paths.L:
        raise ConfigurationError(f"level {n} beyond simulated depth {paths.L}")
    df = poly_eval(f, paths.psi[:, n]) - poly_eval(f, paths.psi[:, n - 1])
    eta = _eta_weights_at(paths, n, k)
    samples = eta.values * np.conj(paths.Z[:, n - 1]) * df
    return _mc(np.asarray(samples, dtype=np.complex128), paths.config.seed)


def block_modulus_sup(n: int) -> float:
    """Largest extraction-weight modulus across the level-n dyadic block."""
    if n < 2:
        raise DomainError("dyadic blocks start at level 2")
    return max(eta_modulus(n, k) for k in range(2 ** (n - 1) + 1, 2**n + 1))


# ---------------------------------------------------------------------------
# orthogonality and conditional multiplicativity


def orthogonality_check(
    paths: PathBatch, f: Polynomial, g: Polynomial, n: int, phi=None
) -> McEstimate:
    """MC estimate of E[conj(Z_n) dF_n dG_n phi(psi_{n-1})]; identically zero
    in expectation, since both increments are Z_n-analytic with zero
    constant term."""
    if not 1 <= n <= paths.L:
        raise ConfigurationError(f"level {n} outside 1..{paths.L}")
    df = poly_eval(f, paths.psi[:, n]) - poly_eval(f, paths.psi[:, n - 1])
    dg = poly_eval(g, paths.psi[:, n]) - poly_eval(g, paths.psi[:, n - 1])
    weight = 1.0 if phi is None else phi(paths.psi[:, n - 1])
    samples = np.conj(paths.Z[:, n - 1]) * df * dg * weight
    return _mc(np.asarray(samples, dtype=np.complex128), paths.config.seed)


def conditional_multiplicativity_check(
    paths: PathBatch, f: Polynomial, g: Polynomial, k: int, bins: int = 64,
    min_bin: int = 64,
) -> dict:
    """Binned form of the conditional product identity: within each angular
    bin of psi_k, the mean of (FG)(psi_L) matches F(psi_k)G(psi_k).  psi_k
    is uniform on its circle, so equal-width bins are equal-probability.
    Returns the worst standardized discrepancy across populated bins."""
    if not 1 <= k <= paths.L:
        raise ConfigurationError(f"level {k} outside 1..{paths.L}")
    fg = Polynomial(np.convolve(f.coeffs, g.coeffs))
    end_vals = poly_eval(fg, paths.psi[:, paths.L])
    cond_vals = poly_eval(f, paths.psi[:, k]) * poly_eval(g, paths.psi[:, k])
    angles = np.angle(paths.psi[:, k])
    idx = np.minimum(((angles + np.pi) / (2 * np.pi) * bins).astype(int), bins - 1)
    max_z, checked = 0.0, 0
    for b in range(bins):
        sel = idx == b
        cnt = int(sel.sum())
        if cnt < min_bin:
            continue
        diff = end_vals[sel] - cond_vals[sel]
        est = _mc(np.asarray(diff, dtype=np.complex128), paths.config.seed)
        if est.stderr > 0:
            max_z = max(max_z, abs(est.mean) / est.stderr)
        checked += 1
    return {"max_z": max_z, "bins_checked": checked, "bins": bins}


# ---------------------------------------------------------------------------
# the bridge to the Hankel matrix


def hankel_bridge_check(
    paths: PathBatch,
    g: BlockHankel,
    p: Polynomial,
    x: np.ndarray,
    y: np.ndarray,
    spec: LacunarySpec,
) -> dict:
    """Monte Carlo vs exact evaluation of the bilinear form behind the
    counterexample corner:

        <u(P) x, y-bar> = sum_t m(K_t) P-hat(K_t) [C_t x, y],

    with [a, b] = sum a_i b_i.  The MC side replaces each P-hat(K_t) by its
    fourier_extract estimate; the exact side contracts the flattened Hankel
    against the degree-zero coordinate embeddings.  The propagated error
    adds |coefficient| * stderr linearly, a conservative bound."""
    if spec.freq_map() != g.freq_map:
        raise ConfigurationError("spec and Hankel frequency maps disagree")
    if p.degree >= 2 * g.D:
        raise DomainError(f"deg P = {p.degree} >= 2D = {2 * g.D}")
    if spec.L > paths.L:
        raise ConfigurationError("path batch too shallow for the frequency spec")
    out_dim, in_dim = g.block_shape
    x = np.asarray(x, dtype=np.complex128).reshape(in_dim)
    y = np.asarray(y, dtype=np.complex128).reshape(out_dim)

    mc_total = 0j
    err_total = 0.0
    for t, kt in enumerate(spec.K, start=1):
        est = fourier_extract(paths, p, spec, t)
        pairing = complex(y @ (g.system.elements[t - 1] @ x))
        coeff = g.multiplier(kt) * pairing
        mc_total += complex(est.mean) * coeff
        err_total += abs(coeff) * est.stderr

    # (T(P') (x) I)(e_0 (x) x): block i is P'-hat(i) * x
    dp_col = toeplitz(poly_derivative(p), g.D)[:, 0]
    embedded = (dp_col[:, None] * x[None, :]).reshape(g.D * in_dim)
    gv = g.apply_flat(embedded)
    exact = complex(y @ gv.reshape(g.D, out_dim)[0])
    mc = McEstimate(mean=mc_total, stderr=err_total, n_samples=paths.n_samples,
                    seed=paths.config.seed)
    return {"mc": mc, "exact": exact}


def stderr_halving_ratios(
    cfg: MartingaleConfig, f: Polynomial, spec: LacunarySpec, n: int, repetitions: int = 10
) -> list[float]:
    """stderr(N/2)/stderr(N) for the extraction estimator across seeded
    repetitions; should hover near sqrt(2)."""
    ratios = []
    for rep in range(repetitions):
        seed = int(np.random.SeedSequence(entropy=(cfg.seed, rep)).generate_state(1)[0])
        full = simulate_paths(MartingaleConfig(L=cfg.L, n_samples=cfg.n_samples, seed=seed))
        half = simulate_paths(
            MartingaleConfig(L=cfg.L, n_samples=cfg.n_samples // 2, seed=seed + 1)
        )
        e_full = fourier_extract(full, f, spec, n)
        e_half = fourier_extract(half, f, spec, n)
        if e_full.stderr > 0:
            ratios.append(e_half.stderr / e_full.stderr)
    return ratios
