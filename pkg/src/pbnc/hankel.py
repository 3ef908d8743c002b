"""Lacunary frequency specs, multiplier sequences, and block Hankel matrices.

The central object is the D x D block matrix

    G_{ij} = m(q) * q^{-1} * C_{phi(q)},   q = i + j + 1,

zero when q is unsupported.  phi maps supported frequencies to elements of a
coefficient system: for a lacunary spec K_1 < ... < K_L the map is K_t -> t,
and the dense contrast mode (multiplier identically 1) uses the identity map
k -> k over a basis-vector system with 2D-1 elements.

G represents a bilinear Hankel form on truncated analytic vectors: composing
with the Toeplitz matrix of f' probes the boundedness inequality
||G T(f')|| <= C ||f||_inf whose constant C separates lacunary multipliers
(dyadic block sums bounded) from the dense multiplier (block sums growing).
All probe results are empirical maxima, i.e. lower bounds for C; the
normalization divides by the certified sup-norm upper bound so reported
ratios never overstate C.

Norms of G T(f') are evaluated through the Gram matrix

    (T(f') (x) I)^H (G^H G) (T(f') (x) I)

with G^H G assembled from the anti-diagonal structure directly.  This keeps
the dense contrast mode at D = 513 (flat shape 525825 x 513) out of memory
trouble and equals the flat-product norm exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import numkit
from .coeff_systems import CoefficientSystem, basis_vectors
from .errors import ConfigurationError, DimensionError, DomainError
from .numkit import Polynomial, poly_derivative, sup_norm, toeplitz

FLAT_ENTRY_BUDGET = 1 << 26  # refuse to materialize flat matrices above ~1 GiB


@dataclass(frozen=True)
class LacunarySpec:
    """Strictly increasing positive frequencies with 2^{n-1} < K_n <= 2^n for
    n > 1; K_1 is unconstrained."""

    K: tuple[int, ...]

    def __post_init__(self):
        k = self.K
        if not k:
            raise ConfigurationError("LacunarySpec needs at least one frequency")
        if any(int(x) != x or x < 1 for x in k):
            raise ConfigurationError("frequencies must be positive integers")
        if any(b <= a for a, b in zip(k, k[1:])):
            raise ConfigurationError("frequencies must be strictly increasing")
        for n, kn in enumerate(k[1:], start=2):
            if not (2 ** (n - 1) < kn <= 2**n):
                raise ConfigurationError(
                    f"K_{n} = {kn} outside the dyadic window (2^{n-1}, 2^{n}]"
                )
        object.__setattr__(self, "K", tuple(int(x) for x in k))

    @property
    def L(self) -> int:
        return len(self.K)

    def freq_map(self) -> dict[int, int]:
        """frequency -> 1-based element index."""
        return {kt: t for t, kt in enumerate(self.K, start=1)}


def lacunary_default(L: int) -> LacunarySpec:
    if L < 1:
        raise ConfigurationError("lacunary_default needs L >= 1")
    return LacunarySpec(tuple(2**t for t in range(1, L + 1)))


@dataclass
class MultiplierSeq:
    """Sparse multiplier m: frequency k >= 1 -> complex value (missing = 0)."""

    values: dict[int, complex]
    support_cutoff: int

    def __post_init__(self):
        cleaned = {}
        for k, v in self.values.items():
            if int(k) != k or k < 1:
                raise ConfigurationError(f"multiplier frequency {k} must be a positive integer")
            if k > self.support_cutoff:
                raise ConfigurationError(
                    f"multiplier supported at {k} beyond cutoff {self.support_cutoff}"
                )
            v = complex(v)
            if v != 0:
                cleaned[int(k)] = v
        self.values = cleaned

    def __call__(self, k: int) -> complex:
        return self.values.get(k, 0j)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(sorted(self.values))

    def block_sum(self, n: int) -> float:
        """sum of |m(k)|^2 over the dyadic block 2^{n-1} < k <= 2^n (n >= 0)."""
        lo = 2 ** (n - 1) if n >= 1 else 0.5
        hi = 2**n
        return float(sum(abs(v) ** 2 for k, v in self.values.items() if lo < k <= hi))

    @classmethod
    def indicator(cls, spec: LacunarySpec, value: complex = 1.0) -> "MultiplierSeq":
        return cls({k: value for k in spec.K}, support_cutoff=max(spec.K))

    @classmethod
    def ones(cls, cutoff: int) -> "MultiplierSeq":
        return cls({k: 1.0 for k in range(1, cutoff + 1)}, support_cutoff=cutoff)


def multiplier_block_sup(m: MultiplierSeq, n_max: int) -> float:
    """max over 0 <= n <= n_max of the dyadic block sums of |m|^2."""
    if n_max < 0:
        raise DomainError("n_max must be >= 0")
    return max(m.block_sum(n) for n in range(n_max + 1))


# ---------------------------------------------------------------------------
# the block Hankel matrix


@dataclass
class BlockHankel:
    D: int
    multiplier: MultiplierSeq
    system: CoefficientSystem
    freq_map: dict[int, int]
    # scaled coefficient per supported frequency: m(q)/q * C_{phi(q)}
    coefficients: dict[int, np.ndarray] = field(repr=False)

    @property
    def block_shape(self) -> tuple[int, int]:
        return self.system.op_dim

    @property
    def flat_shape(self) -> tuple[int, int]:
        out_dim, in_dim = self.block_shape
        return (self.D * out_dim, self.D * in_dim)

    def coefficient(self, q: int) -> np.ndarray | None:
        return self.coefficients.get(q)

    def block(self, i: int, j: int) -> np.ndarray:
        if not (0 <= i < self.D and 0 <= j < self.D):
            raise DimensionError(f"block index ({i},{j}) outside D={self.D}")
        c = self.coefficients.get(i + j + 1)
        return c.copy() if c is not None else np.zeros(self.block_shape, dtype=np.complex128)

    def flat(self) -> np.ndarray:
        """Materialized (D*out) x (D*in) matrix."""
        rows, cols = self.flat_shape
        if rows * cols > FLAT_ENTRY_BUDGET:
            raise ConfigurationError(
                f"flat matrix {rows}x{cols} exceeds the materialization budget; "
                "use the Gram route"
            )
        out_dim, in_dim = self.block_shape
        g = np.zeros((rows, cols), dtype=np.complex128)
        for q, c in self.coefficients.items():
            # anti-diagonal i + j = q - 1
            for i in range(self.D):
                j = q - 1 - i
                if 0 <= j < self.D:
                    g[i * out_dim : (i + 1) * out_dim, j * in_dim : (j + 1) * in_dim] = c
        return g

    def gram(self) -> np.ndarray:
        """G^H G as a (D*in) x (D*in) matrix, assembled anti-diagonal by
        anti-diagonal without materializing G."""
        _, in_dim = self.block_shape
        size = self.D * in_dim
        gram = np.zeros((size, size), dtype=np.complex128)
        freqs = sorted(self.coefficients)
        for q in freqs:
            cq = self.coefficients[q]
            for qp in freqs:
                cqp = self.coefficients[qp]
                prod = cq.conj().T @ cqp  # contribution C_q^H C_q' with scalars included
                # row blocks j = q-1-i, column blocks j' = q'-1-i share the index i
                i_lo = max(0, q - self.D, qp - self.D)
                i_hi = min(self.D - 1, q - 1, qp - 1)
                for i in range(i_lo, i_hi + 1):
                    j = q - 1 - i
                    jp = qp - 1 - i
                    gram[j * in_dim : (j + 1) * in_dim, jp * in_dim : (jp + 1) * in_dim] += prod
        return gram

    def gram_diagonal_or_none(self) -> np.ndarray | None:
        """Fast path: when all cross products C_q^H C_q' (q != q') vanish and
        each C_q^H C_q is scalar (basis-vector blocks), the Gram matrix is
        diagonal; returns that diagonal or None."""
        _, in_dim = self.block_shape
        if in_dim != 1:
            return None
        freqs = sorted(self.coefficients)
        norms = {}
        for q in freqs:
            cq = self.coefficients[q]
            norms[q] = float(np.vdot(cq, cq).real)
        for a, q in enumerate(freqs):
            for qp in freqs[a + 1 :]:
                if np.abs(self.coefficients[q].conj().T @ self.coefficients[qp]).max() != 0.0:
                    return None
        diag = np.zeros(self.D)
        for q in freqs:
            i_lo = max(0, q - self.D)
            i_hi = min(self.D - 1, q - 1)
            for i in range(i_lo, i_hi + 1):
                diag[q - 1 - i] += norms[q]
        return diag

    def apply_flat(self, vec: np.ndarray) -> np.ndarray:
        """G @ vec without materializing G; vec has length D*in."""
        out_dim, in_dim = self.block_shape
        if vec.shape[0] != self.D * in_dim:
            raise DimensionError("vector length does not match D*in_dim")
        blocks_in = vec.reshape(self.D, in_dim)
        out = np.zeros((self.D, out_dim), dtype=np.complex128)
        for q, c in self.coefficients.items():
            for i in range(max(0, q - self.D), min(self.D - 1, q - 1) + 1):
                out[i] += c @ blocks_in[q - 1 - i]
        return out.reshape(self.D * out_dim)

    def apply_flat_adjoint(self, vec: np.ndarray) -> np.ndarray:
        out_dim, in_dim = self.block_shape
        if vec.shape[0] != self.D * out_dim:
            raise DimensionError("vector length does not match D*out_dim")
        blocks_in = vec.reshape(self.D, out_dim)
        out = np.zeros((self.D, in_dim), dtype=np.complex128)
        for q, c in self.coefficients.items():
            ch = c.conj().T
            for i in range(max(0, q - self.D), min(self.D - 1, q - 1) + 1):
                out[q - 1 - i] += ch @ blocks_in[i]
        return out.reshape(self.D * in_dim)

    @property
    def max_supported_freq(self) -> int:
        return max(self.coefficients) if self.coefficients else 0


def build_hankel(
    m: MultiplierSeq,
    spec: LacunarySpec,
    system: CoefficientSystem,
    D: int,
    freq_map: dict[int, int] | None = None,
) -> BlockHankel:
    """Assemble the block Hankel matrix for multiplier m over the given spec.

    The default frequency map sends K_t to element t.  A supported frequency
    <= 2D-1 with no mapped system element is a configuration error.  The
    dense contrast mode passes the identity map over a basis system instead
    of a lacunary spec.
    """
    if D < 1:
        raise ConfigurationError("build_hankel needs D >= 1")
    fmap = dict(freq_map) if freq_map is not None else spec.freq_map()
    coefficients = {}
    for q in m.support:
        if q > 2 * D - 1:
            continue  # beyond every anti-diagonal of the D-truncation
        if q not in fmap:
            raise ConfigurationError(
                f"multiplier supported at frequency {q} but no system element is mapped"
            )
        t = fmap[q]
        if not 1 <= t <= system.n:
            raise ConfigurationError(
                f"frequency {q} maps to element {t}, outside the {system.n}-element system"
            )
        coefficients[q] = (m(q) / q) * system.elements[t - 1]
    return BlockHankel(D=D, multiplier=m, system=system, freq_map=fmap, coefficients=coefficients)


# ---------------------------------------------------------------------------
# symbol


@dataclass
class OperatorSymbol:
    """Finitely supported operator-valued Fourier coefficients
    {frequency -(q-1) -> q^{-1} m(q) C_{phi(q)}}; these regenerate every
    block of the Hankel matrix as block(i,j) = coeff(-(i+j))."""

    coeffs: dict[int, np.ndarray]
    block_shape: tuple[int, int]

    def regenerate_block(self, i: int, j: int) -> np.ndarray:
        c = self.coeffs.get(-(i + j))
        return c.copy() if c is not None else np.zeros(self.block_shape, dtype=np.complex128)


def hankel_symbol(g: BlockHankel) -> OperatorSymbol:
    return OperatorSymbol(
        coeffs={-(q - 1): c.copy() for q, c in g.coefficients.items()},
        block_shape=g.block_shape,
    )


# ---------------------------------------------------------------------------
# boundedness probes


@dataclass(frozen=True)
class BoundProbe:
    ratio: float
    norm_gtf: float
    sup_f: float


def _gram_conjugated(g: BlockHankel, t_f: np.ndarray) -> np.ndarray:
    """(T (x) I)^H (G^H G) (T (x) I) for a D x D Toeplitz factor."""
    _, in_dim = g.block_shape
    tk = np.kron(t_f, np.eye(in_dim, dtype=np.complex128))
    return tk.conj().T @ g.gram() @ tk


def norm_gtf(g: BlockHankel, f: Polynomial) -> float:
    """||G (T(f') (x) I)|| via the Gram route; equals the flat-product norm."""
    fp = poly_derivative(f)
    diag = g.gram_diagonal_or_none()
    if diag is not None:
        t_f = toeplitz(fp, g.D)
        w = np.sqrt(diag)[:, None] * t_f
        sv = np.linalg.svd(w, compute_uv=False)
        return float(sv[0]) if sv.size else 0.0
    m = _gram_conjugated(g, toeplitz(fp, g.D))
    w = np.linalg.eigvalsh(m)
    return float(np.sqrt(max(w[-1], 0.0)))


def bound_probe(g: BlockHankel, f: Polynomial, grid_points: int | None = None) -> BoundProbe:
    """ratio = ||G T(f')|| / certified sup|f|, the probe for the boundedness
    constant.  Degrees must stay below 2D so every coefficient of f' the
    truncation can see is present."""
    if f.is_zero:
        raise DomainError("bound_probe needs a nonzero polynomial (sup_f = 0)")
    if f.degree >= 2 * g.D:
        raise DomainError(f"deg f = {f.degree} >= 2D = {2 * g.D}")
    sup = sup_norm(f, grid_points)
    norm = norm_gtf(g, f)
    return BoundProbe(ratio=norm / sup.certified_upper, norm_gtf=norm, sup_f=sup.certified_upper)


def fejer_poly(degree: int) -> Polynomial:
    """Analytic Fejer mean: coefficients 1 - k/(deg+1), k = 0..deg."""
    if degree < 0:
        raise DomainError("fejer_poly needs degree >= 0")
    k = np.arange(degree + 1)
    return Polynomial(1.0 - k / (degree + 1.0))


def random_poly(degree: int, rng: np.random.Generator) -> Polynomial:
    """Seeded probe polynomial: iid complex Gaussian coefficients scaled by
    1/deg (the sup normalization happens in the certified ratio)."""
    c = rng.standard_normal(degree + 1) + 1j * rng.standard_normal(degree + 1)
    return Polynomial(c / max(degree, 1))


@dataclass
class ProbeConfig:
    n_random: int = 16
    ascent_restarts: int = 2
    ascent_steps: int = 24
    monomial_cap: int | None = None  # None = every k < 2D when affordable

    def monomial_grid(self, D: int, supported: tuple[int, ...], diagonal: bool) -> list[int]:
        full = range(1, 2 * D)
        if diagonal or 2 * D - 1 <= 64:
            ks = list(full)
        else:
            ks = sorted(
                {k for k in range(1, min(2 * D, 65))}
                | {k for k in supported if k < 2 * D}
                | {1 << j for j in range(1, 12) if (1 << j) < 2 * D}
            )
        if self.monomial_cap is not None:
            ks = ks[: self.monomial_cap]
        return ks


def _monomial_ratios(g: BlockHankel, ks: list[int], diag: np.ndarray | None) -> dict[int, float]:
    """||G T((z^k)')|| = k * sqrt(lambda_max of the Gram principal submatrix
    starting at block k-1) since T((z^k)') = k * shift^{k-1}."""
    out = {}
    _, in_dim = g.block_shape
    gram = None if diag is not None else g.gram()
    for k in ks:
        if k - 1 >= g.D:
            out[k] = 0.0
            continue
        if diag is not None:
            lam = float(diag[k - 1 :].max())
        else:
            sub = gram[(k - 1) * in_dim :, (k - 1) * in_dim :]
            lam = float(np.linalg.eigvalsh(sub)[-1]) if sub.size else 0.0
        out[k] = k * np.sqrt(max(lam, 0.0))
    return out


def _gram_operator(g: BlockHankel):
    """q -> (G^H G) q on the flat input space, via the diagonal fast path when
    the blocks are orthogonal basis vectors."""
    diag = g.gram_diagonal_or_none()
    if diag is not None:
        return lambda q: diag * q
    gram = g.gram()
    return lambda q: gram @ q


def _ascent_refine(
    g: BlockHankel, start: Polynomial, steps: int, rng: np.random.Generator
) -> tuple[float, Polynomial]:
    """Coefficient-space ascent on f -> ||G T(f')|| / certified sup|f|.

    Alternates a top right-singular-vector solve (power iteration on the Gram
    conjugation) with a Fejer-damped gradient step on the coefficients of f,
    renormalizing on the sup grid.  Lower-bound search only.
    """
    D = g.D
    _, in_dim = g.block_shape
    gop = _gram_operator(g)
    max_deg = 2 * D - 1
    c = np.zeros(max_deg + 1, dtype=np.complex128)
    c[: start.coeffs.size] = start.coeffs
    damp = 1.0 - np.arange(max_deg + 1) / (max_deg + 1.0)
    best_ratio, best_poly = 0.0, start

    for _ in range(steps):
        f = Polynomial(c)
        if f.is_zero:
            break
        fp = poly_derivative(f)
        t_f = toeplitz(fp, D)
        tk = t_f if in_dim == 1 else np.kron(t_f, np.eye(in_dim, dtype=np.complex128))
        tkh = tk.conj().T
        # power iteration for the top eigenpair of v -> T^H (G^H G) T v
        v = rng.standard_normal(tk.shape[0]) + 1j * rng.standard_normal(tk.shape[0])
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(200):
            w = tkh @ gop(tk @ v)
            lam_new = float(np.real(np.vdot(v, w)))
            nw = np.linalg.norm(w)
            if nw == 0.0:
                break
            v = w / nw
            if abs(lam_new - lam) < 1e-10 * max(1.0, lam_new):
                lam = lam_new
                break
            lam = lam_new
        norm = np.sqrt(max(lam, 0.0))
        sup = sup_norm(f)
        ratio = norm / sup.certified_upper
        if ratio > best_ratio:
            best_ratio, best_poly = ratio, f
        if norm == 0.0:
            break
        # gradient of Re u^H G (T(f') x I) v in the coefficients of f, with
        # u the top left singular vector: d/d f-hat(k+1) = (k+1) conj of
        # sum_j <(G^H u)_{j+k}, v_j>; G^H u = (G^H G) T v / ||G T v||
        q = tk @ v
        gq = gop(q)
        nrm = np.sqrt(max(float(np.real(np.vdot(q, gq))), 0.0))
        if nrm == 0.0:
            break
        gu = (gq / nrm).reshape(D, in_dim)
        vb = v.reshape(D, in_dim)
        grad = np.zeros(max_deg + 1, dtype=np.complex128)
        for k in range(0, D):  # shift_k truncated: blocks j -> j+k
            corr = np.vdot(gu[k:, :], vb[: D - k, :])  # sum_j <gu_{j+k}, v_j>
            grad[k + 1] = (k + 1) * np.conj(corr)
        step = 0.5 * np.linalg.norm(c) / max(np.linalg.norm(grad), 1e-30)
        c = c + step * grad * damp
        gm = sup_norm(Polynomial(c)).grid_max
        if gm > 0:
            c = c / gm
    return best_ratio, best_poly


@dataclass(frozen=True)
class ScanRow:
    D: int
    family: str
    best_ratio: float
    argmax_poly_id: str
    seed: int


PROBE_FAMILY_NAMES = ("monomial", "fejer", "random", "ascent")


def scan_probe_best(
    g: BlockHankel,
    cfg: ProbeConfig,
    seed: int,
    probe_families: tuple[str, ...] = PROBE_FAMILY_NAMES,
) -> tuple[float, str]:
    """Best certified ratio over the selected probe families for one Hankel
    matrix.  Lower-bound search: every reported ratio is achieved by a
    concrete polynomial."""
    unknown = set(probe_families) - set(PROBE_FAMILY_NAMES)
    if unknown:
        raise ConfigurationError(f"unknown probe families {sorted(unknown)}")
    diag = g.gram_diagonal_or_none()
    best, best_id = 0.0, "none"

    if "monomial" in probe_families:
        ks = cfg.monomial_grid(g.D, g.multiplier.support, diag is not None)
        norms = _monomial_ratios(g, ks, diag)
        for k in ks:
            # |z^k| = 1 on the grid; apply the certified slack directly
            n_grid = numkit.default_grid_points(k)
            cert = 1.0 / (1.0 - np.pi * k / n_grid)
            ratio = norms[k] / cert
            if ratio > best:
                best, best_id = ratio, f"monomial:{k}"

    if "fejer" in probe_families:
        deg = 2
        while deg <= 2 * g.D - 1:
            f = fejer_poly(deg)
            ratio = bound_probe(g, f).ratio
            if ratio > best:
                best, best_id = ratio, f"fejer:{deg}"
            deg *= 2

    ss = np.random.SeedSequence(entropy=seed)
    child_rand, child_ascent = ss.spawn(2)

    if "random" in probe_families:
        rng = np.random.default_rng(child_rand)
        degrees = np.unique(np.geomspace(2, 2 * g.D - 1, num=max(cfg.n_random, 1)).astype(int))
        degrees = degrees[(degrees >= 1) & (degrees <= 2 * g.D - 1)]
        if degrees.size == 0:
            degrees = np.array([1])
        poly_id = 0
        for deg in degrees:
            for _ in range(max(1, cfg.n_random // len(degrees))):
                f = random_poly(int(deg), rng)
                ratio = bound_probe(g, f).ratio
                if ratio > best:
                    best, best_id = ratio, f"random:{poly_id}"
                poly_id += 1

    if "ascent" in probe_families:
        arng = np.random.default_rng(child_ascent)
        starts = [fejer_poly(min(8, 2 * g.D - 1))]
        for _ in range(max(0, cfg.ascent_restarts - 1)):
            starts.append(random_poly(min(16, 2 * g.D - 1), arng))
        for s_idx, start in enumerate(starts):
            ratio, _ = _ascent_refine(g, start, cfg.ascent_steps, arng)
            if ratio > best:
                best, best_id = ratio, f"ascent:{s_idx}"
    return best, best_id


def lacunary_basis_family(D: int) -> BlockHankel:
    """The vector-valued regime: basis-vector blocks at frequencies 2^t up to
    2D-1, indicator multiplier.  Dyadic block sums all equal 1."""
    L = int(np.floor(np.log2(2 * D - 1))) if D >= 1 else 0
    L = max(L, 1)
    spec = lacunary_default(L)
    m = MultiplierSeq.indicator(spec)
    return build_hankel(m, spec, basis_vectors(L), D)


def ones_basis_family(D: int) -> BlockHankel:
    """Dense contrast: m identically 1 on every frequency <= 2D-1 with the
    identity frequency map over basis vectors e_1..e_{2D-1}.  Violates the
    bounded-block-sum condition; probe ratios grow with D."""
    n_freq = 2 * D - 1
    m = MultiplierSeq.ones(n_freq)
    fmap = {k: k for k in range(1, n_freq + 1)}
    # spec argument is unused under an explicit map; a singleton spec keeps the signature
    return build_hankel(m, LacunarySpec((1,)), basis_vectors(n_freq), D, freq_map=fmap)


SCAN_FAMILIES = {
    "lacunary": lacunary_basis_family,
    "ones": ones_basis_family,
}


def bound_scan(
    family,
    d_list: list[int],
    cfg: ProbeConfig | None = None,
    seed: int = 0,
    probe_families: tuple[str, ...] = PROBE_FAMILY_NAMES,
    threads: int = 1,
) -> list[ScanRow]:
    """Max probe ratio per D.  family is a registered name or a callable
    D -> BlockHankel.  Cells get deterministic spawned seeds and are
    aggregated in D_list order regardless of thread count."""
    if callable(family):
        builder, family_name = family, getattr(family, "__name__", "custom")
    else:
        if family not in SCAN_FAMILIES:
            raise ConfigurationError(
                f"unknown scan family {family!r}; choose from {sorted(SCAN_FAMILIES)}"
            )
        builder, family_name = SCAN_FAMILIES[family], family
    cfg = cfg or ProbeConfig()
    children = np.random.SeedSequence(entropy=seed).spawn(len(d_list))
    cell_seeds = [int(c.generate_state(1)[0]) for c in children]

    def cell(args) -> ScanRow:
        d, cell_seed = args
        g = builder(d)
        best, best_id = scan_probe_best(g, cfg, cell_seed, probe_families)
        return ScanRow(D=d, family=family_name, best_ratio=best, argmax_poly_id=best_id, seed=seed)

    jobs = list(zip(d_list, cell_seeds))
    if threads > 1 and len(jobs) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(cell, jobs))
    return [cell(j) for j in jobs]


def write_scan_csv(rows: list[ScanRow], path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["D", "family", "best_ratio", "argmax_poly_id", "seed"])
        for r in rows:
            writer.writerow([r.D, r.family, f"{r.best_ratio:.12g}", r.argmax_poly_id, r.seed])


# ---------------------------------------------------------------------------
# persistence: flat CMAT + metadata JSON


def save_hankel(path_stem, g: BlockHankel) -> None:
    path_stem = Path(path_stem)
    numkit.save_cmat(path_stem.with_suffix(".cmat"), g.flat(), label="hankel-flat")
    meta = {
        "D": g.D,
        "block_shape": list(g.block_shape),
        "system_kind": g.system.kind,
        "system_n": g.system.n,
        "system_seed": g.system.seed,
        "freq_map": {str(k): v for k, v in sorted(g.freq_map.items())},
        "multiplier": {str(k): [v.real, v.imag] for k, v in sorted(g.multiplier.values.items())},
        "support_cutoff": g.multiplier.support_cutoff,
    }
    path_stem.with_suffix(".json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def load_hankel_flat(path_stem) -> tuple[np.ndarray, dict]:
    path_stem = Path(path_stem)
    flat, _ = numkit.load_cmat(path_stem.with_suffix(".cmat"))
    meta = json.loads(path_stem.with_suffix(".json").read_text())
    return flat, meta
