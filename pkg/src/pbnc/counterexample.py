"""The truncated counterexample operator and its certificates.

T = [[transpose(S), eps*G], [0, S]] acts on two copies of a truncated
vector-valued polynomial space: S is the degree-truncated shift, G the block
Hankel matrix of a lacunary multiplier over a coefficient system, and the
first copy carries dual coordinates (plain transpose, bilinear pairing
[x, y] = sum x_i y_i).

Two quantities are attached to a bundle and deliberately kept asymmetric:

* pb_probe: an empirical lower-bound search for the polynomial-boundedness
  constant sup ||P(T)|| / ||P||_inf.  Reported maxima are achieved by
  concrete polynomials and normalized by certified sup-norm upper bounds,
  so the probe never overstates the constant.  No upper bound is claimed.
* similarity_lower: a certified lower bound on the completely bounded norm
  of P -> P(T), hence on ||V|| ||V^{-1}|| for every invertible V with
  ||V^{-1} T V|| <= 1.  The certificate compresses the matrix polynomial
  sum_k conj(C_k) (x) (z^{K_k})(T) through coordinate isometries, which
  lands exactly on eps * n^{-1/2} * sum_k m(K_k) conj(C_k) (x) C_k.

With CAR systems the certificate grows like sqrt(n) while the probe stays
flat, the desk-scale form of the separation.

Supported frequencies must stay <= D: within that range the truncated
transpose(S)^a G S^b collapse exactly to G S^{a+b}, which is what makes the
block formula for P(T) agree with plain Horner evaluation to rounding.
Above D the truncation leaks and the two genuinely differ, so build_T
rejects such multipliers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coeff_systems import (
    CoefficientSystem,
    conj_system,
    haar_unitaries,
    row_bound,
)
from .errors import ConfigurationError, DimensionError, DomainError
from .hankel import (
    BlockHankel,
    LacunarySpec,
    MultiplierSeq,
    build_hankel,
    fejer_poly,
    lacunary_default,
    random_poly,
)
from .numkit import (
    OP_NORM_EXACT_MAX_DIM,
    Polynomial,
    op_norm,
    poly_derivative,
    poly_of_matrix,
    sup_norm,
    toeplitz,
)

DENSE_PROBE_MAX_DIM = 1024  # above this, probe norms go through structured matvecs
DENSE_T_ENTRY_BUDGET = 1 << 26


@dataclass(frozen=True)
class TruncatedSpace:
    """Degree-truncated vector-valued polynomial space; basis (i, j) <-> z^i e_j,
    i major."""

    D: int
    h_dim: int

    def __post_init__(self):
        if self.D < 1 or self.h_dim < 1:
            raise ConfigurationError("TruncatedSpace needs D >= 1 and h_dim >= 1")

    @property
    def total_dim(self) -> int:
        return self.D * self.h_dim


@dataclass
class OperatorBundle:
    space: TruncatedSpace
    hankel: BlockHankel
    eps: float
    system: CoefficientSystem
    spec: LacunarySpec
    multiplier: MultiplierSeq
    provenance: dict = field(default_factory=dict)

    @property
    def total_dim(self) -> int:
        return 2 * self.space.total_dim

    @property
    def shift(self) -> np.ndarray:
        """D x D one-step shift z^i -> z^{i+1}, truncated."""
        return np.eye(self.space.D, k=-1, dtype=np.complex128)

    @property
    def S(self) -> np.ndarray:
        return np.kron(self.shift, np.eye(self.space.h_dim, dtype=np.complex128))

    @property
    def G_flat(self) -> np.ndarray:
        return self.hankel.flat()

    @property
    def T(self) -> np.ndarray:
        n = self.total_dim
        if n * n > DENSE_T_ENTRY_BUDGET:
            raise ConfigurationError(
                f"dense T would be {n}x{n}; use the structured matvec routines"
            )
        s = self.S
        z = np.zeros_like(s)
        return np.block([[s.T, self.eps * self.G_flat], [z, s]])


def build_T(
    s_sys: CoefficientSystem,
    spec: LacunarySpec,
    m: MultiplierSeq,
    D: int | None = None,
    eps: float = 1.0,
) -> OperatorBundle:
    """Assemble the bundle.  Default D = 2^n + 1 for an n-level spec, so every
    frequency K_t <= 2^n sits inside the exactness window."""
    if eps < 0:
        raise DomainError("eps must be >= 0")
    if spec.L != s_sys.n:
        raise ConfigurationError(
            f"spec has {spec.L} frequencies but the system has {s_sys.n} elements"
        )
    if not s_sys.is_square:
        raise ConfigurationError("bundle systems must have square elements")
    if D is None:
        D = 2**spec.L + 1
    if D < 1:
        raise ConfigurationError("build_T needs D >= 1")
    supported = [q for q in m.support if q <= 2 * D - 1]
    over = [q for q in supported if q > D]
    if over:
        raise ConfigurationError(
            f"multiplier supported at {over} beyond D = {D}; the truncated block "
            "formula is exact only for frequencies <= D"
        )
    g = build_hankel(m, spec, s_sys, D)
    h_dim = s_sys.op_dim[0]
    space = TruncatedSpace(D=D, h_dim=h_dim)
    prov = {
        "system_kind": s_sys.kind,
        "n": s_sys.n,
        "spec": list(spec.K),
        "seed": s_sys.seed,
        "eps": float(eps),
        "D": D,
    }
    return OperatorBundle(
        space=space, hankel=g, eps=float(eps), system=s_sys, spec=spec, multiplier=m,
        provenance=prov,
    )


def with_eps(b: OperatorBundle, eps: float) -> OperatorBundle:
    return build_T(b.system, b.spec, b.multiplier, D=b.space.D, eps=eps)


def poly_of_T(b: OperatorBundle, p: Polynomial) -> np.ndarray:
    """P(T) by the block formula [[P(S)^t, eps*G*(T(P') (x) I)], [0, P(S)]];
    agrees with Horner evaluation to rounding because supported frequencies
    stay <= D."""
    D, h = b.space.D, b.space.h_dim
    ps_small = poly_of_matrix(p, b.shift)  # = toeplitz(p, D), shift is nilpotent
    ps = np.kron(ps_small, np.eye(h, dtype=np.complex128))
    tp = np.kron(toeplitz(poly_derivative(p), D), np.eye(h, dtype=np.complex128))
    corner = b.eps * (b.G_flat @ tp)
    z = np.zeros_like(ps)
    return np.block([[ps.T, corner], [z, ps]])


# ---------------------------------------------------------------------------
# structured matvecs: P(T) and P(T)^H without materializing P(T)


def _poly_t_applies(b: OperatorBundle, p: Polynomial):
    """(apply, apply_adjoint) closures for P(T) on flat vectors of length
    2*D*h.  Uses D x D Toeplitz factors and the Hankel anti-diagonal apply;
    cost per matvec is O(D^2 h) instead of O((Dh)^2)."""
    D, h = b.space.D, b.space.h_dim
    t_p = toeplitz(p, D)
    t_pp = toeplitz(poly_derivative(p), D)
    g = b.hankel
    eps = b.eps
    half = D * h

    def apply(x: np.ndarray) -> np.ndarray:
        x1 = x[:half].reshape(D, h)
        x2 = x[half:].reshape(D, h)
        y2 = t_p @ x2
        w = t_pp @ x2
        y1 = t_p.T @ x1 + eps * g.apply_flat(w.reshape(-1)).reshape(D, h)
        return np.concatenate([y1.reshape(-1), y2.reshape(-1)])

    def apply_adjoint(x: np.ndarray) -> np.ndarray:
        x1 = x[:half].reshape(D, h)
        x2 = x[half:].reshape(D, h)
        y1 = t_p.conj() @ x1  # (t_p.T)^H
        gh = g.apply_flat_adjoint(x1.reshape(-1)).reshape(D, h)
        y2 = t_p.conj().T @ x2 + eps * (t_pp.conj().T @ gh)
        return np.concatenate([y1.reshape(-1), y2.reshape(-1)])

    return apply, apply_adjoint


def _power_norm(
    apply, apply_adjoint, dim: int, rng: np.random.Generator,
    tol: float = 1e-10, max_iter: int = 20000, want_vectors: bool = False,
):
    """Top singular value (and optionally the pair) of the operator given by
    matvec closures, via power iteration on A^H A."""
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    rho = 0.0
    for _ in range(max_iter):
        av = apply(v)
        rho_new = float(np.real(np.vdot(av, av)))
        if rho_new == 0.0:
            return (0.0, av, v) if want_vectors else 0.0
        w = apply_adjoint(av)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            rho = rho_new
            break
        v = w / nw
        if abs(rho_new - rho) < tol * max(rho_new, 1e-300):
            rho = rho_new
            break
        rho = rho_new
    sigma = float(np.sqrt(max(rho, 0.0)))
    if not want_vectors:
        return sigma
    av = apply(v)
    nav = np.linalg.norm(av)
    u = av / nav if nav > 0 else av
    return sigma, u, v


def _poly_t_norm(b: OperatorBundle, p: Polynomial, rng: np.random.Generator,
                 want_vectors: bool = False):
    """||P(T)||, dense below DENSE_PROBE_MAX_DIM, structured matvecs above."""
    if b.total_dim <= DENSE_PROBE_MAX_DIM:
        mat = poly_of_T(b, p)
        if want_vectors:
            u_all, s_all, vh_all = np.linalg.svd(mat)
            return float(s_all[0]), u_all[:, 0], vh_all[0].conj()
        return float(op_norm(mat))
    apply, apply_adjoint = _poly_t_applies(b, p)
    return _power_norm(apply, apply_adjoint, b.total_dim, rng, want_vectors=want_vectors)


# ---------------------------------------------------------------------------
# polynomial-boundedness probe


@dataclass(frozen=True)
class PbSearch:
    restarts: int = 4
    max_degree: int | None = None
    seed: int = 0


def _pb_ratio(b: OperatorBundle, p: Polynomial, rng: np.random.Generator) -> float:
    norm = _poly_t_norm(b, p, rng)
    return norm / sup_norm(p).certified_upper


def _pb_monomial_grid(max_degree: int, freqs: tuple[int, ...]) -> list[int]:
    if max_degree <= 64:
        return list(range(0, max_degree + 1))
    ks = set(range(0, 65))
    ks.update(1 << j for j in range(1, 12) if (1 << j) <= max_degree)
    for q in freqs:
        ks.update(x for x in (q - 1, q, q + 1) if 0 <= x <= max_degree)
    ks.add(max_degree)
    return sorted(ks)


def _pb_ascent(
    b: OperatorBundle, start: Polynomial, max_degree: int, steps: int,
    rng: np.random.Generator,
) -> float:
    """Maximize Re sum_k P-hat(k) <u, T^k v> over the grid-discretized
    sup-norm ball: alternate top singular pair updates of (u, v) with
    Fejer-damped coefficient gradient steps, renormalizing on the sup grid."""
    c = np.zeros(max_degree + 1, dtype=np.complex128)
    c[: start.coeffs.size] = start.coeffs
    damp = 1.0 - np.arange(max_degree + 1) / (max_degree + 1.0)
    apply_t, _ = _poly_t_applies(b, Polynomial.monomial(1))
    best = 0.0
    for _ in range(steps):
        p = Polynomial(c)
        if p.is_zero:
            break
        sigma, u, v = _poly_t_norm(b, p, rng, want_vectors=True)
        ratio = sigma / sup_norm(p).certified_upper
        best = max(best, ratio)
        if sigma == 0.0:
            break
        # grad wrt P-hat(k) of Re <u, P(T) v> is conj(<u, T^k v>)
        grad = np.zeros(max_degree + 1, dtype=np.complex128)
        vk = v.copy()
        grad[0] = np.conj(np.vdot(u, vk))
        for k in range(1, max_degree + 1):
            vk = apply_t(vk)
            if not np.any(vk):
                break
            grad[k] = np.conj(np.vdot(u, vk))
        step = 0.5 * np.linalg.norm(c) / max(np.linalg.norm(grad), 1e-30)
        c = c + step * damp * grad
        gm = sup_norm(Polynomial(c)).grid_max
        if gm > 0:
            c /= gm
    return best


def pb_probe(b: OperatorBundle, search: PbSearch | None = None) -> float:
    """Empirical max of ||P(T)|| / certified sup|P| over monomials, Fejer
    means, seeded random polynomials, and coefficient ascent.  A lower bound
    on the polynomial-boundedness constant; includes P = 1, so the result is
    >= 1 exactly."""
    search = search or PbSearch()
    max_degree = search.max_degree
    cap = 2 * b.space.D - 2  # T^{2D} = 0: higher coefficients act as zero
    if max_degree is None:
        max_degree = cap
    if max_degree > cap:
        raise ConfigurationError(f"max_degree {max_degree} exceeds 2D-2 = {cap}")
    ss = np.random.SeedSequence(entropy=search.seed)
    child_norm, child_rand, child_ascent = ss.spawn(3)
    nrng = np.random.default_rng(child_norm)

    best = 0.0
    for k in _pb_monomial_grid(max_degree, b.multiplier.support):
        best = max(best, _pb_ratio(b, Polynomial.monomial(k), nrng))

    deg = 2
    while deg <= max_degree:
        best = max(best, _pb_ratio(b, fejer_poly(deg), nrng))
        deg *= 2

    rng = np.random.default_rng(child_rand)
    degrees = np.unique(np.geomspace(2, max(max_degree, 2), num=4).astype(int))
    degrees = degrees[degrees <= max(max_degree, 1)]
    for deg in degrees:
        for _ in range(max(1, search.restarts)):
            best = max(best, _pb_ratio(b, random_poly(int(deg), rng), nrng))

    arng = np.random.default_rng(child_ascent)
    n_starts = max(1, search.restarts // 2)
    starts = [fejer_poly(min(8, max(max_degree, 1)))]
    for _ in range(n_starts - 1):
        starts.append(random_poly(min(16, max(max_degree, 1)), arng))
    for start in starts:
        best = max(best, _pb_ascent(b, start, max_degree, steps=12, rng=arng))
    return best


def von_neumann_excess(b: OperatorBundle, n_polys: int, seed: int = 0) -> float:
    """max over seeded polynomials of ||P(T)|| - certified sup|P|; for a
    contraction bundle (eps = 0) this never exceeds rounding."""
    ss = np.random.SeedSequence(entropy=seed)
    rng = np.random.default_rng(ss)
    nrng = np.random.default_rng(ss.spawn(1)[0])
    worst = -np.inf
    cap = 2 * b.space.D - 2
    for _ in range(n_polys):
        deg = int(rng.integers(1, max(cap, 2)))
        p = random_poly(min(deg, cap), rng)
        if p.is_zero:
            continue
        excess = _poly_t_norm(b, p, nrng) - sup_norm(p).certified_upper
        worst = max(worst, excess)
    return float(worst)


# ---------------------------------------------------------------------------
# certified lower bound on the completely bounded norm


def _weighted_tensor_norm(system: CoefficientSystem, weights: dict[int, complex],
                          spec: LacunarySpec) -> float:
    """|| sum_t w(K_t) conj(C_t) (x) C_t ||, the compression target."""
    d_out, d_in = system.op_dim
    if d_out != d_in:
        raise ConfigurationError("weighted tensor norm needs square elements")
    if (d_out * d_out) > OP_NORM_EXACT_MAX_DIM:
        raise ConfigurationError(
            f"tensor dimension {d_out * d_out} exceeds the exact operator-norm budget"
        )
    acc = np.zeros((d_out * d_out, d_out * d_out), dtype=np.complex128)
    for t, kt in enumerate(spec.K, start=1):
        w = complex(weights.get(kt, 0.0))
        if w == 0:
            continue
        c = system.elements[t - 1]
        acc += w * np.kron(c.conj(), c)
    return float(op_norm(acc))


def cb_certificate(b: OperatorBundle, normalizer_restarts: int = 32,
                   normalizer_seed: int = 0) -> float:
    """Certified lower bound on the cb norm of P -> P(T).

    The matrix polynomial A(z) = n^{-1/2} sum_k conj(C_k) z^{K_k} has
    sup-norm <= row bound of the conjugated system (exactly 1 for CAR, since
    conjugation preserves the anticommutation relations).  Compressing
    (id (x) u_T)(A) through the coordinate isometries -- row 0 of the dual
    summand out, e_0 (x) x into the analytic summand -- lands exactly on

        eps * n^{-1/2} * sum_k m(K_k) conj(C_k) (x) C_k,

    whose norm divided by the sup bound of A is the certificate.  For CAR
    the division is by the exact value 1; for other systems the conjugated
    row bound is re-estimated empirically and divided out.
    """
    n = b.system.n
    compressed = b.eps * (n ** -0.5) * _weighted_tensor_norm(
        b.system, dict(b.multiplier.values), b.spec
    )
    if b.system.kind == "car":
        normalizer = 1.0
    else:
        normalizer = float(
            row_bound(conj_system(b.system), restarts=normalizer_restarts,
                      seed=normalizer_seed)
        )
        normalizer = max(normalizer, 1e-300)
    return compressed / normalizer


def similarity_lower(b: OperatorBundle, **kw) -> float:
    """Every invertible V with ||V^{-1} T V|| <= 1 has ||V|| ||V^{-1}|| at
    least this value (the easy dilation direction of the similarity
    criterion)."""
    return cb_certificate(b, **kw)


@dataclass(frozen=True)
class Certificates:
    pb_probe: float
    cb_lower: float
    similarity_lower: float
    N: int
    target_c: float | None = None


def certify(b: OperatorBundle, search: PbSearch | None = None,
            target_c: float | None = None) -> Certificates:
    cb = cb_certificate(b)
    return Certificates(
        pb_probe=pb_probe(b, search),
        cb_lower=cb,
        similarity_lower=cb,
        N=b.total_dim,
        target_c=target_c,
    )


# ---------------------------------------------------------------------------
# target-c scaling and the growth experiment


def eps_for_target_c(b: OperatorBundle, c: float, c_probe: float) -> float:
    """eps = (c - 1) / C_probe, aiming the rescaled bundle's probe at <= c;
    empirical, since C_probe is itself a lower-bound estimate."""
    if c <= 1:
        raise DomainError("target c must exceed 1")
    if c_probe <= 0:
        raise DomainError("C_probe must be positive")
    return (c - 1.0) / c_probe


def _light_hankel_probe(g: BlockHankel, seed: int) -> float:
    """Cheap lower bound for the Hankel boundedness constant.  The Gram
    matrix is assembled once; each probe runs a power iteration on
    T(f')^H (G^H G) T(f'), whose Rayleigh quotients never exceed the true
    norm, so the returned ratio is honest."""
    from .hankel import _gram_operator

    gop = _gram_operator(g)
    D = g.D
    _, in_dim = g.block_shape
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))

    def ratio_of(f: Polynomial) -> float:
        t = toeplitz(poly_derivative(f), D)
        th = t.conj().T

        def m_apply(v):
            q = (t @ v.reshape(D, in_dim)).reshape(-1)
            return (th @ gop(q).reshape(D, in_dim)).reshape(-1)

        v = rng.standard_normal(D * in_dim) + 1j * rng.standard_normal(D * in_dim)
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(500):
            w = m_apply(v)
            lam_new = float(np.real(np.vdot(v, w)))
            nw = np.linalg.norm(w)
            if nw == 0.0:
                lam = lam_new
                break
            v = w / nw
            if abs(lam_new - lam) < 1e-9 * max(lam_new, 1e-300):
                lam = lam_new
                break
            lam = lam_new
        return float(np.sqrt(max(lam, 0.0))) / sup_norm(f).certified_upper

    best = ratio_of(Polynomial.monomial(1))
    deg = 4
    while deg <= 2 * g.D - 2:
        best = max(best, ratio_of(fejer_poly(deg)))
        deg *= 4
    for q in g.multiplier.support:
        if q < 2 * g.D:
            best = max(best, ratio_of(Polynomial.monomial(q)))
    for _ in range(4):
        f = random_poly(min(16, 2 * g.D - 1), rng)
        if not f.is_zero:
            best = max(best, ratio_of(f))
    return best


def haar_bundle_for_target(n: int, c: float, seed: int) -> tuple[OperatorBundle, dict]:
    """Haar-unitary bundle at target probe constant c: dim H = n, D = 2^n + 1,
    multiplier 1/K2 on the default dyadic frequencies (K2 = empirical row
    bound of the system), eps from the probed Hankel constant."""
    if c <= 1:
        raise DomainError("target c must exceed 1")
    ss = np.random.SeedSequence(entropy=seed)
    sys_child, rb_child, probe_child = ss.spawn(3)
    sys_seed = int(sys_child.generate_state(1)[0])
    system = haar_unitaries(n, n, seed=sys_seed)
    spec = lacunary_default(n)
    k2 = float(row_bound(system, restarts=16, seed=int(rb_child.generate_state(1)[0])))
    m = MultiplierSeq({k: 1.0 / k2 for k in spec.K}, support_cutoff=max(spec.K))
    D = 2**n + 1
    g = build_hankel(m, spec, system, D)
    c_probe = _light_hankel_probe(g, seed=int(probe_child.generate_state(1)[0]))
    ref = build_T(system, spec, m, D=D, eps=0.0)
    eps = eps_for_target_c(ref, c, c_probe)
    bundle = build_T(system, spec, m, D=D, eps=eps)
    info = {"K2": k2, "C_probe": c_probe, "eps": eps, "system_seed": sys_seed}
    return bundle, info


def fcn_experiment(n: int, c: float, seed: int = 0,
                   search: PbSearch | None = None) -> dict:
    """One row of the growth experiment: cb_over_pb = similarity_lower /
    pb_probe and its (c-1)sqrt(n) scaling.  Across an n-grid the scaled
    column staying inside a positive band reproduces the lower half of the
    two-sided sqrt(n) estimate empirically."""
    bundle, info = haar_bundle_for_target(n, c, seed)
    if search is None:
        search = PbSearch(restarts=2, max_degree=min(2 * bundle.space.D - 2, 64),
                          seed=seed)
    sim = similarity_lower(bundle, normalizer_seed=seed)
    pb = pb_probe(bundle, search)
    cb_over_pb = sim / pb
    scaled = cb_over_pb / ((c - 1.0) * np.sqrt(n))
    report = {
        "n": n,
        "c": c,
        "cb_over_pb": cb_over_pb,
        "scaled": scaled,
        "similarity_lower": sim,
        "pb_probe": pb,
        "N": bundle.total_dim,
        "seed": seed,
    }
    report.update(info)
    return report


# ---------------------------------------------------------------------------
# row-bound inequality for block matrices


def _row_bound_holds(blocks: np.ndarray, slack: float = 1e-10) -> bool:
    """|| (a_ij) || <= sqrt(n) * max_i || (sum_j a_ij a_ij^H)^{1/2} ||."""
    n = blocks.shape[0]
    if blocks.shape[1] != n:
        raise DimensionError("row_bound_check needs an n x n grid of blocks")
    flat = np.block([[blocks[i, j] for j in range(n)] for i in range(n)])
    lhs = float(op_norm(flat))
    rhs_rows = []
    for i in range(n):
        s = sum(blocks[i, j] @ blocks[i, j].conj().T for j in range(n))
        w = np.linalg.eigvalsh(s)
        rhs_rows.append(np.sqrt(max(float(w[-1]), 0.0)))
    rhs = np.sqrt(n) * max(rhs_rows)
    return lhs <= rhs + slack


def row_bound_check(blocks, trials: int = 0, seed: int = 0) -> bool:
    """Check the row-bound inequality on the given n x n block grid, plus
    `trials` seeded random grids of the same block shape."""
    arr = np.array([[np.asarray(b, dtype=np.complex128) for b in row] for row in blocks])
    if not _row_bound_holds(arr):
        return False
    if trials > 0:
        n = arr.shape[0]
        dims = arr[0, 0].shape
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
        for _ in range(trials):
            rand = (rng.standard_normal((n, n) + dims)
                    + 1j * rng.standard_normal((n, n) + dims))
            if not _row_bound_holds(rand):
                return False
    return True
