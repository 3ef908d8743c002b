"""Numerical laboratory for a polynomially bounded operator that is not
similar to a contraction, at finite truncation.

Modules: numkit (norms, polynomials, Toeplitz, CMAT persistence),
coeff_systems (CAR / Haar-unitary / basis-vector coefficient systems),
hankel (lacunary multipliers and block Hankel matrices), counterexample
(the bundled operator, probes, certificates), martingale (Monte Carlo
engine for the dyadic Moebius martingale), cli (reproduction driver).
"""

__version__ = "0.1.0"

from .coeff_systems import (
    CoefficientSystem,
    RowBoundEstimate,
    basis_vectors,
    car_jordan_wigner,
    car_relation_residual,
    conj_system,
    haar_unitaries,
    row_bound,
    tensor_conj_norm,
    tensor_conj_sum,
    trace_witness,
)
from .counterexample import (
    Certificates,
    OperatorBundle,
    PbSearch,
    TruncatedSpace,
    build_T,
    cb_certificate,
    certify,
    eps_for_target_c,
    fcn_experiment,
    pb_probe,
    poly_of_T,
    row_bound_check,
    similarity_lower,
)
from .errors import (
    ConfigurationError,
    DimensionError,
    DomainError,
    NonConvergenceError,
    PbncError,
)
from .hankel import (
    BlockHankel,
    BoundProbe,
    LacunarySpec,
    MultiplierSeq,
    OperatorSymbol,
    ProbeConfig,
    ScanRow,
    bound_probe,
    bound_scan,
    build_hankel,
    fejer_poly,
    hankel_symbol,
    lacunary_default,
    multiplier_block_sup,
)
from .martingale import (
    EtaWeight,
    MartingaleConfig,
    McEstimate,
    PathBatch,
    eta_modulus,
    eta_modulus_sup,
    eta_weights,
    fourier_extract,
    hankel_bridge_check,
    mobius,
    multiplier_extract,
    orthogonality_check,
    radial_mean_check,
    simulate_paths,
)
from .numkit import (
    NormEstimate,
    Polynomial,
    SupNormBound,
    load_cmat,
    op_norm,
    poly_derivative,
    poly_eval,
    poly_of_matrix,
    save_cmat,
    sup_norm,
    toeplitz,
)
