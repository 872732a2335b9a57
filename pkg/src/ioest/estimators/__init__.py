"""Parameter estimators: enumeration (ENA), semiparametric (SPA) and two baselines."""

from ioest.estimators._common import (
    MAX_NET_SIZE,
    EstimateResult,
    EstimatorError,
    delta_net,
    net_size,
)
from ioest.estimators.baselines import (
    baseline_grid,
    baseline_loss,
    coordinate_descent,
    golden_section,
    kka_estimate,
    kka_residuals,
    via_estimate,
    via_residuals,
)
from ioest.estimators.ena import ena_estimate
from ioest.estimators.kernel import (
    KernelConfig,
    cross_validate,
    cv_scores,
    default_gamma_grid,
    l2nw_denoise,
    l2nw_predict,
)
from ioest.estimators.spa import (
    projected_gradient_norm,
    spa_estimate,
    suboptimality_grad,
    suboptimality_loss,
)

__all__ = [
    "MAX_NET_SIZE",
    "EstimateResult",
    "EstimatorError",
    "KernelConfig",
    "baseline_grid",
    "baseline_loss",
    "coordinate_descent",
    "cross_validate",
    "cv_scores",
    "default_gamma_grid",
    "delta_net",
    "ena_estimate",
    "golden_section",
    "kka_estimate",
    "kka_residuals",
    "l2nw_denoise",
    "l2nw_predict",
    "net_size",
    "projected_gradient_norm",
    "spa_estimate",
    "suboptimality_grad",
    "suboptimality_loss",
    "via_estimate",
    "via_residuals",
]
