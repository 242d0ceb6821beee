"""Closed-form distance bounds, Gaussian noise calibration, and certified
parameter release.

The bound between the pre- and post-removal optima is

    (L |DV| + sqrt(4 m lambda C |R| + L^2 |DV|^2)) / (m lambda)

where L is the per-node loss Lipschitz constant, lambda the strong-convexity
modulus, C the per-node loss bound at the optima, |DV| the number of deleted
nodes, |R| the reach-set size, and m the training-set size. The bound between
the retrained optimum and the influence approximation adds the norm of the
correction step divided by m. Release noise is the Gaussian mechanism:
sigma >= (sensitivity / epsilon) * sqrt(2 ln(1.25 / delta)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .influence import InfluenceResult
from .models import Objective


@dataclass(frozen=True)
class AssumptionConstants:
    """Objective-regularity constants the bounds are evaluated with.

    Defaults are the conventional values used when the constants are assumed
    rather than measured: Lipschitz 0.25, strong convexity 0.05, per-node
    loss bound 3.0.
    """

    lipschitz: float = 0.25
    strong_convexity: float = 0.05
    loss_bound: float = 3.0

    def __post_init__(self):
        if self.lipschitz <= 0 or self.strong_convexity <= 0 or self.loss_bound <= 0:
            raise ValueError("assumption constants must be strictly positive")

    def to_dict(self) -> dict:
        return {"lipschitz": self.lipschitz,
                "strong_convexity": self.strong_convexity,
                "loss_bound": self.loss_bound}


def bound_optimals(constants: AssumptionConstants, m: int,
                   num_deleted: int, reach_size: int) -> float:
    """Distance bound between the original and retrained optima."""
    if m <= 0:
        raise ValueError("training-set size m must be positive")
    lips, lam, cbound = (constants.lipschitz, constants.strong_convexity,
                         constants.loss_bound)
    root = math.sqrt(4.0 * m * lam * cbound * reach_size
                     + lips * lips * num_deleted * num_deleted)
    return (lips * num_deleted + root) / (m * lam)


def bound_approx(constants: AssumptionConstants, m: int, num_deleted: int,
                 reach_size: int, correction_norm: float) -> float:
    """Distance bound between the retrained optimum and the influence
    approximation; equals ``bound_optimals`` plus ``correction_norm / m``."""
    if correction_norm < 0:
        raise ValueError("correction norm must be nonnegative")
    return (bound_optimals(constants, m, num_deleted, reach_size)
            + correction_norm / m)


def calibrate_sigma(sensitivity: float, epsilon: float, delta: float) -> float:
    """Minimal admissible Gaussian noise scale for an (epsilon, delta)
    certification with the given l2 sensitivity."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if sensitivity < 0:
        raise ValueError("sensitivity must be nonnegative")
    return (sensitivity / epsilon) * math.sqrt(2.0 * math.log(1.25 / delta))


def gaussian_noise(p: int, sigma: float, seed: int) -> np.ndarray:
    """Seeded spherical Gaussian draw, reproducible across implementations.

    Uniform variates come from the PCG64 stream as 53-bit integers mapped to
    the open interval (0, 1), then pass through the inverse normal CDF. The
    exact recipe is documented in the README so certified releases can be
    replayed from (seed, sigma, p) alone.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.integers(1, 2**53, size=p).astype(np.float64) / float(2**53)
    return ndtri(u) * sigma


@dataclass
class CertificateReport:
    """Everything needed to audit one certified release."""

    bound_optimals: float
    bound_approx: float
    num_deleted: int
    reach_size: int
    m: int
    correction_norm: float
    epsilon: float
    delta: float
    sigma: float
    sigma_applied: float
    noise_seed: int
    constants: AssumptionConstants
    actual_distance: float | None = None
    empirical: dict | None = None

    def to_dict(self) -> dict:
        out = {
            "bound_optimals": self.bound_optimals,
            "bound_approx": self.bound_approx,
            "num_deleted": self.num_deleted,
            "reach_size": self.reach_size,
            "m": self.m,
            "correction_norm": self.correction_norm,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "sigma": self.sigma,
            "sigma_applied": self.sigma_applied,
            "noise_seed": self.noise_seed,
            "constants": self.constants.to_dict(),
            "actual_distance": self.actual_distance,
        }
        if self.empirical is not None:
            out["empirical"] = self.empirical
        return out


def certify(result: InfluenceResult, constants: AssumptionConstants,
            epsilon: float = 1.0, delta: float = 0.01, noise_seed: int = 0,
            sigma: float | None = None, actual_distance: float | None = None,
            empirical: dict | None = None
            ) -> tuple[np.ndarray, CertificateReport]:
    """Release noised parameters together with their certificate.

    ``sigma=None`` applies the minimal calibrated noise scale for the
    computed sensitivity bound. Passing an explicit ``sigma`` releases with
    that scale instead (the certificate records both), which is how
    evaluation runs keep utility measurable while the calibrated value
    documents what a strict release would add.
    """
    b_opt = bound_optimals(constants, result.m_used, result.num_deleted_nodes,
                           result.reach_size)
    b_approx = bound_approx(constants, result.m_used,
                            result.num_deleted_nodes, result.reach_size,
                            result.correction_norm_total)
    sigma_min = calibrate_sigma(b_approx, epsilon, delta)
    applied = sigma_min if sigma is None else float(sigma)
    noise = gaussian_noise(len(result.theta_unlearned), applied, noise_seed)
    theta_certified = result.theta_unlearned + noise
    report = CertificateReport(
        bound_optimals=b_opt,
        bound_approx=b_approx,
        num_deleted=result.num_deleted_nodes,
        reach_size=result.reach_size,
        m=result.m_used,
        correction_norm=result.correction_norm_total,
        epsilon=epsilon,
        delta=delta,
        sigma=sigma_min,
        sigma_applied=applied,
        noise_seed=noise_seed,
        constants=constants,
        actual_distance=actual_distance,
        empirical=empirical,
    )
    return theta_certified, report


def measure_empirical_constants(obj_original: Objective,
                                obj_retained: Objective,
                                theta_original: np.ndarray,
                                theta_retrained: np.ndarray,
                                defaults: AssumptionConstants
                                ) -> dict:
    """Per-run surrogates for the assumption constants.

    Measures the max per-node loss at both optima (for the loss bound), the
    max per-node gradient norm at both optima (for the Lipschitz constant),
    and takes the regularizer weight as the strong-convexity modulus, then
    reports whether the configured defaults held on this run.
    """
    max_loss = 0.0
    max_grad = 0.0
    for obj in (obj_original, obj_retained):
        nodes = obj.train_ids
        if len(nodes) == 0:
            continue
        for theta in (theta_original, theta_retrained):
            losses = obj.per_node_losses(theta, nodes)
            max_loss = max(max_loss, float(np.abs(losses).max()))
            gnorms = obj.per_node_grad_norms(theta, nodes)
            max_grad = max(max_grad, float(gnorms.max()))
    measured = AssumptionConstants(
        lipschitz=max(max_grad, 1e-12),
        strong_convexity=obj_original.reg_lambda,
        loss_bound=max(max_loss, 1e-12),
    )
    return {
        "constants": measured.to_dict(),
        "loss_bound_held": max_loss <= defaults.loss_bound,
        "lipschitz_held": max_grad <= defaults.lipschitz,
        "max_per_node_loss": max_loss,
        "max_per_node_grad_norm": max_grad,
    }
