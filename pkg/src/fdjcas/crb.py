"""Cramer-Rao bound on the target angle for a given precoder, accounting for
every echo path through the radar response derivative."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class UnobservableError(ValueError):
    """The configuration carries no information about the target angle."""


def fisher_information(precoder, path_response_deriv, noise_cov) -> float:
    """Per-snapshot Fisher information about the target angle.

    Parameters
    ----------
    precoder : (n_bs_tx, n_streams) complex matrix.
    path_response_deriv : (n_bs_rx, n_bs_tx) derivative of the radar
        response with respect to the target angle.
    noise_cov : (n_bs_rx, n_bs_rx) Hermitian positive-definite radar noise
        covariance.

    Returns
    -------
    2 * Tr(V^H D^H Sigma^-1 D V) with D the response derivative.
    """
    dv = np.asarray(path_response_deriv) @ np.asarray(precoder)
    whitened = np.linalg.solve(np.asarray(noise_cov), dv)
    return float(2.0 * np.sum(np.real(np.conj(dv) * whitened)))


def aoa_crb(precoder, path_response_deriv, noise_cov, snapshots: int = 1) -> float:
    """Lower bound on the variance of any unbiased target-angle estimator.

    The single-snapshot bound is the reciprocal of the Fisher information;
    ``snapshots`` coherent looks divide it.  Raises UnobservableError when
    the Fisher information vanishes rather than returning infinity, so
    constraint logic never compares against non-finite values.
    """
    if snapshots < 1:
        raise ValueError("snapshots must be at least 1")
    fisher = fisher_information(precoder, path_response_deriv, noise_cov)
    if not np.isfinite(fisher) or fisher <= 0.0:
        raise UnobservableError(
            "zero Fisher information: the precoder excites no angle-dependent response"
        )
    return 1.0 / (snapshots * fisher)


def crb_within_threshold(crb_value: float, threshold: float) -> bool:
    """Whether the bound meets the accuracy requirement (boundary inclusive)."""
    if crb_value <= 0.0 or threshold <= 0.0:
        raise ValueError("CRB and threshold must be positive")
    return crb_value <= threshold


@dataclass(frozen=True)
class CrbReport:
    """Bound value, the Fisher trace behind it, and the threshold verdict."""

    crb_value: float
    fisher_trace: float
    threshold: float
    satisfied: bool


def crb_report(precoder, path_response_deriv, noise_cov, threshold: float, snapshots: int = 1) -> CrbReport:
    """Evaluate the bound and its constraint in one shot."""
    fisher = fisher_information(precoder, path_response_deriv, noise_cov)
    if not np.isfinite(fisher) or fisher <= 0.0:
        raise UnobservableError(
            "zero Fisher information: the precoder excites no angle-dependent response"
        )
    value = 1.0 / (snapshots * fisher)
    return CrbReport(
        crb_value=value,
        fisher_trace=fisher / 2.0,
        threshold=threshold,
        satisfied=crb_within_threshold(value, threshold),
    )
