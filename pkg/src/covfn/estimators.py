"""Plug-in and bias-reduced estimators of <f(Sigma), B>.

The plug-in estimator evaluates f at the sample covariance.  The
bias-reduced estimator of order k averages, over N independent bootstrap
chains started at the sample covariance, the weighted combination
sum_i c_{k,i} <f(state_i), B> with hockey-stick weights
c_{k,i} = (-1)^i C(k+1, i+1); its conditional expectation removes the
first k orders of plug-in bias.  Confidence intervals use the asymptotic
standard deviation sigma_f = sqrt(2) ||Sigma^{1/2} Df(Sigma;B) Sigma^{1/2}||_2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import BadAlpha, DimMismatch, DomainError, NotPSD
from .functions import ScalarFunction
from .sampling import DataMatrix, RngStream, sample_covariance
from .symmat import (
    SymMat,
    apply_scalar_function,
    as_symmat,
    domain_margin,
    eigh,
    loewner_first_difference,
    trace_inner_product,
)

__all__ = [
    "EstimateReport",
    "plugin_estimate",
    "sigma_f",
    "hockey_stick_weights",
    "hockey_stick_weight_ints",
    "bias_reduced_estimate",
    "confidence_interval",
    "normal_quantile",
]


@dataclass(frozen=True)
class EstimateReport:
    """Point estimate with uncertainty and full provenance."""

    functional_value: float
    estimator_kind: str  # "plugin" or "bias_reduced"
    k: int
    mc_stderr: float
    sigma_hat: float
    ci: tuple
    alpha: float
    n: int
    d: int
    chains: int
    master_seed: int | None
    stream_id: int | None
    failed_chains: int = 0


def normal_quantile(p: float) -> float:
    """Standard normal quantile (scipy's ndtri, well under 1e-8 error)."""
    return float(ndtri(p))


def confidence_interval(point: float, sigma_hat: float, n: int, alpha: float) -> tuple:
    """Symmetric interval point +/- z_{1-alpha/2} * sigma_hat / sqrt(n)."""
    if not (0.0 < alpha < 1.0):
        raise BadAlpha(f"alpha must be in (0, 1), got {alpha}")
    if sigma_hat < 0:
        raise ValueError("sigma_hat must be >= 0")
    if n < 1:
        raise ValueError("n must be >= 1")
    z = normal_quantile(1.0 - alpha / 2.0)
    half = z * sigma_hat / math.sqrt(n)
    return (point - half, point + half)


def sigma_f(sigma, f: ScalarFunction, b) -> float:
    """Asymptotic std dev sqrt(2) ||Sigma^{1/2} Df(Sigma;B) Sigma^{1/2}||_2.

    Computed in the eigenbasis of Sigma, where both the square root and
    the Loewner-matrix derivative are exact on eigenvalues.
    """
    sigma = as_symmat(sigma)
    b = as_symmat(b)
    if sigma.dim != b.dim:
        raise DimMismatch(f"dims {sigma.dim} and {b.dim} differ")
    dec = eigh(sigma)
    lam = dec.eigenvalues
    scale = float(np.abs(lam).max()) if lam.size else 0.0
    if lam.min() < -1e-10 * (1.0 + scale):
        raise NotPSD(f"minimum eigenvalue {lam.min():g} below tolerance")
    lam_pos = np.maximum(lam, 0.0)
    loewner = loewner_first_difference(lam, f)
    u = dec.eigenvectors
    b_eig = u.T @ b.entries @ u
    df_eig = loewner * b_eig
    root = np.sqrt(lam_pos)
    sandwiched = root[:, None] * df_eig * root[None, :]
    return math.sqrt(2.0) * float(np.linalg.norm(sandwiched))


def hockey_stick_weight_ints(k: int) -> list:
    """Exact integer chain weights c_{k,i} = (-1)^i C(k+1, i+1)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k > 62:
        raise OverflowError("weights exceed 64-bit integers for k > 62")
    return [(-1) ** i * math.comb(k + 1, i + 1) for i in range(k + 1)]


def hockey_stick_weights(k: int) -> np.ndarray:
    """Chain weights as floats; computed in integer arithmetic, sum is 1."""
    return np.array(hockey_stick_weight_ints(k), dtype=float)


def _functional_of(sigma_hat: SymMat, f: ScalarFunction, b: SymMat) -> float:
    return trace_inner_product(apply_scalar_function(eigh(sigma_hat), f), b)


def plugin_estimate(x: DataMatrix, f: ScalarFunction, b, alpha: float = 0.05,
                    master_seed=None, stream_id=None) -> EstimateReport:
    """Naive plug-in estimate <f(sample covariance), B> with its CI."""
    b = as_symmat(b)
    sigma_hat = sample_covariance(x)
    if sigma_hat.dim != b.dim:
        raise DimMismatch(f"data dim {sigma_hat.dim}, B dim {b.dim}")
    value = _functional_of(sigma_hat, f, b)
    shat = sigma_f(sigma_hat, f, b)
    ci = confidence_interval(value, shat, x.n, alpha)
    return EstimateReport(
        functional_value=value, estimator_kind="plugin", k=0,
        mc_stderr=0.0, sigma_hat=shat, ci=ci, alpha=alpha,
        n=x.n, d=x.d, chains=0,
        master_seed=master_seed, stream_id=stream_id,
    )


def _batch_psd_roots(states: np.ndarray) -> np.ndarray:
    """Symmetric square roots of a stack of (near-)PSD matrices."""
    lam, u = np.linalg.eigh(states)
    scale = np.abs(lam).max(axis=-1)
    if np.any(lam[..., 0] < -1e-8 * (1.0 + scale)):
        raise NotPSD("chain state has a significantly negative eigenvalue")
    root = np.sqrt(np.maximum(lam, 0.0))
    return np.einsum("...im,...m,...jm->...ij", u, root, u)


def _simulate_chain_states(start: np.ndarray, k: int, n: int,
                           streams: list) -> np.ndarray:
    """States (N, k+1, d, d) of N bootstrap chains, one rng stream each.

    Per-chain randomness is drawn sequentially from that chain's stream,
    so each slice reproduces ``bootstrap_chain`` run on the same stream
    (up to batched-eigh rounding).
    """
    nchains = len(streams)
    d = start.shape[0]
    states = np.empty((nchains, k + 1, d, d))
    states[:, 0] = start
    for t in range(1, k + 1):
        roots = _batch_psd_roots(states[:, t - 1])
        z = np.stack([s.standard_normal(n, d) for s in streams])
        x = np.einsum("rni,rij->rnj", z, roots)
        states[:, t] = np.einsum("rni,rnj->rij", x, x) / n
    return states


def bias_reduced_estimate(x: DataMatrix, f: ScalarFunction, b, k: int,
                          nchains: int, rng: RngStream,
                          alpha: float = 0.05) -> EstimateReport:
    """Order-k bias-reduced estimate of <f(Sigma), B> via bootstrap chains.

    Simulates ``nchains`` independent chains of length k+1 from the sample
    covariance (chain r owns stream ``rng.spawn(r)``), forms the weighted
    functional along each chain, and averages.  The CI half-width uses
    sigma_hat / sqrt(n) only; Monte Carlo chain noise is reported
    separately as ``mc_stderr``.  Chains whose states leave f's domain are
    dropped; more than 1% of failures aborts.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    b = as_symmat(b)
    if k == 0:
        rep = plugin_estimate(x, f, b, alpha,
                              master_seed=rng.master_seed,
                              stream_id=rng.stream_id)
        return EstimateReport(
            functional_value=rep.functional_value,
            estimator_kind="bias_reduced", k=0, mc_stderr=0.0,
            sigma_hat=rep.sigma_hat, ci=rep.ci, alpha=alpha,
            n=x.n, d=x.d, chains=0,
            master_seed=rng.master_seed, stream_id=rng.stream_id,
        )
    if nchains < 1:
        raise ValueError("need at least one chain when k >= 1")

    sigma_hat_mat = sample_covariance(x)
    if sigma_hat_mat.dim != b.dim:
        raise DimMismatch(f"data dim {sigma_hat_mat.dim}, B dim {b.dim}")
    weights = hockey_stick_weights(k)
    streams = [rng.spawn(r) for r in range(1, nchains + 1)]
    states = _simulate_chain_states(sigma_hat_mat.entries, k, x.n, streams)

    lam, u = np.linalg.eigh(states)  # (N, k+1, d), (N, k+1, d, d)
    lo, hi = f.domain
    margin = domain_margin(lam)
    lo_eff = lo + margin if math.isfinite(lo) else lo
    hi_eff = hi - margin if math.isfinite(hi) else hi
    in_domain = np.all((lam > lo_eff) & (lam < hi_eff), axis=(1, 2))
    failed = int(nchains - in_domain.sum())
    if failed > 0.01 * nchains:
        raise DomainError(
            f"{failed} of {nchains} chains left the domain of '{f.name}'"
        )
    with np.errstate(all="ignore"):
        flam = f.eval(lam)
    proj = np.einsum("rtim,ij,rtjm->rtm", u, b.entries, u)
    vals = np.einsum("rtm,rtm->rt", flam, proj)  # <f(state_t), B> per chain
    y = vals[in_domain] @ weights

    value = float(y.mean())
    mc_stderr = float(y.std(ddof=1) / math.sqrt(y.size)) if y.size > 1 else 0.0
    shat = sigma_f(sigma_hat_mat, f, b)
    ci = confidence_interval(value, shat, x.n, alpha)
    return EstimateReport(
        functional_value=value, estimator_kind="bias_reduced", k=k,
        mc_stderr=mc_stderr, sigma_hat=shat, ci=ci, alpha=alpha,
        n=x.n, d=x.d, chains=nchains,
        master_seed=rng.master_seed, stream_id=rng.stream_id,
        failed_chains=failed,
    )
