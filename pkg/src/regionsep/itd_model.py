"""Gaussian modeling of per-bin ITD samples and the peak verdict.

A recording is kept as-is when its ITD histogram shows one tight peak,
split when a 2-component Gaussian mixture finds two tight, well-separated
peaks, and discarded otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

STD_FLOOR = 1e-9  # seconds; avoids likelihood singularities
MIN_SAMPLES = 10

REASON_TOO_FEW = "too_few_samples"
REASON_WIDE_SINGLE_BAD_GMM = "wide_single_and_bad_gmm"
REASON_COMPONENTS_TOO_WIDE = "components_too_wide"
REASON_PEAKS_TOO_CLOSE = "peaks_too_close"


class EmFailure(RuntimeError):
    """EM degenerated on every restart (all responsibility mass collapsed)."""


@dataclass(frozen=True)
class GaussianComponent:
    mean: float
    std: float
    weight: float = 1.0

    def __post_init__(self):
        if self.std <= 0:
            raise ValueError(f"std must be positive, got {self.std}")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"weight must be in [0,1], got {self.weight}")


@dataclass(frozen=True)
class EmSettings:
    max_iter: int = 200
    rel_tol: float = 1e-10
    restarts: int = 3
    min_responsibility: float = 1e-6
    seed: int = 0


@dataclass(frozen=True)
class SinglePeak:
    component: GaussianComponent


@dataclass(frozen=True)
class TwoPeaks:
    low: GaussianComponent   # smaller mean
    high: GaussianComponent

    def __post_init__(self):
        if self.low.mean > self.high.mean:
            raise ValueError("TwoPeaks components must be mean-ascending")


@dataclass(frozen=True)
class Discard:
    reason: str


ItdVerdict = Union[SinglePeak, TwoPeaks, Discard]


def fit_single_gaussian(samples: Sequence[float]) -> GaussianComponent:
    """MLE Gaussian fit: sample mean and population standard deviation."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 2:
        raise ValueError(f"need at least 2 samples, got {x.size}")
    mean = float(np.mean(x))
    std = max(float(np.std(x)), STD_FLOOR)
    return GaussianComponent(mean=mean, std=std, weight=1.0)


def single_gaussian_log_likelihood(samples: Sequence[float]) -> float:
    c = fit_single_gaussian(samples)
    x = np.asarray(samples, dtype=np.float64)
    z = (x - c.mean) / c.std
    return float(np.sum(-0.5 * z * z - math.log(c.std) - 0.5 * math.log(2 * math.pi)))


def _log_pdf(x: np.ndarray, mean: float, std: float) -> np.ndarray:
    z = (x - mean) / std
    return -0.5 * z * z - math.log(std) - 0.5 * math.log(2.0 * math.pi)


def _em_run(x, mu, sigma, w, settings):
    """One EM run. Returns (components, log_likelihood) or None if degenerate."""
    n = x.size
    prev_ll = -np.inf
    for _ in range(settings.max_iter):
        log_p = np.stack(
            [
                math.log(max(w[0], 1e-300)) + _log_pdf(x, mu[0], sigma[0]),
                math.log(max(w[1], 1e-300)) + _log_pdf(x, mu[1], sigma[1]),
            ]
        )
        log_norm = np.logaddexp(log_p[0], log_p[1])
        ll = float(np.sum(log_norm))
        resp = np.exp(log_p - log_norm)

        mass = resp.sum(axis=1)
        if mass.min() < settings.min_responsibility:
            return None

        mu = (resp @ x) / mass
        var = (resp @ (x * x)) / mass - mu * mu
        sigma = np.maximum(np.sqrt(np.maximum(var, 0.0)), STD_FLOOR)
        w = mass / n

        if abs(ll - prev_ll) <= settings.rel_tol * max(abs(ll), 1.0):
            prev_ll = ll
            break
        prev_ll = ll

    # report the likelihood of the returned (post-M-step) parameters
    log_p = np.stack(
        [
            math.log(max(w[0], 1e-300)) + _log_pdf(x, mu[0], sigma[0]),
            math.log(max(w[1], 1e-300)) + _log_pdf(x, mu[1], sigma[1]),
        ]
    )
    final_ll = float(np.sum(np.logaddexp(log_p[0], log_p[1])))

    order = np.argsort(mu)
    comps = tuple(
        GaussianComponent(float(mu[i]), float(sigma[i]), float(w[i])) for i in order
    )
    return comps, final_ll


def fit_gmm2(
    samples: Sequence[float], settings: EmSettings = EmSettings()
) -> Tuple[GaussianComponent, GaussianComponent, float]:
    """Fit a 2-component 1-D GMM by EM.

    Initialization is quantile-based (25th/75th percentile means, half the
    sample std, equal weights), which makes the fit deterministic and
    equivariant under shifts and positive scalings of the sample set.
    Degenerate runs are retried with seeded jittered means.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {x.size}")

    spread = max(float(np.std(x)), STD_FLOOR)
    mu0 = np.percentile(x, [25.0, 75.0])
    sigma0 = np.array([spread / 2.0, spread / 2.0])
    sigma0 = np.maximum(sigma0, STD_FLOOR)
    w0 = np.array([0.5, 0.5])

    rng = np.random.default_rng(settings.seed)
    for attempt in range(settings.restarts + 1):
        if attempt == 0:
            mu = mu0.copy()
        else:
            # jitter relative to the sample spread keeps affine equivariance
            mu = mu0 + rng.standard_normal(2) * spread * 0.5
        result = _em_run(x, mu, sigma0.copy(), w0.copy(), settings)
        if result is not None:
            (c1, c2), ll = result
            return c1, c2, ll
    raise EmFailure("EM collapsed on every restart")


def classify_itds(
    samples: Sequence[float],
    sigma_th: float,
    delta_tau_min: float,
    settings: EmSettings = EmSettings(),
) -> ItdVerdict:
    """Single-peak / two-peak / discard verdict on an ITD sample set."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size < MIN_SAMPLES:
        return Discard(REASON_TOO_FEW)

    single = fit_single_gaussian(x)
    if single.std < sigma_th:
        return SinglePeak(single)

    try:
        c1, c2, _ = fit_gmm2(x, settings)
    except EmFailure:
        return Discard(REASON_WIDE_SINGLE_BAD_GMM)

    if c1.std > sigma_th or c2.std > sigma_th:
        return Discard(REASON_COMPONENTS_TOO_WIDE)
    if abs(c1.mean - c2.mean) < delta_tau_min:
        return Discard(REASON_PEAKS_TOO_CLOSE)
    return TwoPeaks(low=c1, high=c2)
