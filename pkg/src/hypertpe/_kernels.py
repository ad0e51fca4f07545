"""Inner loops of the Parzen surrogate.

Two interchangeable backends compute the log-density of a mixture of
Gaussians truncated to [0, 1]. The numba backend is used when numba imports
and ``HYPERTPE_DISABLE_NUMBA`` is unset or ``0``; otherwise a vectorised numpy
path runs. Both take the same arguments and agree to ~1e-12.
"""

from __future__ import annotations

import math
import os

import numpy as np
from scipy.special import ndtr, ndtri

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_CHUNK = 4096


def _numba_requested() -> bool:
    return os.environ.get("HYPERTPE_DISABLE_NUMBA", "0").lower() in ("", "0", "false", "no")


def kernel_log_norms(centers: np.ndarray, sigmas: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Per-kernel additive constant: log w - log sigma - log sqrt(2 pi) - log Z."""
    mass = ndtr((1.0 - centers) / sigmas) - ndtr(-centers / sigmas)
    with np.errstate(divide="ignore"):
        return np.log(weights) - np.log(sigmas) - _LOG_SQRT_2PI - np.log(mass)


def mixture_logpdf_numpy(x, centers, sigmas, weights):
    x = np.asarray(x, dtype=np.float64)
    const = kernel_log_norms(centers, sigmas, weights)
    out = np.empty(x.shape[0])
    for start in range(0, x.shape[0], _CHUNK):
        xs = x[start:start + _CHUNK, None]
        z = (xs - centers[None, :]) / sigmas[None, :]
        terms = const[None, :] - 0.5 * z * z
        m = terms.max(axis=1)
        finite = np.isfinite(m)
        safe = np.where(finite, m, 0.0)
        out[start:start + _CHUNK] = np.where(
            finite, safe + np.log(np.exp(terms - safe[:, None]).sum(axis=1)), -np.inf
        )
    return out


try:
    if not _numba_requested():
        raise ImportError("numba disabled by HYPERTPE_DISABLE_NUMBA")
    from numba import njit
except ImportError:
    njit = None


if njit is not None:

    @njit(cache=True, nogil=True)
    def _mixture_logpdf_nb(x, centers, sigmas, weights):
        n = x.shape[0]
        k = centers.shape[0]
        const = np.empty(k)
        for j in range(k):
            mu = centers[j]
            s = sigmas[j]
            mass = 0.5 * (math.erf((1.0 - mu) / s * _INV_SQRT2) - math.erf(-mu / s * _INV_SQRT2))
            if weights[j] > 0.0:
                const[j] = math.log(weights[j]) - math.log(s) - _LOG_SQRT_2PI - math.log(mass)
            else:
                const[j] = -np.inf
        out = np.empty(n)
        terms = np.empty(k)
        for i in range(n):
            xi = x[i]
            m = -np.inf
            for j in range(k):
                z = (xi - centers[j]) / sigmas[j]
                t = const[j] - 0.5 * z * z
                terms[j] = t
                if t > m:
                    m = t
            if m == -np.inf:
                out[i] = -np.inf
                continue
            acc = 0.0
            for j in range(k):
                acc += math.exp(terms[j] - m)
            out[i] = m + math.log(acc)
        return out

    def mixture_logpdf_numba(x, centers, sigmas, weights):
        return _mixture_logpdf_nb(
            np.ascontiguousarray(x, dtype=np.float64),
            np.ascontiguousarray(centers, dtype=np.float64),
            np.ascontiguousarray(sigmas, dtype=np.float64),
            np.ascontiguousarray(weights, dtype=np.float64),
        )

    mixture_logpdf = mixture_logpdf_numba
    BACKEND = "numba"
else:
    mixture_logpdf_numba = None
    mixture_logpdf = mixture_logpdf_numpy
    BACKEND = "numpy"


def truncnorm_sample(centers, sigmas, u):
    """Inverse-CDF draws, one per row, from N(center, sigma) truncated to [0, 1]."""
    lo = ndtr(-centers / sigmas)
    hi = ndtr((1.0 - centers) / sigmas)
    p = lo + u * (hi - lo)
    x = centers + sigmas * ndtri(p)
    return np.clip(x, 0.0, 1.0)
