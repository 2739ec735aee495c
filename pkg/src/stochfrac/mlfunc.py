"""Two-parameter Mittag-Leffler function on the closed negative real axis.

Three evaluation routes are combined, chosen per argument from cheap a-priori
error estimates:

* the power series in double precision, while its largest term stays small
  enough that cancellation cannot cost more than ~1e-12;
* the algebraic asymptotic expansion (plus the exponential terms that exist
  for ``alpha >= 1``), truncated at its smallest term;
* the power series in extended precision (mpmath) for the band in between.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import special

from .errors import DomainError

__all__ = [
    "MLParams",
    "ml_eval",
    "ml_time_derivative",
    "decay_constant",
    "DECAY_CONSTANTS",
]

# Largest series term tolerated by the double-precision route.
TAYLOR_MAX_TERM = 10.0
# Error estimate the asymptotic route has to beat to be accepted.
ASYMPTOTIC_TOL = 1e-13
# Maximum number of asymptotic terms inspected.
ASYMPTOTIC_TERMS = 200

# Constants C with |E_{a,b}(z)| <= C / (1 + |z|) on z in [-1e4, 0], measured on
# a dense logarithmic grid and rounded up.
DECAY_CONSTANTS = {
    (0.6, 0.6): 0.7,
    (0.6, 1.0): 1.0,
    (0.8, 0.8): 0.9,
    (0.8, 1.0): 1.0,
}


@dataclass(frozen=True)
class MLParams:
    alpha: float
    beta: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise DomainError(f"alpha must lie in (0, 2], got {self.alpha}")


def _series_log_terms(absz: np.ndarray, alpha: float, beta: float, k: np.ndarray):
    """log|z^k / Gamma(alpha k + beta)| for every (z, k) pair."""
    with np.errstate(divide="ignore"):
        logz = np.log(absz)[:, None]
    arg = alpha * k[None, :] + beta
    lg = special.gammaln(arg)
    logterm = k[None, :] * logz - lg
    # 1/Gamma vanishes at the poles.
    poles = (arg <= 0) & (arg == np.round(arg))
    return np.where(poles, -np.inf, logterm)


def _max_log_term(absz: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    # The peak sits near k ~ |z|^(1/alpha)/alpha; scan well past it.
    kpeak = np.max(absz ** (1.0 / alpha) / alpha) if absz.size else 0.0
    kmax = int(min(max(64, 2.5 * kpeak + 32), 20000))
    k = np.arange(kmax + 1, dtype=float)
    out = np.empty(absz.shape)
    for lo in range(0, absz.size, 256):
        sl = slice(lo, lo + 256)
        out[sl] = np.max(_series_log_terms(absz[sl], alpha, beta, k), axis=1)
    return out


def _taylor_double(z: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    absz = np.abs(z)
    kpeak = np.max(absz ** (1.0 / alpha) / alpha) if absz.size else 0.0
    kmax = int(max(40, 3 * kpeak + 60))
    k = np.arange(kmax + 1, dtype=float)
    logterm = _series_log_terms(absz, alpha, beta, k)
    sign = special.gammasgn(alpha * k + beta)[None, :] * np.where(k % 2 == 1, -1.0, 1.0)
    terms = sign * np.exp(logterm)
    terms[:, 0] = special.rgamma(beta)
    return terms.sum(axis=1)


def _asymptotic(z: np.ndarray, alpha: float, beta: float):
    """Optimally truncated asymptotic expansion and its error estimate."""
    absz = -z
    k = np.arange(1, ASYMPTOTIC_TERMS + 1, dtype=float)
    logz = np.log(absz)[:, None]
    arg = beta - alpha * k
    poles = (arg <= 0) & (arg == np.round(arg))
    log_coef = np.where(poles, -np.inf, -special.gammaln(arg))
    # -z^{-k}/Gamma(arg) with z^{-k} = (-1)^k |z|^{-k}
    sign = -special.gammasgn(arg) * np.where(k % 2 == 1, -1.0, 1.0)
    sign = np.where(poles, 0.0, sign)
    log_mag = log_coef[None, :] - k[None, :] * logz
    # Divergent tails overflow; they lie past the truncation point anyway.
    log_mag = np.minimum(log_mag, 700.0)
    terms = sign[None, :] * np.exp(log_mag)
    # Reflection bound |1/Gamma(x)| <= Gamma(1-x)/pi keeps accidental zeros of
    # 1/Gamma from posing as a small remainder.
    log_env = np.where(1.0 - arg > 0, special.gammaln(np.maximum(1.0 - arg, 1e-300)) - math.log(math.pi), -np.inf)
    envelope = np.exp(np.minimum(np.maximum(log_mag, log_env[None, :] - k[None, :] * logz), 700.0))
    kstar = np.argmin(envelope, axis=1)
    mask = np.arange(ASYMPTOTIC_TERMS)[None, :] < kstar[:, None]
    value = np.sum(np.where(mask, terms, 0.0), axis=1)
    err = envelope[np.arange(z.size), kstar]

    if alpha >= 1.0:
        # Roots of zeta^alpha = z on the principal sheets: a conjugate pair
        # at arg = +-pi/alpha, which merge into the single root z at alpha = 1.
        theta = math.pi / alpha
        r = absz ** (1.0 / alpha)
        zeta = r * np.exp(1j * theta)
        pair = np.exp((1.0 - beta) * (np.log(r) + 1j * theta)) * np.exp(zeta)
        weight = (1.0 if alpha == 1.0 else 2.0) / alpha
        value = value + weight * np.real(pair)
    return value, err


def _taylor_mp(z: np.ndarray, alpha: float, beta: float, log_max: np.ndarray) -> np.ndarray:
    """Power series in extended precision; the 1/Gamma table is shared by the batch."""
    digits = int(math.ceil(max(float(np.max(log_max)), 0.0) / math.log(10.0))) + 20
    absz = np.abs(z)
    out = np.empty(z.size)
    with mpmath.workdps(digits):
        a = mpmath.mpf(alpha)
        b = mpmath.mpf(beta)
        tiny = mpmath.mpf(10) ** (-25)
        table = []
        for i, zi in enumerate(z):
            zz = mpmath.mpf(float(zi))
            kpeak = absz[i] ** (1.0 / alpha) / alpha
            total = mpmath.mpf(0)
            power = mpmath.mpf(1)
            k = 0
            while True:
                if k == len(table):
                    table.append(mpmath.rgamma(a * k + b))
                term = power * table[k]
                total += term
                if k > kpeak + 2 and abs(term) < tiny:
                    break
                power *= zz
                k += 1
            out[i] = float(total)
    return out


def ml_eval(params: MLParams, z):
    """Evaluate E_{alpha,beta}(z) for real z <= 0.

    Accepts a scalar or array; returns the same shape. Absolute accuracy is
    about 1e-12 over [-1e4, 0] for the orders used in this package.
    """
    alpha, beta = float(params.alpha), float(params.beta)
    zarr = np.asarray(z, dtype=float)
    if np.any(zarr > 0):
        raise DomainError("Mittag-Leffler evaluation supports z <= 0 only")
    if np.any(~np.isfinite(zarr)):
        raise DomainError("z must be finite")
    flat = zarr.ravel()
    out = np.empty_like(flat)

    zero = flat == 0.0
    out[zero] = special.rgamma(beta)
    idx = np.flatnonzero(~zero)
    if idx.size:
        log_max = _max_log_term(-flat[idx], alpha, beta)
        use_taylor = log_max <= math.log(TAYLOR_MAX_TERM)
        ti = idx[use_taylor]
        if ti.size:
            out[ti] = _taylor_double(flat[ti], alpha, beta)
        rest = idx[~use_taylor]
        rest_log = log_max[~use_taylor]
        if rest.size:
            val, err = _asymptotic(flat[rest], alpha, beta)
            ok = err <= ASYMPTOTIC_TOL
            out[rest[ok]] = val[ok]
            if not np.all(ok):
                out[rest[~ok]] = _taylor_mp(flat[rest[~ok]], alpha, beta, rest_log[~ok])
    result = out.reshape(zarr.shape)
    return float(result) if result.ndim == 0 else result


def ml_time_derivative(alpha: float, lam: float, t):
    """d/dt E_{alpha,1}(-lam t^alpha) = -lam t^(alpha-1) E_{alpha,alpha}(-lam t^alpha)."""
    tarr = np.asarray(t, dtype=float)
    if lam <= 0:
        raise DomainError("lambda must be positive")
    if np.any(tarr <= 0):
        raise DomainError("derivative is singular at t = 0; t must be positive")
    z = -lam * tarr**alpha
    val = -lam * tarr ** (alpha - 1.0) * ml_eval(MLParams(alpha, alpha), z)
    val = np.asarray(val)
    return float(val) if val.ndim == 0 else val


def decay_constant(alpha: float, beta: float) -> float:
    """Published constant of the C/(1+|z|) envelope for a tabulated order pair."""
    try:
        return DECAY_CONSTANTS[(round(alpha, 6), round(beta, 6))]
    except KeyError:
        raise DomainError(f"no decay constant tabulated for alpha={alpha}, beta={beta}") from None
