"""Hypoelastic rate-form stress updates: Jaumann elasticity and J2
plasticity with optional power-law isotropic hardening.

The yield function is f(s, e) = ||s|| - sqrt(2/3) K(e) with s the stress
deviator (Frobenius norm) and K(e) = sig_y (1 + A e)^m. Perfect plasticity
is A = 0, m = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError, NumericalFatalError

RETURN_MAX_ITER = 50
RETURN_TOL_REL = 1e-10


@dataclass(frozen=True)
class ElasticParams:
    E: float
    nu: float
    rho: float

    def __post_init__(self):
        if self.E <= 0.0:
            raise ConfigurationError(f"Young's modulus must be positive: {self.E}")
        if not -1.0 < self.nu < 0.5:
            raise ConfigurationError(f"Poisson ratio out of (-1, 0.5): {self.nu}")
        if self.rho <= 0.0:
            raise ConfigurationError(f"density must be positive: {self.rho}")

    @property
    def mu(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def lam(self) -> float:
        return 2.0 * self.mu * self.nu / (1.0 - 2.0 * self.nu)

    @property
    def wave_speed(self) -> float:
        """Dilatational wave speed sqrt((lam + 2 mu) / rho)."""
        return float(np.sqrt((self.lam + 2.0 * self.mu) / self.rho))


@dataclass(frozen=True)
class J2Params:
    elastic: ElasticParams
    sig_y: float
    hard_a: float = 0.0
    hard_m: float = 0.0

    def __post_init__(self):
        if self.sig_y <= 0.0:
            raise ConfigurationError(f"yield stress must be positive: {self.sig_y}")
        if self.hard_a < 0.0 or self.hard_m < 0.0:
            raise ConfigurationError("hardening must be non-decreasing")

    def flow_stress(self, eps_p):
        """K(e) = sig_y (1 + A e)^m."""
        return self.sig_y * (1.0 + self.hard_a * np.asarray(eps_p)) ** self.hard_m


def _as_batch(a):
    a = np.asarray(a, dtype=float)
    if a.ndim == 2:
        return a[None, :, :].copy(), True
    return a.copy(), False


def elastic_rate_update(sigma, D, W, dt: float, p: ElasticParams):
    """One Jaumann hypoelastic increment:
    sigma + dt (lam tr(D) I + 2 mu D + W sigma + sigma W^T), symmetrized."""
    sig, single = _as_batch(sigma)
    d, _ = _as_batch(D)
    w, _ = _as_batch(W)
    kernels.elastic_rate_batch(sig, d, w, dt, p.lam, p.mu)
    return sig[0] if single else sig


def j2_radial_return(sigma_trial, eps_p, p: J2Params):
    """Radial return of the trial deviator onto the yield surface.

    Returns (sigma, eps_p_new). Elastic trials pass through unchanged; the
    hydrostatic part is never modified. The plastic multiplier solves
    g(dg) = ||s_trial|| - 2 mu dg - sqrt(2/3) K(e + sqrt(2/3) dg) = 0 by
    Newton iteration (closed form when hardening is off).
    """
    sig, single = _as_batch(sigma_trial)
    e = np.atleast_1d(np.asarray(eps_p, dtype=float)).copy()
    bad = kernels.radial_return_batch(
        sig, e, p.elastic.mu, p.sig_y, p.hard_a, p.hard_m,
        RETURN_MAX_ITER, RETURN_TOL_REL * p.sig_y,
    )
    if bad != kernels.OK:
        raise NumericalFatalError(
            f"radial return failed to converge for trial state {bad}"
        )
    if single:
        return sig[0], float(e[0])
    return sig, e
