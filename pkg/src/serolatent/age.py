"""Age-dependent laws for the latent seroreactivity level.

Every model maps an age in years (> 0) to a latent distribution. The scalar
``latent_at`` returns a :class:`~serolatent.latent.LatentSpec`; ``batch``
returns the same laws for an array of ages as a
:class:`~serolatent.latent.LatentBatch`, which is what the fitting code uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from .latent import (
    BetaMixture,
    LatentBatch,
    LatentSpec,
    SingleBeta,
    ZeroMassPlusBeta,
    sample_batch,
    simulate_latent,
)

_MIN_SHAPE = 1e-12


def _check_ages(a):
    a = np.asarray(a, dtype=float)
    if np.any(~(a > 0)):
        raise ValueError("ages must be positive")
    return a


def power_shapes_at(m, a):
    return m.latent_at(a)


def meanvar_to_shapes(mu, phi):
    """Beta shapes ``(mu * phi, (1 - mu) * phi)`` for mean ``mu`` and precision ``phi``."""
    if not (0.0 < mu < 1.0):
        raise ValueError(f"mean must lie in (0, 1), got {mu}")
    if not phi > 0.0:
        raise ValueError(f"precision must be positive, got {phi}")
    return mu * phi, (1.0 - mu) * phi


def _meanvar_batch(eta, phi):
    # eta is the logit of the mean; both shapes from expit for precision at the tails
    alpha = np.maximum(expit(eta) * phi, _MIN_SHAPE)
    beta = np.maximum(expit(-eta) * phi, _MIN_SHAPE)
    return alpha, beta


def catalytic_pi(lam, a):
    """Cumulative activation probability ``1 - exp(-lam * a)``."""
    return -np.expm1(-lam * np.asarray(a, dtype=float)) if np.ndim(a) else -math.expm1(-lam * a)


def _single_beta_batch(alpha, beta):
    g = alpha.shape[0]
    return LatentBatch(np.zeros(g), np.zeros(g), ((np.ones(g), alpha, beta),))


class AgeLatentModel:
    """Base class: a map from age to a latent law."""

    def latent_at(self, a) -> LatentSpec:
        raise NotImplementedError

    def batch(self, ages) -> LatentBatch:
        raise NotImplementedError

    def mean_at(self, ages):
        ages = _check_ages(np.atleast_1d(ages))
        return self.batch(ages).means()


@dataclass(frozen=True)
class PowerShapes(AgeLatentModel):
    """Beta(alpha0 * a**gamma, beta0 * a**delta)."""

    alpha0: float
    gamma: float
    beta0: float
    delta: float

    def __post_init__(self):
        if not (self.alpha0 > 0 and self.beta0 > 0):
            raise ValueError("alpha0 and beta0 must be positive")

    def latent_at(self, a):
        if not a > 0:
            raise ValueError("age must be positive")
        return SingleBeta(self.alpha0 * a**self.gamma, self.beta0 * a**self.delta)

    def batch(self, ages):
        ages = _check_ages(ages)
        return _single_beta_batch(self.alpha0 * ages**self.gamma, self.beta0 * ages**self.delta)


@dataclass(frozen=True)
class MeanVarLogitLog(AgeLatentModel):
    """Beta with mean ``expit(eta0 + eta1 log a)`` and constant precision ``phi``."""

    eta0: float
    eta1: float
    phi: float

    def __post_init__(self):
        if not self.phi > 0:
            raise ValueError("phi must be positive")

    def mu(self, a):
        return logitlog_mu(self, a)

    def latent_at(self, a):
        return SingleBeta(*meanvar_to_shapes(self.mu(a), self.phi))

    def batch(self, ages):
        ages = _check_ages(ages)
        return _single_beta_batch(*_meanvar_batch(self.eta0 + self.eta1 * np.log(ages), self.phi))


def logitlog_mu(m, a):
    a = _check_ages(a)
    return expit(m.eta0 + m.eta1 * np.log(a))


@dataclass(frozen=True)
class AcquisitionMean(AgeLatentModel):
    """Beta with mean ``1 - exp(-r a)`` and precision ``phi``.

    The expected antibody level is then the classical acquisition curve
    ``mu0 + (mu1 - mu0) (1 - exp(-r a))``.
    """

    r: float
    phi: float

    def __post_init__(self):
        if not (self.r > 0 and self.phi > 0):
            raise ValueError("r and phi must be positive")

    def latent_at(self, a):
        if not a > 0:
            raise ValueError("age must be positive")
        mu = -math.expm1(-self.r * a)
        lo = math.exp(-self.r * a)
        return SingleBeta(max(mu * self.phi, _MIN_SHAPE), max(lo * self.phi, _MIN_SHAPE))

    def batch(self, ages):
        ages = _check_ages(ages)
        mu = -np.expm1(-self.r * ages)
        return _single_beta_batch(
            np.maximum(mu * self.phi, _MIN_SHAPE),
            np.maximum(np.exp(-self.r * ages) * self.phi, _MIN_SHAPE),
        )

    def mean_at(self, ages):
        return -np.expm1(-self.r * _check_ages(np.atleast_1d(ages)))


@dataclass(frozen=True)
class CatalyticMixture(AgeLatentModel):
    """Two Beta components with age-dependent weight on the high component.

    The high-component weight is ``pi(a) = 1 - p0 exp(-lam a)``; with
    ``p0 = 1`` this is the catalytic curve. Component shapes must satisfy
    ``alpha1 < 1 < beta1`` and ``beta2 < 1 < alpha2``.
    """

    lam: float
    alpha1: float
    beta1: float
    alpha2: float
    beta2: float
    p0: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not (0.0 <= self.p0 <= 1.0):
            raise ValueError("p0 must lie in [0, 1]")
        if not (0 < self.alpha1 < 1.0 < self.beta1 and 0 < self.beta2 < 1.0 < self.alpha2):
            raise ValueError("need alpha1 < 1 < beta1 and beta2 < 1 < alpha2")

    def weight_at(self, a):
        return 1.0 - self.p0 * np.exp(-self.lam * np.asarray(a, dtype=float))

    def latent_at(self, a):
        if not a > 0:
            raise ValueError("age must be positive")
        w = float(self.weight_at(a))
        return BetaMixture(
            ((1.0 - w, self.alpha1, self.beta1), (w, self.alpha2, self.beta2)), ordered=True
        )

    def batch(self, ages):
        ages = _check_ages(ages)
        w = self.weight_at(ages)
        g = ages.shape[0]
        one = np.ones(g)
        return LatentBatch(
            np.zeros(g),
            np.zeros(g),
            (
                (1.0 - w, self.alpha1 * one, self.beta1 * one),
                (w, self.alpha2 * one, self.beta2 * one),
            ),
        )


@dataclass(frozen=True)
class Ama1Joint(AgeLatentModel):
    """Catalytic mechanistic law below the change point, logit-log Beta above.

    Below ``tau`` the first mixture component is a point mass at 0 and the
    second is Beta(alpha2, 1) with catalytic weight. From ``tau`` on, T is
    Beta with mean ``expit(eta0 + eta1 log a)`` and precision ``phi``, where
    ``eta0`` is always derived so the mean of T is continuous at ``tau``.
    """

    tau: float
    lam: float
    alpha2: float
    phi: float
    eta1: float

    def __post_init__(self):
        if not (self.tau > 0 and self.lam > 0 and self.alpha2 > 0 and self.phi > 0):
            raise ValueError("tau, lam, alpha2 and phi must be positive")

    @property
    def eta0(self):
        return ama1_eta0(self)

    def latent_at(self, a):
        if not a > 0:
            raise ValueError("age must be positive")
        if a < self.tau:
            return ZeroMassPlusBeta(catalytic_pi(self.lam, a), self.alpha2)
        mu = expit(self.eta0 + self.eta1 * math.log(a))
        return SingleBeta(*meanvar_to_shapes(mu, self.phi))

    def batch(self, ages):
        ages = _check_ages(ages)
        g = ages.shape[0]
        below = ages < self.tau
        pi = -np.expm1(-self.lam * ages)
        a_up, b_up = _meanvar_batch(self.eta0 + self.eta1 * np.log(ages), self.phi)
        return LatentBatch(
            np.where(below, 1.0 - pi, 0.0),
            np.zeros(g),
            (
                (
                    np.where(below, pi, 1.0),
                    np.where(below, self.alpha2, a_up),
                    np.where(below, 1.0, b_up),
                ),
            ),
        )


def ama1_mu_tau_minus(m):
    """Mean of T just below the change point under the simplified mechanistic law."""
    return -math.expm1(-m.tau * m.lam) * m.alpha2 / (m.alpha2 + 1.0)


def mixture_mean_below(tau, lam, p0, alpha1, beta1, alpha2, beta2):
    """Mean of T just below ``tau`` for the general two-component catalytic mixture."""
    low = p0 * math.exp(-tau * lam)
    return low * alpha1 / (alpha1 + beta1) + (1.0 - low) * alpha2 / (alpha2 + beta2)


def ama1_eta0(m):
    """Intercept making the logit-log mean meet the mechanistic mean at ``tau``."""
    mu = ama1_mu_tau_minus(m)
    if not (0.0 < mu < 1.0):
        raise FloatingPointError(f"mean below the change point is {mu}; logit undefined")
    return float(logit(mu)) - m.eta1 * math.log(m.tau)


def ama1_latent_at(m, a):
    return m.latent_at(a)


@dataclass(frozen=True)
class Msp1Piecewise(AgeLatentModel):
    """Beta(alpha0 a**gamma, beta0 a**delta(a)) with an exponent shift at ``zeta``.

    ``delta(a)`` is ``delta1`` for ``a <= zeta`` and ``delta1 + delta2`` above.
    Nothing ties the levels together, so beta(a) jumps at ``zeta`` whenever
    ``delta2 != 0``.
    """

    alpha0: float
    gamma: float
    beta0: float
    delta1: float
    delta2: float
    zeta: float

    def __post_init__(self):
        if not (self.alpha0 > 0 and self.beta0 > 0 and self.zeta > 0):
            raise ValueError("alpha0, beta0 and zeta must be positive")

    def _delta(self, a):
        return np.where(np.asarray(a) <= self.zeta, self.delta1, self.delta1 + self.delta2)

    def latent_at(self, a):
        if not a > 0:
            raise ValueError("age must be positive")
        return SingleBeta(self.alpha0 * a**self.gamma, self.beta0 * a ** float(self._delta(a)))

    def batch(self, ages):
        ages = _check_ages(ages)
        return _single_beta_batch(
            self.alpha0 * ages**self.gamma, self.beta0 * ages ** self._delta(ages)
        )


def msp1_latent_at(m, a):
    return m.latent_at(a)


def msp1_mean_above(m, a):
    """Closed-form mean of T above the change point."""
    return 1.0 / (1.0 + (m.beta0 / m.alpha0) * a ** (m.delta1 + m.delta2 - m.gamma))


@dataclass(frozen=True)
class AgeFree(AgeLatentModel):
    """Wraps an age-independent latent law."""

    spec: LatentSpec

    def latent_at(self, a):
        return self.spec

    def batch(self, ages):
        ages = np.atleast_1d(ages)
        one = self.spec.batch()
        g = ages.shape[0]
        return LatentBatch(
            np.repeat(one.atom0, g),
            np.repeat(one.atom1, g),
            tuple(tuple(np.repeat(v, g) for v in comp) for comp in one.components),
        )


def expected_y(cond, model, a):
    """Expected antibody level at age ``a``: mu0 + (mu1 - mu0) E[T; a]."""
    if isinstance(model, LatentSpec):
        mean = model.mean() * np.ones_like(np.asarray(a, dtype=float))
    else:
        mean = model.mean_at(a)
    out = cond.mu0 + (cond.mu1 - cond.mu0) * mean
    return float(np.ravel(out)[0]) if np.ndim(a) == 0 else out


def latent_for_ages(model, ages):
    """Latent batch and per-observation group index for a model and ages.

    Age-free models collapse to one group; age models are evaluated once per
    distinct age.
    """
    if isinstance(model, LatentSpec):
        n = 0 if ages is None else np.shape(ages)[0]
        return model.batch(), np.zeros(n, dtype=int)
    if isinstance(model, AgeFree):
        n = 0 if ages is None else np.shape(ages)[0]
        return model.spec.batch(), np.zeros(n, dtype=int)
    if ages is None:
        raise ValueError("an age-dependent model needs ages")
    uniq, inverse = np.unique(np.asarray(ages, dtype=float), return_inverse=True)
    return model.batch(uniq), inverse.ravel()


def simulate_at_ages(cond, model, ages, rng):
    """One measurement per age: draw T from the age-specific law, then Y | T."""
    rng = np.random.default_rng(rng)
    ages = np.asarray(ages, dtype=float)
    batch, index = latent_for_ages(model, ages)
    t = sample_batch(batch, index, rng)
    return simulate_latent(cond, t, rng)
