"""Fit-able model families: parameter layout, constraints and start values."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..age import (
    AcquisitionMean,
    Ama1Joint,
    CatalyticMixture,
    MeanVarLogitLog,
    Msp1Piecewise,
    PowerShapes,
)
from ..latent import SIGMA_FLOOR, BetaMixture, ConditionalGaussian, SingleBeta, TwoPoint
from .transforms import IDENTITY, POSITIVE, ParamTransform, above, between, gap_over

COND_NAMES = ("mu0", "mu1", "sigma0", "sigma1")


@dataclass(frozen=True)
class Family:
    """A model family.

    ``latent_names`` follow the four conditional Gaussian parameters in the
    full parameter vector. ``make_latent`` turns the latent slice into a
    latent law or age model; ``latent_transforms`` and ``latent_init`` may
    depend on the observed age range.
    """

    name: str
    latent_names: tuple
    make_latent: Callable
    latent_transforms: Callable
    latent_init: Callable
    age_dependent: bool = False

    @property
    def names(self):
        return COND_NAMES + self.latent_names

    @property
    def size(self):
        return len(self.names)

    def build(self, x):
        """(ConditionalGaussian, latent law or age model) from a natural vector."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.size,):
            raise ValueError(f"{self.name} expects {self.size} parameters, got {x.shape}")
        cond = ConditionalGaussian(*map(float, x[:4]))
        return cond, self.make_latent(*map(float, x[4:]))

    def transform(self, ages=None, fixed=None):
        """ParamTransform for this family; ``fixed`` maps names to values."""
        cond = [IDENTITY, gap_over(0), above(SIGMA_FLOOR), above(SIGMA_FLOOR)]
        trs = cond + list(self.latent_transforms(_age_range(ages)))
        fixed_idx = {}
        for name, v in (fixed or {}).items():
            if name not in self.names:
                raise KeyError(f"{self.name} has no parameter {name!r}")
            fixed_idx[self.names.index(name)] = v
        return ParamTransform(trs, fixed_idx)

    def default_init(self, y, ages=None):
        """Moment-based start: 10th/90th percentiles, half the sample SD."""
        y = np.asarray(y, dtype=float)
        q10, q90 = np.percentile(y, [10, 90])
        sd = float(np.std(y, ddof=1)) if y.size > 1 else 1.0
        spread = max(sd, 1e-3)
        mu1 = q90 if q90 > q10 else q10 + 1e-3 * spread
        s = max(sd / 2.0, 10.0 * SIGMA_FLOOR)
        latent = self.latent_init(_age_range(ages), None if ages is None else np.median(ages))
        return np.array([q10, mu1, s, s, *latent], dtype=float)

    def as_dict(self, x):
        return dict(zip(self.names, map(float, x)))


def _age_range(ages):
    if ages is None:
        return None
    ages = np.asarray(ages, dtype=float)
    return float(ages.min()), float(ages.max())


def _need_ages(rng):
    if rng is None:
        raise ValueError("this family is age-dependent and needs ages")
    lo, hi = rng
    if not lo < hi:
        raise ValueError("age-dependent change points need a nondegenerate age range")
    return rng


def _none_init(rng, med):
    return ()


def _mixture3(w1, w2frac, a1, b1, a2, b2, a3, b3):
    w2 = (1.0 - w1) * w2frac
    return BetaMixture(((w1, a1, b1), (w2, a2, b2), (1.0 - w1 - w2, a3, b3)))


def _ama1_transforms(rng):
    lo, hi = _need_ages(rng)
    return [between(lo, hi), POSITIVE, POSITIVE, POSITIVE, IDENTITY]


def _ama1_init(rng, med):
    _need_ages(rng)
    return (med, math.log(2.0) / med, 1.0, 2.0, 0.0)


def _msp1_transforms(rng):
    lo, hi = _need_ages(rng)
    return [POSITIVE, IDENTITY, POSITIVE, IDENTITY, IDENTITY, between(lo, hi)]


def _msp1_init(rng, med):
    _need_ages(rng)
    return (1.0, 0.0, 1.0, 0.0, 0.0, med)


FAMILIES = {
    f.name: f
    for f in [
        Family("gmm", ("pi",), TwoPoint, lambda r: [between(0.0, 1.0)], lambda r, m: (0.5,)),
        Family("beta", ("alpha", "beta"), SingleBeta,
               lambda r: [POSITIVE, POSITIVE], lambda r, m: (1.0, 1.0)),
        Family(
            "mixture2",
            ("w1", "alpha1", "beta1", "alpha2", "beta2"),
            lambda w1, a1, b1, a2, b2: BetaMixture(((w1, a1, b1), (1.0 - w1, a2, b2)), ordered=True),
            lambda r: [between(0.0, 1.0), between(0.0, 1.0), above(1.0), above(1.0), between(0.0, 1.0)],
            lambda r, m: (0.5, 0.5, 2.0, 2.0, 0.5),
        ),
        Family(
            "mixture3",
            ("w1", "w2frac", "alpha1", "beta1", "alpha2", "beta2", "alpha3", "beta3"),
            _mixture3,
            lambda r: [between(0.0, 1.0), between(0.0, 1.0)] + [POSITIVE] * 6,
            lambda r, m: (1 / 3, 0.5, 0.5, 2.0, 2.0, 0.5, 2.0, 2.0),
        ),
        Family("power", ("alpha0", "gamma", "beta0", "delta"), PowerShapes,
               lambda r: [POSITIVE, IDENTITY, POSITIVE, IDENTITY],
               lambda r, m: (1.0, 0.0, 1.0, 0.0), age_dependent=True),
        Family("logitlog", ("eta0", "eta1", "phi"), MeanVarLogitLog,
               lambda r: [IDENTITY, IDENTITY, POSITIVE],
               lambda r, m: (0.0, 0.0, 2.0), age_dependent=True),
        Family("acquisition", ("r", "phi"), AcquisitionMean,
               lambda r: [POSITIVE, POSITIVE],
               lambda r, m: (math.log(2.0) / m, 2.0), age_dependent=True),
        Family(
            "catalytic",
            ("lam", "alpha1", "beta1", "alpha2", "beta2", "p0"),
            CatalyticMixture,
            lambda r: [POSITIVE, between(0.0, 1.0), above(1.0), above(1.0), between(0.0, 1.0),
                       between(0.0, 1.0)],
            lambda r, m: (math.log(2.0) / m, 0.5, 2.0, 2.0, 0.5, 0.9),
            age_dependent=True,
        ),
        Family("ama1", ("tau", "lam", "alpha2", "phi", "eta1"), Ama1Joint,
               _ama1_transforms, _ama1_init, age_dependent=True),
        Family("msp1", ("alpha0", "gamma", "beta0", "delta1", "delta2", "zeta"), Msp1Piecewise,
               _msp1_transforms, _msp1_init, age_dependent=True),
    ]
}


def get_family(family):
    if isinstance(family, Family):
        return family
    try:
        return FAMILIES[family]
    except KeyError:
        raise KeyError(f"unknown model family {family!r}; choose from {sorted(FAMILIES)}") from None
