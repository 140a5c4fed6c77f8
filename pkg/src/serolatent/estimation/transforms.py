"""Maps between constrained model parameters and unconstrained reals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit


@dataclass(frozen=True)
class Transform:
    """One parameter's mapping.

    kind
        ``identity``; ``log`` (value = lo + exp(u)); ``logit`` (value in
        (lo, hi)); ``gap`` (value = natural[ref] + exp(u), keeping it above the
        referenced parameter).
    """

    kind: str = "identity"
    lo: float = 0.0
    hi: float = 1.0
    ref: int = -1

    def __post_init__(self):
        if self.kind not in ("identity", "log", "logit", "gap"):
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.kind == "logit" and not self.lo < self.hi:
            raise ValueError("logit transform needs lo < hi")
        if self.kind == "gap" and self.ref < 0:
            raise ValueError("gap transform needs a reference parameter index")


IDENTITY = Transform()
POSITIVE = Transform("log")


def above(lo):
    return Transform("log", lo=lo)


def between(lo, hi):
    return Transform("logit", lo=lo, hi=hi)


def gap_over(ref):
    return Transform("gap", ref=ref)


class ParamTransform:
    """Vector transform over a parameter layout with some entries held fixed.

    ``to_natural`` rebuilds the full natural-scale vector from the free
    unconstrained coordinates; ``to_free`` is its inverse.
    """

    def __init__(self, transforms, fixed=None):
        self.transforms = tuple(transforms)
        self.size = len(self.transforms)
        fixed = dict(fixed or {})
        self.fixed = {int(i): float(v) for i, v in fixed.items()}
        self.free = np.array([i for i in range(self.size) if i not in self.fixed], dtype=int)
        for i, tr in enumerate(self.transforms):
            if tr.kind == "gap" and not tr.ref < i:
                raise ValueError("gap reference must precede the parameter")
        free = [i for i in self.free if self.transforms[i].kind != "identity"]
        by_kind = {k: np.array([i for i in free if self.transforms[i].kind == k], dtype=int)
                   for k in ("log", "logit", "gap")}
        self._log = by_kind["log"]
        self._log_lo = np.array([self.transforms[i].lo for i in self._log])
        self._logit = by_kind["logit"]
        self._logit_lo = np.array([self.transforms[i].lo for i in self._logit])
        self._logit_span = np.array([self.transforms[i].hi - self.transforms[i].lo
                                     for i in self._logit])
        self._gap = [(i, self.transforms[i].ref) for i in by_kind["gap"]]

    @property
    def n_free(self):
        return self.free.size

    def to_natural(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_free,):
            raise ValueError(f"expected {self.n_free} free coordinates, got shape {u.shape}")
        x = np.empty(self.size)
        for i, v in self.fixed.items():
            x[i] = v
        x[self.free] = u
        x[self._log] = self._log_lo + np.exp(x[self._log])
        x[self._logit] = self._logit_lo + self._logit_span * expit(x[self._logit])
        for i, ref in self._gap:
            x[i] = x[ref] + math.exp(x[i])
        return x

    def to_free(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.size,):
            raise ValueError(f"expected {self.size} natural parameters, got shape {x.shape}")
        u = np.empty(self.n_free)
        with np.errstate(divide="raise", invalid="raise"):
            for k, i in enumerate(self.free):
                tr = self.transforms[i]
                v = x[i]
                if tr.kind == "identity":
                    u[k] = v
                elif tr.kind == "log":
                    u[k] = np.log(v - tr.lo)
                elif tr.kind == "logit":
                    u[k] = logit((v - tr.lo) / (tr.hi - tr.lo))
                else:
                    u[k] = np.log(v - x[tr.ref])
        if not np.all(np.isfinite(u)):
            raise ValueError("parameter vector lies on or outside its constraint boundary")
        return u
