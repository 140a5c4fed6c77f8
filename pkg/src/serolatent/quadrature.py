"""Gauss-Jacobi rules for Beta-weighted integrals on [0, 1].

The rules integrate ``g(t)`` against the normalized Beta(alpha, beta) density,
so for a Beta latent component the singular endpoint behaviour of
``t**(alpha - 1) * (1 - t)**(beta - 1)`` is carried by the weights and the
remaining integrand is smooth.

Nodes and weights come from the Golub-Welsch construction: the monic Jacobi
three-term recurrence gives a symmetric tridiagonal Jacobi matrix whose
eigenvalues are the nodes and whose squared first eigenvector components are
the weights. Only the first row of the eigenvector matrix is carried through
the implicit QL sweeps, so a rule costs O(n**2).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numba
import numpy as np

DEFAULT_NODES = 32
MAX_SHAPE = 1e4


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes on (0, 1) and non-negative weights summing to one."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "gauss-jacobi"

    def __post_init__(self):
        if self.nodes.shape != self.weights.shape:
            raise ValueError("nodes and weights must have equal length")
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def integrate(self, g):
        """Approximate E[g(T)] for T following the rule's Beta kernel."""
        return float(np.dot(self.weights, g(self.nodes)))


@numba.njit(cache=True)
def _recurrence(alpha, beta, n, d, e):
    # Jacobi recurrence on x = 2t - 1 with kernel (1 - x)**a (1 + x)**b,
    # a = beta - 1, b = alpha - 1, then mapped back to t.
    a = beta - 1.0
    b = alpha - 1.0
    ab = a + b
    d[0] = 0.5 * ((b - a) / (ab + 2.0) + 1.0)
    for k in range(1, n):
        s = 2.0 * k + ab
        d[k] = 0.5 * ((b * b - a * a) / (s * (s + 2.0)) + 1.0)
    if n > 1:
        # k = 1 written out: the general form divides by a + b + 1, which
        # vanishes for alpha + beta = 1 (e.g. the symmetric U-shape)
        e[0] = 0.5 * math.sqrt(4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab) ** 2 * (3.0 + ab)))
    for k in range(2, n):
        s = 2.0 * k + ab
        num = 4.0 * k * (k + a) * (k + b) * (k + ab)
        e[k - 1] = 0.5 * math.sqrt(num / (s * s * (s + 1.0) * (s - 1.0)))
    e[n - 1] = 0.0


@numba.njit(cache=True)
def _ql_first_row(d, e, z):
    """Implicit QL on a symmetric tridiagonal matrix, in place.

    ``d`` becomes the eigenvalues and ``z`` (initially the first unit vector)
    the first components of the eigenvectors. Returns False if an eigenvalue
    fails to converge in 60 sweeps.
    """
    n = d.shape[0]
    eps = 2.220446049250313e-16
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > 60:
                return False
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.sqrt(g * g + 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            deflated = False
            i = m - 1
            while i >= l:
                f = s * e[i]
                bb = c * e[i]
                r = math.sqrt(f * f + g * g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * bb
                p = s * r
                d[i + 1] = g + p
                g = c * r - bb
                f = z[i + 1]
                z[i + 1] = s * z[i] + c * f
                z[i] = c * z[i] - s * f
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return True


@numba.njit(cache=True)
def _rules(alpha, beta, n, nodes, weights):
    d = np.empty(n)
    e = np.empty(n)
    z = np.empty(n)
    tiny = 2.2250738585072014e-308
    top = 1.0 - 1.1102230246251565e-16
    for g in range(alpha.shape[0]):
        _recurrence(alpha[g], beta[g], n, d, e)
        z[:] = 0.0
        z[0] = 1.0
        if not _ql_first_row(d, e, z):
            return False
        order = np.argsort(d)
        total = 0.0
        for k in range(n):
            total += z[k] * z[k]
        for k in range(n):
            j = order[k]
            nodes[g, k] = min(max(d[j], tiny), top)
            weights[g, k] = z[j] * z[j] / total
    return True


def jacobi_rules(alpha, beta, n_nodes=DEFAULT_NODES):
    """Gauss-Jacobi nodes and weights for many Beta kernels at once.

    Parameters
    ----------
    alpha, beta : array_like
        Shape parameters, broadcast to a common shape and flattened to ``(G,)``.
    n_nodes : int
        Number of nodes per rule.

    Returns
    -------
    nodes, weights : ndarray, shape (G, n_nodes)
        Nodes ascending within each row; each weight row sums to one.
    """
    alpha, beta = np.broadcast_arrays(
        np.asarray(alpha, dtype=float), np.asarray(beta, dtype=float)
    )
    alpha = np.ascontiguousarray(alpha.ravel())
    beta = np.ascontiguousarray(beta.ravel())
    lo = min(alpha.min(), beta.min()) if alpha.size else 1.0
    hi = max(alpha.max(), beta.max()) if alpha.size else 1.0
    _check_range(lo, hi)
    return _solve(alpha, beta, n_nodes)


def _check_range(lo, hi):
    # NaN fails both comparisons below, so test finiteness first
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise FloatingPointError("non-finite Beta shape parameter")
    if lo <= 0:
        raise ValueError("Beta shape parameters must be positive")
    if hi > MAX_SHAPE:
        raise FloatingPointError(
            f"Beta shape above {MAX_SHAPE:g}: Jacobi recurrence is ill-conditioned"
        )


def _solve(alpha, beta, n_nodes):
    nodes = np.empty((alpha.size, n_nodes))
    weights = np.empty((alpha.size, n_nodes))
    if not _rules(alpha, beta, int(n_nodes), nodes, weights):
        raise FloatingPointError("Golub-Welsch eigenvalue iteration did not converge")
    return nodes, weights


@functools.lru_cache(maxsize=4096)
def _cached_rule(alpha, beta, n_nodes):
    _check_range(alpha, alpha)
    _check_range(beta, beta)
    nodes, weights = _solve(np.array([alpha]), np.array([beta]), n_nodes)
    return QuadratureRule(nodes[0], weights[0])


def build_quadrature(alpha, beta, n_nodes=DEFAULT_NODES):
    """Cached Gauss-Jacobi rule for the Beta(alpha, beta) kernel.

    The rule is exact for polynomials of degree ``2 * n_nodes - 1``.
    """
    if n_nodes < 4:
        raise ValueError("n_nodes must be at least 4")
    return _cached_rule(float(alpha), float(beta), int(n_nodes))
