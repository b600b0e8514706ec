"""Exact t-SNE over a precomputed knn graph.

Conditionals come from a Gaussian kernel on the knn distances with a per-row
bandwidth found by bisection; the symmetrized joint distribution is sparse on
the knn edges. The layout is optimized with the exact O(n^2) Student-t
gradient, so there is no Barnes-Hut or interpolation error to reason about.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numba import njit

from .knn import KnnGraph

__all__ = [
    "TsneParams",
    "JointProbabilities",
    "Embedding",
    "CalibrationError",
    "TsneDivergenceError",
    "calibrate_sigma",
    "joint_probabilities",
    "kl_cost",
    "kl_gradient",
    "exaggeration_at",
    "run_tsne",
]

log = logging.getLogger(__name__)


class CalibrationError(ValueError):
    """A row's perplexity target cannot be met."""


class TsneDivergenceError(FloatingPointError):
    """The optimizer produced a non-finite gradient or layout."""


@dataclass(frozen=True)
class TsneParams:
    perplexity: float = 30.0
    iterations: int = 1000
    exaggeration_factor: float = 4.0
    exaggeration_iters: int = 250
    exaggeration_decay_iters: int = 40
    learning_rate: float = 200.0
    momentum_initial: float = 0.5
    momentum_final: float = 0.8
    momentum_switch_iter: int = 250
    seed: int = 0

    def __post_init__(self):
        if self.perplexity < 2:
            raise ValueError("perplexity must be at least 2")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.iterations < self.exaggeration_iters + self.exaggeration_decay_iters:
            raise ValueError("iterations must cover the exaggeration schedule")
        if self.exaggeration_factor <= 0 or self.learning_rate <= 0:
            raise ValueError("exaggeration factor and learning rate must be positive")
        for m in (self.momentum_initial, self.momentum_final):
            if not 0 <= m < 1:
                raise ValueError("momentum must lie in [0, 1)")

    @property
    def n_neighbors(self) -> int:
        return 3 * int(np.ceil(self.perplexity))


@dataclass(frozen=True, eq=False)
class JointProbabilities:
    """Symmetric sparse joint distribution; ``matrix`` is an ``(n, n)`` CSR."""

    matrix: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def entries(self):
        coo = self.matrix.tocoo()
        return coo.row, coo.col, coo.data


@dataclass(frozen=True, eq=False)
class Embedding:
    coords: np.ndarray  # (n, 2)
    trace: np.ndarray | None = field(default=None, repr=False)  # (iters, 2): iter, kl

    def __post_init__(self):
        if not np.all(np.isfinite(self.coords)):
            raise TsneDivergenceError("embedding has non-finite coordinates")

    @property
    def n(self) -> int:
        return self.coords.shape[0]


# ---------------------------------------------------------------------------
# affinities


def _row_stats(dn: np.ndarray, beta: float):
    e = np.exp(-beta * dn)
    s = e.sum()
    p = e / s
    # entropy in nats; exp(H) equals the base-2 perplexity 2**H2
    h = np.log(s) + beta * float(np.dot(dn, p))
    return p, h


def calibrate_sigma(distances, perplexity: float, tol: float = 1e-5, max_steps: int = 200):
    """Bandwidth whose Gaussian conditionals over ``distances`` hit ``perplexity``.

    Returns ``(sigma, p)`` with ``p`` summing to one. The search runs on
    distances shifted to start at zero and scaled to unit range, so scaling a
    row leaves the conditionals unchanged and only rescales ``sigma``.
    """
    d = np.asarray(distances, dtype=np.float64)
    k = d.size
    if k < 1 or np.any(d < 0) or np.any(np.isnan(d)):
        raise CalibrationError("distances must be a non-empty non-negative row")
    finite = np.isfinite(d)
    if not finite.any():
        raise CalibrationError("all distances are infinite")
    lo_d = d[finite].min()
    span = d[finite].max() - lo_d
    if span == 0.0 and finite.all():
        return 1.0, np.full(k, 1.0 / k)
    if perplexity >= k:
        raise CalibrationError(f"perplexity {perplexity} unreachable with {k} neighbors")
    if span == 0.0:
        span = 1.0
    dn = np.where(finite, (d - lo_d) / span, np.inf)
    target = np.log(perplexity)

    beta, lo, hi = 1.0, 0.0, np.inf
    p, h = _row_stats(dn, beta)
    for _ in range(max_steps):
        if abs(np.exp(h) - perplexity) < tol:
            break
        if h > target:
            lo = beta
            beta = beta * 2.0 if hi == np.inf else 0.5 * (beta + hi)
        else:
            hi = beta
            beta = 0.5 * (beta + lo)
        p, h = _row_stats(dn, beta)
    else:
        if abs(np.exp(h) - perplexity) >= 1e-4:
            # ties at the smallest distance put a floor under the perplexity
            log.warning("perplexity %.4g not reached (got %.4g)", perplexity, np.exp(h))
    sigma = float(np.sqrt(span / (2.0 * beta)))
    return sigma, p


def joint_probabilities(graph: KnnGraph, perplexity: float) -> JointProbabilities:
    """Symmetrized joint distribution ``(p_j|i + p_i|j) / 2n`` on the knn edges."""
    n, k = graph.n, graph.k
    cond = np.empty((n, k))
    for i in range(n):
        if k == 1:
            cond[i] = 1.0
            continue
        try:
            _, cond[i] = calibrate_sigma(graph.distances[i], perplexity)
        except CalibrationError as exc:
            raise CalibrationError(f"row {i}: {exc}") from exc
    rows = np.repeat(np.arange(n), k)
    pc = sp.csr_matrix((cond.ravel(), (rows, graph.indices.ravel())), shape=(n, n))
    pj = ((pc + pc.T) / (2.0 * n)).tocsr()
    pj.sort_indices()
    return JointProbabilities(pj)


# ---------------------------------------------------------------------------
# cost and gradient


def kl_cost(P: JointProbabilities, coords) -> float:
    """KL divergence of the Student-t affinities from ``P`` (dense reference)."""
    y = np.asarray(coords, dtype=np.float64)
    if y.shape[0] != P.n:
        raise ValueError("embedding and P differ in size")
    diff = y[:, None, :] - y[None, :, :]
    num = 1.0 / (1.0 + (diff * diff).sum(-1))
    np.fill_diagonal(num, 0.0)
    q = num / num.sum()
    r, c, p = P.entries()
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[r[mask], c[mask]])))


@njit(cache=True)
def _gradient(y, indptr, indices, pvals, exag, grad, qedge):
    """Exact gradient; returns the normalizer Z. ``qedge`` gets per-edge kernels."""
    n = y.shape[0]
    z = 0.0
    rep = np.zeros((n, 2))
    for i in range(n):
        for j in range(i + 1, n):
            dx = y[i, 0] - y[j, 0]
            dy = y[i, 1] - y[j, 1]
            q = 1.0 / (1.0 + dx * dx + dy * dy)
            z += 2.0 * q
            w = q * q
            rep[i, 0] += w * dx
            rep[i, 1] += w * dy
            rep[j, 0] -= w * dx
            rep[j, 1] -= w * dy
    for i in range(n):
        ax = 0.0
        ay = 0.0
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            dx = y[i, 0] - y[j, 0]
            dy = y[i, 1] - y[j, 1]
            q = 1.0 / (1.0 + dx * dx + dy * dy)
            qedge[e] = q
            pq = exag * pvals[e] * q
            ax += pq * dx
            ay += pq * dy
        grad[i, 0] = 4.0 * (ax - rep[i, 0] / z)
        grad[i, 1] = 4.0 * (ay - rep[i, 1] / z)
    return z


def _kl_from_state(pvals, plogp, qedge, z) -> float:
    mask = pvals > 0
    return float(plogp - np.sum(pvals[mask] * np.log(qedge[mask] / z)))


def kl_gradient(P: JointProbabilities, coords, exaggeration: float = 1.0):
    """Analytic gradient of the KL cost and the cost itself (unexaggerated P).

    The cost here is computed from the optimizer's own per-edge kernels and
    normalizer, independently of :func:`kl_cost`.
    """
    y = np.ascontiguousarray(coords, dtype=np.float64)
    m = P.matrix
    grad = np.empty_like(y)
    qedge = np.empty(m.nnz)
    z = _gradient(y, m.indptr.astype(np.int64), m.indices.astype(np.int64),
                  m.data, float(exaggeration), grad, qedge)
    pv = m.data[m.data > 0]
    return grad, _kl_from_state(m.data, float(np.sum(pv * np.log(pv))), qedge, z)


def exaggeration_at(params: TsneParams, it: int) -> float:
    """Factor at iteration ``it``: constant, then exponential decay to one."""
    e, d = params.exaggeration_iters, params.exaggeration_decay_iters
    f = params.exaggeration_factor
    if it < e:
        return f
    if it < e + d:
        return f ** (1.0 - (it - e) / d)
    return 1.0


def run_tsne(P: JointProbabilities, params: TsneParams, init=None, callback=None) -> Embedding:
    """Optimize a 2D layout with momentum gradient descent and adaptive gains.

    ``init`` overrides the seeded N(0, 1e-4^2) start. ``callback(it, coords,
    kl)`` is invoked after each step.
    """
    n = P.n
    m = P.matrix
    indptr = m.indptr.astype(np.int64)
    indices = m.indices.astype(np.int64)
    pvals = np.ascontiguousarray(m.data)
    pv = pvals[pvals > 0]
    plogp = float(np.sum(pv * np.log(pv)))

    if init is None:
        rng = np.random.default_rng(params.seed)
        y = 1e-4 * rng.standard_normal((n, 2))
    else:
        y = np.array(init, dtype=np.float64)
        if y.shape != (n, 2):
            raise ValueError(f"init must have shape ({n}, 2)")
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    grad = np.empty_like(y)
    qedge = np.empty(m.nnz)
    trace = np.empty((params.iterations, 2))

    for it in range(params.iterations):
        exag = exaggeration_at(params, it)
        z = _gradient(y, indptr, indices, pvals, exag, grad, qedge)
        if not np.all(np.isfinite(grad)):
            raise TsneDivergenceError(f"non-finite gradient at iteration {it}")
        mom = params.momentum_initial if it < params.momentum_switch_iter else params.momentum_final
        same = np.sign(grad) == np.sign(update)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        update = mom * update - params.learning_rate * gains * grad
        y = y + update
        y = y - y.mean(axis=0)
        # the cost is that of the unexaggerated P at the pre-step layout
        kl = _kl_from_state(pvals, plogp, qedge, z)
        trace[it] = (it, kl)
        if callback is not None:
            callback(it, y, kl)
    if not np.all(np.isfinite(y)):
        raise TsneDivergenceError("layout diverged")
    return Embedding(y, trace)
