"""Decentralized supervised and unsupervised learners.

Linear max-margin classification: every node holds labeled examples and a
hinge-loss local cost over the stacked variable [w; b]; consensus ADMM
drives all local models to the centralized soft-margin classifier.

Hard K-means clustering: nodes alternate local nearest-centroid assignments
with network-wide consensus on the per-cluster sufficient statistics
(weighted sums and counts), from which every node recomputes the centroids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import LocalCost, RunTrace, admm_run
from .estimators import daverage_run
from .graph import NetworkGraph

__all__ = [
    "SvmLocalData",
    "SvmModel",
    "SvmCost",
    "dsvm_local_solve",
    "dsvm_run",
    "centralized_svm",
    "svm_objective",
    "ClusterState",
    "dkmeans_run",
    "centralized_lloyd",
    "kmeans_sse",
]


# ---------------------------------------------------------------------------
# support vector machines

@dataclass
class SvmLocalData:
    """Labeled examples of one node: rows of X with labels in {-1, +1}."""

    X: np.ndarray
    y: np.ndarray
    C: float

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if self.X.shape[0] != self.y.size or self.y.size == 0:
            raise ValueError("need at least one example with matching label")
        if not np.isin(self.y, (-1.0, 1.0)).all():
            raise ValueError("labels must be -1 or +1")
        if self.C <= 0:
            raise ValueError("margin-violation weight C must be > 0")


@dataclass
class SvmModel:
    """Linear discriminant g(x) = x'w + b."""

    w: np.ndarray
    b: float

    @property
    def sbar(self) -> np.ndarray:
        return np.concatenate([self.w, [self.b]])

    def decision(self, X) -> np.ndarray:
        return np.atleast_2d(np.asarray(X, dtype=float)) @ self.w + self.b


def svm_objective(datas: list[SvmLocalData], w: np.ndarray, b: float) -> float:
    """Full soft-margin objective ||w||^2/2 + C sum hinge over all nodes."""
    total = 0.5 * float(w @ w)
    for d in datas:
        margins = d.y * (d.X @ w + b)
        total += d.C * float(np.maximum(0.0, 1.0 - margins).sum())
    return total


class SvmCost(LocalCost):
    """Hinge local cost over sbar = [w; b]:

    f(sbar) = ||w||^2 / (2 n_nodes) + C sum_l max(0, 1 - y_l (w'x_l + b))

    The bias rides along in the consensus variable and is unregularized.
    The augmented subproblem is solved exactly via its box-constrained dual
    (cyclic coordinate ascent; the consensus penalty makes the quadratic
    part positive definite in all coordinates including the bias).
    """

    def __init__(self, data: SvmLocalData, n_nodes: int,
                 inner_tol: float = 1e-8, inner_cap: int = 200_000):
        self.data = data
        self.n_nodes = n_nodes
        self.inner_tol = inner_tol
        self.inner_cap = inner_cap
        self.p = data.X.shape[1]
        self.dim = self.p + 1
        # a_l = y_l [x_l; 1]
        self._A = data.y[:, None] * np.hstack([data.X, np.ones((data.y.size, 1))])

    def evaluate(self, sbar):
        w, b = sbar[:-1], sbar[-1]
        margins = self.data.y * (self.data.X @ w + b)
        hinge = np.maximum(0.0, 1.0 - margins).sum()
        return float(0.5 * (w @ w) / self.n_nodes + self.data.C * hinge)

    def _smooth_parts(self, v, targets, c):
        deg = targets.shape[0]
        Pdiag = np.full(self.dim, 2.0 * c * deg)
        Pdiag[:-1] += 1.0 / self.n_nodes
        q = v - 2.0 * c * targets.sum(axis=0)
        return Pdiag, q

    def solve_local(self, v, targets, c):
        if targets.shape[0] == 0:
            # isolated node: the subproblem is the plain local SVM (the
            # engine only reaches this with v = 0 on a single-node graph)
            if np.linalg.norm(v) > 0:
                raise RuntimeError("tilted hinge subproblem without neighbors")
            scaled = SvmLocalData(self.data.X, self.data.y,
                                  self.data.C * self.n_nodes)
            return centralized_svm([scaled]).sbar
        Pdiag, q = self._smooth_parts(v, targets, c)
        if (Pdiag <= 0).any():
            raise RuntimeError("hinge subproblem is not strongly convex; "
                               "needs c > 0 and at least one neighbor")
        A = self._A
        C = self.data.C
        Pinv_at = A / Pdiag[None, :]            # rows: P^-1 a_l (P diagonal)
        curv = np.einsum("li,li->l", A, Pinv_at)
        alpha = np.zeros(A.shape[0])
        sbar = -q / Pdiag                       # s(alpha=0)
        scale = max(1.0, float(np.linalg.norm(q)))
        for sweep in range(self.inner_cap):
            moved = 0.0
            for l in range(A.shape[0]):
                g = 1.0 - A[l] @ sbar
                new = min(max(alpha[l] + g / curv[l], 0.0), C)
                delta = new - alpha[l]
                if delta != 0.0:
                    sbar = sbar + delta * Pinv_at[l]
                    alpha[l] = new
                    moved = max(moved, abs(delta))
            if self._subgradient_residual(sbar, alpha, Pdiag, q) <= self.inner_tol * scale:
                return sbar
            if moved == 0.0:
                break
        resid = self._subgradient_residual(sbar, alpha, Pdiag, q)
        if resid <= self.inner_tol * scale * 10:
            return sbar
        raise RuntimeError(f"hinge subproblem stalled at residual {resid:.3e}")

    def _subgradient_residual(self, sbar, alpha, Pdiag, q, margin_tol=1e-9):
        """Min-norm subgradient of the subproblem at sbar.

        P sbar + q - sum_l beta_l a_l with beta_l forced to C (0) strictly
        inside (outside) the margin and set to alpha_l on it.
        """
        gaps = 1.0 - self._A @ sbar
        beta = np.where(gaps > margin_tol, self.data.C,
                        np.where(gaps < -margin_tol, 0.0, alpha))
        r = Pdiag * sbar + q - beta @ self._A
        return float(np.linalg.norm(r))

    @staticmethod
    def aggregate_minimize(costs: list["SvmCost"], tol: float = 1e-10):
        return centralized_svm([f.data for f in costs]).sbar


def dsvm_local_solve(data: SvmLocalData, n_nodes: int, v, targets, c) -> np.ndarray:
    """One hinge subproblem solve (standalone access to SvmCost.solve_local)."""
    cost = SvmCost(data, n_nodes)
    return cost.solve_local(np.asarray(v, dtype=float),
                            np.atleast_2d(np.asarray(targets, dtype=float)), c)


def centralized_svm(datas: list[SvmLocalData]) -> SvmModel:
    """Reference soft-margin classifier on the pooled data (libsvm solve)."""
    from sklearn.svm import SVC

    X = np.vstack([d.X for d in datas])
    y = np.concatenate([d.y for d in datas])
    C = datas[0].C
    if any(d.C != C for d in datas):
        raise ValueError("all nodes must share the margin-violation weight C")
    clf = SVC(C=C, kernel="linear", tol=1e-10)
    clf.fit(X, y)
    return SvmModel(w=clf.coef_.ravel().copy(), b=float(clf.intercept_[0]))


def dsvm_run(graph: NetworkGraph, datas: list[SvmLocalData], c: float,
             iters: int, ref: np.ndarray | None = None):
    """Decentralized SVM training.

    Returns (per-node SvmModel list, RunTrace).  ``ref`` may carry the
    centralized [w; b] to populate the distance trace.
    """
    costs = [SvmCost(d, graph.n) for d in datas]
    tr = admm_run(graph, costs, c, iters, ref=ref)
    models = [SvmModel(w=tr.S[i, :-1].copy(), b=float(tr.S[i, -1]))
              for i in range(graph.n)]
    return models, tr


# ---------------------------------------------------------------------------
# hard K-means

@dataclass
class ClusterState:
    """Hard clustering outcome: consensus centroids plus per-node views."""

    K: int
    centroids: np.ndarray                    # (K, p) network average
    node_centroids: np.ndarray               # (n, K, p) per-node copies
    memberships: list[np.ndarray]            # one-hot (m_i, K) per node
    sse: float
    sse_history: np.ndarray = field(default=None)
    consensus_residual: float = 0.0
    converged: bool = False


def _assign(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Nearest-centroid hard assignments; ties go to the lowest index."""
    d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def _cluster_stats(X: np.ndarray, assign: np.ndarray, K: int):
    """Per-cluster coordinate sums and counts (sums first, division later)."""
    p = X.shape[1]
    sums = np.zeros((K, p))
    counts = np.zeros(K)
    for k in range(K):
        mask = assign == k
        counts[k] = float(mask.sum())
        if counts[k]:
            sums[k] = X[mask].sum(axis=0)
    return sums, counts


def kmeans_sse(Xs: list[np.ndarray], assigns: list[np.ndarray],
               centroids: np.ndarray) -> float:
    total = 0.0
    for X, a in zip(Xs, assigns):
        total += float(((X - centroids[a]) ** 2).sum())
    return total


def _reseed_empty(centroids: np.ndarray, counts: np.ndarray,
                  Xs: list[np.ndarray], assigns: list[np.ndarray]) -> np.ndarray:
    """Replace empty-cluster centroids with the globally farthest observation."""
    out = centroids.copy()
    for k in np.flatnonzero(counts < 0.5):
        best, best_d = None, -1.0
        for X, a in zip(Xs, assigns):
            if X.shape[0] == 0:
                continue
            d = ((X - out[a]) ** 2).sum(axis=1)
            j = int(np.argmax(d))
            if d[j] > best_d:
                best_d, best = d[j], X[j]
        out[k] = best
    return out


def _seed_centroids(Xs: list[np.ndarray], K: int, seed: int) -> np.ndarray:
    pooled = np.vstack(Xs)
    if pooled.shape[0] < K:
        raise ValueError(f"need at least K={K} observations")
    rng = np.random.default_rng(seed)
    idx = rng.choice(pooled.shape[0], size=K, replace=False)
    return pooled[idx].copy()


def dkmeans_run(graph: NetworkGraph, Xs: list[np.ndarray], K: int, eta: float,
                iters: int, seed: int = 0, inner_iters: int = 50,
                init_centroids: np.ndarray | None = None) -> ClusterState:
    """Decentralized hard K-means.

    Alternates (S1) local hard assignments against each node's current
    centroids with (S2) a fixed budget of consensus-ADMM rounds (penalty
    ``eta``) on the stacked per-cluster sums and counts, after which each
    node recomputes centroids as sum/count.  Memberships stay local; only
    centroid statistics are exchanged.  Empty clusters are re-seeded from
    the farthest observation.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    Xs = [np.atleast_2d(np.asarray(X, dtype=float)) for X in Xs]
    if len(Xs) != graph.n:
        raise ValueError("need one observation block per node")
    p = Xs[0].shape[1]
    init = (_seed_centroids(Xs, K, seed) if init_centroids is None
            else np.array(init_centroids, dtype=float))
    node_cents = np.repeat(init[None, :, :], graph.n, axis=0)

    sse_hist = []
    prev_assigns = None
    converged = False
    assigns = [np.zeros(X.shape[0], dtype=int) for X in Xs]
    resid = np.inf
    for _ in range(iters):
        assigns = [_assign(X, node_cents[i]) for i, X in enumerate(Xs)]
        stats = []
        counts_all = np.zeros(K)
        for X, a in zip(Xs, assigns):
            sums, counts = _cluster_stats(X, a, K)
            counts_all += counts
            stats.append(np.concatenate([sums.ravel(), counts]))
        tr = daverage_run(graph, np.stack(stats), c=eta, iters=inner_iters)
        for i in range(graph.n):
            mean_sums = tr.S[i, :K * p].reshape(K, p)
            mean_counts = tr.S[i, K * p:]
            safe = np.maximum(mean_counts, 1e-12)
            node_cents[i] = mean_sums / safe[:, None]
        if (counts_all < 0.5).any():
            for i in range(graph.n):
                node_cents[i] = _reseed_empty(node_cents[i], counts_all, Xs, assigns)
        mean_cents = node_cents.mean(axis=0)
        resid = max(
            float(np.abs(node_cents[i] - mean_cents).max()) for i in range(graph.n)
        ) if graph.n > 1 else 0.0
        sse_hist.append(kmeans_sse(Xs, assigns, mean_cents))
        if prev_assigns is not None and all(
                np.array_equal(a, b) for a, b in zip(assigns, prev_assigns)):
            converged = True
            break
        prev_assigns = assigns

    members = []
    for X, a in zip(Xs, assigns):
        onehot = np.zeros((X.shape[0], K))
        onehot[np.arange(X.shape[0]), a] = 1.0
        members.append(onehot)
    mean_cents = node_cents.mean(axis=0)
    return ClusterState(
        K=K, centroids=mean_cents, node_centroids=node_cents,
        memberships=members, sse=sse_hist[-1] if sse_hist else 0.0,
        sse_history=np.array(sse_hist), consensus_residual=resid,
        converged=converged,
    )


def centralized_lloyd(X: np.ndarray, K: int, init_centroids: np.ndarray,
                      iters: int = 500):
    """Plain alternating K-means on pooled data, same tie-break policy.

    Returns (centroids, assignments, sse_history).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    cents = np.array(init_centroids, dtype=float)
    sse_hist = []
    prev = None
    for _ in range(iters):
        a = _assign(X, cents)
        sums, counts = _cluster_stats(X, a, K)
        if (counts < 0.5).any():
            cents = _reseed_empty(cents, counts, [X], [a])
            sums, counts = _cluster_stats(X, _assign(X, cents), K)
            a = _assign(X, cents)
        safe = np.maximum(counts, 1e-12)
        cents = sums / safe[:, None]
        sse_hist.append(kmeans_sse([X], [a], cents))
        if prev is not None and np.array_equal(a, prev):
            break
        prev = a
    return cents, a, np.array(sse_hist)
