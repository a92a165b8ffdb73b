"""Traffic anomaly detection via sparse plus low-rank decomposition.

Link-load measurements Y (links x time, possibly incomplete) follow
Y = X + R A + E where X is the low-rank nominal traffic, R the binary
routing matrix, and A the sparse per-flow anomaly map.  The convex
estimator

    min_{X,A} ||P_Omega(Y - X - R A)||_F^2 + lam_star ||X||_* + lam1 ||A||_1

is solved centrally by accelerated proximal gradient (singular-value and
entrywise soft-thresholding).  For in-network operation the nuclear norm
is replaced by its bilinear factorization X = P Q' with a Frobenius
penalty, rows of (Y, R) are partitioned across router nodes, and consensus
ADMM couples the per-node copies of (Q, A); each node alternates small
quadratic solves for its P block and Q, with soft-thresholded proximal
steps on A.  A stationary point whose masked residual has spectral norm
below lam_star is certified globally optimal for the convex estimator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estimators import soft_threshold
from .graph import NetworkGraph

__all__ = [
    "TrafficInstance",
    "AnomalySolution",
    "FactorizedResult",
    "synth_traffic",
    "partition_rows",
    "solve_centralized",
    "solve_factorized_decentralized",
    "optimality_certificate",
    "roc_curve",
    "roc_auc",
    "baseline_twostep",
    "lambda_grid",
    "save_instance",
    "load_instance",
]

DIVERGENCE_WINDOW = 100


@dataclass
class TrafficInstance:
    """Observed link loads with routing matrix and optional ground truth."""

    Y: np.ndarray                   # (L, T)
    R: np.ndarray                   # (L, F) binary, single-path routing
    Omega: np.ndarray               # (L, T) bool, True where observed
    X_true: np.ndarray | None = None
    A_true: np.ndarray | None = None

    def __post_init__(self):
        self.Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        self.Omega = np.atleast_2d(np.asarray(self.Omega, dtype=bool))
        if self.Omega.shape != self.Y.shape:
            raise ValueError("mask must match Y")
        if self.R.shape[0] != self.Y.shape[0]:
            raise ValueError("R row count must match Y")
        if not np.isin(self.R, (0.0, 1.0)).all():
            raise ValueError("routing matrix entries must be 0/1")
        if not self.Omega.any():
            raise ValueError("mask is empty; nothing observed")

    @property
    def shape(self):
        return self.Y.shape

    @property
    def n_flows(self):
        return self.R.shape[1]


@dataclass
class AnomalySolution:
    """Estimated nominal traffic and anomaly map with the convex objective."""

    X: np.ndarray
    A: np.ndarray
    objective: float
    P: np.ndarray | None = None
    Q: np.ndarray | None = None
    objective_history: np.ndarray | None = None


def lambda_grid(lo: float, hi: float, num: int) -> np.ndarray:
    """Logarithmic sweep grid for the rank/sparsity penalties."""
    if not (0 < lo < hi) or num < 2:
        raise ValueError("need 0 < lo < hi and num >= 2")
    return np.geomspace(lo, hi, num)


def synth_traffic(L: int, F: int, T: int, rank: int, anomaly_density: float,
                  seed: int, noise_sigma: float = 0.0,
                  missing_frac: float = 0.0,
                  anomaly_scale: float = 5.0) -> TrafficInstance:
    """Synthetic routed traffic: smooth low-rank flows plus sparse spikes.

    Each flow is routed over a random path of links (one 0/1 column of R,
    with F > L so the routing matrix is wide); nominal flow traffic is a
    rank-``rank`` product with smooth temporal factors.
    """
    if rank > min(F, T):
        raise ValueError("rank exceeds min(F, T)")
    if not F > L:
        raise ValueError("need more flows than links (wide routing matrix)")
    if not (0.0 <= anomaly_density <= 1.0):
        raise ValueError("anomaly density must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    # routing: each flow crosses 2-4 random links (multi-link paths keep
    # per-flow anomalies distinguishable from rank-one nominal bumps);
    # keep every link used
    R = np.zeros((L, F))
    for f in range(F):
        path_len = rng.integers(2, min(4, L) + 1)
        R[rng.choice(L, size=path_len, replace=False), f] = 1.0
    for l in range(L):
        if R[l].sum() == 0:
            R[l, rng.integers(F)] = 1.0
    # smooth temporal basis: random low-frequency sinusoids
    tgrid = np.arange(T)
    V = np.stack([
        np.sin(2 * np.pi * rng.uniform(0.5, 3.0) * tgrid / T + rng.uniform(0, 2 * np.pi))
        + rng.uniform(0.5, 1.5)
        for _ in range(rank)
    ])
    U = np.abs(rng.standard_normal((F, rank)))
    Z = U @ V
    A = np.zeros((F, T))
    n_spikes = int(round(anomaly_density * F * T))
    if n_spikes:
        idx = rng.choice(F * T, size=n_spikes, replace=False)
        A.ravel()[idx] = anomaly_scale * rng.uniform(0.5, 1.5, size=n_spikes)
    E = noise_sigma * rng.standard_normal((L, T)) if noise_sigma > 0 else np.zeros((L, T))
    Y = R @ (Z + A) + E
    Omega = np.ones((L, T), dtype=bool)
    if missing_frac > 0:
        drop = rng.random((L, T)) < missing_frac
        if drop.all():
            drop.ravel()[0] = False
        Omega = ~drop
    return TrafficInstance(Y=Y, R=R, Omega=Omega, X_true=R @ Z, A_true=A)


def partition_rows(L: int, n: int) -> list[np.ndarray]:
    """Contiguous near-equal split of link rows across n router nodes."""
    if n > L:
        raise ValueError("more nodes than link rows")
    return [np.asarray(block) for block in np.array_split(np.arange(L), n)]


def _svt(M: np.ndarray, tau: float):
    """Singular-value soft-thresholding."""
    U, sv, Vt = np.linalg.svd(M, full_matrices=False)
    sv = np.maximum(sv - tau, 0.0)
    keep = sv > 0
    return (U[:, keep] * sv[keep]) @ Vt[keep], sv


def p1_objective(instance: TrafficInstance, X, A, lam_star, lam1) -> float:
    resid = np.where(instance.Omega, instance.Y - X - instance.R @ A, 0.0)
    nuc = np.linalg.svd(X, compute_uv=False).sum()
    return float((resid**2).sum() + lam_star * nuc + lam1 * np.abs(A).sum())


def solve_centralized(instance: TrafficInstance, lam_star: float, lam1: float,
                      iters: int = 2000, tol: float = 1e-10) -> AnomalySolution:
    """Accelerated proximal-gradient solve of the convex estimator.

    Momentum restarts whenever a step would increase the objective, which
    keeps the recorded objective history nonincreasing.
    """
    if lam_star < 0 or lam1 < 0:
        raise ValueError("penalties must be >= 0")
    Y, R, Om = instance.Y, instance.R, instance.Omega
    L, T = Y.shape
    F = R.shape[1]
    lip = 2.0 * (1.0 + float(np.linalg.norm(R, 2)) ** 2)
    step = 1.0 / lip

    def smooth_grad(X, A):
        resid = np.where(Om, Y - X - R @ A, 0.0)
        return -2.0 * resid, -2.0 * R.T @ resid

    def objective(X, A):
        return p1_objective(instance, X, A, lam_star, lam1)

    X = np.zeros((L, T))
    A = np.zeros((F, T))
    Xz, Az, t_acc = X.copy(), A.copy(), 1.0
    hist = [objective(X, A)]
    restarts_in_a_row = 0
    for _ in range(iters):
        gX, gA = smooth_grad(Xz, Az)
        Xn, _ = _svt(Xz - step * gX, step * lam_star)
        An = soft_threshold(Az - step * gA, step * lam1)
        if objective(Xn, An) > hist[-1] + 1e-14 * max(1.0, abs(hist[-1])):
            # restart from the last accepted point; a plain proximal step
            # cannot increase the objective
            Xz, Az, t_acc = X.copy(), A.copy(), 1.0
            gX, gA = smooth_grad(Xz, Az)
            Xn, _ = _svt(Xz - step * gX, step * lam_star)
            An = soft_threshold(Az - step * gA, step * lam1)
            restarts_in_a_row += 1
            if objective(Xn, An) > hist[-1] + 1e-9 * max(1.0, abs(hist[-1])):
                raise RuntimeError("objective increased after momentum restart")
        else:
            restarts_in_a_row = 0
        change = max(np.abs(Xn - X).max(), np.abs(An - A).max())
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc**2))
        Xz = Xn + ((t_acc - 1.0) / t_new) * (Xn - X)
        Az = An + ((t_acc - 1.0) / t_new) * (An - A)
        X, A, t_acc = Xn, An, t_new
        hist.append(objective(X, A))
        if change <= tol * max(1.0, np.abs(X).max(), np.abs(A).max()):
            break
    return AnomalySolution(X=X, A=A, objective=hist[-1],
                           objective_history=np.array(hist))


@dataclass
class FactorizedResult:
    """Factorized decentralized solve outcome.

    ``solution`` assembles the network view: stacked per-node P blocks
    against the consensus (network-mean) Q and A.
    """

    node_P: list
    node_Q: np.ndarray            # (n, T, rho)
    node_A: np.ndarray            # (n, F, T)
    row_owner: list
    objective_history: np.ndarray
    consensus_residual_q: float
    consensus_residual_a: float
    p2_objective: float
    iterations: int = 0
    solution: AnomalySolution = field(default=None)


class _DivergenceGuard:
    """Raise once the tracked objective rises for `window` straight checks."""

    def __init__(self, c: float, window: int = DIVERGENCE_WINDOW):
        self.c = c
        self.window = window
        self.prev = None
        self.streak = 0

    def update(self, value: float) -> None:
        if self.prev is not None and value > self.prev * (1 + 1e-12):
            self.streak += 1
            if self.streak >= self.window:
                raise RuntimeError(
                    f"objective rose for {self.window} consecutive iterations "
                    f"at c={self.c}; decrease the penalty c")
        else:
            self.streak = 0
        self.prev = value


def _p2_objective(instance, row_owner, node_P, Q, A, lam_star, lam1) -> float:
    total = lam_star / 2.0 * float((Q**2).sum()) + lam1 * float(np.abs(A).sum())
    for rows, P in zip(row_owner, node_P):
        resid = np.where(instance.Omega[rows],
                         instance.Y[rows] - P @ Q.T - instance.R[rows] @ A, 0.0)
        total += float((resid**2).sum()) + lam_star / 2.0 * float((P**2).sum())
    return total


def solve_factorized_decentralized(
    graph: NetworkGraph, instance: TrafficInstance, rho: int,
    lam_star: float, lam1: float, c: float, iters: int,
    row_owner: list | None = None, seed: int = 0,
    a_inner_cap: int = 100, rel_tol: float = 0.0,
) -> FactorizedResult:
    """Consensus-ADMM solve of the bilinear-factorized estimator.

    Per iteration and node: multiplier updates on the (Q, A) copies, an
    exact ridge solve for the local subspace block P_i, an exact quadratic
    solve for Q_i, and an accelerated soft-thresholding loop on A_i
    (schedule: P, then Q, then A).  Nodes exchange only (Q_i, A_i).  Being
    a nonconvex program there is no convergence guarantee; a detector
    raises when the objective rises for 100 consecutive iterations.
    ``rel_tol > 0`` stops early once the objective stalls and the copies
    agree to the same relative level.
    """
    if rho < 1:
        raise ValueError("rho must be >= 1")
    n = graph.n
    L, T = instance.shape
    F = instance.n_flows
    row_owner = row_owner if row_owner is not None else partition_rows(L, n)
    if len(row_owner) != n:
        raise ValueError("need one row block per node")
    rng = np.random.default_rng(seed)
    Q0 = rng.standard_normal((T, rho)) / np.sqrt(rho)
    node_P = [rng.standard_normal((len(rows), rho)) / np.sqrt(rho)
              for rows in row_owner]
    Qs = np.repeat(Q0[None], n, axis=0)
    As = np.zeros((n, F, T))
    vQ = np.zeros_like(Qs)
    vA = np.zeros_like(As)
    deg = graph.degrees

    # static per-node pieces
    Ys = [instance.Y[rows] for rows in row_owner]
    Rs = [instance.R[rows] for rows in row_owner]
    Oms = [instance.Omega[rows] for rows in row_owner]
    R_lip = [2.0 * float(np.linalg.norm(Ri, 2)) ** 2 for Ri in Rs]

    lam_q = lam_star / n
    lam_a = lam1 / n
    hist = []
    guard = _DivergenceGuard(c)
    it_done = 0
    for it in range(iters):
        Q_prev, A_prev = Qs.copy(), As.copy()
        for i in range(n):
            nbrs = graph.neighbors[i]
            d = deg[i]
            Yi, Ri, Omi = Ys[i], Rs[i], Oms[i]
            if nbrs:
                sumQ = sum(Q_prev[j] for j in nbrs)
                sumA = sum(A_prev[j] for j in nbrs)
                vQ[i] = vQ[i] + c * (d * Q_prev[i] - sumQ)
                vA[i] = vA[i] + c * (d * A_prev[i] - sumA)
                mQ = 0.5 * (d * Q_prev[i] + sumQ)   # sum of midpoints
                mA = 0.5 * (d * A_prev[i] + sumA)
            else:
                mQ = np.zeros((T, rho))
                mA = np.zeros((F, T))
            Qi, Ai, Pi = Q_prev[i], A_prev[i], node_P[i]

            # P block: masked ridge regression, batched small solves
            # (one rho x rho system per owned link row)
            target = np.where(Omi, Yi - Ri @ Ai, 0.0)
            Gp = 2.0 * np.einsum("ti,lt,tj->lij", Qi, Omi, Qi)
            Gp += lam_star * np.eye(rho)[None]
            Pi = np.linalg.solve(Gp, (2.0 * target @ Qi)[:, :, None])[:, :, 0]

            # Q block: exact quadratic solve, one rho x rho system per tick
            Gq = 2.0 * np.einsum("li,lt,lj->tij", Pi, Omi, Pi)
            Gq += (lam_q + 2.0 * c * d) * np.eye(rho)[None]
            rhs = 2.0 * target.T @ Pi - vQ[i] + 2.0 * c * mQ
            Qi = np.linalg.solve(Gq, rhs[:, :, None])[:, :, 0]

            # A block: accelerated proximal loop on the masked data fit
            lipA = R_lip[i] + 2.0 * c * d
            stepA = 1.0 / lipA
            low_rank = Pi @ Qi.T
            base = np.where(Omi, Yi - low_rank, 0.0)

            def a_grad(A):
                resid = base - np.where(Omi, Ri @ A, 0.0)
                return -2.0 * Ri.T @ resid + vA[i] + 2.0 * c * (d * A - mA)

            Az, t_acc = Ai.copy(), 1.0
            for _ in range(a_inner_cap):
                An = soft_threshold(Az - stepA * a_grad(Az), stepA * lam_a)
                gap = np.abs(An - Ai).max()
                t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc**2))
                Az = An + ((t_acc - 1.0) / t_new) * (An - Ai)
                Ai, t_acc = An, t_new
                if gap <= 1e-12 * max(1.0, np.abs(Ai).max()):
                    break

            node_P[i] = Pi
            Qs[i], As[i] = Qi, Ai

        Q_mean = Qs.mean(axis=0)
        A_mean = As.mean(axis=0)
        hist.append(_p2_objective(instance, row_owner, node_P, Q_mean, A_mean,
                                  lam_star, lam1))
        guard.update(hist[-1])
        it_done = it + 1
        if rel_tol > 0 and len(hist) > 10:
            scale = max(1.0, abs(hist[-1]))
            obj_flat = abs(hist[-1] - hist[-2]) <= rel_tol * scale
            agree = (np.abs(Qs - Q_mean[None]).max() <= rel_tol * max(1.0, np.abs(Q_mean).max())
                     and np.abs(As - A_mean[None]).max() <= rel_tol * max(1.0, np.abs(A_mean).max()))
            if obj_flat and agree:
                break

    Q_mean = Qs.mean(axis=0)
    A_mean = As.mean(axis=0)
    res_q = max((float(np.abs(Qs[i] - Qs[j]).max()) for (i, j) in graph.edges),
                default=0.0)
    res_a = max((float(np.abs(As[i] - As[j]).max()) for (i, j) in graph.edges),
                default=0.0)
    X_hat = np.vstack([node_P[i] @ Q_mean.T for i in range(n)])
    order = np.argsort(np.concatenate(row_owner))
    X_hat = X_hat[order]
    sol = AnomalySolution(
        X=X_hat, A=A_mean,
        objective=p1_objective(instance, X_hat, A_mean, lam_star, lam1),
        P=np.vstack(node_P)[order] if all(len(r) for r in row_owner) else None,
        Q=Q_mean, objective_history=np.array(hist),
    )
    return FactorizedResult(
        node_P=node_P, node_Q=Qs, node_A=As, row_owner=row_owner,
        objective_history=np.array(hist), consensus_residual_q=res_q,
        consensus_residual_a=res_a,
        p2_objective=hist[-1] if hist else np.inf, iterations=it_done,
        solution=sol,
    )


def optimality_certificate(solution: AnomalySolution,
                           instance: TrafficInstance,
                           lam_star: float) -> tuple[bool, float]:
    """Global-optimality check for a factorized stationary point.

    Computes the spectral norm of the masked residual
    P_Omega(Y - P Q' - R A) and compares it against lam_star; below the
    threshold the factorized solution solves the convex estimator.
    """
    X = solution.X if solution.P is None else solution.P @ solution.Q.T
    resid = np.where(instance.Omega,
                     instance.Y - X - instance.R @ solution.A, 0.0)
    spec = float(np.linalg.norm(resid, 2))
    return spec < lam_star, spec


def roc_curve(A_hat: np.ndarray, A_true: np.ndarray,
              thresholds: np.ndarray | None = None) -> np.ndarray:
    """Detection/false-alarm sweep of |A_hat| >= tau against binarized truth.

    Returns rows (tau, false-alarm rate, detection rate), monotone in tau.
    """
    A_hat = np.asarray(A_hat, dtype=float)
    A_true = np.asarray(A_true, dtype=float)
    if A_hat.shape != A_true.shape:
        raise ValueError("shapes differ")
    truth = np.abs(A_true) > 0
    pos = truth.sum()
    neg = truth.size - pos
    if pos == 0:
        raise ValueError("ground truth has no anomalies; detection rate undefined")
    if neg == 0:
        raise ValueError("ground truth is all-anomalous; false-alarm rate undefined")
    mags = np.abs(A_hat)
    if thresholds is None:
        thresholds = np.unique(mags)[::-1]
    rows = []
    for tau in thresholds:
        det = mags >= tau
        pd = det[truth].sum() / pos
        pfa = det[~truth].sum() / neg
        rows.append((float(tau), float(pfa), float(pd)))
    return np.array(rows)


def roc_auc(curve: np.ndarray) -> float:
    """Trapezoidal area under a (tau, pfa, pd) sweep, closed at (0,0),(1,1)."""
    pfa = np.concatenate([[0.0], curve[:, 1], [1.0]])
    pd = np.concatenate([[0.0], curve[:, 2], [1.0]])
    order = np.argsort(pfa, kind="stable")
    return float(np.trapezoid(pd[order], pfa[order]))


def baseline_twostep(instance: TrafficInstance, ridge: float = 1e-2) -> np.ndarray:
    """Decoupled baseline: ridge LS flow estimate, thresholded afterwards."""
    L, T = instance.shape
    F = instance.n_flows
    A = np.empty((F, T))
    for t in range(T):
        w = instance.Omega[:, t]
        Rw = instance.R[w]
        G = Rw.T @ Rw + ridge * np.eye(F)
        A[:, t] = np.linalg.solve(G, Rw.T @ instance.Y[w, t])
    return A


def save_instance(instance: TrafficInstance, y_path, r_path) -> None:
    """CSV persistence: blank cells of Y mark missing entries; R is 0/1."""
    with open(y_path, "w") as fh:
        for l in range(instance.Y.shape[0]):
            cells = [repr(float(v)) if m else ""
                     for v, m in zip(instance.Y[l], instance.Omega[l])]
            fh.write(",".join(cells) + "\n")
    with open(r_path, "w") as fh:
        for row in instance.R:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def load_instance(y_path, r_path) -> TrafficInstance:
    rows, mask = [], []
    with open(y_path) as fh:
        for ln in fh:
            cells = ln.rstrip("\n").split(",")
            rows.append([float(c) if c else 0.0 for c in cells])
            mask.append([bool(c) for c in cells])
    R = np.loadtxt(r_path, delimiter=",", ndmin=2)
    return TrafficInstance(Y=np.array(rows), R=R, Omega=np.array(mask))
