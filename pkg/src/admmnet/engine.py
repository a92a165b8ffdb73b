"""Generic synchronous consensus-ADMM engine.

Every node i holds a local estimate ``s_i`` and an aggregated multiplier
``v_i``.  One iteration exchanges estimates with single-hop neighbors, then
each node applies

    v_i <- v_i + c * sum_j (s_i - s_j)                      (multiplier step)
    s_i <- argmin_s  f_i(s) + v_i^T s
                     + c * sum_j || s - (s_i + s_j)/2 ||^2  (local solve)

where the sums run over neighbors j and the exchanged ``s_j`` may be
corrupted by link noise.  With all-zero initialization and convex costs the
local estimates converge to the minimizer of ``sum_i f_i``.

Per-edge multipliers (one per directed edge, half the aggregated increment)
can be tracked on request; they feed the contraction analysis in
:mod:`admmnet.rates`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .graph import NetworkGraph, is_connected

__all__ = [
    "EngineError",
    "LocalSolveError",
    "OracleError",
    "LocalCost",
    "QuadraticCost",
    "AverageCost",
    "LinkNoiseModel",
    "NodeState",
    "RunTrace",
    "admm_run",
    "consensus_error",
    "centralized_oracle",
    "edge_multiplier_step",
]

INNER_GRAD_TOL = 1e-10
INNER_MAX_STEPS = 500


class EngineError(RuntimeError):
    """Engine-level failure (bad parameter, local solve breakdown)."""


class LocalSolveError(EngineError):
    """A node's local subproblem solve did not reach tolerance."""


class OracleError(EngineError):
    """Centralized reference solve did not converge within budget."""


class LocalCost:
    """Per-node cost f_i, supplying the augmented local subproblem solve.

    Subclasses must implement :meth:`evaluate` and either override
    :meth:`solve_local` with a closed form or implement :meth:`gradient`
    so the default iterative solve applies.  ``dim`` is the estimate
    dimension p.
    """

    dim: int

    def evaluate(self, s: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no gradient")

    def as_quadratic(self):
        """Return (Q, b, const) with f(s) = s^T Q s/2 - b^T s + const, or None."""
        return None

    def solve_local(self, v: np.ndarray, targets: np.ndarray, c: float) -> np.ndarray:
        """Minimize f(s) + v^T s + c * sum_k ||s - targets[k]||^2.

        ``targets`` has one row per neighbor (the midpoints of own and
        received estimates).  Default: quasi-Newton on the smooth objective
        to gradient norm 1e-10, capped at 500 inner steps.
        """
        deg = targets.shape[0]
        t_sum = targets.sum(axis=0)

        def fun(s):
            return (self.evaluate(s) + v @ s
                    + c * (deg * s @ s - 2.0 * t_sum @ s + (targets * targets).sum()))

        def jac(s):
            return self.gradient(s) + v + 2.0 * c * (deg * s - t_sum)

        x0 = targets.mean(axis=0) if deg else np.zeros(self.dim)
        res = scipy.optimize.minimize(
            fun, x0, jac=jac, method="BFGS",
            options={"gtol": INNER_GRAD_TOL * 1e-2, "maxiter": INNER_MAX_STEPS},
        )
        x = _newton_polish(fun, jac, res.x, INNER_GRAD_TOL, steps=20)
        if np.linalg.norm(jac(x)) > INNER_GRAD_TOL * max(1.0, np.linalg.norm(x)):
            raise LocalSolveError(
                f"local solve stalled at gradient norm {np.linalg.norm(jac(x)):.3e}"
            )
        return x


def _newton_polish(fun, jac, x, tol, steps=20):
    """Finite-difference damped Newton refinement for small smooth problems."""
    p = x.size
    for _ in range(steps):
        g = jac(x)
        gn = np.linalg.norm(g)
        if gn <= tol * max(1.0, np.linalg.norm(x)):
            break
        eps = 1e-7
        H = np.empty((p, p))
        for k in range(p):
            dx = np.zeros(p)
            dx[k] = eps * max(1.0, abs(x[k]))
            H[:, k] = (jac(x + dx) - jac(x - dx)) / (2 * dx[k])
        H = 0.5 * (H + H.T)
        try:
            step = np.linalg.solve(H + 1e-12 * np.eye(p), -g)
        except np.linalg.LinAlgError:
            break
        # accept on gradient-norm decrease (polishing) or sufficient descent
        t, f0 = 1.0, fun(x)
        while t > 1e-10:
            xn = x + t * step
            if (np.linalg.norm(jac(xn)) < gn
                    or fun(xn) <= f0 + 1e-12 * (1.0 + abs(f0))):
                break
            t *= 0.5
        else:
            break
        x = x + t * step
    return x


class QuadraticCost(LocalCost):
    """f(s) = s^T Q s / 2 - b^T s + const, with a direct local solve."""

    def __init__(self, Q: np.ndarray, b: np.ndarray, const: float = 0.0):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if Q.shape[0] != Q.shape[1] or Q.shape[0] != b.size:
            raise ValueError(f"shape mismatch: Q {Q.shape}, b {b.shape}")
        self.Q, self.b, self.const = Q, b, const
        self.dim = b.size

    @classmethod
    def from_offset(cls, Q: np.ndarray, a: np.ndarray) -> "QuadraticCost":
        """f(s) = (s - a)^T Q (s - a) / 2."""
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        a = np.atleast_1d(np.asarray(a, dtype=float))
        return cls(Q, Q @ a, const=0.5 * a @ Q @ a)

    def evaluate(self, s):
        return float(0.5 * s @ self.Q @ s - self.b @ s + self.const)

    def gradient(self, s):
        return self.Q @ s - self.b

    def as_quadratic(self):
        return self.Q, self.b, self.const

    def solve_local(self, v, targets, c):
        deg = targets.shape[0]
        rhs = self.b - v + 2.0 * c * targets.sum(axis=0)
        return np.linalg.solve(self.Q + 2.0 * c * deg * np.eye(self.dim), rhs)


class AverageCost(LocalCost):
    """f(s) = ||s - y||^2 / 2; consensus on these costs computes the mean of y.

    The local solve is the scalar-denominator closed form
    ``(y - v + 2c * sum targets) / (1 + 2c deg)``, exact for any block size.
    """

    def __init__(self, y):
        self.y = np.atleast_1d(np.asarray(y, dtype=float))
        self.dim = self.y.size

    def evaluate(self, s):
        d = s - self.y
        return float(0.5 * d @ d)

    def gradient(self, s):
        return s - self.y

    def as_quadratic(self):
        return np.eye(self.dim), self.y, float(0.5 * self.y @ self.y)

    def solve_local(self, v, targets, c):
        deg = targets.shape[0]
        return (self.y - v + 2.0 * c * targets.sum(axis=0)) / (1.0 + 2.0 * c * deg)


@dataclass(frozen=True)
class LinkNoiseModel:
    """Additive noise on every directed-edge transmission.

    kind is "none" or "awgn"; an AWGN model with zero variance behaves
    exactly as "none".  Noise draws are keyed by (seed, iteration) and a
    fixed edge order, so runs are reproducible and independent of node
    update scheduling.
    """

    kind: str = "none"
    variance: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "awgn"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.variance < 0:
            raise ValueError("noise variance must be >= 0")

    @property
    def active(self) -> bool:
        return self.kind == "awgn" and self.variance > 0.0

    def draw(self, iteration: int, shape) -> np.ndarray:
        rng = np.random.default_rng([self.seed, iteration])
        return np.sqrt(self.variance) * rng.standard_normal(shape)


@dataclass
class NodeState:
    """Snapshot of one node: estimate, aggregated multiplier, edge multipliers."""

    s: np.ndarray
    v: np.ndarray
    vbar: dict[tuple[int, int], np.ndarray] | None = None


@dataclass
class RunTrace:
    """Per-iteration record of an engine run (row 0 is the initial state).

    ``s_hist`` / ``vbar_hist`` are populated on request and hold the full
    iterate and per-directed-edge multiplier histories used by the
    contraction analysis.
    """

    graph: NetworkGraph
    c: float
    seed: int
    iters: int
    consensus_err: np.ndarray
    objective: np.ndarray
    dist_to_ref: np.ndarray | None
    S: np.ndarray
    V: np.ndarray
    Vbar: np.ndarray | None = None
    s_hist: np.ndarray | None = None
    vbar_hist: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def node_states(self) -> list[NodeState]:
        states = []
        eidx = self.graph.edge_index() if self.Vbar is not None else None
        for i in range(self.graph.n):
            vbar = None
            if self.Vbar is not None:
                vbar = {(i, j): self.Vbar[eidx[(i, j)]] for j in self.graph.neighbors[i]}
            states.append(NodeState(s=self.S[i].copy(), v=self.V[i].copy(), vbar=vbar))
        return states

    def summary(self) -> dict:
        out = {
            "iters": self.iters,
            "final_consensus_err": float(self.consensus_err[-1]),
            "final_objective": float(self.objective[-1]),
        }
        if self.dist_to_ref is not None:
            out["final_dist_to_ref"] = float(self.dist_to_ref[-1])
        return out

    def to_csv(self, path) -> None:
        """Write `iter,consensus_err,objective[,dist_to_ref]` with full precision."""
        cols = ["iter", "consensus_err", "objective"]
        if self.dist_to_ref is not None:
            cols.append("dist_to_ref")
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for k in range(self.iters + 1):
                row = [str(k), repr(float(self.consensus_err[k])),
                       repr(float(self.objective[k]))]
                if self.dist_to_ref is not None:
                    row.append(repr(float(self.dist_to_ref[k])))
                fh.write(",".join(row) + "\n")


def consensus_error(S: np.ndarray, graph: NetworkGraph) -> float:
    """Largest disagreement ||s_i - s_j|| over communicating pairs."""
    if not graph.edges:
        return 0.0
    ei = np.array([i for (i, _) in graph.edges])
    ej = np.array([j for (_, j) in graph.edges])
    S = np.atleast_2d(np.asarray(S, dtype=float).reshape(graph.n, -1))
    return float(np.linalg.norm(S[ei] - S[ej], axis=1).max())


def edge_multiplier_step(vbar_e: np.ndarray, s_own: np.ndarray,
                         s_received: np.ndarray, c: float) -> np.ndarray:
    """One per-edge multiplier update: vbar + (c/2)(s_own - s_received)."""
    return vbar_e + 0.5 * c * (s_own - s_received)


def admm_run(
    graph: NetworkGraph,
    costs: list[LocalCost],
    c: float,
    iters: int,
    noise: LinkNoiseModel | None = None,
    *,
    ref: np.ndarray | None = None,
    record_iterates: bool = False,
    track_edge_multipliers: bool = False,
    require_connected: bool = True,
) -> RunTrace:
    """Run the synchronous in-network ADMM from all-zero initialization.

    Parameters
    ----------
    graph : NetworkGraph
        Communication topology (connected unless ``require_connected=False``).
    costs : list of LocalCost
        One local cost per node, all with equal ``dim``.
    c : float
        Penalty parameter, must be positive.
    iters : int
        Number of synchronous rounds.
    noise : LinkNoiseModel, optional
        Link noise; the corrupted neighbor estimate is used by both the
        multiplier and the local-solve steps of the same round.
    ref : ndarray, optional
        Reference p-vector (e.g. the centralized solution); enables the
        ``dist_to_ref`` trace column, max over nodes of ||s_i - ref||.
    record_iterates, track_edge_multipliers : bool
        Keep full estimate / per-edge-multiplier histories in the trace.

    Returns
    -------
    RunTrace with ``iters + 1`` records (index 0 is the initial state).
    """
    if c <= 0:
        raise EngineError(f"penalty c must be > 0, got {c}")
    if len(costs) != graph.n:
        raise EngineError(f"{len(costs)} costs for {graph.n} nodes")
    if require_connected and graph.n > 1 and not is_connected(graph):
        raise EngineError("graph is disconnected; consensus guarantees void")
    noise = noise or LinkNoiseModel()
    p = costs[0].dim
    if any(f.dim != p for f in costs):
        raise EngineError("all local costs must share one dimension")

    n, Ld = graph.n, graph.L
    dedges = graph.directed_edges
    eidx = graph.edge_index()
    S = np.zeros((n, p))
    V = np.zeros((n, p))
    Vbar = np.zeros((Ld, p))

    # edge bookkeeping: source node, reverse-edge index, incoming/outgoing maps
    src = np.array([i for (i, _) in dedges], dtype=int)
    rev = np.array([eidx[(j, i)] for (i, j) in dedges], dtype=int)
    In = np.zeros((n, Ld))   # In[i, e] = 1 where edge e terminates at i
    Out = np.zeros((n, Ld))  # Out[i, e] = 1 where edge e originates at i
    for e, (i, j) in enumerate(dedges):
        Out[i, e] = 1.0
        In[j, e] = 1.0
    deg = graph.degrees.astype(float)

    # direct solve operators when every cost is quadratic: (Q_i + 2c d_i I)^-1
    quads = [f.as_quadratic() for f in costs]
    fast = all(q is not None for q in quads) and n > 0
    if fast:
        Minv = np.stack([
            np.linalg.inv(quads[i][0] + 2.0 * c * deg[i] * np.eye(p))
            for i in range(n)
        ])
        Q_stack = np.stack([q[0] for q in quads])
        b_stack = np.stack([q[1] for q in quads])
        const_sum = float(sum(q[2] for q in quads))

    cons = np.empty(iters + 1)
    obj = np.empty(iters + 1)
    dist = np.empty(iters + 1) if ref is not None else None
    s_hist = [S.copy()] if (record_iterates or track_edge_multipliers) else None
    vbar_hist = [Vbar.copy()] if track_edge_multipliers else None

    ei = np.array([i for (i, _) in graph.edges], dtype=int)
    ej = np.array([j for (_, j) in graph.edges], dtype=int)

    def record(k):
        cons[k] = (float(np.linalg.norm(S[ei] - S[ej], axis=1).max())
                   if ei.size else 0.0)
        if fast:
            obj[k] = (0.5 * np.einsum("ni,nij,nj->", S, Q_stack, S)
                      - float((b_stack * S).sum()) + const_sum)
        else:
            obj[k] = sum(costs[i].evaluate(S[i]) for i in range(n))
        if dist is not None:
            dist[k] = float(np.linalg.norm(S - ref[None, :], axis=1).max())

    record(0)
    for k in range(1, iters + 1):
        # received[e] is what the destination of directed edge e=(i,j) hears
        received = S[src]
        if noise.active:
            received = received + noise.draw(k, (Ld, p))

        if Ld:
            # per edge e=(i,j): own estimate minus what i heard from j
            Vbar += 0.5 * c * (S[src] - received[rev])
            V = 2.0 * (Out @ Vbar)
        target_sum = 0.5 * (deg[:, None] * S + In @ received)

        if fast:
            rhs = b_stack - V + 2.0 * c * target_sum
            S = np.einsum("nij,nj->ni", Minv, rhs)
        else:
            S_new = np.empty_like(S)
            for i in range(n):
                nbrs = graph.neighbors[i]
                if nbrs:
                    recv = np.stack([received[eidx[(j, i)]] for j in nbrs])
                    targets = 0.5 * (S[i] + recv)
                else:
                    targets = np.zeros((0, p))
                try:
                    S_new[i] = costs[i].solve_local(V[i], targets, c)
                except Exception as exc:
                    raise LocalSolveError(f"node {i}, iteration {k}: {exc}") from exc
            S = S_new
        record(k)
        if s_hist is not None:
            s_hist.append(S.copy())
        if vbar_hist is not None:
            vbar_hist.append(Vbar.copy())

    return RunTrace(
        graph=graph, c=c, seed=noise.seed, iters=iters,
        consensus_err=cons, objective=obj, dist_to_ref=dist,
        S=S, V=V.copy(),
        Vbar=Vbar.copy() if track_edge_multipliers else None,
        s_hist=np.array(s_hist) if s_hist is not None else None,
        vbar_hist=np.array(vbar_hist) if vbar_hist is not None else None,
    )


def centralized_oracle(costs: list[LocalCost], tol: float = 1e-10,
                       max_steps: int = 20000) -> np.ndarray:
    """Minimize the aggregate cost sum_i f_i(s) directly.

    Quadratic families are solved by their normal equations; cost classes
    may provide an ``aggregate_minimize`` hook (used by the hinge and lasso
    families); any other smooth family falls back to a quasi-Newton descent
    checked to gradient norm ``tol``.
    """
    p = costs[0].dim
    quads = [f.as_quadratic() for f in costs]
    if all(q is not None for q in quads):
        Q = sum(q[0] for q in quads)
        b = sum(q[1] for q in quads)
        return np.linalg.solve(Q, b)
    hook = getattr(type(costs[0]), "aggregate_minimize", None)
    if hook is not None and all(type(f) is type(costs[0]) for f in costs):
        return hook(costs, tol=tol)

    def fun(s):
        return sum(f.evaluate(s) for f in costs)

    def jac(s):
        return sum(f.gradient(s) for f in costs)

    res = scipy.optimize.minimize(fun, np.zeros(p), jac=jac, method="BFGS",
                                  options={"gtol": tol * 1e-2, "maxiter": max_steps})
    x = _newton_polish(fun, jac, res.x, tol, steps=50)
    gn = np.linalg.norm(jac(x))
    if gn > tol * max(1.0, np.linalg.norm(x)):
        raise OracleError(f"centralized solve stalled, residual norm {gn:.3e}")
    return x
