"""Batch decentralized estimators built on the consensus-ADMM engine.

Covers weighted least squares (decentralized BLUE), network-wide averaging,
log-likelihood-ratio consensus for block decoding, sufficient-statistic
consensus for finite-alphabet demodulation, and sparse linear regression
(decentralized lasso).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .engine import (
    AverageCost,
    LinkNoiseModel,
    LocalCost,
    QuadraticCost,
    RunTrace,
    admm_run,
)
from .graph import NetworkGraph

__all__ = [
    "BlueLocalData",
    "BlueCost",
    "dblue_local_update",
    "dblue_run",
    "daverage_run",
    "ChannelLLRData",
    "llr_compute",
    "awgn_bpsk_llr",
    "bsc_llr",
    "ml_decode",
    "decode_pipeline",
    "DemodLocalStats",
    "demod_stats",
    "ml_demodulate",
    "demod_pipeline",
    "LassoCost",
    "soft_threshold",
    "centralized_lasso",
    "dlasso_run",
    "load_codebook",
    "save_codebook",
    "random_codebook",
]

DEMOD_SEARCH_CAP = 2**16


# ---------------------------------------------------------------------------
# weighted least squares (BLUE)

@dataclass
class BlueLocalData:
    """One node's linear observations: y = H s + noise with covariance Sigma.

    Sigma must be symmetric positive definite (checked via Cholesky).
    """

    y: np.ndarray
    H: np.ndarray
    Sigma: np.ndarray

    def __post_init__(self):
        self.y = np.atleast_1d(np.asarray(self.y, dtype=float))
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        self.Sigma = np.atleast_2d(np.asarray(self.Sigma, dtype=float))
        m = self.y.size
        if self.H.shape[0] != m or self.Sigma.shape != (m, m):
            raise ValueError(
                f"inconsistent shapes: y {self.y.shape}, H {self.H.shape}, "
                f"Sigma {self.Sigma.shape}")
        if not np.allclose(self.Sigma, self.Sigma.T, atol=1e-12):
            raise ValueError("Sigma must be symmetric")
        try:
            np.linalg.cholesky(self.Sigma)
        except np.linalg.LinAlgError as exc:
            raise ValueError("Sigma is not positive definite") from exc


class BlueCost(QuadraticCost):
    """f(s) = ||Sigma^{-1/2} (y - H s)||^2 / 2 as an engine cost."""

    def __init__(self, data: BlueLocalData):
        Si = np.linalg.inv(data.Sigma)
        Q = data.H.T @ Si @ data.H
        b = data.H.T @ Si @ data.y
        super().__init__(Q, b, const=0.5 * data.y @ Si @ data.y)
        self.data = data


def dblue_local_update(data: BlueLocalData, s_own: np.ndarray, v: np.ndarray,
                       neighbor_estimates, c: float) -> np.ndarray:
    """Closed-form local estimate update of decentralized BLUE.

    s+ = (H' Si H + 2c|N| I)^-1 [H' Si y - v + c sum_j (s_own + s_j)]
    """
    cost = BlueCost(data)
    nbrs = np.atleast_2d(np.asarray(neighbor_estimates, dtype=float))
    targets = 0.5 * (s_own + nbrs) if nbrs.size else np.zeros((0, s_own.size))
    return cost.solve_local(np.asarray(v, dtype=float), targets, c)


def dblue_run(graph: NetworkGraph, datas: list[BlueLocalData], c: float,
              iters: int, noise: LinkNoiseModel | None = None,
              ref: np.ndarray | None = None) -> RunTrace:
    """Run decentralized BLUE; converges to the centralized weighted LS fit."""
    return admm_run(graph, [BlueCost(d) for d in datas], c, iters,
                    noise=noise, ref=ref)


def daverage_run(graph: NetworkGraph, values, c: float, iters: int,
                 noise: LinkNoiseModel | None = None,
                 ref: np.ndarray | None = None) -> RunTrace:
    """Distributed averaging: local estimates converge to mean(values)."""
    values = np.atleast_2d(np.asarray(values, dtype=float).reshape(graph.n, -1))
    if ref is None:
        ref = values.mean(axis=0)
    return admm_run(graph, [AverageCost(v) for v in values], c, iters,
                    noise=noise, ref=ref)


# ---------------------------------------------------------------------------
# decoding via LLR consensus

@dataclass
class ChannelLLRData:
    """Received block plus the per-bit conditional densities of the channel.

    ``p0``/``p1`` map received values to the densities under bit 0 / bit 1;
    they must be strictly positive wherever the block evaluates them.
    """

    y: np.ndarray
    p0: callable
    p1: callable


def llr_compute(data: ChannelLLRData) -> np.ndarray:
    """Per-bit log-likelihood ratios log(p(y|0) / p(y|1))."""
    y = np.atleast_1d(np.asarray(data.y, dtype=float))
    d0 = np.atleast_1d(np.asarray(data.p0(y), dtype=float))
    d1 = np.atleast_1d(np.asarray(data.p1(y), dtype=float))
    if (d0 <= 0).any() or (d1 <= 0).any():
        raise ValueError("channel density vanished; LLR undefined")
    return np.log(d0) - np.log(d1)


def awgn_bpsk_llr(y, sigma2: float) -> np.ndarray:
    """LLRs for BPSK (bit 0 -> +1, bit 1 -> -1) over AWGN: 2 y / sigma^2."""
    if sigma2 <= 0:
        raise ValueError("noise variance must be positive")
    return 2.0 * np.atleast_1d(np.asarray(y, dtype=float)) / sigma2


def bsc_llr(y_bits, flip_prob: float) -> np.ndarray:
    """LLRs for a binary symmetric channel with the given flip probability."""
    if not (0.0 < flip_prob < 1.0):
        raise ValueError("flip probability must lie in (0, 1)")
    y = np.atleast_1d(np.asarray(y_bits))
    ratio = np.log((1.0 - flip_prob) / flip_prob)
    return np.where(y == 0, ratio, -ratio)


def ml_decode(mean_llr: np.ndarray, codebook: np.ndarray) -> int:
    """Index of the codeword minimizing sum_l llr_l * s_l (ties: lowest index)."""
    codebook = np.atleast_2d(np.asarray(codebook))
    if codebook.shape[0] == 0:
        raise ValueError("codebook is empty")
    scores = codebook.astype(float) @ np.asarray(mean_llr, dtype=float)
    return int(np.argmin(scores))


def decode_pipeline(graph: NetworkGraph, llrs: np.ndarray, codebook: np.ndarray,
                    c: float, iters: int,
                    noise: LinkNoiseModel | None = None):
    """LLR consensus followed by per-node decoding.

    Returns (per-node codeword indices after `iters` rounds, centralized
    index from the exact LLR average, RunTrace).
    """
    llrs = np.atleast_2d(np.asarray(llrs, dtype=float))
    tr = daverage_run(graph, llrs, c, iters, noise=noise)
    local = [ml_decode(tr.S[i], codebook) for i in range(graph.n)]
    central = ml_decode(llrs.mean(axis=0), codebook)
    return local, central, tr


def load_codebook(path) -> np.ndarray:
    """Read one binary string per line into a (codewords x bits) 0/1 array."""
    words = []
    with open(path) as fh:
        for ln in fh:
            ln = ln.strip()
            if not ln:
                continue
            if set(ln) - {"0", "1"}:
                raise ValueError(f"bad codeword {ln!r}")
            words.append([int(ch) for ch in ln])
    if not words:
        raise ValueError(f"{path}: empty codebook")
    arr = np.array(words, dtype=int)
    if len({w.size for w in arr}) > 1:
        raise ValueError("codewords differ in length")
    return arr


def save_codebook(codebook: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        for word in np.atleast_2d(codebook):
            fh.write("".join(str(int(b)) for b in word) + "\n")


def random_codebook(n_codewords: int, block_len: int, seed: int) -> np.ndarray:
    """Distinct random binary codewords (stand-in for an unspecified code)."""
    rng = np.random.default_rng(seed)
    seen, words = set(), []
    while len(words) < n_codewords:
        w = tuple(rng.integers(0, 2, size=block_len).tolist())
        if w not in seen:
            seen.add(w)
            words.append(w)
    return np.array(words, dtype=int)


# ---------------------------------------------------------------------------
# demodulation via sufficient-statistic consensus

@dataclass
class DemodLocalStats:
    """Local sufficient statistics r = H'y and R = H'H of one sensor."""

    r: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        self.r = np.atleast_1d(np.asarray(self.r, dtype=float))
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if self.R.shape != (self.r.size, self.r.size):
            raise ValueError("R must be square and match r")
        if not np.allclose(self.R, self.R.T, atol=1e-10):
            raise ValueError("R must be symmetric")

    def packed(self) -> np.ndarray:
        return np.concatenate([self.r, self.R.ravel()])


def demod_stats(y: np.ndarray, H: np.ndarray) -> DemodLocalStats:
    y = np.atleast_1d(np.asarray(y, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    return DemodLocalStats(r=H.T @ y, R=H.T @ H)


def ml_demodulate(mean_r: np.ndarray, mean_R: np.ndarray, alphabet,
                  block_len: int, cap: int = DEMOD_SEARCH_CAP) -> np.ndarray:
    """Exhaustive maximizer of 2 r's - s'Rs over the symbol alphabet.

    Enumerates the |alphabet|^block_len candidates in lexicographic order
    (sorted alphabet), keeping the first maximizer, so ties resolve to the
    lexicographically smallest block.  Errors out when the search space
    exceeds ``cap``.
    """
    symbols = sorted(float(a) for a in alphabet)
    n_cands = len(symbols) ** block_len
    if n_cands > cap:
        raise ValueError(
            f"search space {len(symbols)}^{block_len} = {n_cands} exceeds cap "
            f"{cap}; reduce the block length")
    mean_r = np.asarray(mean_r, dtype=float)
    mean_R = np.atleast_2d(np.asarray(mean_R, dtype=float))
    best, best_val = None, -np.inf
    for cand in itertools.product(symbols, repeat=block_len):
        s = np.array(cand)
        val = 2.0 * mean_r @ s - s @ mean_R @ s
        if val > best_val:
            best, best_val = s, val
    return best


def demod_pipeline(graph: NetworkGraph, stats: list[DemodLocalStats], alphabet,
                   c: float, iters: int,
                   noise: LinkNoiseModel | None = None):
    """Consensus on (r, R) followed by per-node exhaustive demodulation."""
    N = stats[0].r.size
    packed = np.stack([st.packed() for st in stats])
    tr = daverage_run(graph, packed, c, iters, noise=noise)
    local = []
    for i in range(graph.n):
        r_i = tr.S[i][:N]
        R_i = tr.S[i][N:].reshape(N, N)
        local.append(ml_demodulate(r_i, R_i, alphabet, N))
    mean = packed.mean(axis=0)
    central = ml_demodulate(mean[:N], mean[N:].reshape(N, N), alphabet, N)
    return local, central, tr


# ---------------------------------------------------------------------------
# sparse linear regression (lasso)

def soft_threshold(x, tau: float):
    """Prox of tau*|.|: sign(x) * max(|x| - tau, 0)."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


class LassoCost(LocalCost):
    """f(a) = ||y - R a||^2 + (lam1/n_nodes) ||a||_1 for one node.

    The augmented local subproblem is solved by an accelerated
    proximal-gradient inner loop with step 1 / (Lipschitz constant of the
    smooth part).
    """

    def __init__(self, y: np.ndarray, R: np.ndarray, lam1: float,
                 n_nodes: int, inner_tol: float = 1e-10,
                 inner_cap: int = 5000):
        if lam1 < 0:
            raise ValueError("lam1 must be >= 0")
        self.y = np.atleast_1d(np.asarray(y, dtype=float))
        self.R = np.atleast_2d(np.asarray(R, dtype=float))
        self.lam_local = lam1 / n_nodes
        self.lam1 = lam1
        self.inner_tol = inner_tol
        self.inner_cap = inner_cap
        self.dim = self.R.shape[1]
        self._lip_data = 2.0 * float(np.linalg.eigvalsh(self.R.T @ self.R)[-1])

    def evaluate(self, a):
        res = self.y - self.R @ a
        return float(res @ res + self.lam_local * np.abs(a).sum())

    def solve_local(self, v, targets, c):
        deg = targets.shape[0]
        t_sum = targets.sum(axis=0)
        L = self._lip_data + 2.0 * c * deg
        step = 1.0 / L

        def grad_smooth(a):
            return 2.0 * self.R.T @ (self.R @ a - self.y) + v + 2.0 * c * (deg * a - t_sum)

        a = t_sum / deg if deg else np.zeros(self.dim)
        z, t_acc = a.copy(), 1.0
        for _ in range(self.inner_cap):
            a_new = soft_threshold(z - step * grad_smooth(z), step * self.lam_local)
            resid = np.linalg.norm(a_new - soft_threshold(
                a_new - step * grad_smooth(a_new), step * self.lam_local)) / step
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc**2))
            z = a_new + ((t_acc - 1.0) / t_new) * (a_new - a)
            a, t_acc = a_new, t_new
            if resid <= self.inner_tol * max(1.0, np.linalg.norm(a)):
                return a
        raise RuntimeError(
            f"lasso inner loop did not reach tolerance; residual {resid:.3e}")

    @staticmethod
    def aggregate_minimize(costs: list["LassoCost"], tol: float = 1e-12):
        ys = [f.y for f in costs]
        Rs = [f.R for f in costs]
        return centralized_lasso(ys, Rs, costs[0].lam1, tol=tol)


def centralized_lasso(ys, Rs, lam1: float, tol: float = 1e-12,
                      max_iters: int = 200_000, return_history: bool = False):
    """Minimize sum_i ||y_i - R_i a||^2 + lam1 ||a||_1 by proximal gradient.

    Accelerated with a restart whenever the objective would increase, so the
    recorded objective history is nonincreasing.
    """
    Y = np.concatenate([np.atleast_1d(y) for y in ys])
    R = np.vstack([np.atleast_2d(Ri) for Ri in Rs])
    L = 2.0 * float(np.linalg.eigvalsh(R.T @ R)[-1])
    step = 1.0 / L if L > 0 else 1.0

    def objective(a):
        res = Y - R @ a
        return float(res @ res + lam1 * np.abs(a).sum())

    def grad(a):
        return 2.0 * R.T @ (R @ a - Y)

    a = np.zeros(R.shape[1])
    z, t_acc = a.copy(), 1.0
    hist = [objective(a)]
    for _ in range(max_iters):
        a_new = soft_threshold(z - step * grad(z), step * lam1)
        if objective(a_new) > hist[-1]:
            # momentum restart keeps the objective monotone
            z, t_acc = a.copy(), 1.0
            a_new = soft_threshold(z - step * grad(z), step * lam1)
        resid = np.linalg.norm(a_new - a) / step
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc**2))
        z = a_new + ((t_acc - 1.0) / t_new) * (a_new - a)
        a, t_acc = a_new, t_new
        hist.append(objective(a))
        if resid <= tol * max(1.0, np.linalg.norm(a)):
            break
    if return_history:
        return a, np.array(hist)
    return a


def dlasso_run(graph: NetworkGraph, ys, Rs, lam1: float, c: float, iters: int,
               noise: LinkNoiseModel | None = None,
               ref: np.ndarray | None = None) -> RunTrace:
    """Decentralized lasso over row-partitioned (y_i, R_i) data."""
    if len(ys) != graph.n or len(Rs) != graph.n:
        raise ValueError("need one (y, R) block per node")
    costs = [LassoCost(y, R, lam1, graph.n) for y, R in zip(ys, Rs)]
    return admm_run(graph, costs, c, iters, noise=noise, ref=ref)
