"""Online decentralized adaptive estimation over networks.

Per time step every node acquires a scalar observation y_i(t) and a
regression vector h_i(t), exchanges its current estimate with neighbors,
and applies either a stochastic-gradient correction (decentralized LMS)

    v_i(t) = v_i(t-1) + c sum_j (s_i(t) - s_j(t))
    s_i(t+1) = s_i(t) + mu [ h_i e_i - v_i(t) - c sum_j (s_i(t) - s_j(t)) ]

with e_i = 2 (y_i - h_i' s_i(t)), or an exponentially weighted recursive
least-squares correction (decentralized RLS) that propagates the inverse
weighted Grammian by a rank-one update,

    Phi_inv <- (1/gamma) [ Phi_inv - Phi_inv h h' Phi_inv
                           / (gamma + h' Phi_inv h) ]
    psi <- gamma psi + h y
    s_i(t+1) = Phi_inv psi - (1/2) Phi_inv v_i(t).

Both use the same single-exchange-per-step communication pattern as the
batch engine; link noise corrupts each directed transmission once and the
corrupted value feeds both the multiplier and the estimate updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal

from .engine import LinkNoiseModel
from .graph import NetworkGraph, is_connected

__all__ = [
    "StreamSample",
    "AdaptiveTrace",
    "TrackingMetrics",
    "dlms_step",
    "drls_step",
    "dlms_run",
    "drls_run",
    "local_lms_run",
    "TimeVaryingScenario",
    "ArSpectrumScenario",
    "ar_coefficients",
    "ar_psd",
    "psd_peak",
    "tracking_metrics",
    "average_metrics",
]

RLS_PD_CHECK_EVERY = 200


@dataclass(frozen=True)
class StreamSample:
    """One synchronous tick of network data."""

    t: int
    y: np.ndarray   # (n,)
    h: np.ndarray   # (n, p)


@dataclass
class AdaptiveTrace:
    """Estimate history of an adaptive run; row t is s(t), t = 0..T."""

    S_hist: np.ndarray          # (T+1, n, p)
    graph: NetworkGraph
    c: float
    mu: float | None = None
    gamma: float | None = None

    @property
    def T(self) -> int:
        return self.S_hist.shape[0] - 1


def _exchange_terms(graph, S, noise, t):
    """Return sum_j (s_i - s_j_received) per node for one synchronous tick."""
    dedges = graph.directed_edges
    Ld = len(dedges)
    if Ld == 0:
        return np.zeros_like(S)
    src = np.array([i for (i, _) in dedges])
    dst = np.array([j for (_, j) in dedges])
    received = S[src]
    if noise is not None and noise.active:
        received = received + noise.draw(t, received.shape)
    diffs = np.zeros_like(S)
    np.add.at(diffs, dst, S[dst] - received)
    return diffs


def dlms_step(S, V, y, h, diff_sums, mu: float, c: float):
    """One decentralized-LMS tick given the neighbor difference sums.

    e_i = 2 (y_i - h_i' s_i) is twice the a-priori error; returns (S+, V+).
    """
    if mu <= 0:
        raise ValueError("step size mu must be > 0")
    V = V + c * diff_sums
    err = 2.0 * (y - np.einsum("np,np->n", h, S))
    S = S + mu * (h * err[:, None] - V - c * diff_sums)
    return S, V


def drls_step(S, V, Phi_inv, psi, y, h, diff_sums, gamma: float, c: float):
    """One decentralized-RLS tick; returns (S+, V+, Phi_inv+, psi+)."""
    if not (0.0 < gamma <= 1.0):
        raise ValueError("forgetting factor must lie in (0, 1]")
    V = V + c * diff_sums
    psi = gamma * psi + h * y[:, None]
    Ph = np.einsum("nij,nj->ni", Phi_inv, h)
    denom = gamma + np.einsum("ni,ni->n", h, Ph)
    Phi_inv = (Phi_inv - Ph[:, :, None] * Ph[:, None, :] / denom[:, None, None]) / gamma
    S = np.einsum("nij,nj->ni", Phi_inv, psi - 0.5 * V)
    return S, V, Phi_inv, psi


def _check_pd(Phi_inv, t):
    sym_err = np.abs(Phi_inv - np.transpose(Phi_inv, (0, 2, 1))).max()
    if sym_err > 1e-10:
        raise RuntimeError(
            f"inverse Grammian lost symmetry ({sym_err:.2e}) at t={t}; "
            "re-factorize from raw data")
    try:
        np.linalg.cholesky(Phi_inv)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(
            f"inverse Grammian lost positive definiteness at t={t}; "
            "re-factorize from raw data") from exc


def _run_loop(graph, scenario, T, c, noise, update, cooperative=True):
    n, p = graph.n, scenario.p
    if T > scenario.T:
        raise ValueError(f"scenario supplies {scenario.T} ticks, need {T}")
    if cooperative and graph.n > 1 and not is_connected(graph):
        raise ValueError("graph is disconnected")
    S = np.zeros((n, p))
    hist = np.empty((T + 1, n, p))
    hist[0] = S
    state = update.init(n, p)
    for t in range(1, T + 1):
        sample = scenario.sample(t)
        diffs = (_exchange_terms(graph, S, noise, t) if cooperative
                 else np.zeros_like(S))
        S, state = update.apply(S, state, sample, diffs)
        hist[t] = S
    return hist


class _LmsUpdate:
    def __init__(self, mu, c):
        self.mu, self.c = mu, c

    def init(self, n, p):
        return np.zeros((n, p))

    def apply(self, S, V, sample, diffs):
        S, V = dlms_step(S, V, sample.y, sample.h, diffs, self.mu, self.c)
        return S, V


class _RlsUpdate:
    def __init__(self, gamma, c, delta):
        self.gamma, self.c, self.delta = gamma, c, delta

    def init(self, n, p):
        V = np.zeros((n, p))
        Phi_inv = np.repeat((self.delta * np.eye(p))[None], n, axis=0)
        psi = np.zeros((n, p))
        return [V, Phi_inv, psi]

    def apply(self, S, state, sample, diffs):
        V, Phi_inv, psi = state
        S, V, Phi_inv, psi = drls_step(S, V, Phi_inv, psi, sample.y, sample.h,
                                       diffs, self.gamma, self.c)
        if sample.t % RLS_PD_CHECK_EVERY == 0:
            _check_pd(Phi_inv, sample.t)
        return S, [V, Phi_inv, psi]


def dlms_run(graph, scenario, T: int, mu: float, c: float,
             noise: LinkNoiseModel | None = None) -> AdaptiveTrace:
    """Run decentralized LMS for T ticks from zero initialization."""
    if c <= 0:
        raise ValueError("penalty c must be > 0 (use local_lms_run for the "
                         "non-cooperative baseline)")
    hist = _run_loop(graph, scenario, T, c, noise, _LmsUpdate(mu, c))
    return AdaptiveTrace(S_hist=hist, graph=graph, c=c, mu=mu)


def local_lms_run(graph, scenario, T: int, mu: float) -> AdaptiveTrace:
    """Non-cooperative baseline: every node runs plain LMS on its own data."""
    hist = _run_loop(graph, scenario, T, 0.0, None, _LmsUpdate(mu, 0.0),
                     cooperative=False)
    return AdaptiveTrace(S_hist=hist, graph=graph, c=0.0, mu=mu)


def drls_run(graph, scenario, T: int, gamma: float, c: float,
             noise: LinkNoiseModel | None = None,
             delta: float = 100.0) -> AdaptiveTrace:
    """Run decentralized RLS; Phi_inv(0) = delta I with delta large."""
    if c <= 0:
        raise ValueError("penalty c must be > 0")
    if delta <= 0:
        raise ValueError("delta must be > 0")
    hist = _run_loop(graph, scenario, T, c, noise, _RlsUpdate(gamma, c, delta))
    return AdaptiveTrace(S_hist=hist, graph=graph, c=c, gamma=gamma)


# ---------------------------------------------------------------------------
# scenarios

class TimeVaryingScenario:
    """First-order Markov parameter with Gaussian regressors.

    s_0(t) = (1 - theta_leak) diag(theta) s_0(t-1) + zeta(t) with
    theta_i ~ U[0,1] and zeta ~ N(0, sigma_zeta2 I); observations
    y_i(t) = h_i(t)' s_0(t) + eps with h_i ~ N(0, I).
    """

    def __init__(self, n: int, p: int, T: int, seed: int,
                 sigma_zeta2: float = 1e-4, obs_var: float = 1e-2,
                 theta_leak: float = 1e-4, init_scale: float = 1.0,
                 theta=None):
        self.n, self.p, self.T = n, p, T
        rng = np.random.default_rng(seed)
        if theta is None:
            theta = rng.uniform(0.0, 1.0, size=p)
        theta = np.broadcast_to(np.asarray(theta, dtype=float), (p,))
        Theta = (1.0 - theta_leak) * theta
        self.s0 = np.empty((T + 1, p))
        self.s0[0] = init_scale * rng.standard_normal(p)
        zeta = np.sqrt(sigma_zeta2) * rng.standard_normal((T, p))
        for t in range(1, T + 1):
            self.s0[t] = Theta * self.s0[t - 1] + zeta[t - 1]
        self.H = rng.standard_normal((T + 1, n, p))
        eps = np.sqrt(obs_var) * rng.standard_normal((T + 1, n))
        self.Y = np.einsum("tnp,tp->tn", self.H, self.s0) + eps

    def sample(self, t: int) -> StreamSample:
        return StreamSample(t=t, y=self.Y[t], h=self.H[t])

    def truth(self, t: int) -> np.ndarray:
        return self.s0[t]


class ArSpectrumScenario:
    """Autoregressive source observed through per-node FIR channels.

    The source theta(t) = -sum_tau alpha_tau theta(t-tau) + w(t) reaches
    node i as y_i(t) = sum_l fir_i[l] theta(t-l) + noise; regressors are
    own past observations h_i(t) = [-y_i(t-1) ... -y_i(t-p)], so every
    node runs a linear regression whose true parameter is alpha.  The
    moving-average remainder acts as observation noise.
    """

    def __init__(self, n: int, alpha, firs: list, T: int, seed: int,
                 source_var: float = 1.0, obs_var: float = 1e-2,
                 burn_in: int = 200):
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        p = alpha.size
        roots = np.roots(np.concatenate([[1.0], alpha]))
        if (np.abs(roots) >= 1.0).any():
            raise ValueError(f"unstable AR polynomial; pole moduli "
                             f"{np.abs(roots).max():.4f} >= 1")
        if len(firs) != n:
            raise ValueError("need one FIR channel per node")
        self.n, self.p, self.T = n, p, T
        self.alpha = alpha
        rng = np.random.default_rng(seed)
        max_taps = max(len(f) for f in firs)
        total = burn_in + max_taps + T + 1 + p
        w = np.sqrt(source_var) * rng.standard_normal(total)
        theta = scipy.signal.lfilter([1.0], np.concatenate([[1.0], alpha]), w)
        self.Y = np.empty((T + 1 + p, n))
        eps = np.sqrt(obs_var) * rng.standard_normal((T + 1 + p, n))
        off = burn_in + max_taps
        for i, fir in enumerate(firs):
            filtered = np.convolve(theta, np.atleast_1d(np.asarray(fir, dtype=float)))
            self.Y[:, i] = filtered[off:off + T + 1 + p] + eps[:, i]

    def sample(self, t: int) -> StreamSample:
        # shifted by p so that t=1 already has a full regressor window
        idx = t + self.p
        h = np.stack([-self.Y[idx - 1: idx - self.p - 1: -1, i]
                      for i in range(self.n)])
        return StreamSample(t=t, y=self.Y[idx], h=h)

    def truth(self, t: int) -> np.ndarray:
        return self.alpha


def ar_coefficients(pole_pairs) -> np.ndarray:
    """AR coefficients alpha from conjugate pole pairs (radius, angle)."""
    roots = []
    for (r, ang) in pole_pairs:
        if not (0.0 < r < 1.0):
            raise ValueError("pole radius must lie in (0, 1) for stability")
        roots.extend([r * np.exp(1j * ang), r * np.exp(-1j * ang)])
    poly = np.real(np.poly(np.array(roots)))
    return poly[1:]


def ar_psd(alpha, omegas, source_var: float = 1.0) -> np.ndarray:
    """Power spectral density of the AR model at the given frequencies."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    taus = np.arange(1, alpha.size + 1)
    resp = 1.0 + np.exp(-1j * np.outer(omegas, taus)) @ alpha
    return source_var / np.abs(resp) ** 2


def psd_peak(alpha, n_grid: int = 2001, source_var: float = 1.0) -> float:
    """Frequency in [0, pi] where the AR spectrum peaks."""
    omegas = np.linspace(0.0, np.pi, n_grid)
    return float(omegas[np.argmax(ar_psd(alpha, omegas, source_var))])


# ---------------------------------------------------------------------------
# metrics

@dataclass
class TrackingMetrics:
    """Per-tick error metrics; ensemble averages via :func:`average_metrics`."""

    emse: np.ndarray    # (T, n): (h_i(t)' [s_i(t-1) - s_0(t-1)])^2
    msd: np.ndarray     # (T, n): ||s_i(t) - s_0(t)||^2
    mse: np.ndarray     # (T,):   (1/n) sum_i (y_i(t) - h_i(t)' s_i(t-1))^2


def tracking_metrics(trace: AdaptiveTrace, scenario) -> TrackingMetrics:
    """Realized tracking errors of one run against the generating truth."""
    T = trace.T
    if scenario.T < T:
        raise ValueError("scenario shorter than trace")
    n = trace.S_hist.shape[1]
    emse = np.empty((T, n))
    msd = np.empty((T, n))
    mse = np.empty(T)
    for t in range(1, T + 1):
        sample = scenario.sample(t)
        err_prev = trace.S_hist[t - 1] - scenario.truth(t - 1)[None, :]
        proj = np.einsum("np,np->n", sample.h, err_prev)
        emse[t - 1] = proj**2
        diff = trace.S_hist[t] - scenario.truth(t)[None, :]
        msd[t - 1] = (diff**2).sum(axis=1)
        resid = sample.y - np.einsum("np,np->n", sample.h, trace.S_hist[t - 1])
        mse[t - 1] = float((resid**2).mean())
    return TrackingMetrics(emse=emse, msd=msd, mse=mse)


def average_metrics(metrics: list[TrackingMetrics]) -> TrackingMetrics:
    """Monte Carlo average of per-run metrics (equal shapes required)."""
    if not metrics:
        raise ValueError("no metrics to average")
    return TrackingMetrics(
        emse=np.mean([m.emse for m in metrics], axis=0),
        msd=np.mean([m.msd for m in metrics], axis=0),
        mse=np.mean([m.mse for m in metrics], axis=0),
    )
