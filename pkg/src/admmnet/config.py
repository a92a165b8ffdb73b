"""Scenario configuration: TOML parsing, validation, and data builders.

A scenario file names a task, a graph, and task parameters; everything is
seeded so that runs are reproducible.  Parsing fails atomically with
line-precise diagnostics (bad TOML) or the missing/invalid key by name.

Example::

    task = "average"
    seed = 1
    iters = 200
    c = 1.0

    [graph]
    kind = "rgg"          # or "edges" / "file"
    n = 10
    radius = 0.6
    seed = 7

    [noise]
    kind = "awgn"
    variance = 0.01

    [params]              # task-specific, see the builders below
    low = 0.0
    high = 10.0
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import estimators, learners
from .engine import LinkNoiseModel
from .graph import (
    NetworkGraph,
    build_graph,
    connected_random_geometric,
    is_connected,
    load_graph,
)

__all__ = ["ConfigError", "ScenarioConfig", "parse_config", "build_scenario_graph"]

TASKS = ("average", "blue", "decode", "demod", "lasso", "svm", "kmeans",
         "lms", "rls", "anomaly", "rate")

SWEEPABLE = ("c", "eta", "mu", "lambda_star", "lambda_1", "K")


class ConfigError(ValueError):
    """Unusable scenario file; message carries the offending key or line."""


@dataclass
class ScenarioConfig:
    task: str
    graph: dict
    seed: int = 0
    iters: int = 200
    c: float = 1.0
    noise: LinkNoiseModel = field(default_factory=LinkNoiseModel)
    params: dict = field(default_factory=dict)
    out: str | None = None
    path: str | None = None


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing required key '{key}' in {where}")
    return table[key]


def parse_config(path) -> ScenarioConfig:
    """Read and validate a scenario file; raises ConfigError on any defect."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    task = _require(raw, "task", str(path))
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}; expected one of {TASKS}")
    graph = _require(raw, "graph", str(path))
    if not isinstance(graph, dict) or "kind" not in graph:
        raise ConfigError("graph table must carry a 'kind' key")
    if graph["kind"] not in ("edges", "rgg", "file"):
        raise ConfigError(f"unknown graph kind {graph['kind']!r}")

    noise_tbl = raw.get("noise", {})
    try:
        noise = LinkNoiseModel(
            kind=noise_tbl.get("kind", "none"),
            variance=float(noise_tbl.get("variance", 0.0)),
            seed=int(noise_tbl.get("seed", raw.get("seed", 0))),
        )
    except ValueError as exc:
        raise ConfigError(f"bad noise table: {exc}") from exc

    c = float(raw.get("c", 1.0))
    if c <= 0:
        raise ConfigError(f"penalty c must be > 0, got {c}")
    iters = int(raw.get("iters", 200))
    if iters < 1:
        raise ConfigError(f"iters must be >= 1, got {iters}")

    return ScenarioConfig(
        task=task, graph=graph, seed=int(raw.get("seed", 0)), iters=iters,
        c=c, noise=noise, params=raw.get("params", {}),
        out=raw.get("out"), path=str(path),
    )


def build_scenario_graph(spec: dict) -> NetworkGraph:
    """Materialize the graph table of a scenario."""
    kind = spec["kind"]
    if kind == "edges":
        n = int(_require(spec, "n", "graph table"))
        edges = [tuple(e) for e in _require(spec, "edges", "graph table")]
        g = build_graph(n, edges)
    elif kind == "rgg":
        g = connected_random_geometric(
            int(_require(spec, "n", "graph table")),
            float(_require(spec, "radius", "graph table")),
            int(spec.get("seed", 0)),
        )
    else:
        g = load_graph(_require(spec, "path", "graph table"))
    if g.n > 1 and not is_connected(g):
        raise ConfigError("scenario graph is disconnected")
    return g


def parse_rgg_flag(text: str) -> dict:
    """--rgg n,radius,seed into a graph table."""
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError(f"--rgg wants 'n,radius,seed', got {text!r}")
    return {"kind": "rgg", "n": int(parts[0]), "radius": float(parts[1]),
            "seed": int(parts[2])}


# ---------------------------------------------------------------------------
# per-task data builders (deterministic in config seeds)

def average_values(cfg: ScenarioConfig, graph: NetworkGraph) -> np.ndarray:
    p = cfg.params
    if "values" in p:
        vals = np.asarray(p["values"], dtype=float)
        if vals.shape[0] != graph.n:
            raise ConfigError(
                f"values has {vals.shape[0]} entries for {graph.n} nodes")
        return vals
    rng = np.random.default_rng(p.get("data_seed", cfg.seed))
    return rng.uniform(float(p.get("low", 0.0)), float(p.get("high", 10.0)),
                       size=graph.n)


def blue_datas(cfg: ScenarioConfig, graph: NetworkGraph):
    p = cfg.params
    dim = int(p.get("p", 3))
    m_each = int(p.get("m_each", dim + 2))
    rng = np.random.default_rng(p.get("data_seed", cfg.seed))
    s_true = rng.standard_normal(dim)
    datas = []
    for _ in range(graph.n):
        H = rng.standard_normal((m_each, dim))
        A = rng.standard_normal((m_each, m_each))
        Sigma = A @ A.T + np.eye(m_each)
        noise = np.linalg.cholesky(Sigma) @ rng.standard_normal(m_each)
        datas.append(estimators.BlueLocalData(
            y=H @ s_true + float(p.get("obs_scale", 1.0)) * noise,
            H=H, Sigma=Sigma))
    return datas, s_true


def lasso_blocks(cfg: ScenarioConfig, graph: NetworkGraph):
    p = cfg.params
    dim = int(p.get("p", 20))
    m_each = int(p.get("m_each", 8))
    nnz = int(p.get("nnz", 2))
    lam1 = float(p.get("lambda_1", 1.0))
    rng = np.random.default_rng(p.get("data_seed", cfg.seed))
    a_true = np.zeros(dim)
    sup = rng.choice(dim, size=nnz, replace=False)
    a_true[sup] = rng.uniform(1.0, 3.0, size=nnz) * rng.choice([-1.0, 1.0], nnz)
    Rs = [rng.standard_normal((m_each, dim)) for _ in range(graph.n)]
    sigma = float(p.get("noise_sigma", 0.0))
    ys = [R @ a_true + sigma * rng.standard_normal(m_each) for R in Rs]
    return ys, Rs, lam1, a_true


def svm_datas(cfg: ScenarioConfig, graph: NetworkGraph):
    p = cfg.params
    C = float(p.get("C", 1.0))
    if "data" in p:
        blocks = load_learner_csv(p["data"])
        if len(blocks) != graph.n:
            raise ConfigError(
                f"{p['data']}: {len(blocks)} node blocks for {graph.n} nodes")
        datas = []
        for _, rows in blocks:
            if rows.shape[1] < 2:
                raise ConfigError("svm data rows need features plus a label")
            datas.append(learners.SvmLocalData(X=rows[:, :-1], y=rows[:, -1],
                                               C=C))
        return datas
    per_node = int(p.get("per_node", 10))
    mu1 = np.asarray(p.get("mu1", [-1.0, -1.0]), dtype=float)
    mu2 = np.asarray(p.get("mu2", [1.0, 1.0]), dtype=float)
    cov = np.asarray(p.get("cov", [[1.0, 0.0], [0.0, 2.0]]), dtype=float)
    rng = np.random.default_rng(p.get("data_seed", cfg.seed))
    root = np.linalg.cholesky(cov)
    datas = []
    for _ in range(graph.n):
        half = per_node // 2
        X1 = mu1 + rng.standard_normal((half, mu1.size)) @ root.T
        X2 = mu2 + rng.standard_normal((per_node - half, mu2.size)) @ root.T
        y = np.concatenate([-np.ones(half), np.ones(per_node - half)])
        datas.append(learners.SvmLocalData(X=np.vstack([X1, X2]), y=y, C=C))
    return datas


def kmeans_blocks(cfg: ScenarioConfig, graph: NetworkGraph):
    p = cfg.params
    K = int(p.get("K", 3))
    if "data" in p:
        blocks = load_learner_csv(p["data"])
        if len(blocks) != graph.n:
            raise ConfigError(
                f"{p['data']}: {len(blocks)} node blocks for {graph.n} nodes")
        return [rows for _, rows in blocks], K
    per_node = int(p.get("per_node", 9))
    spread = float(p.get("spread", 0.3))
    rng = np.random.default_rng(p.get("data_seed", cfg.seed))
    centers = np.asarray(
        p.get("centers", [[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]]), dtype=float)
    Xs = []
    for _ in range(graph.n):
        pts = [centers[k % len(centers)]
               + spread * rng.standard_normal((per_node // K + 1, centers.shape[1]))
               for k in range(K)]
        Xs.append(np.vstack(pts))
    return Xs, K


def load_learner_csv(path):
    """Rows `node_id, x_1..x_p[, label]` into per-node (X, label) blocks."""
    rows = np.loadtxt(path, delimiter=",", ndmin=2)
    if rows.shape[1] < 2:
        raise ConfigError(f"{path}: need node_id plus at least one feature")
    ids = rows[:, 0].astype(int)
    order = np.argsort(ids, kind="stable")
    rows, ids = rows[order], ids[order]
    blocks = []
    for node in np.unique(ids):
        blocks.append((int(node), rows[ids == node, 1:]))
    return blocks
