"""Experiment driver: `admmnet run|sweep|rate|anomaly|learn`.

Every invocation reads a TOML scenario (see :mod:`admmnet.config`), runs the
named task, and persists artifacts under the output directory: a trace CSV,
gnuplot-ready .dat files, task outputs (models, centroids, ROC sweeps,
rate reports), and an append-only ``summary.jsonl`` record.

Exit codes: 0 success, 1 scenario failure, 2 configuration failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import adaptive, anomaly, engine, estimators, learners, rates
from .config import (
    ConfigError,
    ScenarioConfig,
    SWEEPABLE,
    average_values,
    blue_datas,
    build_scenario_graph,
    kmeans_blocks,
    lasso_blocks,
    parse_config,
    parse_rgg_flag,
    svm_datas,
)
from .graph import compute_algebra, save_graph

OUT_ENV = "ADMMNET_OUT"


def _outdir(cfg: ScenarioConfig, override: str | None) -> Path:
    base = override or cfg.out or os.environ.get(OUT_ENV) or "runs"
    path = Path(base)
    if override is None and cfg.out is None:
        path = path / cfg.task
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_dat(path: Path, header: str, columns) -> None:
    """Gnuplot-friendly whitespace table."""
    arr = np.column_stack(columns)
    with open(path, "w") as fh:
        fh.write(f"# {header}\n")
        for row in arr:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def iters_to_tol(dist: np.ndarray | None, tol: float = 1e-8):
    if dist is None:
        return None
    hits = np.nonzero(dist <= tol)[0]
    return int(hits[0]) if hits.size else None


def _summarize(outdir: Path, record: dict) -> None:
    with open(outdir / "summary.jsonl", "a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def _engine_artifacts(cfg, outdir, trace, record):
    trace.to_csv(outdir / "trace.csv")
    _write_dat(outdir / "consensus.dat", "iter consensus_err",
               (np.arange(trace.iters + 1), trace.consensus_err))
    if trace.dist_to_ref is not None:
        _write_dat(outdir / "distance.dat", "iter dist_to_ref",
                   (np.arange(trace.iters + 1), trace.dist_to_ref))
    record.update(trace.summary())
    record["iters_to_1e-8"] = iters_to_tol(trace.dist_to_ref)
    return record


def quad_costs_for_rate(cfg: ScenarioConfig, graph):
    """Random strongly convex quadratics used by the rate task."""
    p = int(cfg.params.get("p", 2))
    rng = np.random.default_rng(cfg.params.get("data_seed", cfg.seed))
    costs = []
    for _ in range(graph.n):
        A = rng.standard_normal((p, p))
        Q = A @ A.T + np.eye(p)
        costs.append(engine.QuadraticCost.from_offset(Q, rng.standard_normal(p)))
    return costs


# ---------------------------------------------------------------------------
# task runners

def run_scenario(cfg: ScenarioConfig, outdir: Path) -> dict:
    graph = build_scenario_graph(cfg.graph)
    save_graph(graph, outdir / "graph.txt")
    record = {"task": cfg.task, "seed": cfg.seed, "c": cfg.c,
              "iters": cfg.iters, "n": graph.n}
    t0 = time.perf_counter()

    if cfg.task == "average":
        vals = average_values(cfg, graph)
        trace = estimators.daverage_run(graph, vals, cfg.c, cfg.iters,
                                        noise=cfg.noise)
        record = _engine_artifacts(cfg, outdir, trace, record)

    elif cfg.task == "blue":
        datas, _ = blue_datas(cfg, graph)
        ref = engine.centralized_oracle([estimators.BlueCost(d) for d in datas])
        trace = estimators.dblue_run(graph, datas, cfg.c, cfg.iters,
                                     noise=cfg.noise, ref=ref)
        record = _engine_artifacts(cfg, outdir, trace, record)

    elif cfg.task == "lasso":
        ys, Rs, lam1, _ = lasso_blocks(cfg, graph)
        ref = estimators.centralized_lasso(ys, Rs, lam1)
        trace = estimators.dlasso_run(graph, ys, Rs, lam1, cfg.c, cfg.iters,
                                      noise=cfg.noise, ref=ref)
        record["lambda_1"] = lam1
        record = _engine_artifacts(cfg, outdir, trace, record)

    elif cfg.task == "decode":
        record.update(_run_decode(cfg, graph, outdir))

    elif cfg.task == "demod":
        record.update(_run_demod(cfg, graph, outdir))

    elif cfg.task == "svm":
        datas = svm_datas(cfg, graph)
        central = learners.centralized_svm(datas)
        models, trace = learners.dsvm_run(graph, datas, cfg.c, cfg.iters,
                                          ref=central.sbar)
        with open(outdir / "model.csv", "w") as fh:
            fh.write("node," + ",".join(f"w{k}" for k in range(models[0].w.size))
                     + ",b\n")
            for i, m in enumerate(models):
                fh.write(",".join([str(i)] + [repr(float(v)) for v in m.w]
                                  + [repr(m.b)]) + "\n")
        record = _engine_artifacts(cfg, outdir, trace, record)
        consensus = np.mean([m.sbar for m in models], axis=0)
        record["objective_gap"] = (
            learners.svm_objective(datas, consensus[:-1], consensus[-1])
            / learners.svm_objective(datas, central.w, central.b) - 1.0)

    elif cfg.task == "kmeans":
        Xs, K = kmeans_blocks(cfg, graph)
        eta = float(cfg.params.get("eta", 10.0))
        state = learners.dkmeans_run(
            graph, Xs, K=K, eta=eta, iters=cfg.iters, seed=cfg.seed,
            inner_iters=int(cfg.params.get("inner_iters", 50)))
        np.savetxt(outdir / "centroids.csv", state.centroids, delimiter=",")
        _write_dat(outdir / "sse.dat", "macro_iter sse",
                   (np.arange(len(state.sse_history)), state.sse_history))
        record.update({"eta": eta, "K": K, "sse": state.sse,
                       "converged": state.converged,
                       "consensus_residual": state.consensus_residual})

    elif cfg.task in ("lms", "rls"):
        record.update(_run_adaptive(cfg, graph, outdir))

    elif cfg.task == "anomaly":
        record.update(_run_anomaly_solve(cfg, outdir))

    elif cfg.task == "rate":
        record.update(_run_rate_predict(cfg, graph, outdir))

    record["wall_time_s"] = time.perf_counter() - t0
    _summarize(outdir, record)
    return record


def _run_decode(cfg, graph, outdir):
    p = cfg.params
    block_len = int(p.get("block_len", 16))
    n_words = int(p.get("n_codewords", 8))
    sigma2 = float(p.get("sigma2", 0.5))
    if "codebook" in p:
        codebook = estimators.load_codebook(p["codebook"])
    else:
        codebook = estimators.random_codebook(n_words, block_len,
                                              int(p.get("codebook_seed", 0)))
        estimators.save_codebook(codebook, outdir / "codebook.txt")
    rng = np.random.default_rng(p.get("data_seed", cfg.seed))
    word = codebook[rng.integers(len(codebook))]
    tx = 1.0 - 2.0 * word
    llrs = np.stack([
        estimators.awgn_bpsk_llr(tx + np.sqrt(sigma2) * rng.standard_normal(
            codebook.shape[1]), sigma2)
        for _ in range(graph.n)
    ])
    local, central, trace = estimators.decode_pipeline(
        graph, llrs, codebook, cfg.c, cfg.iters, noise=cfg.noise)
    trace.to_csv(outdir / "trace.csv")
    with open(outdir / "decisions.csv", "w") as fh:
        fh.write("node,decision,centralized\n")
        for i, d in enumerate(local):
            fh.write(f"{i},{d},{central}\n")
    return {"sigma2": sigma2, "agreement": float(np.mean(
        [d == central for d in local])), "centralized_decision": central}


def _run_demod(cfg, graph, outdir):
    p = cfg.params
    N = int(p.get("block_len", 3))
    m_each = int(p.get("m_each", 2))
    alphabet = tuple(p.get("alphabet", (-1.0, 1.0)))
    rng = np.random.default_rng(p.get("data_seed", cfg.seed))
    s_true = np.array(rng.choice(alphabet, size=N))
    stats = []
    for _ in range(graph.n):
        H = rng.standard_normal((m_each, N))
        y = H @ s_true + float(p.get("noise_sigma", 0.1)) * rng.standard_normal(m_each)
        stats.append(estimators.demod_stats(y, H))
    local, central, trace = estimators.demod_pipeline(
        graph, stats, alphabet, cfg.c, cfg.iters, noise=cfg.noise)
    trace.to_csv(outdir / "trace.csv")
    agree = float(np.mean([np.array_equal(d, central) for d in local]))
    return {"agreement": agree,
            "recovered_truth": bool(np.array_equal(central, s_true))}


def _run_adaptive(cfg, graph, outdir):
    p = cfg.params
    T = int(p.get("T", 2000))
    mu = float(p.get("mu", 5e-2))
    kind = p.get("scenario", "tracking")
    if kind == "tracking":
        sc = adaptive.TimeVaryingScenario(
            graph.n, int(p.get("p", 4)), T, seed=cfg.seed,
            sigma_zeta2=float(p.get("sigma_zeta2", 1e-4)),
            obs_var=float(p.get("obs_var", 1e-2)))
    elif kind == "spectrum":
        alpha = adaptive.ar_coefficients(
            [tuple(pair) for pair in p.get("poles", [[0.95, np.pi / 2],
                                                     [0.5, 0.6]])])
        firs = [[1.0, 0.0, 1.0] if i < int(p.get("nulled", 2)) else [1.0]
                for i in range(graph.n)]
        sc = adaptive.ArSpectrumScenario(graph.n, alpha, firs, T,
                                         seed=cfg.seed,
                                         obs_var=float(p.get("obs_var", 1e-2)))
    else:
        raise ConfigError(f"unknown adaptive scenario {kind!r}")

    if cfg.task == "lms":
        trace = adaptive.dlms_run(graph, sc, T, mu=mu, c=cfg.c, noise=cfg.noise)
    else:
        trace = adaptive.drls_run(graph, sc, T, gamma=float(p.get("gamma", 1.0)),
                                  c=cfg.c, noise=cfg.noise,
                                  delta=float(p.get("delta", 100.0)))
    tm = adaptive.tracking_metrics(trace, sc)
    ts = np.arange(1, T + 1)
    _write_dat(outdir / "global_mse.dat", "t global_mse", (ts, tm.mse))
    with open(outdir / "global_mse.csv", "w") as fh:
        fh.write("t,global_mse\n")
        for t in range(T):
            fh.write(f"{t + 1},{tm.mse[t]!r}\n")
    with open(outdir / "metrics.csv", "w") as fh:
        fh.write("t,node,emse,msd\n")
        for t in range(T):
            for i in range(graph.n):
                fh.write(f"{t + 1},{i},{tm.emse[t, i]!r},{tm.msd[t, i]!r}\n")
    rec = {"scenario": kind, "mu": mu, "T": T,
           "steady_mse": float(tm.mse[-max(1, T // 5):].mean()),
           "steady_msd": float(tm.msd[-max(1, T // 5):].mean())}
    if kind == "spectrum":
        tail = trace.S_hist[-max(2, T // 5):].mean(axis=(0, 1))
        omegas = np.linspace(0, np.pi, 801)
        psd_true = adaptive.ar_psd(sc.alpha, omegas)
        psd_est = adaptive.ar_psd(tail, omegas)
        _write_dat(outdir / "psd.dat", "omega psd_true psd_est",
                   (omegas, psd_true, psd_est))
        with open(outdir / "psd.csv", "w") as fh:
            fh.write("omega,psd_true,psd_est\n")
            for row in zip(omegas, psd_true, psd_est):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        rec["psd_peak_est"] = adaptive.psd_peak(tail)
        rec["psd_peak_true"] = adaptive.psd_peak(sc.alpha)
    return rec


def _anomaly_instance(cfg: ScenarioConfig):
    p = cfg.params
    if "y_csv" in p:
        return anomaly.load_instance(p["y_csv"], p["r_csv"])
    return anomaly.synth_traffic(
        L=int(p.get("L", 12)), F=int(p.get("F", 24)), T=int(p.get("T", 30)),
        rank=int(p.get("rank", 2)),
        anomaly_density=float(p.get("density", 0.02)),
        seed=int(p.get("data_seed", cfg.seed)),
        noise_sigma=float(p.get("noise_sigma", 0.0)),
        missing_frac=float(p.get("missing_frac", 0.0)),
        anomaly_scale=float(p.get("anomaly_scale", 10.0)))


def _run_anomaly_solve(cfg, outdir):
    inst = _anomaly_instance(cfg)
    p = cfg.params
    lam_star = float(p.get("lambda_star", 1.5))
    lam1 = float(p.get("lambda_1", 1.0))
    cent = anomaly.solve_centralized(inst, lam_star, lam1,
                                     iters=int(p.get("cent_iters", 4000)))
    graph = build_scenario_graph(cfg.graph)
    res = anomaly.solve_factorized_decentralized(
        graph, inst, rho=int(p.get("rho", 4)), lam_star=lam_star, lam1=lam1,
        c=cfg.c, iters=cfg.iters, seed=cfg.seed,
        rel_tol=float(p.get("rel_tol", 1e-9)))
    ok, spec = anomaly.optimality_certificate(res.solution, inst, lam_star)
    np.savetxt(outdir / "a_hat.csv", res.solution.A, delimiter=",")
    np.savetxt(outdir / "x_hat.csv", res.solution.X, delimiter=",")
    _write_dat(outdir / "objective.dat", "iter p2_objective",
               (np.arange(len(res.objective_history)), res.objective_history))
    return {"lambda_star": lam_star, "lambda_1": lam1,
            "certificate": bool(ok), "residual_spectral_norm": spec,
            "objective_centralized": cent.objective,
            "objective_factorized": res.solution.objective,
            "consensus_residual_q": res.consensus_residual_q,
            "consensus_residual_a": res.consensus_residual_a,
            "factorized_iterations": res.iterations}


def _run_rate_predict(cfg, graph, outdir):
    costs = quad_costs_for_rate(cfg, graph)
    alg = compute_algebra(graph)
    reg = rates.quadratic_regularity([f.Q for f in costs])
    cert = rates.rate_certificate(reg, alg)
    ustar = rates.reference_ustar(graph, costs, cfg.c, cfg.iters * 100)
    p_dim = costs[0].dim
    Lu = alg.expand(alg.L_u, p_dim)
    s_flat, v_flat = ustar[0].ravel(), ustar[1].ravel()
    d0 = 0.5 * cfg.c * s_flat @ (Lu @ s_flat) + (1 / cfg.c) * v_flat @ v_flat
    eps = float(cfg.params.get("eps", 1e-8))
    mu_run = rates.best_mu_for_c(reg, alg, cfg.c)
    delta_run = rates.contraction_delta(reg, alg, cfg.c, mu_run)
    pred_run = rates.predicted_iters(delta_run, d0, eps, reg.m_f)
    with open(outdir / "rate_predict.csv", "w") as fh:
        fh.write("c_star,delta_star,mu_star,delta_at_run_c,"
                 "predicted_iters_to_eps,eps\n")
        fh.write(f"{cert.c_star!r},{cert.delta!r},{cert.mu!r},"
                 f"{delta_run!r},{pred_run},{eps!r}\n")
    return {"c_star": cert.c_star, "delta_star": cert.delta,
            "delta_at_run_c": delta_run, "predicted_iters_to_eps": pred_run,
            "eps": eps, "gamma_o": alg.gamma_o, "Gamma_u": alg.Gamma_u,
            "m_f": reg.m_f, "M_f": reg.M_f}


def _run_rate_verify(cfg, outdir):
    graph = build_scenario_graph(cfg.graph)
    costs = quad_costs_for_rate(cfg, graph)
    alg = compute_algebra(graph)
    reg = rates.quadratic_regularity([f.Q for f in costs])
    ustar = rates.reference_ustar(graph, costs, cfg.c,
                                  cfg.iters * int(cfg.params.get("ref_factor", 100)))
    trace = engine.admm_run(graph, costs, cfg.c, cfg.iters,
                            track_edge_multipliers=True)
    ht = rates.hnorm_trace(trace, alg, cfg.c, ustar)
    hrep = rates.hnorm_verify(trace, alg, cfg.c, ustar)
    rrep = rates.rlinear_verify(trace, reg, alg, cfg.c, ustar)
    d, st = ht.dist_sq, ht.step_sq
    slack = 1e-9 * d[0]
    target = 1.0 / (1.0 + rrep.delta)
    with open(outdir / "rate_report.csv", "w") as fh:
        fh.write("k,dist_sq,step_sq,s1_ok,s2_ok,s3_ok,step_ratio,ratio_ok\n")
        for k in range(len(st)):
            s1 = d[k + 1] <= d[k] - st[k] + slack
            s2 = (st[k + 1] <= st[k] + slack) if k + 1 < len(st) else True
            s3 = st[k] <= d[0] / (k + 1) + slack
            ratio = d[k + 1] / d[k] if d[k] > 0 else 0.0
            fh.write(f"{k},{d[k]!r},{st[k]!r},{int(s1)},{int(s2)},{int(s3)},"
                     f"{ratio!r},{int(ratio <= target + 1e-6)}\n")
    ok = hrep.ok and rrep.bound_ok and rrep.contraction_ok
    rec = {"task": "rate-verify", "ok": bool(ok), "delta": rrep.delta,
           "max_ratio": rrep.max_ratio, "hnorm_ok": hrep.ok,
           "bound_ok": rrep.bound_ok, "contraction_ok": rrep.contraction_ok,
           "empirical_rate": rrep.empirical_rate,
           "predicted_rate": rrep.predicted_rate}
    _summarize(outdir, rec)
    return rec


def _run_anomaly_roc(cfg, outdir):
    inst = _anomaly_instance(cfg)
    if inst.A_true is None:
        raise ConfigError("roc needs a synthetic instance with ground truth")
    p = cfg.params
    lam_star = float(p.get("lambda_star", 1.5))
    lam1 = float(p.get("lambda_1", 1.0))
    cent = anomaly.solve_centralized(inst, lam_star, lam1,
                                     iters=int(p.get("cent_iters", 3000)))
    curve = anomaly.roc_curve(cent.A, inst.A_true)
    base = anomaly.roc_curve(anomaly.baseline_twostep(inst), inst.A_true)
    with open(outdir / "roc.csv", "w") as fh:
        fh.write("tau,pfa,pd\n")
        for tau, pfa, pd in curve:
            fh.write(f"{tau!r},{pfa!r},{pd!r}\n")
    _write_dat(outdir / "roc.dat", "pfa pd", (curve[:, 1], curve[:, 2]))
    rec = {"task": "anomaly-roc", "auc_joint": anomaly.roc_auc(curve),
           "auc_baseline": anomaly.roc_auc(base)}
    _summarize(outdir, rec)
    return rec


# ---------------------------------------------------------------------------
# sweeps

def run_sweep(cfg: ScenarioConfig, param: str, values, outdir: Path) -> list[dict]:
    if param not in SWEEPABLE:
        raise ConfigError(f"parameter {param!r} is not sweepable ({SWEEPABLE})")
    if not values:
        raise ConfigError("empty sweep value list")
    rows = []
    for val in values:
        sub = ScenarioConfig(
            task=cfg.task, graph=cfg.graph, seed=cfg.seed, iters=cfg.iters,
            c=cfg.c, noise=cfg.noise, params=dict(cfg.params), out=cfg.out,
            path=cfg.path)
        if param == "c":
            sub.c = float(val)
        elif param == "K":
            sub.params["K"] = int(val)
        elif param == "eta":
            sub.params["eta"] = float(val)
        elif param == "mu":
            sub.params["mu"] = float(val)
        elif param == "lambda_star":
            sub.params["lambda_star"] = float(val)
        elif param == "lambda_1":
            sub.params["lambda_1"] = float(val)
        subdir = outdir / f"{param}_{val}"
        subdir.mkdir(parents=True, exist_ok=True)
        rec = run_scenario(sub, subdir)
        rec[param] = val
        rows.append(rec)
    with open(outdir / "sweep.csv", "w") as fh:
        fh.write(f"{param},iters_to_1e-8,final_consensus_err,final_dist_to_ref\n")
        for rec in rows:
            hits = rec.get("iters_to_1e-8")
            fh.write(",".join([
                str(rec[param]),
                str(hits) if hits is not None else "",
                repr(rec["final_consensus_err"]) if "final_consensus_err" in rec else "",
                repr(rec["final_dist_to_ref"]) if "final_dist_to_ref" in rec else "",
            ]) + "\n")
    return rows


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(sub):
    sub.add_argument("config", help="scenario TOML file")
    sub.add_argument("--out", default=None, help="output directory")
    sub.add_argument("--seed", type=int, default=None, help="override seed")
    sub.add_argument("--graph", default=None, help="edge-list graph file")
    sub.add_argument("--rgg", default=None,
                     help="random geometric graph as n,radius,seed")


def _load(args) -> ScenarioConfig:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "graph", None):
        cfg.graph = {"kind": "file", "path": args.graph}
    if getattr(args, "rgg", None):
        cfg.graph = parse_rgg_flag(args.rgg)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="admmnet",
        description="decentralized consensus-ADMM experiment driver")
    sub = ap.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario")
    _add_common(run_p)

    sweep_p = sub.add_parser("sweep", help="run a parameter sweep")
    _add_common(sweep_p)
    sweep_p.add_argument("--param", required=True, choices=SWEEPABLE)
    sweep_p.add_argument("--values", required=True,
                         help="comma-separated values")

    rate_p = sub.add_parser("rate", help="convergence-rate tools")
    rate_sub = rate_p.add_subparsers(dest="rate_command", required=True)
    for name in ("predict", "verify"):
        rp = rate_sub.add_parser(name)
        rp.add_argument("--config", required=True)
        rp.add_argument("--out", default=None)
        rp.add_argument("--seed", type=int, default=None)

    an_p = sub.add_parser("anomaly", help="traffic-anomaly tools")
    an_sub = an_p.add_subparsers(dest="anomaly_command", required=True)
    for name in ("synth", "solve", "roc"):
        apx = an_sub.add_parser(name)
        apx.add_argument("--config", required=True)
        apx.add_argument("--out", default=None)
        apx.add_argument("--seed", type=int, default=None)

    learn_p = sub.add_parser("learn", help="decentralized learners")
    learn_sub = learn_p.add_subparsers(dest="learn_command", required=True)
    for name in ("svm", "kmeans"):
        lp = learn_sub.add_parser(name)
        lp.add_argument("--config", required=True)
        lp.add_argument("--out", default=None)
        lp.add_argument("--seed", type=int, default=None)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = _load(args)
            outdir = _outdir(cfg, args.out)
            run_scenario(cfg, outdir)
        elif args.command == "sweep":
            cfg = _load(args)
            values = [v for v in args.values.split(",") if v]
            outdir = _outdir(cfg, args.out)
            run_sweep(cfg, args.param, values, outdir)
        elif args.command == "rate":
            cfg = parse_config(args.config)
            if args.seed is not None:
                cfg.seed = args.seed
            outdir = _outdir(cfg, args.out)
            if args.rate_command == "predict":
                graph = build_scenario_graph(cfg.graph)
                rec = _run_rate_predict(cfg, graph, outdir)
                _summarize(outdir, {"task": "rate-predict", **rec})
            else:
                rec = _run_rate_verify(cfg, outdir)
                if not rec["ok"]:
                    print("rate verification FAILED", file=sys.stderr)
                    return 1
        elif args.command == "anomaly":
            cfg = parse_config(args.config)
            if args.seed is not None:
                cfg.seed = args.seed
            outdir = _outdir(cfg, args.out)
            if args.anomaly_command == "synth":
                inst = _anomaly_instance(cfg)
                anomaly.save_instance(inst, outdir / "y.csv", outdir / "r.csv")
                if inst.A_true is not None:
                    np.savez(outdir / "truth.npz", X_true=inst.X_true,
                             A_true=inst.A_true)
            elif args.anomaly_command == "solve":
                rec = _run_anomaly_solve(cfg, outdir)
                _summarize(outdir, {"task": "anomaly-solve", **rec})
            else:
                _run_anomaly_roc(cfg, outdir)
        elif args.command == "learn":
            cfg = parse_config(args.config)
            if args.seed is not None:
                cfg.seed = args.seed
            if cfg.task != args.learn_command:
                raise ConfigError(
                    f"config task {cfg.task!r} does not match learn "
                    f"{args.learn_command!r}")
            outdir = _outdir(cfg, args.out)
            run_scenario(cfg, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # scenario failure
        print(f"scenario failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
