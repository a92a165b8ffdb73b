import json

import numpy as np
import pytest

from admmnet.cli import main

AVERAGE_K3 = """
task = "average"
seed = 1
iters = 250
c = 1.0

[graph]
kind = "edges"
n = 3
edges = [[0, 1], [1, 2], [0, 2]]

[params]
values = [1.0, 2.0, 6.0]
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestRun:
    def test_average_k3_converges(self, tmp_path):
        cfg = write(tmp_path, "avg.toml", AVERAGE_K3)
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--out", str(out)]) == 0
        rows = (out / "trace.csv").read_text().strip().split("\n")
        final = float(rows[-1].split(",")[1])
        assert final < 1e-8

    def test_missing_key_exit_2(self, tmp_path, capsys):
        cfg = write(tmp_path, "bad.toml", 'seed = 1\n[graph]\nkind = "rgg"\n')
        assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2
        assert "task" in capsys.readouterr().err

    def test_malformed_toml_exit_2(self, tmp_path, capsys):
        cfg = write(tmp_path, "broken.toml", 'task = "average\n')
        assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_disconnected_graph_exit_2(self, tmp_path):
        cfg = write(tmp_path, "disc.toml", """
task = "average"
[graph]
kind = "edges"
n = 4
edges = [[0, 1], [2, 3]]
[params]
values = [1.0, 2.0, 3.0, 4.0]
""")
        assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_seed_rerun_byte_identical(self, tmp_path):
        cfg = write(tmp_path, "avg.toml", AVERAGE_K3)
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert main(["run", str(cfg), "--out", str(out1), "--seed", "1"]) == 0
        assert main(["run", str(cfg), "--out", str(out2), "--seed", "1"]) == 0
        assert (out1 / "trace.csv").read_bytes() == (out2 / "trace.csv").read_bytes()
        assert (out1 / "consensus.dat").read_bytes() == (out2 / "consensus.dat").read_bytes()

    def test_summary_replayable_from_csv(self, tmp_path):
        cfg = write(tmp_path, "avg.toml", AVERAGE_K3)
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--out", str(out)]) == 0
        record = json.loads((out / "summary.jsonl").read_text().strip())
        rows = (out / "trace.csv").read_text().strip().split("\n")
        last = rows[-1].split(",")
        assert float(last[1]) == record["final_consensus_err"]
        assert float(last[2]) == record["final_objective"]

    def test_rgg_flag_override(self, tmp_path):
        cfg = write(tmp_path, "avg.toml", """
task = "average"
iters = 400
[graph]
kind = "edges"
n = 2
edges = [[0, 1]]
[params]
low = 0.0
high = 4.0
""")
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--out", str(out), "--rgg", "8,0.7,3"]) == 0
        header = (out / "graph.txt").read_text().split("\n")[0]
        assert header == "n=8"

    @pytest.mark.parametrize("task_text,needle", [
        ("""
task = "blue"
iters = 300
[graph]
kind = "rgg"
n = 5
radius = 0.8
seed = 2
[params]
p = 2
""", "final_dist_to_ref"),
        ("""
task = "lasso"
iters = 250
[graph]
kind = "rgg"
n = 4
radius = 0.9
seed = 1
[params]
p = 8
nnz = 2
lambda_1 = 0.5
m_each = 6
""", "final_dist_to_ref"),
    ])
    def test_estimator_tasks_run(self, tmp_path, task_text, needle):
        cfg = write(tmp_path, "t.toml", task_text)
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--out", str(out)]) == 0
        rec = json.loads((out / "summary.jsonl").read_text().strip())
        assert needle in rec

    def test_decode_task(self, tmp_path):
        cfg = write(tmp_path, "d.toml", """
task = "decode"
iters = 30
seed = 3
[graph]
kind = "rgg"
n = 6
radius = 0.8
seed = 5
[params]
block_len = 12
n_codewords = 6
sigma2 = 0.4
""")
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--out", str(out)]) == 0
        rec = json.loads((out / "summary.jsonl").read_text().strip())
        assert rec["agreement"] == 1.0

    def test_svm_task(self, tmp_path):
        cfg = write(tmp_path, "s.toml", """
task = "svm"
iters = 250
c = 0.5
[graph]
kind = "rgg"
n = 4
radius = 0.9
seed = 2
[params]
per_node = 8
C = 1.0
""")
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--out", str(out)]) == 0
        rec = json.loads((out / "summary.jsonl").read_text().strip())
        assert rec["objective_gap"] < 1e-3
        assert (out / "model.csv").exists()

    def test_kmeans_task(self, tmp_path):
        cfg = write(tmp_path, "k.toml", """
task = "kmeans"
iters = 25
[graph]
kind = "rgg"
n = 5
radius = 0.9
seed = 4
[params]
K = 3
eta = 10.0
per_node = 9
""")
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--out", str(out)]) == 0
        cents = np.loadtxt(out / "centroids.csv", delimiter=",")
        assert cents.shape == (3, 2)

    def test_demod_task(self, tmp_path):
        cfg = write(tmp_path, "dm.toml", """
task = "demod"
iters = 60
seed = 4
[graph]
kind = "rgg"
n = 5
radius = 0.8
seed = 7
[params]
block_len = 3
m_each = 2
noise_sigma = 0.1
""")
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--out", str(out)]) == 0
        rec = json.loads((out / "summary.jsonl").read_text().strip())
        assert rec["agreement"] == 1.0

    def test_rls_spectrum_task_writes_psd_csv(self, tmp_path):
        cfg = write(tmp_path, "r.toml", """
task = "rls"
iters = 10
c = 0.05
[graph]
kind = "rgg"
n = 4
radius = 0.9
seed = 2
[params]
scenario = "spectrum"
T = 800
gamma = 1.0
nulled = 1
""")
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--out", str(out)]) == 0
        header = (out / "psd.csv").read_text().split("\n")[0]
        assert header == "omega,psd_true,psd_est"

    def test_svm_from_csv_data_file(self, tmp_path):
        rng = np.random.default_rng(0)
        rows = []
        for node in range(3):
            for k in range(6):
                label = -1.0 if k < 3 else 1.0
                x = label * 1.5 + 0.2 * rng.standard_normal(2)
                rows.append([node, x[0], x[1], label])
        data = tmp_path / "data.csv"
        np.savetxt(data, np.array(rows), delimiter=",")
        cfg = write(tmp_path, "s.toml", f"""
task = "svm"
iters = 200
c = 0.5
[graph]
kind = "edges"
n = 3
edges = [[0, 1], [1, 2]]
[params]
C = 1.0
data = "{data}"
""")
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--out", str(out)]) == 0
        assert (out / "model.csv").exists()

    def test_lms_tracking_task(self, tmp_path):
        cfg = write(tmp_path, "l.toml", """
task = "lms"
iters = 10
c = 0.05
[graph]
kind = "rgg"
n = 5
radius = 0.9
seed = 1
[params]
scenario = "tracking"
T = 500
mu = 0.05
p = 3
""")
        out = tmp_path / "out"
        assert main(["run", str(cfg), "--out", str(out)]) == 0
        assert (out / "global_mse.dat").exists()
        assert (out / "metrics.csv").exists()


class TestSweep:
    def test_sweep_c_three_rows(self, tmp_path):
        cfg = write(tmp_path, "avg.toml", AVERAGE_K3.replace("iters = 250",
                                                             "iters = 400"))
        out = tmp_path / "sweep"
        assert main(["sweep", str(cfg), "--out", str(out),
                     "--param", "c", "--values", "0.1,1,10"]) == 0
        rows = (out / "sweep.csv").read_text().strip().split("\n")[1:]
        assert len(rows) == 3
        for row in rows:
            assert float(row.split(",")[2]) < 1e-8  # all converged

    def test_empty_values_rejected(self, tmp_path):
        cfg = write(tmp_path, "avg.toml", AVERAGE_K3)
        assert main(["sweep", str(cfg), "--out", str(tmp_path / "s"),
                     "--param", "c", "--values", ""]) == 2

    def test_unsweepable_parameter_rejected(self, tmp_path):
        cfg = write(tmp_path, "avg.toml", AVERAGE_K3)
        with pytest.raises(SystemExit):
            main(["sweep", str(cfg), "--out", str(tmp_path / "s"),
                  "--param", "bogus", "--values", "1"])


RATE_CFG = """
task = "rate"
seed = 5
iters = 150
c = 1.0

[graph]
kind = "rgg"
n = 6
radius = 0.8
seed = 3

[params]
p = 2
data_seed = 11
"""


class TestRate:
    def test_predict_emits_certificate(self, tmp_path):
        cfg = write(tmp_path, "rate.toml", RATE_CFG)
        out = tmp_path / "out"
        assert main(["rate", "predict", "--config", str(cfg),
                     "--out", str(out)]) == 0
        header, row = (out / "rate_predict.csv").read_text().strip().split("\n")
        vals = dict(zip(header.split(","), row.split(",")))
        assert 0.0 < float(vals["delta_star"]) < 1.0
        assert float(vals["c_star"]) > 0.0
        assert int(vals["predicted_iters_to_eps"]) > 0

    def test_verify_passes_on_quadratics(self, tmp_path):
        cfg = write(tmp_path, "rate.toml", RATE_CFG)
        out = tmp_path / "out"
        assert main(["rate", "verify", "--config", str(cfg),
                     "--out", str(out)]) == 0
        rows = (out / "rate_report.csv").read_text().strip().split("\n")[1:]
        assert len(rows) == 149
        for row in rows:
            parts = row.split(",")
            assert parts[3] == "1" and parts[4] == "1" and parts[5] == "1"


ANOMALY_CFG = """
task = "anomaly"
seed = 2
iters = 1500
c = 0.5

[graph]
kind = "edges"
n = 3
edges = [[0, 1], [1, 2]]

[params]
L = 9
F = 18
T = 20
rank = 2
density = 0.02
lambda_star = 1.5
lambda_1 = 1.0
rho = 3
rel_tol = 1e-8
"""


class TestAnomaly:
    def test_synth_solve_roc(self, tmp_path):
        cfg = write(tmp_path, "an.toml", ANOMALY_CFG)
        out = tmp_path / "synth"
        assert main(["anomaly", "synth", "--config", str(cfg),
                     "--out", str(out)]) == 0
        assert (out / "y.csv").exists() and (out / "r.csv").exists()

        out2 = tmp_path / "solve"
        assert main(["anomaly", "solve", "--config", str(cfg),
                     "--out", str(out2)]) == 0
        rec = json.loads((out2 / "summary.jsonl").read_text().strip())
        assert rec["certificate"] is True
        gap = abs(rec["objective_factorized"] - rec["objective_centralized"])
        assert gap / rec["objective_centralized"] < 1e-4

        out3 = tmp_path / "roc"
        assert main(["anomaly", "roc", "--config", str(cfg),
                     "--out", str(out3)]) == 0
        rec = json.loads((out3 / "summary.jsonl").read_text().strip())
        assert rec["auc_joint"] > 0.9


class TestLearn:
    def test_learn_requires_matching_task(self, tmp_path):
        cfg = write(tmp_path, "avg.toml", AVERAGE_K3)
        assert main(["learn", "svm", "--config", str(cfg)]) == 2

    def test_learn_kmeans(self, tmp_path):
        cfg = write(tmp_path, "k.toml", """
task = "kmeans"
iters = 20
[graph]
kind = "edges"
n = 2
edges = [[0, 1]]
[params]
K = 2
eta = 10.0
per_node = 8
centers = [[0.0, 0.0], [5.0, 5.0]]
""")
        out = tmp_path / "out"
        assert main(["learn", "kmeans", "--config", str(cfg),
                     "--out", str(out)]) == 0
        assert (out / "centroids.csv").exists()
