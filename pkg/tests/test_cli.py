import json

import pytest

from drcsched.cli.main import main
from drcsched.dataio import schedule_from_csv


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    for name, seed in (("gbrt01", 0), ("gbrt02", 1)):
        assert run("generate", "--preset", name, "--seed", seed, "--out", data / f"{name}_s{seed}.json") == 0
    return root, data


def test_generate_rejects_unknown_preset(tmp_path, capsys):
    assert run("generate", "--preset", "gbrt99", "--out", tmp_path / "x.json") == 2
    assert "gbrt99" in capsys.readouterr().err
    assert not (tmp_path / "x.json").exists()


def test_validate(workspace, tmp_path):
    _, data = workspace
    assert run("validate", "--instance", data / "gbrt01_s0.json") == 0
    broken = json.loads((data / "gbrt01_s0.json").read_text())
    del broken["workers"]
    (tmp_path / "bad.json").write_text(json.dumps(broken))
    assert run("validate", "--instance", tmp_path / "bad.json") == 2


def test_gasa_rl_without_policy_is_usage_error(workspace, tmp_path):
    _, data = workspace
    assert run("solve", "--instance", data / "gbrt01_s0.json", "--heuristic", "gasa-rl", "--out", tmp_path / "o") == 2


def test_solve_then_check(workspace, tmp_path, capsys):
    _, data = workspace
    inst = data / "gbrt02_s1.json"
    out = tmp_path / "solve"
    assert run("solve", "--instance", inst, "--heuristic", "gasa", "--budget", 100, "--seeds", 2, "--out", out) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert [r["seed"] for r in metrics["runs"]] == [0, 1]
    assert all(r["feasible"] and r["evaluations"] == 100 for r in metrics["runs"])
    sched = out / "schedule_s0.csv"
    assert run("check", "--instance", inst, "--schedule", sched) == 0
    assert "feasible" in capsys.readouterr().out

    # push one processing start before its release time
    lines = sched.read_text().splitlines()
    fields = lines[1].split(",")
    fields[5] = "-50"
    (tmp_path / "tampered.csv").write_text("\n".join([lines[0], ",".join(fields)] + lines[2:]) + "\n")
    assert run("check", "--instance", inst, "--schedule", tmp_path / "tampered.csv") == 3

    (tmp_path / "garbage.csv").write_text("hello,world\n1,2\n")
    assert run("check", "--instance", inst, "--schedule", tmp_path / "garbage.csv") == 2


def test_export_formats(workspace, tmp_path):
    _, data = workspace
    inst = data / "gbrt02_s1.json"
    out = tmp_path / "solve"
    assert run("solve", "--instance", inst, "--heuristic", "str", "--out", out) == 0
    gantt = tmp_path / "g.json"
    assert run("export", "--instance", inst, "--format", "gantt-json", "--schedule", out / "schedule_s0.csv", "--out", gantt) == 0
    assert len(json.loads(gantt.read_text())["lanes"]) == 6
    trace = tmp_path / "t.json"
    assert run("export", "--instance", inst, "--format", "event-trace", "--genome", out / "genome_s0.json", "--out", trace) == 0
    assert json.loads(trace.read_text())
    lp = tmp_path / "m.lp"
    assert run("export", "--instance", inst, "--format", "lp", "--out", lp) == 0
    assert lp.read_text().rstrip().endswith("End")
    assert run("export", "--instance", inst, "--format", "lp", "--cap", 10, "--out", tmp_path / "big.lp") == 2


def test_csv_from_cli_parses_back(workspace, tmp_path):
    _, data = workspace
    out = tmp_path / "solve"
    assert run("solve", "--instance", data / "gbrt01_s0.json", "--heuristic", "mtwr", "--out", out) == 0
    assert len(schedule_from_csv((out / "schedule_s0.csv").read_text())) == 28


def test_solve_replay_is_byte_identical(workspace, tmp_path, capsys):
    _, data = workspace
    first = tmp_path / "a"
    assert run("solve", "--instance", data / "gbrt01_s0.json", "--heuristic", "ga", "--budget", 80, "--seeds", "3,4", "--out", first) == 0
    capsys.readouterr()
    assert run("replay", "--manifest", first / "manifest.json", "--out", tmp_path / "b") == 0
    assert "reproduced" in capsys.readouterr().out
    for name in ("schedule_s3.csv", "genome_s4.json", "metrics.json", "curve.tsv"):
        assert (first / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_generate_replay(tmp_path):
    out = tmp_path / "inst.json"
    assert run("generate", "--preset", "gbrt02", "--seed", 9, "--out", out) == 0
    assert run("replay", "--manifest", tmp_path / "inst.manifest.json", "--out", tmp_path / "again.json") == 0
    assert out.read_bytes() == (tmp_path / "again.json").read_bytes()


def test_train_and_solve_with_policy(workspace, tmp_path):
    _, data = workspace
    inst = data / "gbrt02_s1.json"
    cfg = tmp_path / "trainer.json"
    cfg.write_text(json.dumps({"shape": {"n_in": 17, "trunk": 16, "policy": 8, "value": [8, 4]}}))
    assert run("train", "--instance", inst, "--config", cfg, "--total-steps", 200, "--out", tmp_path / "pol") == 0
    policy = tmp_path / "pol" / "policy.bin"
    assert policy.exists() and (tmp_path / "pol" / "training_log.tsv").exists()
    out = tmp_path / "rl"
    assert run("solve", "--instance", inst, "--heuristic", "gasa-rl", "--policy", policy, "--budget", 60, "--out", out) == 0
    assert json.loads((out / "metrics.json").read_text())["runs"][0]["feasible"]


def test_bench_cross_product(workspace, tmp_path):
    _, data = workspace
    out = tmp_path / "bench"
    code = run(
        "bench", "--dataset", data, "--heuristics", "str,ga,gasa", "--seeds", 5,
        "--budget", 60, "--parallelism", "1,2", "--out", out,
    )
    assert code == 0
    rows = (out / "results.tsv").read_text().splitlines()[1:]
    assert len(rows) == 2 * 3 * 5 * 2
    per_level = [r for r in rows if r.split("\t")[3] == "1"]
    assert len(per_level) == 30
    timing = (out / "timing.tsv").read_text().splitlines()[1:]
    assert sorted((t.split("\t")[0], t.split("\t")[1]) for t in timing) == sorted(
        (h, p) for h in ("str", "ga", "gasa") for p in ("1", "2")
    )
    means = (out / "means.tsv").read_text().splitlines()
    assert len(means) == 3
    man = json.loads((out / "manifest.json").read_text())
    assert [a["deterministic"] for a in man["artifacts"] if a["role"] == "timing"] == [False]


def test_bench_empty_dataset(tmp_path):
    assert run("bench", "--dataset", tmp_path, "--out", tmp_path / "o") == 2


def test_bad_seed_list(workspace, tmp_path):
    _, data = workspace
    assert run("solve", "--instance", data / "gbrt01_s0.json", "--heuristic", "ga", "--seeds", "x", "--out", tmp_path / "o") == 2
