import json

import numpy as np
import pytest

from graphelastic import cli, io

SMALL = {
    "generation": {"n_rves": 3, "grains_min": 3, "grains_max": 5, "grid": [8, 8, 8], "n_samples_per_rve": 20},
    "model": {"n_max": 8},
    "training": {"epochs": 3, "k": 3},
    "verification": {"n_pairs": 200, "n_probes": 5, "n_rotations": 10},
    "demo": {"n_steps": 20, "ramp_steps": 10},
}


def _config(tmp_path, data=SMALL, name="small.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def _run(cmd, cfg, out, *extra):
    return cli.main([cmd, "--config", cfg, "--out", str(out), *extra])


@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = _config(root)
    out = root / "run"
    codes = {c: _run(c, cfg, out) for c in ("gen", "train", "eval", "verify", "demo-phasefield", "report")}
    return cfg, out, codes


def test_full_pipeline_exit_codes(pipeline_run):
    _, _, codes = pipeline_run
    assert codes == {c: cli.EXIT_OK for c in codes}


def test_artifacts(pipeline_run):
    _, out, _ = pipeline_run
    lay = cli.Layout(out)
    ds = io.read_dataset(lay.dataset)
    assert len(ds) == 60 and sorted(set(ds.rve_id.tolist())) == [0, 1, 2]
    for i in range(3):
        assert io.read_polycrystal(lay.rve(i)).seed >= 0
        assert io.read_graph(lay.graph(i)).n_nodes >= 3
    for p in (lay.checkpoint, lay.history, lay.split, lay.metrics, lay.eval_summary, lay.surface,
              lay.checks, lay.phasefield, lay.summary):
        assert p.exists(), p
    summary = json.loads(lay.summary.read_text())
    assert {"errors", "checks", "training", "phasefield"} <= set(summary)
    meta = json.loads(lay.meta("gen").read_text())
    assert meta["config_sha256"] and "numpy" in json.dumps(meta)


def test_gen_one_rve_200_rows(tmp_path):
    data = {"generation": {"n_rves": 1, "grains_min": 4, "grains_max": 4, "grid": [8, 8, 8],
                           "n_samples_per_rve": 200}}
    assert _run("gen", _config(tmp_path, data), tmp_path / "o") == cli.EXIT_OK
    ds = io.read_dataset(tmp_path / "o" / "dataset.csv")
    assert len(ds) == 200 and np.all(ds.rve_id == 0)


def _gen_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_gen_deterministic_and_thread_independent(tmp_path):
    cfg = _config(tmp_path)
    assert _run("gen", cfg, tmp_path / "a") == 0
    assert _run("gen", cfg, tmp_path / "b") == 0
    assert _run("gen", cfg, tmp_path / "c", "--threads", "3") == 0
    a, b, c = (_gen_bytes(tmp_path / x) for x in "abc")
    assert a == b
    a.pop("gen.meta.json"), c.pop("gen.meta.json")
    assert a == c


def test_train_deterministic(pipeline_run, tmp_path):
    cfg, out, _ = pipeline_run
    import shutil
    for name in ("rves", "graphs"):
        shutil.copytree(out / name, tmp_path / name)
    shutil.copy(out / "dataset.csv", tmp_path / "dataset.csv")
    assert _run("train", cfg, tmp_path) == 0
    assert (tmp_path / "model.ckpt").read_bytes() == (out / "model.ckpt").read_bytes()


def test_bad_config_exit_2(tmp_path):
    assert _run("gen", _config(tmp_path, {"generation": {"nope": 1}}), tmp_path / "o") == cli.EXIT_CONFIG
    bad = tmp_path / "x.json"
    bad.write_text("{")
    assert _run("gen", str(bad), tmp_path / "o") == cli.EXIT_CONFIG
    assert cli.main(["gen", "--out", str(tmp_path / "o"), "--threads", "0"]) == cli.EXIT_CONFIG


def test_missing_inputs_exit_3(tmp_path):
    cfg = _config(tmp_path)
    assert _run("train", cfg, tmp_path / "empty") == cli.EXIT_IO
    assert _run("report", cfg, tmp_path / "empty2") == cli.EXIT_IO
    assert cli.main(["gen", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == cli.EXIT_IO


def test_corrupt_checkpoint_exit_3(pipeline_run, tmp_path):
    cfg, out, _ = pipeline_run
    import shutil
    shutil.copytree(out, tmp_path / "r")
    ck = tmp_path / "r" / "model.ckpt"
    ck.write_bytes(ck.read_bytes()[:-10])
    assert _run("eval", cfg, tmp_path / "r") == cli.EXIT_IO


def test_architecture_mismatch_exit_2(pipeline_run, tmp_path):
    _, out, _ = pipeline_run
    import shutil
    shutil.copytree(out, tmp_path / "r")
    data = json.loads(json.dumps(SMALL))
    data["model"]["propagation_mode"] = "paper_laplacian"
    assert _run("eval", _config(tmp_path, data, "pl.json"), tmp_path / "r") == cli.EXIT_CONFIG


def test_failed_mandatory_check_exit_5(pipeline_run, tmp_path, monkeypatch):
    cfg, out, _ = pipeline_run
    import shutil
    from graphelastic import verification
    shutil.copytree(out, tmp_path / "r")
    real = verification.check_objectivity

    def broken(*a, **kw):
        r = real(*a, **kw)
        return verification.CheckReport(r.name, r.n_cases, 1.0, 0.0, r.threshold, False)

    monkeypatch.setattr(verification, "check_objectivity", broken)
    assert _run("verify", cfg, tmp_path / "r") == cli.EXIT_CHECK
    checks = io.read_rows(tmp_path / "r" / "checks.csv")
    assert any(r["name"] == "objectivity" and r["passed"] == "False" for r in checks)


def test_verification_section_validated(tmp_path):
    for bad in ({"convexity_min_fraction": 1.5}, {"mandatory": ["nonsense"]}):
        data = {**SMALL, "verification": bad}
        assert _run("gen", _config(tmp_path, data, "v.json"), tmp_path / "o") == cli.EXIT_CONFIG
