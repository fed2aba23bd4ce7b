"""graphelastic command line: gen, train, eval, verify, demo-phasefield, report.

All artifacts of a run live under ``--out``; later commands read what earlier
ones wrote there. Exit codes: 0 success, 2 configuration or shape error,
3 I/O or file-format error, 4 numeric failure, 5 mandatory check failed.
"""
from __future__ import annotations

import argparse
import platform
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__, io, pipeline, verification
from .config import ConfigError, RunConfig, load_config
from .graph import GraphError, build_graph
from .homogenization import NonConvergenceError
from .microstructure import TessellationError, contacts
from .nn import NumericError, ShapeError
from .phasefield import run_point, strain_ramp
from .tensors import rotation_z
from .training import (
    Predictions,
    error_summary,
    fold_masks,
    predict_dataset,
    train,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4
EXIT_CHECK = 5

COMMANDS = ("gen", "train", "eval", "verify", "demo-phasefield", "report")


class CheckFailure(RuntimeError):
    pass


# -- layout ---------------------------------------------------------------


class Layout:
    def __init__(self, root):
        self.root = Path(root)

    def rve(self, i):
        return self.root / "rves" / f"rve_{i:04d}.pxtl"

    def graph(self, i):
        return self.root / "graphs" / f"rve_{i:04d}.graph"

    dataset = property(lambda s: s.root / "dataset.csv")
    checkpoint = property(lambda s: s.root / "model.ckpt")
    history = property(lambda s: s.root / "history.csv")
    split = property(lambda s: s.root / "split.json")
    metrics = property(lambda s: s.root / "metrics.csv")
    eval_summary = property(lambda s: s.root / "eval_summary.csv")
    surface = property(lambda s: s.root / "surface.csv")
    checks = property(lambda s: s.root / "checks.csv")
    phasefield = property(lambda s: s.root / "phasefield.csv")
    summary = property(lambda s: s.root / "summary.json")

    def ecdf(self, name):
        return self.root / f"ecdf_{name}.csv"

    def meta(self, command):
        return self.root / f"{command}.meta.json"


def _write_meta(lay: Layout, command: str, cfg: RunConfig, extra: dict | None = None) -> None:
    io.write_json(
        {
            "command": command,
            "version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "config_sha256": cfg.digest(),
            "seeds": {
                "generation": cfg.generation.seed,
                "training": cfg.training.seed,
                "verification": cfg.verification.seed,
            },
            "config": cfg.to_dict(),
            **(extra or {}),
        },
        lay.meta(command),
    )


def _load_rves(lay: Layout):
    paths = sorted((lay.root / "rves").glob("rve_*.pxtl"))
    if not paths:
        raise FileNotFoundError(f"no RVE files under {lay.root / 'rves'}; run `gen` first")
    return [io.read_polycrystal(p) for p in paths]


def _architecture(cfg: RunConfig):
    return cfg.training.train_config().architecture(cfg.model.architecture())


def _graphs(cfg: RunConfig, lay: Layout, arch):
    if not arch.use_graph:
        return None
    return pipeline.graph_inputs(_load_rves(lay), arch)


# -- commands -------------------------------------------------------------


def cmd_gen(cfg: RunConfig, lay: Layout, threads: int) -> None:
    g = cfg.generation.effective()
    rves = pipeline.make_family(
        g.seed, g.n_rves, g.grains_min, g.grains_max, tuple(g.grid), np.deg2rad(g.odf_half_width_deg), threads
    )
    (lay.root / "rves").mkdir(parents=True, exist_ok=True)
    (lay.root / "graphs").mkdir(parents=True, exist_ok=True)
    for i, p in enumerate(rves):
        io.write_polycrystal(p, lay.rve(i))
        io.write_graph(build_graph(p.n_grains, contacts(p)), lay.graph(i))
    ds = pipeline.make_dataset(
        rves, g.n_samples_per_rve, g.homogenizer, g.seed, cfg.homogenization.fft(), cfg.material.constants(), threads
    )
    ds.meta.update({"config_sha256": cfg.digest(), "n_rves": len(rves), "grid": list(g.grid)})
    io.write_dataset(ds, lay.dataset)
    _write_meta(lay, "gen", cfg, {"n_samples": len(ds), "n_grains": [p.n_grains for p in rves]})


def _split(cfg: RunConfig, ds):
    t = cfg.training
    if t.k <= 1:
        return np.arange(len(ds)), np.array([], dtype=np.int64)
    if not 0 <= t.test_fold < t.k:
        raise ConfigError(f"training.test_fold must lie in [0, {t.k})")
    for i, tr, te in fold_masks(ds, t.k, t.unit, t.seed):
        if i == t.test_fold:
            return np.flatnonzero(tr), np.flatnonzero(te)
    raise AssertionError("unreachable")


def cmd_train(cfg: RunConfig, lay: Layout, threads: int) -> None:
    ds = io.read_dataset(lay.dataset)
    arch = _architecture(cfg)
    graphs = _graphs(cfg, lay, arch)
    tr, te = _split(cfg, ds)
    params, hist = train(cfg.training.train_config(), ds.subset(tr), graphs, arch)
    io.save_checkpoint(params, lay.checkpoint, {"config_sha256": cfg.digest(), "variant": cfg.training.variant})
    rows = list(hist.rows()) or [{"epoch": 0, "train_loss": float("nan"), "val_loss": float("nan"), "lr": 0.0}]
    io.write_rows(rows, lay.history)
    io.write_json({"train_rows": tr.tolist(), "test_rows": te.tolist()}, lay.split)
    _write_meta(lay, "train", cfg, {"best_epoch": hist.best_epoch, "n_parameters": params.n_parameters()})


def _load_model(cfg: RunConfig, lay: Layout):
    arch = _architecture(cfg)
    return io.load_checkpoint(lay.checkpoint, expected=arch), arch


def cmd_eval(cfg: RunConfig, lay: Layout, threads: int) -> None:
    ds = io.read_dataset(lay.dataset)
    params, arch = _load_model(cfg, lay)
    graphs = _graphs(cfg, lay, arch)
    split = io.read_json(lay.split) if lay.split.exists() else {"train_rows": list(range(len(ds))), "test_rows": []}
    rows, summary = [], []
    for name in ("train", "test"):
        idx = np.asarray(split[f"{name}_rows"], dtype=np.int64)
        if idx.size == 0:
            continue
        sub = ds.subset(idx)
        es = error_summary(Predictions(*predict_dataset(params, sub, graphs)), sub)
        for j, r in enumerate(idx):
            rows.append({
                "row": int(r), "rve_id": int(sub.rve_id[j]), "split": name,
                "psi_mse": float(es.psi[j]), "pv_mse": float(es.principal_values[j]),
                "pd_err": float(es.principal_directions[j]),
            })
        for stat, vals in (("median", es.medians()), ("mean", es.means())):
            summary.append({"split": name, "statistic": stat, **vals})
        io.write_ecdf(es.psi, lay.ecdf(f"{name}_psi"))
        io.write_ecdf(es.principal_values, lay.ecdf(f"{name}_principal_values"))
    io.write_rows(rows, lay.metrics)
    io.write_rows(summary, lay.eval_summary)

    model = verification.NetworkModel(params, graphs[0] if graphs else None)
    t, psi, S = verification.proportional_paths(model, seed=cfg.verification.seed)
    io.write_rows(verification.surface_rows(t, psi, S), lay.surface)
    _write_meta(lay, "eval", cfg, {
        "scaled_mse_minmax": "true series",
        "surface_oscillations": verification.second_difference_oscillations(psi),
    })


def cmd_verify(cfg: RunConfig, lay: Layout, threads: int) -> None:
    v = cfg.verification
    params, arch = _load_model(cfg, lay)
    ds = io.read_dataset(lay.dataset)
    if arch.use_graph:
        graphs = _graphs(cfg, lay, arch)
        targets = [(i, graphs[i], ds.C[ds.rve_id == i]) for i in sorted(graphs)]
    else:
        targets = [(-1, None, ds.C)]
    rows = []
    for rve, g, pool in targets:
        model = verification.NetworkModel(params, g)
        reports = [
            verification.check_objectivity(model, v.n_rotations, v.seed),
            verification.gradient_check(model, v.n_probes, v.seed),
            verification.check_convexity(
                model, v.n_pairs, C_pool=pool if len(pool) else None, seed=v.seed, min_fraction=v.convexity_min_fraction
            ),
            verification.check_isotropy(model, seed=v.seed),
        ]
        rows += [{"rve_id": rve, **r.row()} for r in reports]
    io.write_rows(rows, lay.checks)
    failed = sorted({r["name"] for r in rows if r["name"] in v.mandatory and not r["passed"]})
    _write_meta(lay, "verify", cfg, {"mandatory": v.mandatory, "failed_mandatory": failed})
    if failed:
        raise CheckFailure(f"mandatory checks failed: {failed}")


def cmd_demo(cfg: RunConfig, lay: Layout, threads: int) -> None:
    d = cfg.demo
    params, arch = _load_model(cfg, lay)
    g = None
    if arch.use_graph:
        graphs = _graphs(cfg, lay, arch)
        if d.rve_id not in graphs:
            raise ConfigError(f"demo.rve_id {d.rve_id} not among generated RVEs")
        g = graphs[d.rve_id]
    model = verification.NetworkModel(params, g)
    F_end = np.asarray(d.F_end, dtype=float) @ rotation_z(np.deg2rad(d.rotation_z_deg))
    times, F_path = strain_ramp(F_end, d.n_steps, d.ramp_steps * d.dt, d.dt)
    rows = run_point(model, F_path, d.params(), times)
    io.write_rows(rows, lay.phasefield)
    _write_meta(lay, "demo-phasefield", cfg, {"final_damage": rows[-1]["d"]})


def _coerce(rows):
    def conv(v):
        if v in ("True", "False"):
            return v == "True"
        try:
            return int(v)
        except ValueError:
            pass
        try:
            return float(v)
        except ValueError:
            return v

    return [{k: conv(v) for k, v in r.items()} for r in rows]


def cmd_report(cfg: RunConfig, lay: Layout, threads: int) -> None:
    out = {"config_sha256": cfg.digest(), "variant": cfg.training.variant}
    found = False
    if lay.eval_summary.exists():
        out["errors"] = _coerce(io.read_rows(lay.eval_summary))
        found = True
    if lay.checks.exists():
        out["checks"] = _coerce(io.read_rows(lay.checks))
        found = True
    if lay.history.exists():
        hist = _coerce(io.read_rows(lay.history))
        out["training"] = {"epochs": len(hist), "final": hist[-1]}
        found = True
    if lay.phasefield.exists():
        pf = _coerce(io.read_rows(lay.phasefield))
        out["phasefield"] = {"steps": len(pf), "final_damage": pf[-1]["d"]}
        found = True
    if not found:
        raise FileNotFoundError(f"nothing to report under {lay.root}")
    io.write_json(out, lay.summary)
    _write_meta(lay, "report", cfg)


HANDLERS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "verify": cmd_verify,
    "demo-phasefield": cmd_demo,
    "report": cmd_report,
}


# -- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="graphelastic", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"graphelastic {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration (defaults when omitted)")
        p.add_argument("--out", default="run", help="artifact directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--homogenizer", choices=("taylor", "fft"))
        p.add_argument("--variant", choices=("M_L2_mlp", "M_H1_mlp", "M_H1_hybrid", "M_H1_reg"))
        p.add_argument("--paper-scale", action="store_true", help="49^3 grids with 40-50 grains")
    return ap


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.homogenizer:
        cfg.generation = replace(cfg.generation, homogenizer=args.homogenizer)
    if args.variant:
        cfg.training = replace(cfg.training, variant=args.variant)
    if args.paper_scale:
        cfg.generation = replace(cfg.generation, paper_scale=True)
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return cfg.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        lay = Layout(args.out)
        lay.root.mkdir(parents=True, exist_ok=True)
        HANDLERS[args.command](cfg, lay, args.threads)
    except (ConfigError, io.ArchitectureMismatchError, ShapeError, GraphError) as exc:
        return _fail(EXIT_CONFIG, exc)
    except (OSError, io.FormatError, KeyError) as exc:
        return _fail(EXIT_IO, exc)
    except (NumericError, NonConvergenceError, TessellationError, FloatingPointError) as exc:
        return _fail(EXIT_NUMERIC, exc)
    except CheckFailure as exc:
        return _fail(EXIT_CHECK, exc)
    return EXIT_OK


def _fail(code: int, exc: Exception) -> int:
    print(f"graphelastic: error: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
