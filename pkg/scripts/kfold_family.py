"""K-fold comparison of the four variants on a family of RVEs.

Blind principal-value errors are pooled over folds; eCDFs go to --out.

Usage: python scripts/kfold_family.py [--rves 20] [--epochs 200] [--out DIR]
"""
import argparse
import time
from pathlib import Path

from graphelastic import io
from graphelastic.nn import Architecture
from graphelastic.pipeline import graph_inputs, make_dataset, make_family
from graphelastic.training import VARIANTS, TrainConfig, cross_validate, error_summary, pooled_blind


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=100)
    ap.add_argument("--rves", type=int, default=20)
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--n-max", type=int, default=20)
    ap.add_argument("--variants", default=",".join(VARIANTS))
    ap.add_argument("--l2", type=float, default=1e-3, help="graph-branch L2 coefficient (reg variant)")
    ap.add_argument("--dropout", type=float, default=0.3, help="encoder dropout rate (reg variant)")
    ap.add_argument("--out", default="kfold_family")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rves = make_family(args.seed, args.rves, 10, 20, (16, 16, 16))
    ds = make_dataset(rves, args.samples, seed=0)
    arch = Architecture(n_max=args.n_max)
    graphs = graph_inputs(rves, arch)

    rows = []
    for variant in args.variants.split(","):
        t0 = time.time()
        cfg = TrainConfig(
            variant=variant, epochs=args.epochs,
            l2_coefficient=args.l2, dropout_rate=args.dropout,
        )
        res = cross_validate(cfg, ds, graphs, args.k, "rve", arch=arch)
        pred, tds = pooled_blind(res, ds)
        es = error_summary(pred, tds)
        for name in ("psi", "principal_values", "principal_directions"):
            io.write_ecdf(getattr(es, name), out / f"ecdf_{variant}_{name}.csv")
        rows.append({"variant": variant, **{f"median_{k}": v for k, v in es.medians().items()},
                     "seconds": round(time.time() - t0, 1)})
        print(rows[-1], flush=True)
    io.write_rows(rows, out / "summary.csv")


if __name__ == "__main__":
    main()
