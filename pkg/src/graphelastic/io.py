"""File formats: graphs, voxel polycrystals, datasets, checkpoints, reports."""
from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .graph import Graph, build_graph
from .homogenization import Dataset
from .microstructure import Polycrystal
from .nn import Architecture, ModelParams, Normalization, check_shapes

DATASET_HEADER = [
    "rve_id", "C11", "C22", "C33", "C12", "C23", "C13",
    "psi", "S11", "S22", "S33", "S12", "S23", "S13",
]
FLOAT_FMT = "%.17g"

PXTL_MAGIC = b"PXTL"
PXTL_VERSION = 1
_PXTL_HEAD = struct.Struct("<4sI3IIQ")

CKPT_MAGIC = "GRAPHELASTIC-CHECKPOINT 1"


class FormatError(ValueError):
    pass


class ChecksumError(FormatError):
    pass


class ArchitectureMismatchError(ValueError):
    pass


def _fmt(x) -> str:
    return FLOAT_FMT % x


# -- graphs ---------------------------------------------------------------


def write_graph(g: Graph, path) -> None:
    lines = [f"n {g.n_nodes}"] + [f"e {i} {j}" for i, j in g.sorted_edges()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_graph(path) -> Graph:
    n = None
    edges = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "n" and len(parts) == 2 and n is None:
            n = int(parts[1])
        elif parts[0] == "e" and len(parts) == 3 and n is not None:
            edges.append((int(parts[1]), int(parts[2])))
        else:
            raise FormatError(f"{path}:{lineno}: cannot parse {line!r}")
    if n is None:
        raise FormatError(f"{path}: missing 'n <N>' line")
    return build_graph(n, edges)


def write_matrix_csv(M: np.ndarray, path) -> None:
    np.savetxt(path, np.asarray(M), delimiter=",", fmt=FLOAT_FMT)


def read_matrix_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=","))


# -- voxel polycrystals ---------------------------------------------------


def write_polycrystal(p: Polycrystal, path) -> None:
    nx, ny, nz = p.grid
    with open(path, "wb") as fh:
        fh.write(_PXTL_HEAD.pack(PXTL_MAGIC, PXTL_VERSION, nx, ny, nz, p.n_grains, p.seed))
        fh.write(np.ascontiguousarray(p.labels, dtype="<u2").tobytes(order="C"))
        fh.write(np.ascontiguousarray(p.orientations, dtype="<f8").tobytes(order="C"))


def read_polycrystal(path) -> Polycrystal:
    raw = Path(path).read_bytes()
    if len(raw) < _PXTL_HEAD.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, nx, ny, nz, n_grains, seed = _PXTL_HEAD.unpack_from(raw)
    if magic != PXTL_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != PXTL_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    n_vox = nx * ny * nz
    expected = _PXTL_HEAD.size + 2 * n_vox + 24 * n_grains
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    off = _PXTL_HEAD.size
    labels = np.frombuffer(raw, dtype="<u2", count=n_vox, offset=off).reshape(nx, ny, nz).astype(np.uint16)
    off += 2 * n_vox
    ori = np.frombuffer(raw, dtype="<f8", count=3 * n_grains, offset=off).reshape(n_grains, 3).copy()
    return Polycrystal((nx, ny, nz), labels, ori, int(seed))


# -- datasets -------------------------------------------------------------


def write_dataset(ds: Dataset, path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DATASET_HEADER)
        for r, C, psi, S in zip(ds.rve_id, ds.C, ds.psi, ds.S):
            w.writerow([int(r)] + [_fmt(v) for v in C] + [_fmt(psi)] + [_fmt(v) for v in S])
    write_json(ds.meta, meta_path(path))


def read_dataset(path) -> Dataset:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != DATASET_HEADER:
            raise FormatError(f"{path}: unexpected header {header}")
        rows = [row for row in reader if row]
    if not rows:
        raise FormatError(f"{path}: no samples")
    arr = np.array([[float(v) for v in row] for row in rows])
    meta_file = meta_path(path)
    meta = read_json(meta_file) if meta_file.exists() else {}
    return Dataset(arr[:, 0].astype(np.int64), arr[:, 1:7], arr[:, 7], arr[:, 8:14], meta)


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


# -- checkpoints ----------------------------------------------------------


def save_checkpoint(params: ModelParams, path, extra: dict | None = None) -> None:
    """Text header line(s) followed by raw little-endian float64 arrays."""
    check_shapes(params)
    payload = b"".join(np.ascontiguousarray(v, dtype="<f8").tobytes() for v in params.weights.values())
    header = {
        "architecture": params.arch.to_dict(),
        "normalization": params.norm.to_dict(),
        "arrays": [[k, list(v.shape)] for k, v in params.weights.items()],
        "nbytes": len(payload),
        "sha256": hashlib.sha256(payload).hexdigest(),
        "extra": extra or {},
    }
    with open(path, "wb") as fh:
        fh.write((CKPT_MAGIC + "\n").encode())
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(payload)


def read_checkpoint_header(path) -> dict:
    with open(path, "rb") as fh:
        if fh.readline().decode(errors="replace").strip() != CKPT_MAGIC:
            raise FormatError(f"{path}: not a checkpoint")
        return json.loads(fh.readline())


def load_checkpoint(path, expected: Architecture | None = None) -> ModelParams:
    with open(path, "rb") as fh:
        if fh.readline().decode(errors="replace").strip() != CKPT_MAGIC:
            raise FormatError(f"{path}: not a checkpoint")
        line = fh.readline()
        try:
            header = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ChecksumError(f"{path}: corrupt header") from exc
        payload = fh.read()
    if len(payload) != header["nbytes"] or hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise ChecksumError(f"{path}: checksum mismatch (file truncated or modified)")
    arch = Architecture.from_dict(header["architecture"])
    if expected is not None and expected != arch:
        diffs = {
            k: (v, getattr(arch, k))
            for k, v in expected.to_dict().items()
            if arch.to_dict()[k] != v
        }
        raise ArchitectureMismatchError(f"{path}: architecture differs from config: {diffs}")
    weights = {}
    off = 0
    for name, shape in header["arrays"]:
        size = int(np.prod(shape)) if shape else 1
        weights[name] = np.frombuffer(payload, dtype="<f8", count=size, offset=off).reshape(shape).copy()
        off += 8 * size
    params = ModelParams(arch, weights, Normalization.from_dict(header["normalization"]))
    check_shapes(params)
    return params


# -- reports --------------------------------------------------------------


def write_rows(rows: list[dict], path, mode: str = "w") -> None:
    """CSV of dict rows; floats at 17 significant digits."""
    if not rows:
        raise ValueError("no rows to write")
    path = Path(path)
    append = mode == "a" and path.exists() and path.stat().st_size > 0
    fields = list(rows[0])
    with open(path, mode, newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        if not append:
            w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) if isinstance(v, (float, np.floating)) else v for k, v in row.items()})


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_ecdf(values, path) -> None:
    from .metrics import ecdf

    x, F = ecdf(values).steps()
    write_rows([{"mse": float(a), "F": float(b)} for a, b in zip(x, F)], path)
