"""Hybrid GCN + MLP energy network with hand-written derivatives.

The graph branch maps (operator, node features) to an encoded vector; the MLP
branch maps [encoded vector, normalized C] to a scalar energy. Input
gradients (stress) are carried as six forward-mode tangents through the MLP,
and the reverse pass runs through both the primal and the tangent chain, so
parameter gradients of a Sobolev loss include the mixed second derivatives.
"""
from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field

import numpy as np

from .graph import RENORMALIZED_ADJACENCY, PROPAGATION_MODES, Graph, propagation_operator
from .tensors import IDENTITY_VOIGT, stress_from_energy_gradient

N_VOIGT = 6
LOSS_KINDS = ("L2", "H1")


class ShapeError(ValueError):
    pass


class NumericError(FloatingPointError):
    pass


@dataclass(frozen=True)
class Architecture:
    use_graph: bool = True
    n_max: int = 50
    node_features: int = 4
    gcn_channels: tuple = (32, 64)
    encoder_hidden: tuple = (64,)
    encoded_dim: int = 9
    mlp_hidden: tuple = (64, 64)
    propagation_mode: str = RENORMALIZED_ADJACENCY
    dropout_rate: float = 0.0
    l2_coefficient: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "gcn_channels", tuple(int(c) for c in self.gcn_channels))
        object.__setattr__(self, "encoder_hidden", tuple(int(c) for c in self.encoder_hidden))
        object.__setattr__(self, "mlp_hidden", tuple(int(c) for c in self.mlp_hidden))
        if self.propagation_mode not in PROPAGATION_MODES:
            raise ShapeError(f"unknown propagation mode {self.propagation_mode!r}")
        if self.use_graph and self.encoded_dim < 1:
            raise ShapeError("encoded dimension must be >= 1")
        if not self.mlp_hidden:
            raise ShapeError("MLP branch needs at least one hidden layer")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ShapeError("dropout rate must lie in [0, 1)")

    @property
    def mlp_input_dim(self) -> int:
        return (self.encoded_dim if self.use_graph else 0) + N_VOIGT

    def layer_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes = {}
        if self.use_graph:
            fan = self.node_features
            for i, ch in enumerate(self.gcn_channels):
                shapes[f"gcn{i}.W"] = (fan, ch)
                shapes[f"gcn{i}.b"] = (ch,)
                fan = ch
            fan = self.n_max * fan
            dims = self.encoder_hidden + (self.encoded_dim,)
            for i, d in enumerate(dims):
                shapes[f"enc{i}.W"] = (fan, d)
                shapes[f"enc{i}.b"] = (d,)
                fan = d
        fan = self.mlp_input_dim
        for i, h in enumerate(self.mlp_hidden):
            shapes[f"mlp{i}.W"] = (fan, h)
            shapes[f"mlp{i}.b"] = (h,)
            fan = h
        shapes["out.W"] = (fan, 1)
        shapes["out.b"] = (1,)
        return shapes

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("gcn_channels", "encoder_hidden", "mlp_hidden"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Architecture":
        return cls(**d)


@dataclass
class Normalization:
    """u = (C_voigt - I - c_shift) / c_scale;  psi = psi_shift + psi_scale * y."""

    c_shift: np.ndarray = field(default_factory=lambda: np.zeros(N_VOIGT))
    c_scale: np.ndarray = field(default_factory=lambda: np.ones(N_VOIGT))
    psi_shift: float = 0.0
    psi_scale: float = 1.0

    @classmethod
    def fit(cls, C: np.ndarray, psi: np.ndarray) -> "Normalization":
        D = np.asarray(C) - IDENTITY_VOIGT
        lo, hi = D.min(axis=0), D.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        p_lo, p_hi = float(np.min(psi)), float(np.max(psi))
        return cls(lo, span, p_lo, p_hi - p_lo if p_hi > p_lo else 1.0)

    def to_dict(self) -> dict:
        return {
            "c_shift": [float(v) for v in self.c_shift],
            "c_scale": [float(v) for v in self.c_scale],
            "psi_shift": float(self.psi_shift),
            "psi_scale": float(self.psi_scale),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Normalization":
        return cls(np.array(d["c_shift"]), np.array(d["c_scale"]), d["psi_shift"], d["psi_scale"])

    def inputs(self, C):
        return (np.asarray(C, dtype=float) - IDENTITY_VOIGT - self.c_shift) / self.c_scale

    def gradient_factor(self) -> np.ndarray:
        """d psi / d C_voigt = gradient_factor * d y / d u."""
        return self.psi_scale / self.c_scale


@dataclass
class ModelParams:
    arch: Architecture
    weights: dict  # name -> ndarray, ordered as arch.layer_shapes()
    norm: Normalization = field(default_factory=Normalization)

    def copy(self) -> "ModelParams":
        return ModelParams(self.arch, {k: v.copy() for k, v in self.weights.items()}, copy.deepcopy(self.norm))

    def regularized_names(self) -> list[str]:
        return [k for k in self.weights if k.endswith(".W") and k.startswith(("gcn", "enc"))]

    def n_parameters(self) -> int:
        return int(sum(v.size for v in self.weights.values()))


def init_params(arch: Architecture, seed: int = 0) -> ModelParams:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    weights = {}
    for name, shape in arch.layer_shapes().items():
        if name.endswith(".W"):
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            weights[name] = rng.uniform(-limit, limit, size=shape)
        else:
            weights[name] = np.zeros(shape)
    return ModelParams(arch, weights)


def zero_params(arch: Architecture) -> ModelParams:
    return ModelParams(arch, {k: np.zeros(s) for k, s in arch.layer_shapes().items()})


def check_shapes(params: ModelParams) -> None:
    expected = params.arch.layer_shapes()
    if list(expected) != list(params.weights):
        raise ShapeError("parameter names do not match the architecture")
    for name, shape in expected.items():
        if params.weights[name].shape != shape:
            raise ShapeError(f"{name}: expected {shape}, got {params.weights[name].shape}")


# --------------------------------------------------------------------------
# graph inputs


@dataclass(frozen=True)
class GraphInput:
    """Zero-padded operator and features for one polycrystal graph."""

    op: np.ndarray  # (n_max, n_max)
    X: np.ndarray  # (n_max, F)
    mask: np.ndarray  # (n_max,) 1 for real nodes
    n_nodes: int


def graph_input(g: Graph, X: np.ndarray, n_max: int, mode: str = RENORMALIZED_ADJACENCY) -> GraphInput:
    return pad_graph(propagation_operator(g, mode), X, n_max)


def pad_graph(op: np.ndarray, X: np.ndarray, n_max: int) -> GraphInput:
    n = op.shape[0]
    if n > n_max:
        raise ShapeError(f"graph has {n} nodes, family maximum is {n_max}")
    if X.shape[0] != n:
        raise ShapeError("feature rows must match operator size")
    op_p = np.zeros((n_max, n_max))
    op_p[:n, :n] = op
    X_p = np.zeros((n_max, X.shape[1]))
    X_p[:n] = X
    mask = np.zeros(n_max)
    mask[:n] = 1.0
    return GraphInput(op_p, X_p, mask, n)


def _stack(graphs: list[GraphInput]):
    return (
        np.stack([g.op for g in graphs]),
        np.stack([g.X for g in graphs]),
        np.stack([g.mask for g in graphs]),
    )


# --------------------------------------------------------------------------
# activations


def elu(z):
    return np.where(z < 0, np.expm1(np.minimum(z, 0.0)), z)


def elu_prime(z):
    return np.where(z < 0, np.exp(np.minimum(z, 0.0)), 1.0)


def elu_second(z):
    return np.where(z < 0, np.exp(np.minimum(z, 0.0)), 0.0)


# --------------------------------------------------------------------------
# graph branch


def _encode(params: ModelParams, ops, Xs, masks, training=False, rng=None):
    arch = params.arch
    w = params.weights
    trace = {"H": [Xs], "M": [], "Z": [], "drop": [], "dense_in": [], "dense_z": []}
    H = Xs
    for i in range(len(arch.gcn_channels)):
        M = ops @ H
        Z = M @ w[f"gcn{i}.W"] + w[f"gcn{i}.b"]
        H = np.maximum(Z, 0.0) * masks[..., None]
        trace["M"].append(M)
        trace["Z"].append(Z)
        trace["H"].append(H)
    h = H.reshape(H.shape[0], -1)
    n_dense = len(arch.encoder_hidden) + 1
    for i in range(n_dense):
        if training and arch.dropout_rate > 0:
            keep = (rng.random(h.shape) >= arch.dropout_rate) / (1.0 - arch.dropout_rate)
            h = h * keep
        else:
            keep = None
        trace["drop"].append(keep)
        trace["dense_in"].append(h)
        z = h @ w[f"enc{i}.W"] + w[f"enc{i}.b"]
        trace["dense_z"].append(z)
        h = np.maximum(z, 0.0) if i < n_dense - 1 else z  # encoded vector is linear
    return h, trace


def _encode_backward(params: ModelParams, ops, masks, trace, e_bar, grads):
    arch = params.arch
    w = params.weights
    n_dense = len(arch.encoder_hidden) + 1
    h_bar = e_bar
    for i in reversed(range(n_dense)):
        z = trace["dense_z"][i]
        z_bar = h_bar if i == n_dense - 1 else h_bar * (z > 0)
        grads[f"enc{i}.W"] += trace["dense_in"][i].T @ z_bar
        grads[f"enc{i}.b"] += z_bar.sum(axis=0)
        h_bar = z_bar @ w[f"enc{i}.W"].T
        if trace["drop"][i] is not None:
            h_bar = h_bar * trace["drop"][i]
    H_bar = h_bar.reshape(trace["H"][-1].shape)
    for i in reversed(range(len(arch.gcn_channels))):
        Z = trace["Z"][i]
        Z_bar = H_bar * masks[..., None] * (Z > 0)
        grads[f"gcn{i}.W"] += np.einsum("gnf,gnc->fc", trace["M"][i], Z_bar)
        grads[f"gcn{i}.b"] += Z_bar.sum(axis=(0, 1))
        if i > 0:
            M_bar = Z_bar @ w[f"gcn{i}.W"].T
            H_bar = np.swapaxes(ops, -1, -2) @ M_bar


def gcn_branch(params: ModelParams, L_op: np.ndarray, X: np.ndarray, training=False, rng=None):
    """Encoded vector for a single (operator, features) pair plus its trace."""
    arch = params.arch
    if not arch.use_graph:
        raise ShapeError("model has no graph branch")
    gi = pad_graph(np.asarray(L_op, dtype=float), np.asarray(X, dtype=float), arch.n_max)
    e, trace = _encode(params, gi.op[None], gi.X[None], gi.mask[None], training, rng)
    return e[0], trace


def gcn_layer_outputs(params: ModelParams, L_op: np.ndarray, X: np.ndarray) -> list[np.ndarray]:
    """Unpadded node-wise activations of each GCN layer (before flattening)."""
    n = L_op.shape[0]
    _, trace = gcn_branch(params, L_op, X)
    return [H[0, :n] for H in trace["H"][1:]]


# --------------------------------------------------------------------------
# MLP branch with tangents


def _mlp_forward(params: ModelParams, x: np.ndarray, with_tangents: bool):
    arch = params.arch
    w = params.weights
    n_enc = arch.mlp_input_dim - N_VOIGT
    trace = {"a": [x], "z": [], "s": [], "dz": [], "da": []}
    a = x
    da = None
    for i in range(len(arch.mlp_hidden)):
        W = w[f"mlp{i}.W"]
        z = a @ W + w[f"mlp{i}.b"]
        s = elu_prime(z)
        a = elu(z)
        trace["z"].append(z)
        trace["s"].append(s)
        trace["a"].append(a)
        if with_tangents:
            dz = W[n_enc:][None] if i == 0 else da @ W  # (1|B, 6, H)
            da = s[:, None, :] * dz
            trace["dz"].append(dz)
            trace["da"].append(da)
    y = (a @ w["out.W"])[:, 0] + w["out.b"][0]
    g = (da @ w["out.W"])[..., 0] if with_tangents else None
    return y, g, trace


def _mlp_backward(params: ModelParams, trace, y_bar, g_bar, grads):
    """Reverse pass through primal and tangent chains; returns d/dx."""
    arch = params.arch
    w = params.weights
    n_enc = arch.mlp_input_dim - N_VOIGT
    L = len(arch.mlp_hidden)
    Wo = w["out.W"]
    grads["out.W"] += trace["a"][L].T @ y_bar[:, None]
    grads["out.b"] += np.array([y_bar.sum()])
    a_bar = y_bar[:, None] * Wo[:, 0][None, :]
    da_bar = None
    if g_bar is not None:
        grads["out.W"] += np.einsum("bkh,bk->h", trace["da"][L - 1], g_bar)[:, None]
        da_bar = g_bar[:, :, None] * Wo[:, 0][None, None, :]
    for i in reversed(range(L)):
        z, s = trace["z"][i], trace["s"][i]
        z_bar = a_bar * s
        if da_bar is not None:
            s_bar = np.einsum("bkh,bkh->bh", da_bar, np.broadcast_to(trace["dz"][i], da_bar.shape))
            z_bar = z_bar + s_bar * elu_second(z)
            dz_bar = da_bar * s[:, None, :]
        W = w[f"mlp{i}.W"]
        grads[f"mlp{i}.W"] += trace["a"][i].T @ z_bar
        grads[f"mlp{i}.b"] += z_bar.sum(axis=0)
        if da_bar is not None:
            if i > 0:
                grads[f"mlp{i}.W"] += np.einsum("bkp,bkq->pq", trace["da"][i - 1], dz_bar)
                da_bar = dz_bar @ W.T
            else:
                grads[f"mlp{i}.W"][n_enc:] += dz_bar.sum(axis=0)
        a_bar = z_bar @ W.T
    return a_bar


# --------------------------------------------------------------------------
# public evaluation


def _encoded_for(params, graphs, graph_idx, training=False, rng=None):
    """Per-sample encoded vectors plus what the backward pass needs."""
    if not params.arch.use_graph:
        return None, None
    uniq, inverse = np.unique(graph_idx, return_inverse=True)
    ops, Xs, masks = _stack([graphs[int(u)] for u in uniq])
    e, trace = _encode(params, ops, Xs, masks, training, rng)
    return e[inverse], (uniq, inverse, ops, masks, trace)


def _mlp_inputs(params, e, C):
    u = params.norm.inputs(C)
    return u if e is None else np.concatenate([e, u], axis=1)


def predict(params: ModelParams, graphs, graph_idx, C, with_stress=True):
    """Batched energy and stress in physical units.

    ``graphs`` is a list of GraphInput (ignored for MLP-only models),
    ``graph_idx`` maps each sample to its graph, ``C`` is (B, 6).
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    graph_idx = np.asarray(graph_idx, dtype=np.int64).reshape(-1)
    if params.arch.use_graph and graph_idx.shape[0] != C.shape[0]:
        raise ShapeError("graph_idx and C batch sizes differ")
    e, _ = _encoded_for(params, graphs, graph_idx)
    y, g, _ = _mlp_forward(params, _mlp_inputs(params, e, C), with_stress)
    nm = params.norm
    psi = nm.psi_shift + nm.psi_scale * y
    if not with_stress:
        return psi, None
    return psi, stress_from_energy_gradient(g * nm.gradient_factor())


def _single(params, graph_desc, C_voigt):
    if params.arch.use_graph:
        if isinstance(graph_desc, GraphInput):
            gi = graph_desc
        else:
            op, X = graph_desc
            gi = pad_graph(np.asarray(op, dtype=float), np.asarray(X, dtype=float), params.arch.n_max)
        graphs = [gi]
    else:
        graphs = []
    C = np.atleast_2d(np.asarray(C_voigt, dtype=float))
    return graphs, np.zeros(C.shape[0], dtype=np.int64), C


def model_energy(params: ModelParams, graph_desc, C_voigt):
    """psi for one graph; ``graph_desc`` is a GraphInput or (operator, X)."""
    graphs, idx, C = _single(params, graph_desc, C_voigt)
    psi, _ = predict(params, graphs, idx, C, with_stress=False)
    return psi if np.ndim(C_voigt) > 1 else float(psi[0])


def model_stress(params: ModelParams, graph_desc, C_voigt):
    """S_voigt = 2 d psi / dC, from the six forward tangents."""
    graphs, idx, C = _single(params, graph_desc, C_voigt)
    _, S = predict(params, graphs, idx, C, with_stress=True)
    return S if np.ndim(C_voigt) > 1 else S[0]


@dataclass
class Batch:
    graph_idx: np.ndarray  # (B,)
    C: np.ndarray  # (B, 6)
    psi: np.ndarray  # (B,)
    S: np.ndarray | None = None  # (B, 6); required for H1


def normalized_targets(params: ModelParams, batch: Batch):
    nm = params.norm
    y = (batch.psi - nm.psi_shift) / nm.psi_scale
    if batch.S is None:
        return y, None
    grad_c = np.asarray(batch.S) * np.array([0.5, 0.5, 0.5, 1.0, 1.0, 1.0])
    return y, grad_c / nm.gradient_factor()


def loss_and_param_grads(params: ModelParams, graphs, batch: Batch, kind: str = "H1", training=False, rng=None):
    """Loss in normalized units and its gradient for every parameter.

    L2: mean (y - y_hat)^2. H1 adds mean over samples of the squared norm of
    the six-component gradient discrepancy. Graph-branch weight matrices get
    an extra 0.5 * l2_coefficient * |W|^2 penalty.
    """
    if kind not in LOSS_KINDS:
        raise ValueError(f"unknown loss kind {kind!r}")
    B = len(batch.psi)
    if B == 0:
        raise ShapeError("empty batch")
    C = np.asarray(batch.C, dtype=float)
    if C.shape != (B, N_VOIGT):
        raise ShapeError(f"C must be ({B}, 6), got {C.shape}")
    if kind == "H1" and batch.S is None:
        raise ShapeError("H1 loss needs stress labels")
    h1 = kind == "H1"
    e, enc = _encoded_for(params, graphs, batch.graph_idx, training, rng)
    y, g, trace = _mlp_forward(params, _mlp_inputs(params, e, C), with_tangents=h1)
    y_t, g_t = normalized_targets(params, batch)
    r = y - y_t
    loss = float(np.mean(r * r))
    g_bar = None
    if h1:
        rg = g - g_t
        loss += float(np.mean(np.sum(rg * rg, axis=1)))
        g_bar = 2.0 * rg / B
    if not np.isfinite(loss):
        raise NumericError("non-finite loss in forward pass")
    grads = {k: np.zeros_like(v) for k, v in params.weights.items()}
    x_bar = _mlp_backward(params, trace, 2.0 * r / B, g_bar, grads)
    if enc is not None:
        uniq, inverse, ops, masks, etrace = enc
        n_enc = params.arch.encoded_dim
        e_bar = np.zeros((len(uniq), n_enc))
        np.add.at(e_bar, inverse, x_bar[:, :n_enc])
        _encode_backward(params, ops, masks, etrace, e_bar, grads)
    coef = params.arch.l2_coefficient
    if coef > 0:
        for name in params.regularized_names():
            W = params.weights[name]
            loss += 0.5 * coef * float(np.sum(W * W))
            grads[name] += coef * W
    return loss, grads
