"""Fully-connected encoder and projection head with hand-derived backward pass.

The encoder maps a flattened window to a latent vector h; the projection head
maps h to the contrastive embedding, which is L2-normalized before entering
the loss.  Forward passes accept a single vector or a (batch, dim) matrix and
record every intermediate needed for the exact reverse pass, including the
normalization Jacobian (I - v v^T) / ||v_raw||.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import NORM_EPS, DegenerateVectorError, Rng

ACTIVATIONS = ("relu", "identity")


@dataclass
class LayerParams:
    weight: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray    # (out_dim,)
    activation: str

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2:
            raise ValueError("weight must be 2-D")
        if self.bias.shape != (self.weight.shape[0],):
            raise ValueError("bias dimension must equal weight rows")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class ModelParams:
    encoder: list[LayerParams]
    projection: list[LayerParams]

    def __post_init__(self):
        chain = self.encoder + self.projection
        if not self.encoder or not self.projection:
            raise ValueError("encoder and projection must each have >= 1 layer")
        for prev, nxt in zip(chain, chain[1:]):
            if nxt.weight.shape[1] != prev.weight.shape[0]:
                raise ValueError("consecutive layer dimensions are incompatible")
        if self.projection[-1].weight.shape[0] < 2:
            raise ValueError("projection output dimension must be >= 2")

    @property
    def layers(self) -> list[LayerParams]:
        return self.encoder + self.projection

    @property
    def input_dim(self) -> int:
        return self.encoder[0].weight.shape[1]

    @property
    def h_dim(self) -> int:
        return self.encoder[-1].weight.shape[0]

    @property
    def embedding_dim(self) -> int:
        return self.projection[-1].weight.shape[0]

    def copy(self) -> "ModelParams":
        return ModelParams(
            [LayerParams(l.weight.copy(), l.bias.copy(), l.activation) for l in self.encoder],
            [LayerParams(l.weight.copy(), l.bias.copy(), l.activation) for l in self.projection],
        )


@dataclass
class ForwardTrace:
    x: np.ndarray
    pre: list[np.ndarray]   # pre-activations, one per layer in encoder+projection order
    act: list[np.ndarray]   # activations, same order
    h: np.ndarray           # encoder output (unnormalized)
    v_raw: np.ndarray       # projection output before normalization
    v: np.ndarray           # unit-norm embedding
    single: bool            # True when x was a single vector


@dataclass
class ParamGrads:
    encoder: list[tuple[np.ndarray, np.ndarray]]     # (d_weight, d_bias) per layer
    projection: list[tuple[np.ndarray, np.ndarray]]
    x: np.ndarray


def init_params(encoder_dims: list[int], projection_dims: list[int], rng: Rng) -> ModelParams:
    """Fan-in-scaled Gaussian weights (std 1/sqrt(fan_in)), zero biases.

    ReLU on every layer except the final projection layer, which is identity.
    """
    if len(encoder_dims) < 2 or len(projection_dims) < 2:
        raise ValueError("need at least input and output dims for each stack")
    if projection_dims[0] != encoder_dims[-1]:
        raise ValueError("projection input dim must equal encoder output dim")

    def build(dims: list[int], final_identity: bool) -> list[LayerParams]:
        layers = []
        for li, (d_in, d_out) in enumerate(zip(dims, dims[1:])):
            w = rng.gaussian_array((d_out, d_in), 0.0, 1.0 / np.sqrt(d_in))
            act = "identity" if final_identity and li == len(dims) - 2 else "relu"
            layers.append(LayerParams(w, np.zeros(d_out), act))
        return layers

    return ModelParams(build(encoder_dims, False), build(projection_dims, True))


def _apply_activation(z: np.ndarray, activation: str) -> np.ndarray:
    return np.maximum(z, 0.0) if activation == "relu" else z


def forward(params: ModelParams, x: np.ndarray) -> ForwardTrace:
    """Run the full encoder + projection chain, recording intermediates."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    a = np.atleast_2d(x)
    if a.shape[1] != params.input_dim:
        raise ValueError(f"input dim {a.shape[1]} != expected {params.input_dim}")
    pre, act = [], []
    for layer in params.layers:
        z = a @ layer.weight.T + layer.bias
        a = _apply_activation(z, layer.activation)
        pre.append(z)
        act.append(a)
    h = act[len(params.encoder) - 1]
    v_raw = act[-1]
    norms = np.linalg.norm(v_raw, axis=1, keepdims=True)
    if np.any(norms < NORM_EPS) or not np.all(np.isfinite(norms)):
        raise DegenerateVectorError("projection output norm is degenerate or non-finite")
    v = v_raw / norms

    def maybe_squeeze(m):
        return m[0] if single else m

    return ForwardTrace(
        x=x,
        pre=[maybe_squeeze(z) for z in pre],
        act=[maybe_squeeze(m) for m in act],
        h=maybe_squeeze(h),
        v_raw=maybe_squeeze(v_raw),
        v=maybe_squeeze(v),
        single=single,
    )


def backward(params: ModelParams, trace: ForwardTrace, grad_v: np.ndarray) -> ParamGrads:
    """Exact gradients of (grad_v . v) w.r.t. every weight, bias and the input.

    For batched traces grad_v is (batch, embed_dim) and parameter gradients
    are summed over the batch.
    """
    grad_v = np.atleast_2d(np.asarray(grad_v, dtype=np.float64))
    v = np.atleast_2d(trace.v)
    v_raw = np.atleast_2d(trace.v_raw)
    if grad_v.shape != v.shape:
        raise ValueError(f"grad_v shape {grad_v.shape} != embedding shape {v.shape}")

    norms = np.linalg.norm(v_raw, axis=1, keepdims=True)
    g = (grad_v - v * np.sum(grad_v * v, axis=1, keepdims=True)) / norms

    layers = params.layers
    pres = [np.atleast_2d(z) for z in trace.pre]
    acts = [np.atleast_2d(m) for m in trace.act]
    x = np.atleast_2d(trace.x)
    grads: list[tuple[np.ndarray, np.ndarray]] = []
    for li in range(len(layers) - 1, -1, -1):
        layer = layers[li]
        if layer.activation == "relu":
            g = g * (pres[li] > 0)
        a_in = acts[li - 1] if li > 0 else x
        grads.append((g.T @ a_in, g.sum(axis=0)))
        g = g @ layer.weight
    grads.reverse()
    n_enc = len(params.encoder)
    grad_x = g[0] if trace.single else g
    return ParamGrads(encoder=grads[:n_enc], projection=grads[n_enc:], x=grad_x)


def sgd_step(params: ModelParams, grads: ParamGrads, lr: float,
             momentum: float = 0.0, velocity: list | None = None):
    """In-place SGD update; returns the (possibly created) velocity buffers."""
    layer_grads = grads.encoder + grads.projection
    layers = params.layers
    if velocity is None:
        velocity = [(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in layers]
    for layer, (dw, db), (vw, vb) in zip(layers, layer_grads, velocity):
        if momentum:
            vw *= momentum
            vw += dw
            vb *= momentum
            vb += db
            dw, db = vw, vb
        layer.weight -= lr * dw
        layer.bias -= lr * db
    return velocity


# -- checkpoint file format (version 1) -------------------------------------
#
#   supconad-params v1
#   section encoder <n_layers>
#   layer <out> <in> <activation>
#   <bias entries, space-separated reprs>
#   <out lines of in weight entries>
#   section projection <n_layers>
#   ...
#
# repr round-trips float64 exactly, so save/load is bit-exact.

def save_params(params: ModelParams, path: str) -> None:
    def fmt(arr):
        return " ".join(repr(float(x)) for x in arr)

    with open(path, "w") as f:
        f.write("supconad-params v1\n")
        for name, stack in (("encoder", params.encoder), ("projection", params.projection)):
            f.write(f"section {name} {len(stack)}\n")
            for layer in stack:
                out_d, in_d = layer.weight.shape
                f.write(f"layer {out_d} {in_d} {layer.activation}\n")
                f.write(fmt(layer.bias) + "\n")
                for row in layer.weight:
                    f.write(fmt(row) + "\n")


def load_params(path: str) -> ModelParams:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != "supconad-params v1":
        raise ValueError(f"unrecognized checkpoint header in {path}")
    pos = 1
    stacks: dict[str, list[LayerParams]] = {}
    for _ in range(2):
        tag, name, n = lines[pos].split()
        if tag != "section":
            raise ValueError(f"expected section at line {pos + 1}")
        pos += 1
        layers = []
        for _ in range(int(n)):
            tag, out_d, in_d, act = lines[pos].split()
            if tag != "layer":
                raise ValueError(f"expected layer at line {pos + 1}")
            out_d, in_d = int(out_d), int(in_d)
            pos += 1
            bias = np.array([float(t) for t in lines[pos].split()], dtype=np.float64)
            pos += 1
            w = np.array(
                [[float(t) for t in lines[pos + r].split()] for r in range(out_d)],
                dtype=np.float64,
            ).reshape(out_d, in_d)
            pos += out_d
            layers.append(LayerParams(w, bias, act))
        stacks[name] = layers
    return ModelParams(stacks["encoder"], stacks["projection"])
