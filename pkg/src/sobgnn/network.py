"""S-SobGNN forward/backward passes and the GCN baseline layer.

A layer runs ``alpha`` parallel filters, one per cascade operator::

    B_rho = sigma(op_rho @ H @ W_rho)
    out   = sum_rho c_rho * B_rho

``sigma`` is ReLU on hidden layers and the identity on the last layer,
whose output feeds a row-wise softmax. Gradients are derived by hand;
operators are symmetric so ``op.T @ G == op @ G``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DimensionError, NumericalError, ParameterError
from .sobolev_ops import SobolevCascade, gcn_operator
from .sparse_core import CsrMatrix, atomic_write_text, spmm

__all__ = [
    "LayerParams",
    "ModelParams",
    "LayerTrace",
    "ForwardTrace",
    "init_params",
    "gcn_params",
    "gcn_cascade",
    "softmax",
    "sob_layer_forward",
    "gcn_layer_forward",
    "model_forward",
    "predict",
    "cross_entropy_loss",
    "model_backward",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_FORMAT = "sobgnn-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class LayerParams:
    """Weights of one layer.

    ``combination`` is a length-``alpha`` vector of filter weights, or, in
    projection mode, an ``(alpha * F_out, F_out)`` matrix applied to the
    concatenated filter outputs.
    """

    filter_weights: list[np.ndarray]
    combination: np.ndarray
    biases: list[np.ndarray] | None = None

    def __post_init__(self):
        shapes = {w.shape for w in self.filter_weights}
        if len(shapes) != 1:
            raise DimensionError(f"filter weights of a layer must share one shape, got {shapes}")
        alpha, f_out = self.alpha, self.out_features
        if self.combination.ndim == 1 and self.combination.shape != (alpha,):
            raise DimensionError(f"combination vector must have length {alpha}")
        if self.combination.ndim == 2 and self.combination.shape != (alpha * f_out, f_out):
            raise DimensionError(f"projection must have shape {(alpha * f_out, f_out)}")
        if self.biases is not None and len(self.biases) != alpha:
            raise DimensionError("need one bias vector per filter")

    @property
    def alpha(self) -> int:
        return len(self.filter_weights)

    @property
    def in_features(self) -> int:
        return self.filter_weights[0].shape[0]

    @property
    def out_features(self) -> int:
        return self.filter_weights[0].shape[1]

    @property
    def projection(self) -> bool:
        return self.combination.ndim == 2

    def tensors(self) -> list[np.ndarray]:
        return [*self.filter_weights, self.combination, *(self.biases or [])]


@dataclass
class ModelParams:
    layers: list[LayerParams]
    trainable_combination: bool = True

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def alpha(self) -> int:
        return self.layers[0].alpha

    def tensors(self) -> list[np.ndarray]:
        """Flat list of every parameter array, in a fixed order."""
        return [t for layer in self.layers for t in layer.tensors()]

    def trainable_mask(self) -> list[bool]:
        mask = []
        for layer in self.layers:
            mask += [True] * layer.alpha
            mask.append(self.trainable_combination)
            mask += [True] * len(layer.biases or [])
        return mask

    def decay_mask(self) -> list[bool]:
        """Weight decay applies to filter weights only."""
        mask = []
        for layer in self.layers:
            mask += [True] * layer.alpha
            mask.append(False)
            mask += [False] * len(layer.biases or [])
        return mask

    def with_tensors(self, tensors: list[np.ndarray]) -> "ModelParams":
        tensors = list(tensors)
        layers, pos = [], 0
        for layer in self.layers:
            a = layer.alpha
            weights = tensors[pos:pos + a]
            comb = tensors[pos + a]
            pos += a + 1
            biases = None
            if layer.biases is not None:
                biases = tensors[pos:pos + a]
                pos += a
            layers.append(LayerParams(list(weights), comb, biases))
        if pos != len(tensors):
            raise DimensionError(f"expected {pos} tensors, got {len(tensors)}")
        return ModelParams(layers, self.trainable_combination)

    def copy(self) -> "ModelParams":
        return self.with_tensors([t.copy() for t in self.tensors()])

    def zeros_like(self) -> "ModelParams":
        return self.with_tensors([np.zeros_like(t) for t in self.tensors()])


def init_params(in_features: int, hidden_units: int, n_classes: int, n_layers: int, alpha: int,
                rng: np.random.Generator, combination: str = "scalar", bias: bool = False) -> ModelParams:
    """Glorot-uniform filter weights, combination weights set to ``1/alpha``.

    In projection mode the projection starts as stacked ``I/alpha`` blocks,
    which makes it equal to the scalar combination at initialization.
    """
    if n_layers < 1 or alpha < 1:
        raise ParameterError("n_layers and alpha must be >= 1")
    if combination not in ("scalar", "projection"):
        raise ParameterError(f"combination must be 'scalar' or 'projection', got {combination!r}")
    dims = [in_features] + [hidden_units] * (n_layers - 1) + [n_classes]
    layers = []
    for f_in, f_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (f_in + f_out))
        weights = [rng.uniform(-limit, limit, size=(f_in, f_out)) for _ in range(alpha)]
        if combination == "scalar":
            comb = np.full(alpha, 1.0 / alpha)
        else:
            comb = np.vstack([np.eye(f_out) / alpha] * alpha)
        biases = [np.zeros(f_out) for _ in range(alpha)] if bias else None
        layers.append(LayerParams(weights, comb, biases))
    return ModelParams(layers)


def gcn_cascade(a: CsrMatrix) -> SobolevCascade:
    """Single-operator cascade holding the renormalized GCN operator."""
    return SobolevCascade(1.0, 1, (gcn_operator(a),))


def gcn_params(in_features: int, hidden_units: int, n_classes: int, n_layers: int,
               rng: np.random.Generator, bias: bool = False) -> ModelParams:
    """GCN baseline: one filter per layer with the combination frozen at 1."""
    params = init_params(in_features, hidden_units, n_classes, n_layers, 1, rng, bias=bias)
    params.trainable_combination = False
    return params


# -- forward ---------------------------------------------------------------

@dataclass
class LayerTrace:
    inputs: np.ndarray
    dropout_mask: np.ndarray | None
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]
    output: np.ndarray
    apply_relu: bool


@dataclass
class ForwardTrace:
    layers: list[LayerTrace]
    logits: np.ndarray
    probs: np.ndarray
    cascade: SobolevCascade = field(repr=False)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def sob_layer_forward(h: np.ndarray, cascade: SobolevCascade, params: LayerParams,
                      apply_relu: bool = True, layer_index: int = 0,
                      dropout: float = 0.0, rng: np.random.Generator | None = None,
                      ) -> tuple[np.ndarray, LayerTrace]:
    """One S-SobGNN layer: ``alpha`` filters merged by the combination layer."""
    if cascade.alpha != params.alpha:
        raise DimensionError(f"cascade has alpha={cascade.alpha}, layer has {params.alpha} filters")
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] != cascade.n_nodes or h.shape[1] != params.in_features:
        raise DimensionError(
            f"layer {layer_index}: input shape {h.shape} incompatible with "
            f"{cascade.n_nodes} nodes x {params.in_features} features"
        )
    mask = None
    if dropout > 0.0 and rng is not None:
        keep = 1.0 - dropout
        mask = (rng.random(h.shape) < keep) / keep
        h = h * mask
    pre, post = [], []
    for rho, (op, w) in enumerate(zip(cascade.operators, params.filter_weights), start=1):
        with np.errstate(invalid="ignore", over="ignore"):  # checked just below
            z = spmm(op, h @ w)
        if params.biases is not None:
            z = z + params.biases[rho - 1]
        if not np.all(np.isfinite(z)):
            raise NumericalError(f"non-finite activation in layer {layer_index}, filter rho={rho}")
        pre.append(z)
        post.append(np.maximum(z, 0.0) if apply_relu else z)
    with np.errstate(invalid="ignore", over="ignore"):
        if params.projection:
            out = np.hstack(post) @ params.combination
        else:
            out = np.zeros_like(post[0])
            for c, b in zip(params.combination, post):  # fixed reduction order
                out += c * b
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"non-finite output of the combination in layer {layer_index}")
    return out, LayerTrace(h, mask, pre, post, out, apply_relu)


def gcn_layer_forward(h: np.ndarray, operator: CsrMatrix, w: np.ndarray,
                      apply_relu: bool = True) -> np.ndarray:
    """Plain GCN layer ``sigma(op @ H @ W)``; build ``operator`` once with :func:`gcn_operator`."""
    z = spmm(operator, np.asarray(h, dtype=np.float64) @ w)
    return np.maximum(z, 0.0) if apply_relu else z


def model_forward(x: np.ndarray, cascade: SobolevCascade, params: ModelParams,
                  dropout: float = 0.0, rng: np.random.Generator | None = None) -> ForwardTrace:
    if not params.layers:
        raise ParameterError("model has no layers")
    h = x
    traces = []
    last = params.n_layers - 1
    for i, layer in enumerate(params.layers):
        h, trace = sob_layer_forward(h, cascade, layer, apply_relu=i < last, layer_index=i,
                                     dropout=dropout, rng=rng)
        traces.append(trace)
    return ForwardTrace(traces, h, softmax(h), cascade)


def predict(x: np.ndarray, cascade: SobolevCascade, params: ModelParams) -> np.ndarray:
    return model_forward(x, cascade, params).probs.argmax(axis=1)


def cross_entropy_loss(probs: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    """Mean negative log-likelihood over the masked nodes (0 for an empty mask)."""
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return 0.0
    p = probs[idx, labels[idx]]
    return float(np.mean(-np.log(np.maximum(p, 1e-30))))


# -- backward --------------------------------------------------------------

def model_backward(trace: ForwardTrace, labels: np.ndarray, mask: np.ndarray,
                   params: ModelParams) -> ModelParams:
    """Exact gradients of the masked cross-entropy, shaped like ``params``."""
    if len(trace.layers) != params.n_layers:
        raise DimensionError("stale trace: layer count differs from params")
    for t, layer in zip(trace.layers, params.layers):
        if (len(t.activations) != layer.alpha or t.inputs.shape[1] != layer.in_features
                or t.output.shape[1] != layer.out_features):
            raise DimensionError("stale trace: shapes differ from params")

    idx = np.flatnonzero(mask)
    upstream = np.zeros_like(trace.probs)
    if len(idx):
        upstream[idx] = trace.probs[idx]
        upstream[idx, labels[idx]] -= 1.0
        upstream /= len(idx)

    ops = trace.cascade.operators
    grads: list[LayerParams] = [None] * params.n_layers
    for li in range(params.n_layers - 1, -1, -1):
        layer, t = params.layers[li], trace.layers[li]
        if layer.projection:
            stacked = np.hstack(t.activations)
            d_comb = stacked.T @ upstream
            d_stacked = upstream @ layer.combination.T
            f_out = layer.out_features
            d_acts = [d_stacked[:, r * f_out:(r + 1) * f_out] for r in range(layer.alpha)]
        else:
            d_comb = np.array([np.sum(upstream * b) for b in t.activations])
            d_acts = [c * upstream for c in layer.combination]

        d_weights, d_biases = [], []
        d_input = np.zeros_like(t.inputs)
        for r in range(layer.alpha):
            dz = d_acts[r] * (t.pre_activations[r] > 0) if t.apply_relu else d_acts[r]
            if layer.biases is not None:
                d_biases.append(dz.sum(axis=0))
            g = spmm(ops[r], dz)
            d_weights.append(t.inputs.T @ g)
            d_input += g @ layer.filter_weights[r].T
        if t.dropout_mask is not None:
            d_input *= t.dropout_mask
        grads[li] = LayerParams(d_weights, d_comb, d_biases if layer.biases is not None else None)
        upstream = d_input
    return ModelParams(grads, params.trainable_combination)


# -- checkpoints -----------------------------------------------------------

def save_checkpoint(path, params: ModelParams, cascade: SobolevCascade, model: str = "sobgnn",
                    metadata: dict | None = None) -> None:
    """JSON checkpoint; floats are written with round-trip precision."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model": model,
        "eps": cascade.eps,
        "alpha": cascade.alpha,
        "trainable_combination": params.trainable_combination,
        "layer_shapes": [[layer.in_features, layer.out_features] for layer in params.layers],
        "layers": [
            {
                "filter_weights": [w.tolist() for w in layer.filter_weights],
                "combination": layer.combination.tolist(),
                "biases": None if layer.biases is None else [b.tolist() for b in layer.biases],
            }
            for layer in params.layers
        ],
        "metadata": metadata or {},
    }
    atomic_write_text(path, json.dumps(payload) + "\n")


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    """Return the parameters and the checkpoint header (model, eps, alpha, metadata)."""
    with open(os.fspath(path), encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{path}: not a checkpoint file")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    layers = []
    for entry in payload["layers"]:
        biases = entry["biases"]
        layers.append(LayerParams(
            [np.array(w, dtype=np.float64) for w in entry["filter_weights"]],
            np.array(entry["combination"], dtype=np.float64),
            None if biases is None else [np.array(b, dtype=np.float64) for b in biases],
        ))
    params = ModelParams(layers, payload["trainable_combination"])
    header = {k: payload[k] for k in ("model", "eps", "alpha", "layer_shapes", "metadata")}
    return params, header
