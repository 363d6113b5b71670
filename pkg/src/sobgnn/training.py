"""Full-graph training, random hyperparameter search and bootstrap evaluation."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import NumericalError, ParameterError, SearchError
from .graph_build import Dataset, Graph
from .network import (
    ModelParams,
    cross_entropy_loss,
    gcn_cascade,
    gcn_params,
    init_params,
    model_backward,
    model_forward,
)
from .sobolev_ops import SobolevCascade, build_cascade
from .sparse_core import atomic_write_text

__all__ = [
    "TrainConfig",
    "History",
    "Metrics",
    "AdamState",
    "Choice",
    "LogUniform",
    "DEFAULT_SPACE",
    "SearchResult",
    "derive_seed",
    "adam_step",
    "accuracy",
    "model_cascade",
    "build_model",
    "train",
    "sample_config",
    "run_search",
    "random_search",
    "evaluate",
    "bootstrap_ci",
]

log = logging.getLogger(__name__)

MODELS = ("sobgnn", "gcn")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    max_epochs: int = 1000
    patience: int = 50
    eps: float = 1.0
    alpha: int = 3
    n_layers: int = 2
    hidden_units: int = 32
    seed: int = 0
    model: str = "sobgnn"
    dropout: float = 0.0
    bias: bool = False
    combination: str = "scalar"

    def __post_init__(self):
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ParameterError("learning_rate and weight_decay must be >= 0")
        if self.max_epochs < 1 or self.patience < 1:
            raise ParameterError("max_epochs and patience must be >= 1")
        if self.alpha < 1 or self.n_layers < 1 or self.hidden_units < 1:
            raise ParameterError("alpha, n_layers and hidden_units must be >= 1")
        if self.eps < 0:
            raise ParameterError("eps must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ParameterError("dropout must lie in [0, 1)")
        if self.model not in MODELS:
            raise ParameterError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.combination not in ("scalar", "projection"):
            raise ParameterError(f"combination must be 'scalar' or 'projection', got {self.combination!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class History:
    epochs: list[int] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_accuracy: float = -math.inf

    def records(self) -> list[dict]:
        return [
            {"epoch": e, "train_loss": l, "train_accuracy": ta, "val_accuracy": va}
            for e, l, ta, va in zip(self.epochs, self.train_loss, self.train_accuracy, self.val_accuracy)
        ]


@dataclass
class Metrics:
    per_seed_accuracies: np.ndarray
    mean: float
    ci_low: float
    ci_high: float

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "per_seed": [float(a) for a in self.per_seed_accuracies],
        }


def derive_seed(base_seed: int, index: int) -> int:
    """Independent child seed for trial/seed ``index`` of a run seeded with ``base_seed``."""
    return int(np.random.SeedSequence([int(base_seed) & 0xFFFFFFFF, int(index)]).generate_state(1)[0])


# -- optimizer ----------------------------------------------------------------

@dataclass
class AdamState:
    step: int
    m: list[np.ndarray]
    v: list[np.ndarray]

    @classmethod
    def zeros(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls(0, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState,
              lr: float, weight_decay: float = 0.0, betas: tuple[float, float] = (0.9, 0.999),
              eps: float = 1e-8, decay_mask: Sequence[bool] | None = None,
              trainable: Sequence[bool] | None = None) -> tuple[list[np.ndarray], AdamState]:
    """One Adam update with bias correction and decoupled weight decay.

    Returns new arrays and a new state; inputs are left untouched.
    Tensors with ``trainable[i] == False`` are passed through unchanged.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ParameterError("params, grads and optimizer state must have equal length")
    b1, b2 = betas
    t = state.step + 1
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    new_p, new_m, new_v = [], [], []
    for i, (p, g, m, v) in enumerate(zip(params, grads, state.m, state.v)):
        if p.shape != g.shape:
            raise ParameterError(f"gradient {i} has shape {g.shape}, parameter has {p.shape}")
        if trainable is not None and not trainable[i]:
            new_p.append(p)
            new_m.append(m)
            new_v.append(v)
            continue
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        update = (m / bc1) / (np.sqrt(v / bc2) + eps)
        decayed = p
        if weight_decay and (decay_mask is None or decay_mask[i]):
            decayed = p - lr * weight_decay * p
        new_p.append(decayed - lr * update)
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(t, new_m, new_v)


# -- training -----------------------------------------------------------------

def accuracy(probs: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return 0.0
    return float(np.mean(probs[idx].argmax(axis=1) == labels[idx]))


def model_cascade(graph: Graph, config: TrainConfig) -> SobolevCascade:
    """Propagation operators for ``config.model``, built once per graph."""
    if config.model == "gcn":
        return gcn_cascade(graph.adjacency)
    return build_cascade(graph.adjacency, config.eps, config.alpha)


def build_model(graph: Graph, config: TrainConfig, n_features: int, n_classes: int,
                rng: np.random.Generator, cascade: SobolevCascade | None = None,
                ) -> tuple[SobolevCascade, ModelParams]:
    cascade = cascade or model_cascade(graph, config)
    if config.model == "gcn":
        params = gcn_params(n_features, config.hidden_units, n_classes, config.n_layers, rng,
                            bias=config.bias)
    else:
        params = init_params(n_features, config.hidden_units, n_classes, config.n_layers,
                             config.alpha, rng, combination=config.combination, bias=config.bias)
    return cascade, params


def _layer_norms(params: ModelParams) -> list[float]:
    return [float(np.sqrt(sum(np.sum(t * t) for t in layer.tensors()))) for layer in params.layers]


def train(dataset: Dataset, graph: Graph, config: TrainConfig,
          cascade: SobolevCascade | None = None) -> tuple[ModelParams, History]:
    """Full-batch Adam on the training mask with early stopping on validation accuracy.

    Returns the parameters from the epoch with the best validation
    accuracy (earliest on ties). The test mask is never read.
    """
    if dataset.n_nodes != graph.n_nodes:
        raise ParameterError(f"dataset has {dataset.n_nodes} nodes, graph has {graph.n_nodes}")
    with dataset.sealed():
        rng = np.random.default_rng(config.seed)
        cascade, params = build_model(graph, config, dataset.features.shape[1], dataset.n_classes,
                                      rng, cascade)
        x, y = dataset.features, dataset.labels
        train_mask, val_mask = dataset.train_mask, dataset.val_mask
        state = AdamState.zeros(params.tensors())
        trainable, decay = params.trainable_mask(), params.decay_mask()
        history = History()
        best = params
        for epoch in range(config.max_epochs):
            trace = model_forward(x, cascade, params, dropout=config.dropout, rng=rng)
            loss = cross_entropy_loss(trace.probs, y, train_mask)
            if not math.isfinite(loss):
                raise NumericalError(
                    f"non-finite training loss at epoch {epoch}; layer norms {_layer_norms(params)}"
                )
            probs = trace.probs if config.dropout == 0.0 else model_forward(x, cascade, params).probs
            val_acc = accuracy(probs, y, val_mask)
            history.epochs.append(epoch)
            history.train_loss.append(loss)
            history.train_accuracy.append(accuracy(probs, y, train_mask))
            history.val_accuracy.append(val_acc)
            if val_acc > history.best_val_accuracy:
                history.best_val_accuracy = val_acc
                history.best_epoch = epoch
                best = params
            elif epoch - history.best_epoch >= config.patience:
                break
            grads = model_backward(trace, y, train_mask, params)
            tensors, state = adam_step(params.tensors(), grads.tensors(), state, config.learning_rate,
                                       config.weight_decay, decay_mask=decay, trainable=trainable)
            params = params.with_tensors(tensors)
    return best, history


# -- hyperparameter search ------------------------------------------------------

@dataclass(frozen=True)
class Choice:
    options: tuple

    def __init__(self, options):
        object.__setattr__(self, "options", tuple(options))
        if not self.options:
            raise ParameterError("Choice needs at least one option")

    def sample(self, rng: np.random.Generator):
        value = self.options[int(rng.integers(len(self.options)))]
        return value.item() if isinstance(value, np.generic) else value


@dataclass(frozen=True)
class LogUniform:
    low: float
    high: float

    def __post_init__(self):
        if not 0 < self.low <= self.high:
            raise ParameterError(f"LogUniform needs 0 < low <= high, got ({self.low}, {self.high})")

    def sample(self, rng: np.random.Generator) -> float:
        if self.low == self.high:
            return float(self.low)
        return float(math.exp(rng.uniform(math.log(self.low), math.log(self.high))))


DEFAULT_SPACE: dict[str, Any] = {
    "learning_rate": LogUniform(1e-4, 1e-1),
    "weight_decay": LogUniform(1e-6, 1e-2),
    "hidden_units": Choice([16, 32, 64, 128]),
    "alpha": Choice([1, 2, 3, 4, 5, 6]),
    "eps": Choice([0.5, 1.0, 2.0, 4.0]),
    "n_layers": Choice([2, 3, 4]),
}


def sample_config(space, base: TrainConfig, rng: np.random.Generator) -> TrainConfig:
    """Draw one configuration.

    ``space`` is either a mapping from config field to a distribution
    (:class:`Choice`, :class:`LogUniform` or a fixed value), or a list of
    explicit override dicts drawn uniformly.
    """
    if isinstance(space, (list, tuple)):
        if not space:
            raise ParameterError("search space is empty")
        overrides = dict(space[int(rng.integers(len(space)))])
    else:
        if not space:
            raise ParameterError("search space is empty")
        overrides = {}
        for name in sorted(space):
            dist = space[name]
            overrides[name] = dist.sample(rng) if hasattr(dist, "sample") else dist
    unknown = set(overrides) - {f.name for f in dataclasses.fields(TrainConfig)}
    if unknown:
        raise ParameterError(f"search space names unknown config fields: {sorted(unknown)}")
    return dataclasses.replace(base, **overrides)


@dataclass
class SearchResult:
    best_config: TrainConfig
    trials: list[dict]


def _score_trial(args) -> dict:
    index, config, dataset, graph, val_seeds = args
    start = time.perf_counter()
    record: dict[str, Any] = {"trial": index, "config": config.to_dict()}
    per_seed = []
    try:
        for s in val_seeds:
            split = dataset.resplit(s)
            _, history = train(split, graph, dataclasses.replace(config, seed=derive_seed(config.seed, s)))
            per_seed.append(history.best_val_accuracy)
        record["val_mean"] = float(np.mean(per_seed))
    except NumericalError as exc:
        record["val_mean"] = None
        record["error"] = str(exc)
    record["val_per_seed"] = per_seed
    record["wallclock"] = time.perf_counter() - start
    return record


def _map(fn: Callable, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def run_search(dataset: Dataset, graph: Graph, space=None, n_trials: int = 100,
               val_seeds: Sequence[int] | int = 5, base_config: TrainConfig | None = None,
               seed: int = 0, log_path=None, jobs: int = 1) -> SearchResult:
    """Random search scored by mean validation accuracy over ``val_seeds`` dev splits.

    Configurations are all drawn up front from one RNG so the trial list
    does not depend on ``jobs``. The first best trial wins ties.
    """
    if n_trials < 1:
        raise ParameterError("n_trials must be >= 1")
    space = DEFAULT_SPACE if space is None else space
    base_config = base_config or TrainConfig()
    if isinstance(val_seeds, int):
        val_seeds = list(range(val_seeds))
    if not val_seeds:
        raise ParameterError("need at least one validation seed")
    rng = np.random.default_rng([int(seed), 0x5EA])
    configs = [
        dataclasses.replace(sample_config(space, base_config, rng), seed=derive_seed(seed, i))
        for i in range(n_trials)
    ]
    with dataset.sealed():
        trials = _map(_score_trial, [(i, c, dataset, graph, list(val_seeds)) for i, c in enumerate(configs)], jobs)
    if log_path is not None:
        atomic_write_text(log_path, "".join(json.dumps(t, sort_keys=True) + "\n" for t in trials))
    scored = [(t["val_mean"], i) for i, t in enumerate(trials) if t["val_mean"] is not None]
    if not scored:
        raise SearchError("all trials diverged: " + "; ".join(t.get("error", "?") for t in trials))
    best_score = max(s for s, _ in scored)
    best_index = min(i for s, i in scored if s == best_score)
    log.info("search finished: best trial %d with val accuracy %.4f", best_index, best_score)
    return SearchResult(configs[best_index], trials)


def random_search(dataset: Dataset, graph: Graph, space=None, n_trials: int = 100,
                  val_seeds: Sequence[int] | int = 5, **kwargs) -> TrainConfig:
    """Best configuration found by :func:`run_search`."""
    return run_search(dataset, graph, space, n_trials, val_seeds, **kwargs).best_config


# -- evaluation ---------------------------------------------------------------------

def bootstrap_ci(samples, n_resamples: int = 1000, level: float = 0.95,
                 seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean of ``samples``."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise ParameterError("bootstrap needs at least one sample")
    if not 0.0 < level < 1.0:
        raise ParameterError(f"level must lie in (0, 1), got {level}")
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, samples.size, size=(n_resamples, samples.size))
    means = samples[draws].mean(axis=1)
    tail = (1.0 - level) / 2.0
    low, high = np.percentile(means, [100.0 * tail, 100.0 * (1.0 - tail)])
    return float(low), float(high)


def _evaluate_seed(args) -> float:
    dataset, graph, config, cascade, seed = args
    split = dataset.resplit(seed)
    params, _ = train(split, graph, dataclasses.replace(config, seed=seed), cascade)
    probs = model_forward(split.features, cascade, params).probs
    return accuracy(probs, split.labels, split.test_mask)


def evaluate(dataset: Dataset, graph: Graph, config: TrainConfig, n_seeds: int = 50,
             n_resamples: int = 1000, level: float = 0.95, jobs: int = 1) -> Metrics:
    """Test accuracy over ``n_seeds`` trainings with a bootstrap confidence interval.

    Each seed redraws the train/validation split from the development
    nodes and reinitializes the model; the test mask stays fixed.
    """
    if n_seeds < 1:
        raise ParameterError("n_seeds must be >= 1")
    seeds = [derive_seed(config.seed, i) for i in range(n_seeds)]
    cascade = model_cascade(graph, config)
    accs = np.array(_map(_evaluate_seed, [(dataset, graph, config, cascade, s) for s in seeds], jobs))
    low, high = bootstrap_ci(accs, n_resamples, level, seed=config.seed)
    return Metrics(accs, float(np.mean(accs)), low, high)
