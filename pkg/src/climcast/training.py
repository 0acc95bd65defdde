"""Training loop with early stopping, random-search tuning and prediction."""

from __future__ import annotations

import csv
import io
import itertools
import logging
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import ConfigurationError, DivergenceError, RangeError, ShapeError
from .features import SequenceDataset, SplitDataset
from .neural import AdamState, Dims, ModelParams, adam_step, init_params, loss_and_grads, model_forward
from .stats import NormalizationParams, zscore_invert

log = logging.getLogger(__name__)

SEARCH_SPACE: dict[str, tuple] = {
    "lstm_units": (32, 64, 128),
    "attention_units": (32, 64, 128),
    "learning_rate": (0.0001, 0.0005, 0.001, 0.005),
    "batch_size": (16, 32, 64),
    "dropout_rate": (0.1, 0.2, 0.3, 0.4),
}


@dataclass(frozen=True)
class HyperParams:
    lstm_units: int = 64
    attention_units: int = 64
    learning_rate: float = 0.0005
    batch_size: int = 16
    dropout_rate: float = 0.1

    def __post_init__(self):
        if self.lstm_units < 1 or self.attention_units < 1 or self.batch_size < 1:
            raise RangeError("units and batch size must be positive")
        if not self.learning_rate > 0:
            raise RangeError("learning_rate must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise RangeError("dropout_rate must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


# best configuration reported for both targets
REFERENCE_HYPERPARAMS = HyperParams(64, 64, 0.0005, 16, 0.1)


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 100
    early_stopping_patience: int = 10
    seed: int = 0
    loss: str = "mse"

    def __post_init__(self):
        if self.max_epochs < 1:
            raise RangeError("max_epochs must be >= 1")
        if not 0 < self.early_stopping_patience < self.max_epochs:
            raise RangeError("early_stopping_patience must satisfy 0 < patience < max_epochs")
        if self.loss != "mse":
            raise ConfigurationError(f"unsupported loss {self.loss!r}")


@dataclass
class History:
    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.val_mse)

    @property
    def best_val_mse(self) -> float:
        return self.val_mse[self.best_epoch - 1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_mse", "val_mse"])
        for e, (tr, va) in enumerate(zip(self.train_mse, self.val_mse), start=1):
            w.writerow([e, repr(tr), repr(va)])
        return buf.getvalue()


class EarlyStopping:
    """Tracks the best validation loss and keeps a snapshot of the matching parameters."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = 0
        self.best_state = None
        self.wait = 0

    def update(self, epoch: int, val_loss: float, state=None) -> bool:
        """Record one epoch; returns True when training should stop."""
        if val_loss < self.best:
            self.best, self.best_epoch, self.wait = val_loss, epoch, 0
            self.best_state = state() if callable(state) else state
        else:
            self.wait += 1
        return self.wait >= self.patience


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def predict(params: ModelParams, data, chunk: int = 512) -> np.ndarray:
    """Eval-mode predictions in normalized units for a ``SequenceDataset`` or (N, T, F) array."""
    X = data.X if isinstance(data, SequenceDataset) else np.asarray(data, dtype=float)
    if X.ndim == 2:
        X = X[:, None, :]
    if X.shape[2] != params.dims.F:
        raise ShapeError(f"inputs have {X.shape[2]} features, model expects {params.dims.F}")
    out = [model_forward(X[i:i + chunk], params, "eval")[0] for i in range(0, len(X), chunk)]
    return np.concatenate(out) if out else np.empty(0)


def denormalize(predictions, params: NormalizationParams) -> np.ndarray:
    return zscore_invert(predictions, params)


def _sequences(data, T: int | None):
    if isinstance(data, SplitDataset):
        T = T or (data.train.spec.sequence_length if data.train.spec else 1)
        tr, va, _ = data.sequences(T)
        return tr, va
    tr, va = data
    return tr, va


def train(variant: str, data, hyperparams: HyperParams, config: TrainConfig = TrainConfig(),
          sequence_length: int | None = None) -> tuple[ModelParams, History]:
    """Mini-batch Adam on the training windows, early-stopped on validation MSE.

    ``data`` is a normalized ``SplitDataset`` or a ``(train, validation)`` pair
    of ``SequenceDataset``. Batches follow chronological order. The returned
    parameters are those of the best validation epoch.
    """
    tr, va = _sequences(data, sequence_length)
    if len(tr) == 0 or len(va) == 0:
        raise RangeError("training and validation sets must be non-empty")
    _, T, F = tr.X.shape
    dims = Dims(F=F, d_h=hyperparams.lstm_units,
                d_a=hyperparams.attention_units if variant == "attention_lstm" else 0, T=T)
    init_seed, dropout_seed = derive_seed(config.seed, 0), derive_seed(config.seed, 1)
    params = init_params(variant, dims, init_seed, hyperparams.dropout_rate)
    rng = np.random.default_rng(dropout_seed)
    state = AdamState.for_params(params.tensors)
    stopper = EarlyStopping(config.early_stopping_patience)
    history = History()
    n, bs = len(tr), hyperparams.batch_size
    for epoch in range(1, config.max_epochs + 1):
        total = 0.0
        for start in range(0, n, bs):
            Xb, yb = tr.X[start:start + bs], tr.y[start:start + bs]
            loss, grads = loss_and_grads(Xb, yb, params, "train", rng)
            if not np.isfinite(loss):
                raise DivergenceError(epoch)
            adam_step(params.tensors, grads, state, hyperparams.learning_rate)
            total += loss * len(yb)
        val_pred = predict(params, va)
        val = float(np.mean((val_pred - va.y) ** 2))
        if not np.isfinite(val):
            raise DivergenceError(epoch)
        history.train_mse.append(total / n)
        history.val_mse.append(val)
        if stopper.update(epoch, val, params.copy):
            history.stopped_early = True
            break
    history.best_epoch = stopper.best_epoch
    best = stopper.best_state
    best.meta = {"variant": variant, "hyperparams": hyperparams.to_dict(),
                 "best_epoch": stopper.best_epoch, "epochs_run": history.epochs_run}
    return best, history


@dataclass
class TrialResult:
    trial: int
    hyperparams: HyperParams
    validation_mse: float
    epochs_run: int
    wall_time: float


def sample_configurations(space: dict[str, tuple], n_trials: int, seed: int) -> list[HyperParams]:
    """Uniform draws with replacement from the Cartesian product of ``space``."""
    if n_trials < 1:
        raise RangeError("n_trials must be >= 1")
    if not space or any(len(v) == 0 for v in space.values()):
        raise RangeError("search space must be non-empty in every dimension")
    names = [f.name for f in fields(HyperParams)]
    unknown = set(space) - set(names)
    if unknown:
        raise ConfigurationError(f"unknown hyperparameters in search space: {sorted(unknown)}")
    rng = np.random.default_rng(seed)
    default = HyperParams()
    out = []
    for _ in range(n_trials):
        vals = {}
        for name in names:
            options = space.get(name, (getattr(default, name),))
            vals[name] = options[int(rng.integers(len(options)))]
        out.append(HyperParams(**vals))
    return out


def random_search(variant: str, data, space: dict[str, tuple] = SEARCH_SPACE, n_trials: int = 30,
                  config: TrainConfig = TrainConfig(max_epochs=50), seed: int = 0,
                  sequence_length: int | None = None) -> tuple[HyperParams, list[TrialResult]]:
    tr, va = _sequences(data, sequence_length)
    configs = sample_configurations(space, n_trials, seed)
    results = []
    for i, hp in enumerate(configs):
        cfg = TrainConfig(config.max_epochs, config.early_stopping_patience, derive_seed(seed, i), config.loss)
        t0 = time.perf_counter()
        try:
            _, hist = train(variant, (tr, va), hp, cfg)
            val, epochs = hist.best_val_mse, hist.epochs_run
        except DivergenceError as exc:
            log.warning("trial %d diverged at epoch %d", i, exc.epoch)
            val, epochs = float("inf"), exc.epoch
        results.append(TrialResult(i, hp, val, epochs, time.perf_counter() - t0))
        log.info("trial %d %s val_mse=%.5f", i, hp, val)
    best = min(results, key=lambda r: (r.validation_mse, r.trial))
    return best.hyperparams, results


def trials_to_csv(results: list[TrialResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = [f.name for f in fields(HyperParams)]
    w.writerow(["trial", *names, "val_mse", "epochs", "seconds"])
    for r in results:
        w.writerow([r.trial, *(getattr(r.hyperparams, k) for k in names),
                    repr(r.validation_mse), r.epochs_run, f"{r.wall_time:.3f}"])
    return buf.getvalue()


def distinct_configurations(configs) -> int:
    return len({tuple(asdict(c).values()) for c in configs})


def space_size(space: dict[str, tuple]) -> int:
    return len(list(itertools.product(*space.values())))
