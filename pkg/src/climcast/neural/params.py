"""Parameter containers, initialization and JSON (de)serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, RangeError, ShapeError

VARIANTS = ("attention_lstm", "simple_lstm", "gru")
FORMAT_VERSION = 1

LSTM_GATES = ("f", "i", "C", "o")
GRU_GATES = ("z", "r", "n")
HEAD_WIDTHS = (32, 16)


@dataclass(frozen=True)
class Dims:
    F: int          # input features per time step
    d_h: int        # recurrent units
    d_a: int = 0    # attention units (attention_lstm only)
    T: int = 1      # sequence length

    def to_dict(self) -> dict:
        return {"F": self.F, "d_h": self.d_h, "d_a": self.d_a, "T": self.T}


def tensor_shapes(variant: str, dims: Dims) -> dict[str, tuple[int, ...]]:
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    d_h, F = dims.d_h, dims.F
    shapes: dict[str, tuple[int, ...]] = {}
    gates = GRU_GATES if variant == "gru" else LSTM_GATES
    for g in gates:
        shapes[f"W_{g}"] = (d_h, d_h + F)
    for g in gates:
        shapes[f"b_{g}"] = (d_h,)
    if variant == "attention_lstm":
        shapes["W_h"] = (d_h, dims.d_a)
        shapes["b_h"] = (dims.d_a,)
        shapes["u"] = (dims.d_a,)
    h1, h2 = HEAD_WIDTHS
    shapes.update({"W_1": (h1, d_h), "b_1": (h1,), "W_2": (h2, h1), "b_2": (h2,),
                   "W_3": (1, h2), "b_3": (1,)})
    return shapes


def is_bias(name: str) -> bool:
    return name.startswith("b_")


@dataclass
class ModelParams:
    variant: str
    dims: Dims
    tensors: dict[str, np.ndarray]
    head_dropout_rate: float = 0.1
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        expected = tensor_shapes(self.variant, self.dims)
        missing = set(expected) - set(self.tensors)
        extra = set(self.tensors) - set(expected)
        if missing or extra:
            raise ConfigurationError(
                f"{self.variant} parameters: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise ShapeError(f"{name} has shape {self.tensors[name].shape}, expected {shape}")
        if not 0.0 <= self.head_dropout_rate < 1.0:
            raise RangeError("head_dropout_rate must lie in [0, 1)")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    @property
    def has_attention(self) -> bool:
        return self.variant == "attention_lstm"

    def copy(self) -> "ModelParams":
        return ModelParams(self.variant, self.dims, {k: v.copy() for k, v in self.tensors.items()},
                           self.head_dropout_rate, dict(self.meta))

    def n_parameters(self) -> int:
        return sum(v.size for v in self.tensors.values())

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "variant": self.variant,
            "dims": self.dims.to_dict(),
            "head_dropout_rate": self.head_dropout_rate,
            "meta": self.meta,
            "tensors": {
                name: {"shape": list(arr.shape), "data": [float(v) for v in arr.ravel()]}
                for name, arr in self.tensors.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelParams":
        if doc.get("format_version") != FORMAT_VERSION:
            raise ConfigurationError(f"unsupported params format_version {doc.get('format_version')!r}")
        dims = Dims(**doc["dims"])
        tensors = {}
        for name, t in doc["tensors"].items():
            shape = tuple(t["shape"])
            data = np.asarray(t["data"], dtype=float)
            if data.size != int(np.prod(shape)):
                raise ShapeError(f"{name}: {data.size} values cannot fill shape {shape}")
            tensors[name] = data.reshape(shape)
        return cls(doc["variant"], dims, tensors, float(doc.get("head_dropout_rate", 0.0)),
                   dict(doc.get("meta", {})))

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))


def init_params(variant: str, dims: Dims, seed: int = 0, head_dropout_rate: float = 0.1) -> ModelParams:
    """Glorot-uniform weights and zero biases, drawn in a fixed tensor order."""
    if dims.F < 1 or dims.d_h < 1 or dims.T < 1:
        raise RangeError(f"dimensions must be positive, got {dims}")
    if variant == "attention_lstm" and dims.d_a < 1:
        raise RangeError("attention_lstm needs d_a >= 1")
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in tensor_shapes(variant, dims).items():
        if is_bias(name):
            tensors[name] = np.zeros(shape)
            continue
        if name == "u":
            fan_in, fan_out = shape[0], 1
        else:
            fan_out, fan_in = shape
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        tensors[name] = rng.uniform(-limit, limit, size=shape)
    return ModelParams(variant, dims, tensors, head_dropout_rate)
