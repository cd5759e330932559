"""Inference runtime for the learned time-shift predictor.

Loads trained model artifacts from the JSON interchange format and maps a
phase-adaptive sliding window of chief/deputy states to a time shift:
batch normalization, a single LSTM pass, a fully connected head, a sigmoid,
and min-max denormalization back to seconds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
GATE_ORDER = "ifgo"


class ModelFormatError(ValueError):
    """Model artifact is malformed; ``field_path`` names the offending field."""

    def __init__(self, message: str, field_path: str = ""):
        super().__init__(f"{field_path}: {message}" if field_path else message)
        self.field_path = field_path


class WindowOrderError(ValueError):
    """Pushed record does not advance time."""


class SlidingWindow:
    """Time-ordered ring of [chief_state, deputy_state] records.

    Owned by a single simulation loop; not safe to share across threads.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self._times: list[float] = []
        self._records: list[np.ndarray] = []

    def __len__(self) -> int:
        return len(self._records)

    @property
    def current_len(self) -> int:
        return len(self._records)

    @property
    def times(self) -> list[float]:
        return list(self._times)

    def push(self, t: float, chief, deputy) -> None:
        """Append a record, evicting the oldest once past capacity."""
        if self._times and t <= self._times[-1]:
            raise WindowOrderError(
                f"record time {t} does not advance past {self._times[-1]}"
            )
        chief_vec = np.asarray(getattr(chief, "vec", chief), dtype=float).reshape(6)
        deputy_vec = np.asarray(getattr(deputy, "vec", deputy), dtype=float).reshape(6)
        self._times.append(float(t))
        self._records.append(np.concatenate([chief_vec, deputy_vec]))
        if len(self._records) > self.capacity:
            self._times.pop(0)
            self._records.pop(0)

    def last(self, n: int) -> np.ndarray:
        """The most recent ``n`` records as an (n, 12) array, oldest first."""
        if n > len(self._records):
            raise ValueError(f"window holds {len(self._records)} records, need {n}")
        return np.stack(self._records[-n:])


def push_state(window: SlidingWindow, t: float, chief, deputy) -> SlidingWindow:
    window.push(t, chief, deputy)
    return window


def _vec(x, n: int, path: str) -> np.ndarray:
    try:
        arr = np.asarray(x, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"not numeric: {exc}", path) from exc
    if arr.shape != (n,):
        raise ModelFormatError(f"expected shape ({n},), got {arr.shape}", path)
    if not np.all(np.isfinite(arr)):
        raise ModelFormatError("contains non-finite values", path)
    return arr


def _mat(x, shape: tuple[int, int], path: str) -> np.ndarray:
    try:
        arr = np.asarray(x, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"not numeric: {exc}", path) from exc
    if arr.shape != shape:
        raise ModelFormatError(f"expected shape {shape}, got {arr.shape}", path)
    if not np.all(np.isfinite(arr)):
        raise ModelFormatError("contains non-finite values", path)
    return arr


@dataclass(frozen=True)
class LstmModel:
    """Weights and metadata for one phase-specific predictor.

    Gate rows of ``w_ih``/``w_hh`` are stacked input, forget, cell-candidate,
    output. ``phase_hi`` of ``inf`` means the interval is unbounded above.
    ``t_min`` is the most negative shift seen in training; predictions
    denormalize onto [t_min, 0].
    """

    hidden_size: int
    window_size: int
    phase_lo: float
    phase_hi: float
    t_min: float
    bn_mean: np.ndarray
    bn_var: np.ndarray
    bn_gamma: np.ndarray
    bn_beta: np.ndarray
    bn_eps: float
    w_ih: np.ndarray
    w_hh: np.ndarray
    b_ih: np.ndarray
    b_hh: np.ndarray
    fc_w: np.ndarray
    fc_b: float
    name: str = ""

    def __post_init__(self):
        h = self.hidden_size
        if h < 1:
            raise ModelFormatError("must be >= 1", "hidden_size")
        if self.window_size < 1:
            raise ModelFormatError("must be >= 1", "window_size")
        if not self.t_min < 0:
            raise ModelFormatError("must be negative", "t_min_s")
        if not 0.0 <= self.phase_lo < self.phase_hi:
            raise ModelFormatError(
                f"bad interval [{self.phase_lo}, {self.phase_hi})", "phase_lo_km"
            )
        if self.bn_eps <= 0:
            raise ModelFormatError("must be positive", "bn.eps")
        if np.any(self.bn_var <= 0):
            raise ModelFormatError("entries must be positive", "bn.var")

    def phase_contains(self, rel_distance: float) -> bool:
        return self.phase_lo <= rel_distance < self.phase_hi


@dataclass(frozen=True)
class ModelRegistry:
    """Phase-indexed set of predictors; selection prefers the largest window."""

    models: tuple[LstmModel, ...]
    phase_threshold: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))

    @property
    def max_window(self) -> int:
        return max((m.window_size for m in self.models), default=1)


def select_model(
    registry: ModelRegistry, rel_distance: float, history_len: int
) -> LstmModel | None:
    """Model for the current phase whose window fits the available history.

    Among admissible models the largest window wins; None when no model's
    phase covers the distance or none fits the history yet.
    """
    if rel_distance < 0:
        raise ValueError(f"rel_distance must be >= 0, got {rel_distance}")
    candidates = [
        m
        for m in registry.models
        if m.phase_contains(rel_distance) and m.window_size <= history_len
    ]
    if not candidates:
        return None
    return max(candidates, key=lambda m: m.window_size)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_forward(model: LstmModel, window: SlidingWindow) -> float:
    """Normalized prediction in (0, 1) from the most recent window records."""
    if window.current_len < model.window_size:
        raise ValueError(
            f"window has {window.current_len} records, model needs {model.window_size}"
        )
    x = window.last(model.window_size)
    x = model.bn_gamma * (x - model.bn_mean) / np.sqrt(model.bn_var + model.bn_eps) + model.bn_beta
    h = np.zeros(model.hidden_size)
    c = np.zeros(model.hidden_size)
    hs = model.hidden_size
    for step in range(model.window_size):
        z = model.w_ih @ x[step] + model.b_ih + model.w_hh @ h + model.b_hh
        i_gate = _sigmoid(z[0:hs])
        f_gate = _sigmoid(z[hs : 2 * hs])
        g_gate = np.tanh(z[2 * hs : 3 * hs])
        o_gate = _sigmoid(z[3 * hs : 4 * hs])
        c = f_gate * c + i_gate * g_gate
        h = o_gate * np.tanh(c)
    out = float(model.fc_w @ h) + model.fc_b
    return float(_sigmoid(np.array([out]))[0])


def denormalize(model: LstmModel, y: float) -> float:
    """Map a normalized prediction back to seconds: 0 -> t_min, 1 -> 0."""
    if not 0.0 <= y <= 1.0:
        raise ValueError(f"normalized value must be in [0, 1], got {y}")
    return model.t_min * (1.0 - y)


def normalize_shift(model: LstmModel, t_back: float) -> float:
    """Inverse of :func:`denormalize` on [t_min, 0]."""
    return 1.0 - t_back / model.t_min


def predict_shift(
    registry: ModelRegistry, window: SlidingWindow, rel_distance: float
) -> float | None:
    """Full prediction pipeline; None when no model is admissible."""
    model = select_model(registry, rel_distance, window.current_len)
    if model is None:
        return None
    return denormalize(model, lstm_forward(model, window))


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise ModelFormatError("missing field", f"{path}.{key}" if path else key)
    return doc[key]


def model_from_dict(doc: dict, name: str = "") -> LstmModel:
    """Validate and build a model from parsed interchange JSON."""
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    version = _require(doc, "format_version", "")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported version {version!r}", "format_version")
    h = _require(doc, "hidden_size", "")
    w = _require(doc, "window_size", "")
    if not isinstance(h, int) or isinstance(h, bool):
        raise ModelFormatError("must be an integer", "hidden_size")
    if not isinstance(w, int) or isinstance(w, bool):
        raise ModelFormatError("must be an integer", "window_size")
    phase_lo = float(_require(doc, "phase_lo_km", ""))
    phase_hi_raw = _require(doc, "phase_hi_km", "")
    phase_hi = math.inf if phase_hi_raw is None else float(phase_hi_raw)
    t_min = float(_require(doc, "t_min_s", ""))
    bn = _require(doc, "bn", "")
    lstm = _require(doc, "lstm", "")
    fc = _require(doc, "fc", "")
    gate_order = _require(lstm, "gate_order", "lstm")
    if gate_order != GATE_ORDER:
        raise ModelFormatError(f"expected {GATE_ORDER!r}, got {gate_order!r}", "lstm.gate_order")
    return LstmModel(
        hidden_size=h,
        window_size=w,
        phase_lo=phase_lo,
        phase_hi=phase_hi,
        t_min=t_min,
        bn_mean=_vec(_require(bn, "mean", "bn"), 12, "bn.mean"),
        bn_var=_vec(_require(bn, "var", "bn"), 12, "bn.var"),
        bn_gamma=_vec(_require(bn, "gamma", "bn"), 12, "bn.gamma"),
        bn_beta=_vec(_require(bn, "beta", "bn"), 12, "bn.beta"),
        bn_eps=float(_require(bn, "eps", "bn")),
        w_ih=_mat(_require(lstm, "w_ih", "lstm"), (4 * h, 12), "lstm.w_ih"),
        w_hh=_mat(_require(lstm, "w_hh", "lstm"), (4 * h, h), "lstm.w_hh"),
        b_ih=_vec(_require(lstm, "b_ih", "lstm"), 4 * h, "lstm.b_ih"),
        b_hh=_vec(_require(lstm, "b_hh", "lstm"), 4 * h, "lstm.b_hh"),
        fc_w=_vec(_require(fc, "w", "fc"), h, "fc.w"),
        fc_b=float(_require(fc, "b", "fc")),
        name=name,
    )


def model_to_dict(model: LstmModel) -> dict:
    """Interchange-format document for ``model`` (inverse of model_from_dict)."""
    return {
        "format_version": FORMAT_VERSION,
        "hidden_size": model.hidden_size,
        "window_size": model.window_size,
        "phase_lo_km": model.phase_lo,
        "phase_hi_km": None if math.isinf(model.phase_hi) else model.phase_hi,
        "t_min_s": model.t_min,
        "bn": {
            "mean": model.bn_mean.tolist(),
            "var": model.bn_var.tolist(),
            "gamma": model.bn_gamma.tolist(),
            "beta": model.bn_beta.tolist(),
            "eps": model.bn_eps,
        },
        "lstm": {
            "w_ih": model.w_ih.tolist(),
            "w_hh": model.w_hh.tolist(),
            "b_ih": model.b_ih.tolist(),
            "b_hh": model.b_hh.tolist(),
            "gate_order": GATE_ORDER,
        },
        "fc": {"w": model.fc_w.tolist(), "b": model.fc_b},
    }


def load_model(path) -> LstmModel:
    """Parse one interchange file; raises ModelFormatError with a field path."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"cannot parse {path}: {exc}") from exc
    return model_from_dict(doc, name=path.stem)


def save_model(model: LstmModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1))


def load_registry(directory, phase_threshold: float = 1.0) -> ModelRegistry:
    """Registry from every ``*.json`` model file in a directory.

    Sidecar JSON files without a ``format_version`` field (training reports,
    manifests) are ignored; files that claim a format version are validated
    strictly.
    """
    directory = Path(directory)
    models = []
    for path in sorted(directory.glob("*.json")):
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ModelFormatError(f"cannot parse {path}: {exc}") from exc
        if not isinstance(doc, dict) or "format_version" not in doc:
            continue
        models.append(model_from_dict(doc, name=path.stem))
    if not models:
        raise ModelFormatError(f"no model files found in {directory}")
    return ModelRegistry(models=tuple(models), phase_threshold=phase_threshold)
