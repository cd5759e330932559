"""Network definition and export to the runtime interchange format."""

from __future__ import annotations

import json
import math
from pathlib import Path

import torch
from torch import nn

FORMAT_VERSION = 1


class TimeShiftLstm(nn.Module):
    """Batch norm over features, one LSTM layer, dropout, linear head, sigmoid."""

    def __init__(self, hidden_size: int, dropout: float = 0.0):
        super().__init__()
        self.hidden_size = hidden_size
        self.bn = nn.BatchNorm1d(12)
        self.lstm = nn.LSTM(input_size=12, hidden_size=hidden_size, batch_first=True)
        self.dropout = nn.Dropout(dropout)
        self.fc = nn.Linear(hidden_size, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # x: (batch, window, 12); batch norm runs over the feature channel
        normed = self.bn(x.permute(0, 2, 1)).permute(0, 2, 1)
        out, _ = self.lstm(normed)
        last = self.dropout(out[:, -1, :])
        return torch.sigmoid(self.fc(last)).squeeze(-1)


def model_to_interchange(
    model: TimeShiftLstm,
    t_min: float,
    window_size: int,
    phase_lo: float,
    phase_hi: float,
) -> dict:
    """Interchange document with torch's native input/forget/cell/output gate rows."""
    model.eval()
    bn = model.bn
    doc = {
        "format_version": FORMAT_VERSION,
        "hidden_size": model.hidden_size,
        "window_size": int(window_size),
        "phase_lo_km": float(phase_lo),
        "phase_hi_km": None if math.isinf(phase_hi) else float(phase_hi),
        "t_min_s": float(t_min),
        "bn": {
            "mean": bn.running_mean.detach().tolist(),
            "var": bn.running_var.detach().tolist(),
            "gamma": bn.weight.detach().tolist(),
            "beta": bn.bias.detach().tolist(),
            "eps": bn.eps,
        },
        "lstm": {
            "w_ih": model.lstm.weight_ih_l0.detach().tolist(),
            "w_hh": model.lstm.weight_hh_l0.detach().tolist(),
            "b_ih": model.lstm.bias_ih_l0.detach().tolist(),
            "b_hh": model.lstm.bias_hh_l0.detach().tolist(),
            "gate_order": "ifgo",
        },
        "fc": {
            "w": model.fc.weight.detach().reshape(-1).tolist(),
            "b": float(model.fc.bias.detach()),
        },
    }
    return doc


def export_model(
    model: TimeShiftLstm,
    t_min: float,
    window_size: int,
    phase_lo: float,
    phase_hi: float,
    path,
) -> dict:
    """Write the interchange JSON; returns the document."""
    doc = model_to_interchange(model, t_min, window_size, phase_lo, phase_hi)
    path = Path(path)
    try:
        path.write_text(json.dumps(doc, indent=1))
    except OSError as exc:
        raise OSError(f"cannot write model to {path}: {exc}") from exc
    return doc
