import json
import math

import numpy as np
import pytest
import torch

from tsgtrainer.model import TimeShiftLstm, export_model, model_to_interchange


def trained_like_model(hidden=8, window=3, seed=2):
    """Model with nontrivial batch-norm running statistics."""
    torch.manual_seed(seed)
    model = TimeShiftLstm(hidden, 0.2)
    model.train()
    scale = torch.tensor([5000.0] * 3 + [8.0] * 3 + [5000.0] * 3 + [8.0] * 3)
    for _ in range(4):
        model(torch.randn(64, window, 12) * scale)
    model.eval()
    return model


def random_window_block(rng, window):
    scale = np.array([5000.0] * 3 + [8.0] * 3 + [5000.0] * 3 + [8.0] * 3)
    return rng.normal(0.0, 1.0, (window, 12)) * scale


class TestExport:
    def test_document_shape(self, tmp_path):
        model = trained_like_model()
        doc = export_model(model, -10.0, 3, 0.0, math.inf, tmp_path / "m.json")
        assert doc["format_version"] == 1
        assert doc["lstm"]["gate_order"] == "ifgo"
        assert len(doc["lstm"]["w_ih"]) == 4 * 8
        assert len(doc["lstm"]["w_ih"][0]) == 12
        assert len(doc["fc"]["w"]) == 8
        assert doc["phase_hi_km"] is None
        on_disk = json.loads((tmp_path / "m.json").read_text())
        assert on_disk == doc

    def test_round_trip_idempotent(self, tmp_path):
        model = trained_like_model()
        doc1 = export_model(model, -10.0, 3, 1.0, math.inf, tmp_path / "a.json")
        doc2 = export_model(model, -10.0, 3, 1.0, math.inf, tmp_path / "b.json")
        assert doc1 == doc2

    def test_dropout_not_applied_at_eval(self):
        model = trained_like_model()
        x = torch.randn(4, 3, 12)
        with torch.no_grad():
            a = model(x)
            b = model(x)
        assert torch.equal(a, b)

    def test_runtime_reload_parity(self, tmp_path):
        # the cross-component oracle: primary-runtime inference on the
        # exported file must match torch-side inference
        from tsgsim.lstm import SlidingWindow, load_model, lstm_forward

        model = trained_like_model(hidden=16, window=3, seed=7)
        path = tmp_path / "parity.json"
        export_model(model, -10.0, 3, 0.0, math.inf, path)
        runtime_model = load_model(path)
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(100):
            block = random_window_block(rng, 3)
            with torch.no_grad():
                torch_out = float(model(torch.as_tensor(block[None], dtype=torch.float32))[0])
            window = SlidingWindow(3)
            for i in range(3):
                window.push(float(i), block[i, :6], block[i, 6:])
            worst = max(worst, abs(torch_out - lstm_forward(runtime_model, window)))
        assert worst <= 1e-6

    def test_metadata_validates_in_runtime(self, tmp_path):
        from tsgsim.lstm import load_model

        model = trained_like_model(hidden=4, window=2)
        path = tmp_path / "meta.json"
        export_model(model, -6.5, 2, 1.0, math.inf, path)
        back = load_model(path)
        assert back.hidden_size == 4
        assert back.window_size == 2
        assert back.phase_lo == 1.0 and back.phase_hi == math.inf
        assert back.t_min == -6.5
