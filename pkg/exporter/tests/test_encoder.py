"""Toy encoder: checkpoint round trips and attention structure."""

import pytest
import torch

from spanwalk_exporter.config import ExporterError
from spanwalk_exporter.encoder import (
    MASK_ID,
    ensure_checkpoint,
    present_pattern,
    token_id,
)

from conftest import tiny_config


def test_token_ids_stable_and_never_mask():
    assert token_id("fox", 997) == token_id("fox", 997)
    for word in "the quick brown fox </s>".split():
        tid = token_id(word, 97)
        assert 1 <= tid < 97
        assert tid != MASK_ID


def test_present_pattern_window_and_markers():
    pattern = present_pattern(8, window=1, global_positions=(0, 4))
    assert pattern[2, 3] and pattern[3, 2]      # in window
    assert not pattern[2, 6]                     # out of window, not global
    assert pattern[0, :].all() and pattern[:, 0].all()
    assert pattern[4, :].all() and pattern[:, 4].all()
    assert pattern.diagonal().all()


class TestCheckpoint:
    def test_created_then_reloaded(self, tmp_path):
        cfg = tiny_config(tmp_path)
        first = ensure_checkpoint(cfg)
        assert (tmp_path / "ckpt.pt").exists()
        second = ensure_checkpoint(cfg)
        for a, b in zip(first.parameters(), second.parameters()):
            assert torch.equal(a, b)

    def test_corrupt_checkpoint_raises(self, tmp_path):
        cfg = tiny_config(tmp_path)
        (tmp_path / "ckpt.pt").write_bytes(b"not a checkpoint")
        with pytest.raises(ExporterError, match="cannot load"):
            ensure_checkpoint(cfg)

    def test_rows_are_stochastic_over_present(self, tmp_path):
        cfg = tiny_config(tmp_path)
        model = ensure_checkpoint(cfg)
        n = 9
        present = present_pattern(n, cfg.window, (0, 5)).unsqueeze(0)
        ids = torch.arange(1, n + 1).unsqueeze(0)
        with torch.no_grad():
            att = model(ids, present)
        assert att.shape == (1, cfg.n_layers, cfg.n_heads, n, n)
        sums = att.sum(dim=-1)
        assert torch.allclose(sums, torch.ones_like(sums), atol=1e-5)
        # no probability mass outside the representable pattern
        assert float(att[0, :, :, 2, 8].abs().max()) < 1e-6
