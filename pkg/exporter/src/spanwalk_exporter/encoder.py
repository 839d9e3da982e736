"""A tiny banded-attention encoder used as the toy checkpoint backend.

The model is deliberately small: embeddings, a stack of single-block
attention layers with residual connections, and row softmax restricted
to the positions the dump format can store (the local window plus the
marker tokens).  What matters is not quality but that the captured
attention is a genuine row-stochastic product of a seeded checkpoint.
"""

from __future__ import annotations

import pickle
import zipfile
import zlib
from pathlib import Path

import torch
from torch import nn

from .config import ExportConfig, ExporterError

NEG_INF = -1e9
MASK_ID = 0


def token_id(token: str, vocab_size: int) -> int:
    # stable across processes, unlike hash(); id 0 is reserved for masks
    return zlib.crc32(token.encode("utf-8")) % (vocab_size - 1) + 1


class _AttentionLayer(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.qkv = nn.Linear(d_model, 3 * d_model, bias=False)
        self.out = nn.Linear(d_model, d_model, bias=False)

    def forward(self, x: torch.Tensor, present: torch.Tensor):
        # x (B, N, D); present (B, N, N) bool
        bsz, n, _ = x.shape
        q, k, v = self.qkv(x).chunk(3, dim=-1)

        def split(t):
            return t.view(bsz, n, self.n_heads, self.d_head).transpose(1, 2)

        q, k, v = split(q), split(k), split(v)
        scores = q @ k.transpose(-1, -2) / self.d_head**0.5
        scores = scores.masked_fill(~present.unsqueeze(1), NEG_INF)
        att = torch.softmax(scores, dim=-1)
        ctx = (att @ v).transpose(1, 2).reshape(bsz, n, -1)
        return att, x + self.out(ctx)


class TinyBandedEncoder(nn.Module):
    def __init__(self, cfg: ExportConfig):
        super().__init__()
        self.embed = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.layers = nn.ModuleList(
            _AttentionLayer(cfg.d_model, cfg.n_heads) for _ in range(cfg.n_layers)
        )

    def forward(self, ids: torch.Tensor, present: torch.Tensor) -> torch.Tensor:
        """Return stacked attention (B, L, H, N, N) for the given batch."""
        x = self.embed(ids)
        per_layer = []
        for layer in self.layers:
            att, x = layer(x, present)
            per_layer.append(att)
        return torch.stack(per_layer, dim=1)

    def hidden_states(self, ids: torch.Tensor, present: torch.Tensor) -> torch.Tensor:
        """Final-layer hidden states, for the masked-decoding scorer."""
        x = self.embed(ids)
        for layer in self.layers:
            _, x = layer(x, present)
        return x


def present_pattern(
    n_tokens: int, window: int, global_positions: tuple[int, ...]
) -> torch.Tensor:
    """Which (src, dst) pairs the dump format can represent.

    Marker rows see everything; other rows see every marker plus the
    local window.
    """
    pattern = torch.zeros(n_tokens, n_tokens, dtype=torch.bool)
    idx = torch.arange(n_tokens)
    band = (idx.unsqueeze(1) - idx.unsqueeze(0)).abs() <= window
    pattern |= band
    for g in global_positions:
        pattern[g, :] = True
        pattern[:, g] = True
    return pattern


def ensure_checkpoint(cfg: ExportConfig) -> TinyBandedEncoder:
    """Load the checkpoint at cfg.checkpoint, creating it when absent."""
    path = Path(cfg.checkpoint)
    torch.manual_seed(cfg.seed)
    model = TinyBandedEncoder(cfg)
    if path.exists():
        try:
            state = torch.load(path, map_location="cpu", weights_only=True)
            model.load_state_dict(state)
        except (RuntimeError, KeyError, ValueError, EOFError,
                pickle.UnpicklingError, zipfile.BadZipFile) as exc:
            raise ExporterError(f"cannot load checkpoint {path}: {exc}") from exc
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(model.state_dict(), path)
    model.eval()
    return model
