"""Transformer building blocks shared by the retriever encoders and the fusion reader.

Written on plain ``torch.nn`` primitives so attention masking, positions and
initialization are fully under our control. Pre-layer-norm residual blocks.
"""
import math

import torch
from torch import nn
from torch.nn import functional as F


class MultiHeadAttention(nn.Module):
    """Scaled dot-product attention over ``heads`` subspaces.

    Inputs are ``(..., length, d_model)``; ``mask`` is boolean, broadcastable to
    ``(..., heads, query_len, key_len)``, with True marking blocked positions.
    """

    def __init__(self, d_model, heads):
        super().__init__()
        if d_model % heads:
            raise ValueError(f"d_model={d_model} is not divisible by heads={heads}")
        self.heads = heads
        self.d_head = d_model // heads
        self.query = nn.Linear(d_model, d_model)
        self.key = nn.Linear(d_model, d_model)
        self.value = nn.Linear(d_model, d_model)
        self.out = nn.Linear(d_model, d_model)

    def _split(self, x):
        *lead, length, _ = x.shape
        return x.view(*lead, length, self.heads, self.d_head).transpose(-3, -2)

    def forward(self, query, key, value, mask=None):
        q = self._split(self.query(query))
        k = self._split(self.key(key))
        v = self._split(self.value(value))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_head)
        if mask is not None:
            scores = scores.masked_fill(mask, float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        context = (weights @ v).transpose(-3, -2)
        *lead, length, _, _ = context.shape
        return self.out(context.reshape(*lead, length, self.heads * self.d_head))


class FeedForward(nn.Module):
    def __init__(self, d_model, width):
        super().__init__()
        self.inner = nn.Linear(d_model, width)
        self.outer = nn.Linear(width, d_model)

    def forward(self, x):
        # GELU keeps the loss smooth for finite-difference checks
        return self.outer(F.gelu(self.inner(x)))


class EncoderLayer(nn.Module):
    def __init__(self, d_model, heads, ff_width):
        super().__init__()
        self.attention_norm = nn.LayerNorm(d_model)
        self.attention = MultiHeadAttention(d_model, heads)
        self.ff_norm = nn.LayerNorm(d_model)
        self.ff = FeedForward(d_model, ff_width)

    def forward(self, x, mask=None):
        h = self.attention_norm(x)
        x = x + self.attention(h, h, h, mask)
        return x + self.ff(self.ff_norm(x))


class DecoderLayer(nn.Module):
    def __init__(self, d_model, heads, ff_width):
        super().__init__()
        self.self_norm = nn.LayerNorm(d_model)
        self.self_attention = MultiHeadAttention(d_model, heads)
        self.cross_norm = nn.LayerNorm(d_model)
        self.cross_attention = MultiHeadAttention(d_model, heads)
        self.ff_norm = nn.LayerNorm(d_model)
        self.ff = FeedForward(d_model, ff_width)

    def forward(self, x, memory, causal_mask):
        h = self.self_norm(x)
        x = x + self.self_attention(h, h, h, causal_mask)
        h = self.cross_norm(x)
        x = x + self.cross_attention(h, memory, memory)
        return x + self.ff(self.ff_norm(x))


class EncoderStack(nn.Module):
    """Learned positions (restarting at 0 for every sequence) + encoder layers."""

    def __init__(self, d_model, heads, ff_width, layers, max_len):
        super().__init__()
        self.max_len = max_len
        self.positions = nn.Embedding(max_len, d_model)
        self.layers = nn.ModuleList(EncoderLayer(d_model, heads, ff_width) for _ in range(layers))
        self.norm = nn.LayerNorm(d_model)

    def forward(self, embedded, padding_mask=None):
        length = embedded.shape[-2]
        x = embedded + self.positions(torch.arange(length, device=embedded.device))
        mask = None
        if padding_mask is not None:
            # (batch, length) -> (batch, 1 head, 1 query, length keys)
            mask = padding_mask[..., None, None, :]
        for layer in self.layers:
            x = layer(x, mask)
        return self.norm(x)


class DecoderStack(nn.Module):
    def __init__(self, d_model, heads, ff_width, layers, max_len):
        super().__init__()
        self.max_len = max_len
        self.positions = nn.Embedding(max_len, d_model)
        self.layers = nn.ModuleList(DecoderLayer(d_model, heads, ff_width) for _ in range(layers))
        self.norm = nn.LayerNorm(d_model)

    def forward(self, embedded, memory):
        length = embedded.shape[-2]
        x = embedded + self.positions(torch.arange(length, device=embedded.device))
        causal = torch.triu(torch.ones(length, length, dtype=torch.bool, device=embedded.device), diagonal=1)
        for layer in self.layers:
            x = layer(x, memory, causal)
        return self.norm(x)


def init_fan_in_uniform(module):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    for sub in module.modules():
        if isinstance(sub, nn.Linear):
            bound = 1.0 / math.sqrt(sub.in_features)
            nn.init.uniform_(sub.weight, -bound, bound)
            if sub.bias is not None:
                nn.init.zeros_(sub.bias)
        elif isinstance(sub, nn.Embedding):
            bound = 1.0 / math.sqrt(sub.embedding_dim)
            nn.init.uniform_(sub.weight, -bound, bound)
