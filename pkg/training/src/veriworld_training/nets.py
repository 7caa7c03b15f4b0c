"""Policy and prediction networks.

The policy embeds the hypothesis with a bag-of-words encoder and uses it as
the key of a dot-product attention over a bank of parallel state MLP
modules; the attended context feeds tanh actor-critic heads. The predictor
runs transformer encoders over the hypothesis tokens and the last-K
observation window, combines the two sequences with a third transformer,
and squashes a final scalar to a probability.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn


class BagOfWords(nn.Module):
    """Mean of token embeddings under a padding mask."""

    def __init__(self, vocab_size: int, dim: int):
        super().__init__()
        self.embedding = nn.Embedding(vocab_size, dim)

    def forward(self, tokens, mask):
        emb = self.embedding(tokens) * mask.unsqueeze(-1)
        totals = mask.sum(dim=1, keepdim=True).clamp(min=1.0)
        return emb.sum(dim=1) / totals


class ModuleBank(nn.Module):
    """N parallel state MLPs evaluated as single batched matmuls."""

    def __init__(self, obs_dim: int, hidden: int, n_modules: int, layers: int):
        super().__init__()
        self.weights = nn.ParameterList()
        self.biases = nn.ParameterList()
        width = obs_dim
        for _ in range(layers):
            w = torch.empty(n_modules, width, hidden)
            b = torch.zeros(n_modules, hidden)
            bound = 1.0 / math.sqrt(width)
            nn.init.uniform_(w, -bound, bound)
            nn.init.uniform_(b, -bound, bound)
            self.weights.append(nn.Parameter(w))
            self.biases.append(nn.Parameter(b))
            width = hidden

    def forward(self, obs):
        # (B, obs) -> (B, modules, hidden)
        x = torch.tanh(torch.einsum("bo,moh->bmh", obs, self.weights[0])
                       + self.biases[0])
        for w, b in zip(list(self.weights)[1:], list(self.biases)[1:]):
            x = torch.tanh(torch.einsum("bmh,mhk->bmk", x, w) + b)
        return x


class PolicyNet(nn.Module):
    """Key-value attention policy: hypothesis keys select among state
    modules."""

    def __init__(self, obs_dim: int, vocab_size: int, n_actions: int,
                 embedding_size: int = 32, hidden_size: int = 32,
                 n_modules: int = 16, mlp_hidden_layers: int = 2):
        super().__init__()
        self.seq2vec = BagOfWords(vocab_size, embedding_size)
        self.key_proj = nn.Linear(embedding_size, hidden_size)
        self.modules_bank = ModuleBank(obs_dim, hidden_size, n_modules,
                                       mlp_hidden_layers)
        self.post = nn.Sequential(nn.Linear(hidden_size, hidden_size), nn.Tanh())
        self.actor = nn.Linear(hidden_size, n_actions)
        self.critic = nn.Linear(hidden_size, 1)
        self.n_modules = n_modules
        self.hidden_size = hidden_size

    def forward(self, obs, tokens, mask):
        """(action logits, value, attention weights over modules)."""
        key = self.key_proj(self.seq2vec(tokens, mask))
        values = self.modules_bank(obs)
        scores = torch.einsum("bd,bmd->bm", key, values) / math.sqrt(self.hidden_size)
        weights = torch.softmax(scores, dim=1)
        context = torch.einsum("bm,bmd->bd", weights, values)
        hidden = self.post(context)
        return self.actor(hidden), self.critic(hidden).squeeze(-1), weights

    def distribution(self, obs, tokens, mask):
        logits, value, weights = self(obs, tokens, mask)
        return torch.distributions.Categorical(logits=logits), value, weights


def _encoder(dim: int, depth: int) -> nn.TransformerEncoder:
    layer = nn.TransformerEncoderLayer(
        d_model=dim, nhead=2, dim_feedforward=dim, dropout=0.0,
        activation="relu", batch_first=True)
    return nn.TransformerEncoder(layer, num_layers=depth)


class PredictionNet(nn.Module):
    """Transformer hypothesis/observation cross-encoder giving P(true)."""

    def __init__(self, obs_dim: int, vocab_size: int,
                 embedding_size: int = 32, depth: int = 3, window: int = 5):
        super().__init__()
        self.embedding = nn.Embedding(vocab_size, embedding_size)
        self.obs_proj = nn.Linear(obs_dim, embedding_size)
        self.hyp_encoder = _encoder(embedding_size, depth)
        self.obs_encoder = _encoder(embedding_size, depth)
        self.combiner = _encoder(embedding_size, depth)
        self.head = nn.Linear(embedding_size, 1)
        self.window = window

    def forward(self, window_obs, tokens, mask):
        """window_obs: (B, K, obs_dim); tokens/mask: (B, T). Returns (B,)
        probabilities in (0, 1)."""
        hyp = self.hyp_encoder(self.embedding(tokens) * mask.unsqueeze(-1))
        obs = self.obs_encoder(self.obs_proj(window_obs))
        combined = self.combiner(torch.cat([hyp, obs], dim=1))
        return torch.sigmoid(self.head(combined.mean(dim=1)).squeeze(-1))
