"""Pairwise relevance models: fine-tuning, persistence, scoring.

Two interchangeable backends, both mapping (query, sentence) to a sigmoid
score in [0, 1]:

* ``hashed``  — a small trainable interaction model over hashed
  bag-of-words embeddings.  Self-contained (no pretrained weights) and
  bit-reproducible given a seed on a single CPU thread.  Default.
* ``minilm``  — a pretrained MS-MARCO cross-encoder fine-tuned on the
  pairs (requires the checkpoint to be downloadable or cached, and the
  sentence-transformers extra).  This is the production-fidelity path.

A saved model is a directory: ``config.json`` (backend, dimensions,
training metadata) plus backend-specific weights.
"""

from __future__ import annotations

import json
import math
import random
import re
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import torch
from torch import nn

from .errors import SidecarError
from .pairs import TrainingPair

__all__ = [
    "DEFAULT_BASE_MODEL",
    "TrainConfig",
    "HashedPairScorer",
    "CrossEncoderScorer",
    "finetune",
    "save_model",
    "load_model",
]

DEFAULT_BASE_MODEL = "cross-encoder/ms-marco-MiniLM-L-6-v2"

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


def _tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class TrainConfig:
    backend: str = "hashed"
    base_model: str = DEFAULT_BASE_MODEL
    epochs: int = 30
    lr: float = 1e-3
    batch_size: int = 32
    hash_dim: int = 4096
    embed_dim: int = 48
    hidden_dim: int = 48
    seed: int = 0

    def __post_init__(self) -> None:
        if self.backend not in ("hashed", "minilm"):
            raise SidecarError(f"unknown backend {self.backend!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise SidecarError("epochs and batch_size must be >= 1")


class _TinyPairNet(nn.Module):
    """Hashed bag-of-words encoder for both texts, interaction head on top."""

    def __init__(self, hash_dim: int, embed_dim: int, hidden_dim: int) -> None:
        super().__init__()
        self.embed = nn.EmbeddingBag(hash_dim, embed_dim, mode="mean")
        self.hidden = nn.Linear(4 * embed_dim, hidden_dim)
        self.out = nn.Linear(hidden_dim, 1)

    def forward(self, q_idx, q_off, s_idx, s_off):
        q = self.embed(q_idx, q_off)
        s = self.embed(s_idx, s_off)
        feats = torch.cat([q, s, q * s, (q - s).abs()], dim=1)
        return self.out(torch.relu(self.hidden(feats))).squeeze(1)


def _hash_tokens(text: str, hash_dim: int) -> list[int]:
    # index 0 is the blank token for texts that tokenize to nothing;
    # crc32 (not hash()) keeps indices stable across processes
    toks = _tokenize(text)
    if not toks:
        return [0]
    return [zlib.crc32(t.encode("utf-8")) % (hash_dim - 1) + 1 for t in toks]


def _bag_tensors(token_lists: Sequence[list[int]]):
    offsets, flat = [], []
    for toks in token_lists:
        offsets.append(len(flat))
        flat.extend(toks)
    return torch.tensor(flat, dtype=torch.long), torch.tensor(offsets, dtype=torch.long)


class HashedPairScorer:
    """Trainable self-contained backend; scores are sigmoid outputs."""

    backend = "hashed"

    def __init__(self, net: _TinyPairNet, cfg: TrainConfig) -> None:
        self.net = net
        self.cfg = cfg

    def score(self, query: str, sentences: Sequence[str]) -> list[float]:
        if not sentences:
            return []
        q_tokens = _hash_tokens(query, self.cfg.hash_dim)
        s_lists = [_hash_tokens(s, self.cfg.hash_dim) for s in sentences]
        q_idx, q_off = _bag_tensors([q_tokens] * len(sentences))
        s_idx, s_off = _bag_tensors(s_lists)
        self.net.eval()
        with torch.no_grad():
            logits = self.net(q_idx, q_off, s_idx, s_off)
        return torch.sigmoid(logits).tolist()


class CrossEncoderScorer:
    """sentence-transformers CrossEncoder backend (production fidelity)."""

    backend = "minilm"

    def __init__(self, model) -> None:
        self.model = model

    def score(self, query: str, sentences: Sequence[str]) -> list[float]:
        if not sentences:
            return []
        logits = self.model.predict(
            [(query, s) for s in sentences],
            convert_to_numpy=True,
            show_progress_bar=False,
            activation_fct=torch.nn.Identity(),
        )
        return torch.sigmoid(torch.as_tensor(logits, dtype=torch.float32)).tolist()


def _load_cross_encoder(model_name_or_path: str):
    try:
        from sentence_transformers.cross_encoder import CrossEncoder
    except ImportError as e:
        raise SidecarError(
            "the minilm backend needs the sentence-transformers extra "
            "(pip install 'evalign-sidecar[minilm]')"
        ) from e
    try:
        return CrossEncoder(model_name_or_path, num_labels=1)
    except Exception as e:
        raise SidecarError(
            f"could not load cross-encoder {model_name_or_path!r} "
            f"(checkpoint unavailable offline?): {e}"
        ) from e


def finetune(pairs: Sequence[TrainingPair], cfg: TrainConfig = TrainConfig()):
    """Train a pair scorer; returns (scorer, training metadata).

    Deterministic for the hashed backend given cfg.seed on one CPU thread.
    Raises SidecarError if the loss goes non-finite.
    """
    if not pairs:
        raise SidecarError("no training pairs")
    if cfg.backend == "minilm":
        return _finetune_minilm(pairs, cfg)
    return _finetune_hashed(pairs, cfg)


def _finetune_hashed(pairs: Sequence[TrainingPair], cfg: TrainConfig):
    torch.manual_seed(cfg.seed)
    torch.set_num_threads(1)
    net = _TinyPairNet(cfg.hash_dim, cfg.embed_dim, cfg.hidden_dim)
    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    loss_fn = nn.BCEWithLogitsLoss()
    encoded = [
        (
            _hash_tokens(p.query_text, cfg.hash_dim),
            _hash_tokens(p.sentence_text, cfg.hash_dim),
            float(p.label),
        )
        for p in pairs
    ]
    rng = random.Random(cfg.seed)
    epoch_losses = []
    net.train()
    for _ in range(cfg.epochs):
        order = list(range(len(encoded)))
        rng.shuffle(order)
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [encoded[i] for i in order[start : start + cfg.batch_size]]
            q_idx, q_off = _bag_tensors([b[0] for b in batch])
            s_idx, s_off = _bag_tensors([b[1] for b in batch])
            labels = torch.tensor([b[2] for b in batch])
            opt.zero_grad()
            loss = loss_fn(net(q_idx, q_off, s_idx, s_off), labels)
            loss.backward()
            opt.step()
            total += loss.item() * len(batch)
        epoch_loss = total / len(encoded)
        if not math.isfinite(epoch_loss):
            raise SidecarError(f"training diverged: epoch loss {epoch_loss}")
        epoch_losses.append(epoch_loss)
    metadata = {
        "n_pairs": len(pairs),
        "n_positive": sum(p.label for p in pairs),
        "initial_loss": epoch_losses[0],
        "final_loss": epoch_losses[-1],
    }
    return HashedPairScorer(net, cfg), metadata


def _finetune_minilm(pairs: Sequence[TrainingPair], cfg: TrainConfig):
    from torch.utils.data import DataLoader

    try:
        from sentence_transformers import InputExample
    except ImportError as e:
        raise SidecarError(
            "the minilm backend needs the sentence-transformers extra"
        ) from e
    torch.manual_seed(cfg.seed)
    random.seed(cfg.seed)
    model = _load_cross_encoder(cfg.base_model)
    examples = [
        InputExample(texts=[p.query_text, p.sentence_text], label=float(p.label))
        for p in pairs
    ]
    loader = DataLoader(
        examples,
        shuffle=True,
        batch_size=cfg.batch_size,
        generator=torch.Generator().manual_seed(cfg.seed),
    )
    warmup = max(1, len(loader) // 10)
    model.fit(
        train_dataloader=loader,
        epochs=cfg.epochs,
        warmup_steps=warmup,
        optimizer_params={"lr": cfg.lr},
        show_progress_bar=False,
    )
    metadata = {
        "n_pairs": len(pairs),
        "n_positive": sum(p.label for p in pairs),
        "base_model": cfg.base_model,
    }
    return CrossEncoderScorer(model), metadata


def save_model(scorer, path: str | Path, metadata: dict | None = None) -> None:
    """Persist a scorer as a directory artifact with its training metadata."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if isinstance(scorer, HashedPairScorer):
        doc = {"backend": "hashed", "train_config": asdict(scorer.cfg), "metadata": metadata or {}}
        torch.save(scorer.net.state_dict(), path / "weights.pt")
    elif isinstance(scorer, CrossEncoderScorer):
        doc = {"backend": "minilm", "metadata": metadata or {}}
        scorer.model.save(str(path / "hf_model"))
    else:
        raise SidecarError(f"cannot save scorer of type {type(scorer).__name__}")
    (path / "config.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path):
    path = Path(path)
    config_path = path / "config.json"
    if not config_path.is_file():
        raise SidecarError(f"no model artifact at {path} (missing config.json)")
    doc = json.loads(config_path.read_text(encoding="utf-8"))
    backend = doc.get("backend")
    if backend == "hashed":
        cfg = TrainConfig(**doc["train_config"])
        net = _TinyPairNet(cfg.hash_dim, cfg.embed_dim, cfg.hidden_dim)
        net.load_state_dict(torch.load(path / "weights.pt", weights_only=True))
        return HashedPairScorer(net, cfg)
    if backend == "minilm":
        return CrossEncoderScorer(_load_cross_encoder(str(path / "hf_model")))
    raise SidecarError(f"unknown backend {backend!r} in {config_path}")
