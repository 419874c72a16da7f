"""Canonicalize mention embeddings against a fixed concept lexicon.

Each mention vector is assigned to its most cosine-similar lexicon entry;
assignments below the rejection threshold come back as None. Embeddings
are consumed from files — no embedding model is bundled.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError

DEFAULT_EPSILON = 0.35


@dataclass
class EmbeddingLexicon:
    """Concept vocabulary: ids, display names, and one vector per concept."""

    ids: list
    names: list
    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=float)
        self.ids = [str(i) for i in self.ids]
        self.names = [str(n) for n in self.names]
        if self.vectors.ndim != 2 or self.vectors.shape[0] == 0:
            raise ConfigError("lexicon must hold at least one vector")
        if len(self.ids) != self.vectors.shape[0] or len(self.names) != len(self.ids):
            raise ShapeError("ids, names, and vectors must align")
        if len(set(self.ids)) != len(self.ids):
            raise ConfigError("concept ids must be unique")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("lexicon vectors must be finite")
        norms = np.linalg.norm(self.vectors, axis=1)
        if np.any(norms == 0):
            raise ConfigError("lexicon vectors must be nonzero")
        self._norms = norms

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @classmethod
    def from_csv(cls, path) -> "EmbeddingLexicon":
        ids, names, rows = [], [], []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or len(header) < 3:
                raise ConfigError(f"{path}: expected header id,name,<floats...>")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise ConfigError(f"{path}:{lineno}: ragged row")
                ids.append(row[0])
                names.append(row[1])
                try:
                    rows.append([float(v) for v in row[2:]])
                except ValueError as exc:
                    raise ConfigError(f"{path}:{lineno}: {exc}") from exc
        return cls(ids=ids, names=names, vectors=np.array(rows, dtype=float))

    @classmethod
    def from_json(cls, path) -> "EmbeddingLexicon":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        entries = doc["entries"]
        return cls(
            ids=[e["id"] for e in entries],
            names=[e.get("name", e["id"]) for e in entries],
            vectors=np.array([e["vector"] for e in entries], dtype=float),
        )

    @classmethod
    def load(cls, path) -> "EmbeddingLexicon":
        if str(path).endswith(".json"):
            return cls.from_json(path)
        return cls.from_csv(path)


@dataclass
class MentionEmbedding:
    """One extracted mention with its embedding vector."""

    text: str
    vector: np.ndarray

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=float)
        if self.vector.ndim != 1:
            raise ShapeError("mention vector must be one-dimensional")
        if not np.all(np.isfinite(self.vector)):
            raise ValueError("mention vector must be finite")
        if np.linalg.norm(self.vector) == 0:
            raise ValueError("mention vector must be nonzero")


def load_mentions(path) -> list:
    """Mention files: CSV (text,<floats...>) or JSON {"mentions": [...]}."""
    if str(path).endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        return [
            MentionEmbedding(text=m["text"], vector=np.asarray(m["vector"], float))
            for m in doc["mentions"]
        ]
    mentions = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise ConfigError(f"{path}: expected header text,<floats...>")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                mentions.append(
                    MentionEmbedding(text=row[0],
                                     vector=np.array([float(v) for v in row[1:]]))
                )
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    return mentions


def cosine_sim(a, b) -> float:
    """dot(a, b) / (|a| |b|), clamped to [-1, 1] against rounding."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError("cosine_sim needs two equal-length vectors")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


@dataclass
class Assignment:
    """Outcome of matching one mention against the lexicon."""

    mention: str
    concept_id: str | None
    similarity: float
    tie: bool

    def to_json_dict(self) -> dict:
        return {
            "mention": self.mention,
            "concept_id": self.concept_id,
            "similarity": self.similarity,
            "tie": self.tie,
        }


def assign_symptom(mention: MentionEmbedding, lexicon: EmbeddingLexicon,
                   epsilon: float = DEFAULT_EPSILON) -> Assignment:
    """Most-similar concept if its similarity clears epsilon, else None.

    Exact similarity ties resolve to the earliest lexicon entry and are
    flagged on the result.
    """
    if not -1.0 <= epsilon <= 1.0:
        raise ConfigError(f"epsilon must lie in [-1, 1], got {epsilon}")
    if mention.vector.shape[0] != lexicon.dim:
        raise ShapeError("mention and lexicon dims must agree")
    v = mention.vector
    sims = np.clip(
        (lexicon.vectors @ v) / (lexicon._norms * np.linalg.norm(v)), -1.0, 1.0
    )
    best = int(np.argmax(sims))
    best_sim = float(sims[best])
    tie = int(np.count_nonzero(sims == best_sim)) > 1
    concept = lexicon.ids[best] if best_sim >= epsilon else None
    return Assignment(mention=mention.text, concept_id=concept,
                      similarity=best_sim, tie=tie)


def assign_all(mentions, lexicon: EmbeddingLexicon,
               epsilon: float = DEFAULT_EPSILON):
    """Assign every mention; returns (assignments, filtered_fraction)."""
    assignments = [assign_symptom(m, lexicon, epsilon) for m in mentions]
    if assignments:
        filtered = sum(1 for a in assignments if a.concept_id is None)
        fraction = filtered / len(assignments)
    else:
        fraction = 0.0
    return assignments, fraction
