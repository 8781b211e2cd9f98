"""Translation embeddings (TransE): margin-ranking training with uniform
negative sampling, scoring, top-m retrieval, and raw/filtered ranking.

Operates on dense indices 0..n-1; callers map store ids through
`kgstore.triples_as_arrays`. Training is single-threaded and seed-
deterministic; retrieval is read-only and safe to parallelize.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, NotFoundError

# 64 is the desk-scale default; 300 matches a 106.1M-parameter budget
# spread over the full 351,299-entity / 2,264-relation vocabulary
DIM_PRESETS = {"desk": 64, "full": 300}

_MAGIC = b"MKGE"
_VERSION = 1


@dataclass
class TransEConfig:
    dim: int = 64
    margin: float = 1.0
    lr: float = 0.01
    epochs: int = 100
    negatives_per_positive: int = 1
    seed: int = 0

    def validate(self):
        if self.dim <= 0:
            raise ConfigError(f"dim must be positive, got {self.dim}")
        if self.margin <= 0:
            raise ConfigError(f"margin must be positive, got {self.margin}")
        if self.epochs < 0 or self.negatives_per_positive < 1:
            raise ConfigError("epochs must be >= 0 and negatives_per_positive >= 1")


class EmbeddingTable:
    """Entity and relation vectors, row-major float64."""

    def __init__(self, entities: np.ndarray, relations: np.ndarray):
        self.entities = np.ascontiguousarray(entities, dtype=np.float64)
        self.relations = np.ascontiguousarray(relations, dtype=np.float64)
        if self.entities.ndim != 2 or self.relations.ndim != 2 \
                or self.entities.shape[1] != self.relations.shape[1]:
            raise ValueError("entity and relation tables must share one dim")

    @property
    def dim(self):
        return self.entities.shape[1]

    @property
    def n_entities(self):
        return self.entities.shape[0]

    @property
    def n_relations(self):
        return self.relations.shape[0]

    def check_ids(self, *, entities=(), relations=()):
        for e in entities:
            if not 0 <= e < self.n_entities:
                raise NotFoundError(f"entity index {e} out of range")
        for r in relations:
            if not 0 <= r < self.n_relations:
                raise NotFoundError(f"relation index {r} out of range")


def init_table(n_entities: int, n_relations: int, dim: int, seed: int) -> EmbeddingTable:
    """Uniform(-6/sqrt(dim), 6/sqrt(dim)) init with unit-norm rows."""
    rng = np.random.default_rng(seed)
    bound = 6.0 / np.sqrt(dim)
    ent = rng.uniform(-bound, bound, (n_entities, dim))
    rel = rng.uniform(-bound, bound, (n_relations, dim))
    kernels.renorm_rows(ent, tol=0.0)
    kernels.renorm_rows(rel, tol=0.0)
    return EmbeddingTable(ent, rel)


def train(heads, rels, tails, n_entities: int, n_relations: int,
          config: TransEConfig):
    """Train embeddings on index triples; returns (table, per-epoch losses).

    Loss per corrupted pair is max(0, margin + d(pos) - d(neg)) with L2
    distance; head or tail is corrupted uniformly. Entity rows are
    re-projected onto the unit sphere after every epoch.
    """
    config.validate()
    heads = np.ascontiguousarray(heads, dtype=np.int64)
    rels = np.ascontiguousarray(rels, dtype=np.int64)
    tails = np.ascontiguousarray(tails, dtype=np.int64)
    n = len(heads)
    if n == 0:
        raise ConfigError("training requires a non-empty triple set")

    table = init_table(n_entities, n_relations, config.dim, config.seed)
    rng = np.random.default_rng(config.seed + 1)
    n_neg = config.negatives_per_positive
    losses = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        negs = rng.integers(0, n_entities, (n, n_neg))
        corrupt = rng.integers(0, 2, (n, n_neg)).astype(np.uint8)
        loss = kernels.transe_epoch(table.entities, table.relations,
                                    heads, rels, tails, negs, corrupt, order,
                                    config.lr, config.margin)
        kernels.renorm_rows(table.entities)
        losses.append(loss)
    return table, losses


def score(table: EmbeddingTable, h: int, r: int, t: int) -> float:
    """-||e_h + e_r - e_t||_2; 0 is the best possible value."""
    table.check_ids(entities=(h, t), relations=(r,))
    diff = table.entities[h] + table.relations[r] - table.entities[t]
    return float(-np.sqrt(diff @ diff))


def all_scores(table: EmbeddingTable, h: int, r: int) -> np.ndarray:
    table.check_ids(entities=(h,), relations=(r,))
    return kernels.all_tail_scores(table.entities, table.entities[h],
                                   table.relations[r])


def retrieve(table: EmbeddingTable, h: int, r: int, m: int, exclude=frozenset()):
    """Top-m tail candidates by score, ties broken by lowest index.

    `exclude` removes known-true competitors (filtered mode); pass an empty
    set for the raw protocol. Returns (indices, scores) arrays.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    scores = all_scores(table, h, r)
    n_avail = table.n_entities - len(exclude)
    if m > n_avail:
        warnings.warn(f"m={m} clamped to {n_avail} retrievable entities")
        m = n_avail
    if exclude:
        scores = scores.copy()
        scores[list(exclude)] = -np.inf
    order = np.lexsort((np.arange(table.n_entities), -scores))[:m]
    return order, scores[order]


def rank_of(table: EmbeddingTable, h: int, r: int, gold: int, exclude=frozenset()) -> int:
    """1-based rank of `gold` among non-excluded tails, consistent with the
    retrieval order (score descending, index ascending)."""
    table.check_ids(entities=(gold,))
    scores = all_scores(table, h, r)
    g = scores[gold]
    mask = np.ones(table.n_entities, dtype=bool)
    if exclude:
        mask[list(exclude)] = False
    mask[gold] = False
    better = np.sum(mask & (scores > g))
    tied_before = np.sum(mask[:gold] & (scores[:gold] == g))
    return int(better + tied_before) + 1


def save_table(table: EmbeddingTable, path, config: TransEConfig | None = None):
    """Binary checkpoint: magic/version/dims header then row-major float64
    payload; config and seed go to a JSON sidecar next to it."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIQQ", _VERSION, table.dim,
                             table.n_entities, table.n_relations))
        fh.write(table.entities.tobytes())
        fh.write(table.relations.tobytes())
    if config is not None:
        with open(str(path) + ".json", "w", encoding="utf-8") as fh:
            json.dump(asdict(config), fh, sort_keys=True, indent=2)


def load_table(path) -> EmbeddingTable:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"not an embedding checkpoint: bad magic {magic!r}")
        version, dim, n_ent, n_rel = struct.unpack("<IIQQ", fh.read(24))
        if version != _VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        ent = np.frombuffer(fh.read(8 * n_ent * dim), dtype=np.float64).reshape(n_ent, dim)
        rel = np.frombuffer(fh.read(8 * n_rel * dim), dtype=np.float64).reshape(n_rel, dim)
    return EmbeddingTable(ent.copy(), rel.copy())
