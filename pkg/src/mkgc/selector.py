"""Candidate selector: a small trainable host model that picks the best
entity from a KGE candidate list.

The host is deliberately tiny: frozen entity/relation embeddings feed
`n_blocks` blocks, each a frozen random-orthogonal mixing map followed by
a frozen linear layer W0 carrying the (trainable) expert adapter, with a
tanh nonlinearity. The three pooled components are the head embedding,
the relation embedding, and the mean embedding of the candidate block.
A scoring head (zero-initialized by default, trainable by config) maps
the pooled query state against candidate embeddings via dot products.
With `position_prior_weight` zero (the default) there are no position
features and scores are permutation-equivariant in the candidate list.
A positive weight adds a fixed -log(position) prior to the logits: the
model then defers to the presented (KGE) order wherever its content
scores carry no signal, the way a prompt-fed model sees candidate order.
The prior is constant, so gold-position-shuffled training cannot wash it
out and content learning happens on top of it.

Only adapter tensors (and, by config, the head) ever receive gradients;
everything else is a plain ndarray constant for the tape.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from . import adapter
from . import autodiff as ad
from .adapter import AdapterConfig
from .errors import ConfigError, NotFoundError, TrainingDiverged


@dataclass(frozen=True)
class SelectorConfig:
    hidden: int = 64
    n_blocks: int = 2
    adapter_kind: str = "grouped"  # "grouped" | "plain" | "none"
    n_groups: int = 4
    n_members: int = 2
    rank: int = 4
    mode: str = "gated"
    head_trainable: bool = True
    head_init: str = "zero"  # "zero" | "orthogonal"
    position_prior_weight: float = 0.0
    seed: int = 0

    def validate(self):
        if self.hidden < 1 or self.n_blocks < 1:
            raise ConfigError("hidden and n_blocks must be >= 1")
        if self.adapter_kind not in ("grouped", "plain", "none"):
            raise ConfigError(f"unknown adapter_kind {self.adapter_kind!r}")
        if self.head_init not in ("zero", "orthogonal"):
            raise ConfigError(f"unknown head_init {self.head_init!r}")

    def adapter_config(self):
        return AdapterConfig(d_in=self.hidden, d_out=self.hidden,
                             n_groups=self.n_groups, n_members=self.n_members,
                             rank=self.rank, mode=self.mode)


@dataclass(frozen=True)
class TrainingExample:
    head: int
    relation: int
    lang: str
    candidates: tuple
    gold_index: int

    def __post_init__(self):
        if not 0 <= self.gold_index < len(self.candidates):
            raise ValueError("gold_index outside candidate list")
        if len(set(self.candidates)) != len(self.candidates):
            raise ValueError("candidates must be distinct")


def _orthogonal(n, rng):
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))  # fix sign convention for determinism


class SelectorModel:
    """Host model over dense entity/relation indices (the KGE index space)."""

    def __init__(self, n_entities: int, n_relations: int, cfg: SelectorConfig):
        cfg.validate()
        self.cfg = cfg
        self.n_entities = n_entities
        self.n_relations = n_relations
        d = cfg.hidden
        seq = np.random.SeedSequence(cfg.seed)
        rng_frozen, rng_adapter = (np.random.default_rng(s) for s in seq.spawn(2))

        params = {
            "ent_emb": rng_frozen.normal(size=(n_entities, d)),
            "rel_emb": rng_frozen.normal(size=(n_relations, d)),
        }
        trainable = []
        for b in range(cfg.n_blocks):
            params[f"block{b}.mix"] = _orthogonal(d, rng_frozen)
            params[f"block{b}.w0"] = rng_frozen.normal(size=(d, d)) / np.sqrt(d)
            if cfg.adapter_kind == "grouped":
                for name, arr in adapter.init_params(cfg.adapter_config(),
                                                     rng_adapter).items():
                    key = f"block{b}.adapter.{name}"
                    params[key] = arr
                    trainable.append(key)
            elif cfg.adapter_kind == "plain":
                for name, arr in adapter.plain_init(d, d, cfg.rank, rng_adapter).items():
                    key = f"block{b}.adapter.{name}"
                    params[key] = arr
                    trainable.append(key)
        if cfg.head_init == "zero":
            params["head"] = np.zeros((d, d))
        else:
            params["head"] = _orthogonal(d, rng_frozen)
        if cfg.head_trainable:
            trainable.append("head")

        self.params = params
        self.trainable = tuple(trainable)

    def frozen_names(self):
        return tuple(n for n in sorted(self.params) if n not in self.trainable)

    def frozen_digest(self) -> str:
        h = hashlib.sha256()
        for name in self.frozen_names():
            h.update(name.encode())
            h.update(self.params[name].tobytes())
        return h.hexdigest()

    def _check_ids(self, h, r, candidates):
        ids = [h] + list(candidates)
        for e in ids:
            if not 0 <= e < self.n_entities:
                raise NotFoundError(f"entity index {e} out of range")
        if not 0 <= r < self.n_relations:
            raise NotFoundError(f"relation index {r} out of range")

    def forward(self, h: int, r: int, candidates, overrides=None):
        """Logits over the candidate list plus per-block routing decisions.

        `overrides` maps param names to tape leaves during training; absent
        names fall back to the stored (constant) arrays.
        """
        if len(candidates) == 0:
            raise ValueError("candidate list is empty")
        self._check_ids(h, r, candidates)
        overrides = overrides or {}
        get = lambda name: overrides.get(name, self.params[name])
        cfg = self.cfg

        ent = self.params["ent_emb"]
        cand_arr = np.asarray(candidates, dtype=np.int64)
        # pool over sorted indices so the block representation (and thus
        # every score) is bitwise permutation-invariant
        x_t = ent[np.sort(cand_arr)].mean(axis=0)
        parts = [ent[h], self.params["rel_emb"][r], x_t]

        decisions = []
        for b in range(cfg.n_blocks):
            mix = self.params[f"block{b}.mix"]
            w0 = self.params[f"block{b}.w0"]
            parts = [ad.matmul(mix, x) for x in parts]
            if cfg.adapter_kind == "grouped":
                prefix = f"block{b}.adapter."
                layer = {n[len(prefix):]: get(n) for n in self.params
                         if n.startswith(prefix)}
                ys, decision = adapter.forward(parts, layer, w0, cfg.adapter_config())
                decisions.append(decision)
            elif cfg.adapter_kind == "plain":
                layer = {"a": get(f"block{b}.adapter.a"), "b": get(f"block{b}.adapter.b")}
                ys = adapter.plain_forward(parts, layer, w0, cfg.hidden)
            else:
                ys = [ad.matmul(w0, x) for x in parts]
            parts = [ad.tanh(y) for y in ys]

        q = ad.scale(1.0 / 3.0, ad.add(ad.add(parts[0], parts[1]), parts[2]))
        logits = ad.matmul(ent[cand_arr], ad.matmul(get("head"), q))
        if cfg.position_prior_weight != 0.0:
            prior = -np.log(np.arange(1, len(cand_arr) + 1, dtype=np.float64))
            logits = ad.add(logits, cfg.position_prior_weight * prior)
        return logits, decisions

    def select(self, h: int, r: int, candidates):
        """Chosen entity, probability vector over candidates, and the
        routing decisions recorded on the way."""
        logits, decisions = self.forward(h, r, candidates)
        probs = ad.softmax(ad.raw(logits))
        return candidates[ad.argmax_det(probs)], probs, decisions


def build_examples(queries, retrieve_fn, m_min: int = 25, m_max: int = 30,
                   seed: int = 0):
    """Training examples from (h, r, gold, lang) queries.

    The candidate count m is drawn uniformly in [m_min, m_max] per example
    and the gold entity is re-inserted at a uniformly random position
    (first-position bias guard). Queries whose retrieved candidates miss
    the gold are dropped; the drop count is returned.
    """
    if not queries:
        raise ConfigError("no queries to build examples from")
    if not 1 <= m_min <= m_max:
        raise ConfigError(f"need 1 <= m_min <= m_max, got ({m_min}, {m_max})")
    rng = np.random.default_rng(seed)
    examples, dropped = [], 0
    for h, r, gold, lang in queries:
        m = int(rng.integers(m_min, m_max + 1))
        cands = list(retrieve_fn(h, r, gold, m))
        if gold not in cands:
            dropped += 1
            continue
        cands.remove(gold)
        pos = int(rng.integers(0, len(cands) + 1))
        cands.insert(pos, gold)
        examples.append(TrainingExample(h, r, lang, tuple(cands), pos))
    return examples, dropped


@dataclass
class TrainConfig:
    lr: float = 2e-5
    epochs: int = 10
    batch_size: int = 16
    seed: int = 0
    weight_decay: float = 0.0  # decoupled (AdamW-style)
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8


def train_selector(model: SelectorModel, examples, cfg: TrainConfig):
    """Cross-entropy training of the trainable tensors; returns per-epoch
    mean losses. Updates are serial and seed-deterministic; a non-finite
    loss aborts with the failing (epoch, step, sample)."""
    if not examples:
        raise ConfigError("no training examples")
    rng = np.random.default_rng(cfg.seed)
    names = model.trainable
    m_state = {n: np.zeros_like(model.params[n]) for n in names}
    v_state = {n: np.zeros_like(model.params[n]) for n in names}
    t = 0
    curve = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(examples))
        epoch_loss = 0.0
        for step, start in enumerate(range(0, len(order), cfg.batch_size)):
            batch = order[start:start + cfg.batch_size]
            grads = {n: np.zeros_like(model.params[n]) for n in names}
            for sample in batch:
                ex = examples[sample]
                tape = ad.Tape()
                try:
                    leaves = {n: tape.leaf(model.params[n]) for n in names}
                    logits, _ = model.forward(ex.head, ex.relation,
                                              ex.candidates, overrides=leaves)
                    loss = ad.scale(-1.0, ad.pick(ad.log_softmax(logits),
                                                  ex.gold_index))
                except ValueError as exc:
                    raise TrainingDiverged(epoch, step, int(sample), str(exc)) from exc
                loss_val = float(ad.raw(loss))
                if not np.isfinite(loss_val):
                    raise TrainingDiverged(epoch, step, int(sample), loss_val)
                epoch_loss += loss_val
                tape.backward(loss)
                for n in names:
                    grads[n] += leaves[n].grad
            t += 1
            scale = 1.0 / len(batch)
            for n in names:
                g = grads[n] * scale
                m_state[n] = cfg.adam_beta1 * m_state[n] + (1 - cfg.adam_beta1) * g
                v_state[n] = cfg.adam_beta2 * v_state[n] + (1 - cfg.adam_beta2) * g * g
                m_hat = m_state[n] / (1 - cfg.adam_beta1 ** t)
                v_hat = v_state[n] / (1 - cfg.adam_beta2 ** t)
                step_dir = m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
                if cfg.weight_decay:
                    step_dir = step_dir + cfg.weight_decay * model.params[n]
                model.params[n] = model.params[n] - cfg.lr * step_dir
        curve.append(epoch_loss / len(examples))
    return curve


def save_selector(model: SelectorModel, manifest_path, tensors_path):
    manifest = {
        "config": asdict(model.cfg),
        "n_entities": model.n_entities,
        "n_relations": model.n_relations,
        "trainable": list(model.trainable),
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
    np.savez(tensors_path, **model.params)


def load_selector(manifest_path, tensors_path) -> SelectorModel:
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    cfg_dict = dict(manifest["config"])
    model = SelectorModel(manifest["n_entities"], manifest["n_relations"],
                          SelectorConfig(**cfg_dict))
    with np.load(tensors_path) as payload:
        for name in model.params:
            model.params[name] = payload[name]
    return model
