"""Knowledge-graph data model: multilingual store, file ingestion/export,
dataset splits with closure repair, and a synthetic multilingual generator.

File formats:
  triples           UTF-8 TSV, one `head<TAB>relation<TAB>tail<TAB>lang` per line
  entity labels     JSON-lines {"id":…, "labels":{lang:…}, "descriptions":{lang:…}}
  relation labels   JSON-lines, same schema (descriptions optional)
  synthetic manifest JSON-lines {"triple":[h,r,t], "shared_in":[langs]}
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NotFoundError, ParseError


@dataclass(frozen=True, order=True)
class Triple:
    head: int
    relation: int
    tail: int
    lang: str

    @property
    def content(self):
        """The language-independent (h, r, t) fact."""
        return (self.head, self.relation, self.tail)


@dataclass
class Entity:
    id: int
    labels: dict
    descriptions: dict = field(default_factory=dict)


@dataclass
class Relation:
    id: int
    labels: dict


class KGStore:
    """Entities, relations, and triples; immutable after construction.

    Ids are arbitrary stable integers; dense index maps (`ent_index`,
    `rel_index`) are provided for embedding tables.
    """

    def __init__(self, entities, relations, triples, languages):
        self.entities = {e.id: e for e in entities}
        self.relations = {r.id: r for r in relations}
        self.triples = tuple(triples)
        self.languages = tuple(languages)
        self.entity_ids = sorted(self.entities)
        self.relation_ids = sorted(self.relations)
        self.ent_index = {eid: i for i, eid in enumerate(self.entity_ids)}
        self.rel_index = {rid: i for i, rid in enumerate(self.relation_ids)}

    @property
    def n_entities(self):
        return len(self.entities)

    @property
    def n_relations(self):
        return len(self.relations)

    def triples_by_lang(self):
        by_lang = {lang: [] for lang in self.languages}
        for t in self.triples:
            by_lang[t.lang].append(t)
        return by_lang

    def stats(self):
        counts = {lang: 0 for lang in self.languages}
        for t in self.triples:
            counts[t.lang] += 1
        return {
            "entities": self.n_entities,
            "relations": self.n_relations,
            "triples": len(self.triples),
            "per_language": counts,
        }

    def label(self, kind: str, obj_id: int, lang: str) -> str:
        """Label in `lang`, falling back to the lexically first language."""
        table = self.entities if kind == "entity" else self.relations
        if obj_id not in table:
            raise NotFoundError(f"unknown {kind} id {obj_id}")
        labels = table[obj_id].labels
        if lang in labels:
            return labels[lang]
        return labels[min(labels)]

    def description(self, ent_id: int, lang: str) -> str:
        if ent_id not in self.entities:
            raise NotFoundError(f"unknown entity id {ent_id}")
        descs = self.entities[ent_id].descriptions
        if not descs:
            return ""
        return descs.get(lang, descs[min(descs)])


def _read_labels(path, kind):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                obj_id = int(obj["id"])
                labels = {str(k): str(v) for k, v in obj["labels"].items()}
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(path, line_no, f"bad {kind} record: {exc}") from exc
            if not labels:
                raise ParseError(path, line_no, f"{kind} {obj_id} has no labels")
            if obj_id in out:
                raise ParseError(path, line_no, f"duplicate {kind} id {obj_id}")
            descriptions = {str(k): str(v)
                            for k, v in (obj.get("descriptions") or {}).items()}
            out[obj_id] = (labels, descriptions)
    return out


def ingest(triples_path, entity_labels_path, relation_labels_path, languages) -> KGStore:
    """Load a store from disk, validating ids, languages, and line syntax.

    Dangling ids and malformed lines raise ParseError naming the line;
    a language tag outside `languages` raises ConfigError. Duplicate
    surface triples are collapsed (count available via stats on return).
    """
    languages = tuple(languages)
    ent_raw = _read_labels(entity_labels_path, "entity")
    rel_raw = _read_labels(relation_labels_path, "relation")

    triples = []
    seen = set()
    with open(triples_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(triples_path, line_no,
                                 f"expected 4 tab-separated fields, got {len(parts)}")
            try:
                h, r, t = int(parts[0]), int(parts[1]), int(parts[2])
            except ValueError as exc:
                raise ParseError(triples_path, line_no, f"non-integer id: {exc}") from exc
            lang = parts[3]
            if lang not in languages:
                raise ConfigError(
                    f"{triples_path}:{line_no}: language {lang!r} not in configured set {languages}")
            for eid, role in ((h, "head"), (t, "tail")):
                if eid not in ent_raw:
                    raise ParseError(triples_path, line_no, f"dangling {role} id {eid}")
            if r not in rel_raw:
                raise ParseError(triples_path, line_no, f"dangling relation id {r}")
            triple = Triple(h, r, t, lang)
            if triple in seen:
                continue
            seen.add(triple)
            triples.append(triple)

    entities = [Entity(i, labels, descs) for i, (labels, descs) in sorted(ent_raw.items())]
    relations = [Relation(i, labels) for i, (labels, _) in sorted(rel_raw.items())]
    return KGStore(entities, relations, triples, languages)


def export_store(store: KGStore, triples_path, entity_labels_path, relation_labels_path):
    """Write a store back to disk in canonical order (sorted triples and ids)."""
    with open(triples_path, "w", encoding="utf-8") as fh:
        for t in sorted(store.triples, key=lambda t: (t.lang, t.head, t.relation, t.tail)):
            fh.write(f"{t.head}\t{t.relation}\t{t.tail}\t{t.lang}\n")
    with open(entity_labels_path, "w", encoding="utf-8") as fh:
        for eid in store.entity_ids:
            e = store.entities[eid]
            fh.write(json.dumps({"id": eid, "labels": e.labels,
                                 "descriptions": e.descriptions}, sort_keys=True) + "\n")
    with open(relation_labels_path, "w", encoding="utf-8") as fh:
        for rid in store.relation_ids:
            fh.write(json.dumps({"id": rid, "labels": store.relations[rid].labels},
                                sort_keys=True) + "\n")


@dataclass
class SyntheticConfig:
    """Typed random multilingual KG: entities carry types, relations map a
    domain type to a range type. An `anchored_fraction` of relations draw
    tails from a small ranked anchor set with geometrically decaying
    probabilities (graded, learnable regularities); the rest pick tails
    uniformly inside the range type (instance noise). A `shared_fraction`
    of facts is emitted in every language, the rest in exactly one."""

    n_entities: int = 120
    n_relations: int = 10
    languages: tuple = ("en", "fr")
    shared_fraction: float = 0.7
    n_facts: int = 600
    n_types: int = 4
    anchored_fraction: float = 0.6
    anchors_per_relation: int = 3
    anchor_decay: float = 0.45
    seed: int = 0


def gen_synthetic(cfg: SyntheticConfig):
    """Generate a store plus a manifest of which languages carry each fact."""
    if not 0.0 <= cfg.shared_fraction <= 1.0:
        raise ConfigError(f"shared_fraction must be in [0,1], got {cfg.shared_fraction}")
    if cfg.n_entities < 2 or cfg.n_relations < 1 or cfg.n_facts < 1:
        raise ConfigError("n_entities, n_relations, and n_facts must be positive")
    if not cfg.languages or len(set(cfg.languages)) != len(cfg.languages):
        raise ConfigError("languages must be a non-empty set of distinct tags")
    if cfg.n_types < 1 or cfg.n_types > cfg.n_entities:
        raise ConfigError("n_types must be in [1, n_entities]")
    if cfg.anchors_per_relation < 1 or not 0.0 < cfg.anchor_decay <= 1.0:
        raise ConfigError("need anchors_per_relation >= 1 and anchor_decay in (0, 1]")

    rng = np.random.default_rng(cfg.seed)
    type_of = rng.integers(0, cfg.n_types, cfg.n_entities)
    type_of[:cfg.n_types] = np.arange(cfg.n_types)  # every type inhabited
    by_type = [np.flatnonzero(type_of == k) for k in range(cfg.n_types)]

    rel_domain = rng.integers(0, cfg.n_types, cfg.n_relations)
    rel_range = rng.integers(0, cfg.n_types, cfg.n_relations)
    rel_anchored = rng.random(cfg.n_relations) < cfg.anchored_fraction
    rel_anchors = []
    for r in range(cfg.n_relations):
        pool = by_type[rel_range[r]]
        k = min(cfg.anchors_per_relation, len(pool))
        rel_anchors.append(rng.choice(pool, size=k, replace=False))
    anchor_weights = [cfg.anchor_decay ** np.arange(len(a)) for a in rel_anchors]
    anchor_weights = [w / w.sum() for w in anchor_weights]

    capacity = 0
    for r in range(cfg.n_relations):
        dom, ran = len(by_type[rel_domain[r]]), len(by_type[rel_range[r]])
        capacity += dom * len(rel_anchors[r]) if rel_anchored[r] else dom * ran
    if cfg.n_facts > capacity:
        raise ConfigError(f"n_facts={cfg.n_facts} exceeds distinct-fact capacity {capacity}")

    facts, seen = [], set()
    attempts = 0
    while len(facts) < cfg.n_facts:
        attempts += 1
        if attempts > 200 * cfg.n_facts:
            raise ConfigError("could not generate enough distinct facts; "
                              "reduce n_facts or add entities")
        r = int(rng.integers(0, cfg.n_relations))
        h = int(rng.choice(by_type[rel_domain[r]]))
        if rel_anchored[r]:
            t = int(rng.choice(rel_anchors[r], p=anchor_weights[r]))
        else:
            t = int(rng.choice(by_type[rel_range[r]]))
        if (h, r, t) not in seen:
            seen.add((h, r, t))
            facts.append((h, r, t))

    triples, manifest = [], []
    for h, r, t in facts:
        if rng.random() < cfg.shared_fraction:
            langs = list(cfg.languages)
        else:
            langs = [cfg.languages[int(rng.integers(0, len(cfg.languages)))]]
        for lang in langs:
            triples.append(Triple(h, r, t, lang))
        manifest.append({"triple": [h, r, t], "shared_in": sorted(langs)})

    entities = [
        Entity(e, {lang: f"{lang}:entity{e}" for lang in cfg.languages},
               {lang: f"{lang} item {e} of kind {int(type_of[e])}" for lang in cfg.languages})
        for e in range(cfg.n_entities)
    ]
    relations = [
        Relation(r, {lang: f"{lang}:rel{r}" for lang in cfg.languages})
        for r in range(cfg.n_relations)
    ]
    return KGStore(entities, relations, triples, cfg.languages), manifest


@dataclass
class Split:
    train: list
    validation: list
    test: list
    prompt_subset: list
    mode: str = "surface"
    moved_for_closure: int = 0

    def all_lists(self):
        return (self.train, self.validation, self.test, self.prompt_subset)

    def non_test(self):
        """Triples whose content may be known at inference time."""
        return self.train + self.validation + self.prompt_subset


def make_splits(store: KGStore, ratios, seed: int, mode: str = "surface",
                prompt_fraction: float = 0.5) -> Split:
    """Shuffle triples into train/validation/test and carve a prompt subset
    out of validation.

    mode="surface" keeps (h,r,t,lang) tuples disjoint; mode="content"
    additionally keeps every language copy of one fact in the same split.
    Validation/test triples with ids unseen in train are moved into train
    (closure repair); the count is reported on the Split.
    """
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise ConfigError(f"ratios must be three non-negatives summing to 1, got {ratios}")
    if mode not in ("surface", "content"):
        raise ConfigError(f"unknown split mode {mode!r}")
    if not 0.0 <= prompt_fraction <= 1.0:
        raise ConfigError("prompt_fraction must be in [0,1]")
    if not store.triples:
        raise ConfigError("store has no triples to split")

    rng = np.random.default_rng(seed)
    n = len(store.triples)

    if mode == "surface":
        units = [[t] for t in store.triples]
    else:
        groups = defaultdict(list)
        for t in store.triples:
            groups[t.content].append(t)
        units = [groups[k] for k in sorted(groups)]
    order = rng.permutation(len(units))

    cut1, cut2 = ratios[0] * n, (ratios[0] + ratios[1]) * n
    train, validation, test = [], [], []
    placed = 0
    for idx in order:
        unit = units[idx]
        if placed < round(cut1):
            train.extend(unit)
        elif placed < round(cut2):
            validation.extend(unit)
        else:
            test.extend(unit)
        placed += len(unit)

    moved = 0
    while True:
        seen_ents = {t.head for t in train} | {t.tail for t in train}
        seen_rels = {t.relation for t in train}

        def covered(t):
            return t.head in seen_ents and t.tail in seen_ents and t.relation in seen_rels

        stragglers = [t for t in validation + test if not covered(t)]
        if not stragglers:
            break
        straggler_set = set(stragglers)
        validation = [t for t in validation if t not in straggler_set]
        test = [t for t in test if t not in straggler_set]
        train.extend(stragglers)
        moved += len(stragglers)

    if not validation or not test:
        raise ConfigError("validation or test split is empty after closure repair; "
                          "use more triples or different ratios")

    n_prompt = int(round(prompt_fraction * len(validation)))
    prompt_idx = set(rng.choice(len(validation), size=n_prompt, replace=False).tolist())
    prompt_subset = [t for i, t in enumerate(validation) if i in prompt_idx]
    validation = [t for i, t in enumerate(validation) if i not in prompt_idx]

    return Split(train, validation, test, prompt_subset, mode, moved)


def sample_neighbors(store: KGStore, triples, entity_id: int, k: int, seed: int):
    """Up to k triples containing `entity_id` (as head or tail), sampled
    without replacement, deterministic for a fixed seed."""
    if entity_id not in store.entities:
        raise NotFoundError(f"unknown entity id {entity_id}")
    if k < 0:
        raise ValueError("k must be >= 0")
    matches = [t for t in triples if t.head == entity_id or t.tail == entity_id]
    if len(matches) <= k:
        return list(matches)
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(matches), size=k, replace=False)
    return [matches[i] for i in idx]


class TailIndex:
    """Content-level (head, relation) -> set of known-true tails, pooled
    across languages; used for filtered retrieval and ranking."""

    def __init__(self, triples):
        self._tails = defaultdict(set)
        for t in triples:
            self._tails[(t.head, t.relation)].add(t.tail)

    def known_tails(self, head, relation):
        return self._tails.get((head, relation), set())

    def filter_ids(self, head, relation, gold):
        """Known tails to exclude when ranking `gold` for (head, relation)."""
        return self.known_tails(head, relation) - {gold}


def train_share_languages(split: Split):
    """For each test triple, the languages whose training data contains the
    same (h, r, t) content."""
    content_langs = defaultdict(set)
    for t in split.train:
        content_langs[t.content].add(t.lang)
    return {t: sorted(content_langs.get(t.content, ())) for t in split.test}


def triples_as_arrays(store: KGStore, triples):
    """Dense-index arrays (heads, relations, tails) for the embedding layer."""
    h = np.array([store.ent_index[t.head] for t in triples], dtype=np.int64)
    r = np.array([store.rel_index[t.relation] for t in triples], dtype=np.int64)
    t_ = np.array([store.ent_index[t.tail] for t in triples], dtype=np.int64)
    return h, r, t_
