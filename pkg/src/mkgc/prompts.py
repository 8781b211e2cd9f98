"""Textual prompt assembly: query, description, neighbor facts, candidates.

The rendered layout is frozen (TEMPLATE_VERSION) so prompt bytes are
reproducible across releases:

    Given a triplet with a missing tail entity t: (<head>, <relation>, t).

    The following provides descriptive information about entity <head>:
    <description, truncated>

    Here are some triplets containing entity <head>:
    [(<h>, <r>, <t>); ...]

    What is the entity name of t? Select one from the list of entities
    below: [<name>; ...]

    [Answer]:

Candidates render in the given (KGE) order; in train mode the gold is
re-inserted at a seed-deterministic uniform position. Duplicate surface
names are disambiguated with an " (id)" suffix so every candidate name
maps back to exactly one entity id.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import NotFoundError
from .kgstore import KGStore, sample_neighbors

TEMPLATE_VERSION = "1"

_ANSWER_SUFFIX = "[Answer]: "


@dataclass
class PromptConfig:
    n_neighbors: int = 6
    desc_limit: int = 256
    lang: str = "en"
    seed: int = 0
    train_mode: bool = False
    keep_empty_sections: bool = True


@dataclass
class Prompt:
    query_text: str
    description_text: str
    neighbor_text: str
    candidate_text: str
    text: str
    candidates: list
    name_to_id: dict
    label_warnings: list = field(default_factory=list)

    def answer_to_id(self, name: str) -> int:
        if name not in self.name_to_id:
            raise NotFoundError(f"answer {name!r} is not a candidate name")
        return self.name_to_id[name]


def _label(store, kind, obj_id, lang, warnings_out):
    table = store.entities if kind == "entity" else store.relations
    if obj_id not in table:
        raise NotFoundError(f"unknown {kind} id {obj_id}")
    labels = table[obj_id].labels
    if lang not in labels:
        warnings_out.append(f"no {lang!r} label for {kind} {obj_id}; "
                            f"fell back to {min(labels)!r}")
    return store.label(kind, obj_id, lang)


def build_prompt(store: KGStore, train_triples, head: int, relation: int,
                 candidates, cfg: PromptConfig, gold: int | None = None) -> Prompt:
    """Render one prompt. `candidates` are store entity ids in retrieval
    order; `gold` is required in train mode (its position gets shuffled)."""
    if cfg.train_mode and (gold is None or gold not in candidates):
        raise ValueError("train mode needs the gold id inside the candidates")
    warnings_out: list = []
    rng = np.random.default_rng(cfg.seed)

    cand_list = list(candidates)
    if cfg.train_mode:
        cand_list.remove(gold)
        cand_list.insert(int(rng.integers(0, len(cand_list) + 1)), gold)

    h_label = _label(store, "entity", head, cfg.lang, warnings_out)
    r_label = _label(store, "relation", relation, cfg.lang, warnings_out)
    query_text = (f"Given a triplet with a missing tail entity t: "
                  f"({h_label}, {r_label}, t).")

    desc = store.description(head, cfg.lang)[: cfg.desc_limit]
    description_text = (f"The following provides descriptive information "
                        f"about entity {h_label}:\n{desc}")

    neighbors = sample_neighbors(store, train_triples, head, cfg.n_neighbors,
                                 cfg.seed)
    rendered = "; ".join(
        "({}, {}, {})".format(
            _label(store, "entity", t.head, cfg.lang, warnings_out),
            _label(store, "relation", t.relation, cfg.lang, warnings_out),
            _label(store, "entity", t.tail, cfg.lang, warnings_out))
        for t in neighbors)
    neighbor_text = (f"Here are some triplets containing entity {h_label}:\n"
                     f"[{rendered}]")

    names = [_label(store, "entity", c, cfg.lang, warnings_out) for c in cand_list]
    counts = Counter(names)
    names = [f"{n} ({c})" if counts[n] > 1 else n for n, c in zip(names, cand_list)]
    candidate_text = (f"What is the entity name of t? Select one from the "
                      f"list of entities below: [{'; '.join(names)}]")

    sections = [query_text, description_text]
    if neighbors or cfg.keep_empty_sections:
        sections.append(neighbor_text)
    sections.append(candidate_text)
    text = "\n\n".join(sections) + "\n\n" + _ANSWER_SUFFIX

    return Prompt(query_text, description_text, neighbor_text, candidate_text,
                  text, cand_list, dict(zip(names, cand_list)), warnings_out)


def prompt_record(prompt: Prompt, head: int, relation: int, lang: str,
                  gold: int | None) -> dict:
    """JSON-lines export row for one rendered prompt."""
    return {
        "query": {"h": head, "r": relation, "lang": lang},
        "prompt": prompt.text,
        "gold": gold,
        "candidates": list(prompt.candidates),
    }
