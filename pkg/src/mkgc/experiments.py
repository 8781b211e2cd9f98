"""End-to-end experiment orchestration.

One pipeline run: synthesize (or accept) a multilingual KG, split it,
train translation embeddings, build selector training examples from the
prompt subset, train the selector, then evaluate test queries by
iteratively reranking the KGE candidates with the trained selector.

Every stage draws its seed from one master seed (SeedSequence fork), so
ablation arms share identical data, embeddings, and examples and differ
only through the model path. Metrics JSON is bit-reproducible for a
fixed config.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import kge, rerank, selector
from .configio import config_digest
from .errors import ConfigError
from .kgstore import KGStore, Split, SyntheticConfig, gen_synthetic, make_splits
from .metrics import MetricsReport, compute_metrics
from .selector import SelectorConfig, SelectorModel, TrainConfig

ABLATION_ARMS = ("full", "wo_kg", "wo_kg_ier")


@dataclass
class PipelineConfig:
    data: SyntheticConfig = field(default_factory=SyntheticConfig)
    ratios: tuple = (0.6, 0.25, 0.15)
    split_mode: str = "surface"
    prompt_fraction: float = 0.8
    kge: kge.TransEConfig = field(default_factory=lambda: kge.TransEConfig(
        dim=32, margin=1.0, lr=0.05, epochs=80, negatives_per_positive=2))
    selector: SelectorConfig = field(default_factory=lambda: SelectorConfig(
        hidden=48, n_blocks=2, n_groups=4, n_members=2, rank=4,
        head_init="orthogonal"))
    train: TrainConfig = field(default_factory=lambda: TrainConfig(
        lr=0.01, epochs=25, batch_size=16))
    m_eval: int = 20
    m_min: int = 15
    m_max: int = 20
    n_rounds: int = 10
    ablation: str = "full"
    training_languages: tuple | None = None
    language_proportions: dict | None = None
    n_examples: int | None = None
    master_seed: int = 0

    def validate(self):
        if self.ablation not in ABLATION_ARMS:
            raise ConfigError(f"ablation must be one of {ABLATION_ARMS}")
        if self.language_proportions is not None:
            total = sum(self.language_proportions.values())
            if abs(total - 1.0) > 1e-9:
                raise ConfigError(f"language proportions sum to {total}, not 1")
            unknown = set(self.language_proportions) - set(self.data.languages)
            if unknown:
                raise ConfigError(f"proportions name unknown languages {unknown}")
        if self.training_languages is not None:
            unknown = set(self.training_languages) - set(self.data.languages)
            if unknown:
                raise ConfigError(f"training languages not in dataset: {unknown}")
        if not 1 <= self.m_min <= self.m_max <= self.m_eval:
            raise ConfigError("need 1 <= m_min <= m_max <= m_eval")
        if not 1 <= self.n_rounds <= self.m_eval:
            raise ConfigError("need 1 <= n_rounds <= m_eval")

    def digest(self) -> str:
        return config_digest(asdict(self))


def fork_seeds(master_seed: int) -> dict:
    names = ("data", "split", "kge", "examples", "resample", "selector", "train")
    children = np.random.SeedSequence(master_seed).spawn(len(names))
    return {n: int(c.generate_state(1)[0]) for n, c in zip(names, children)}


def _dense(store: KGStore, triple):
    return (store.ent_index[triple.head], store.rel_index[triple.relation],
            store.ent_index[triple.tail], triple.lang)


def known_tails_dense(store: KGStore, triples) -> dict:
    """Content-level (head, relation) -> tail-index set, language-pooled."""
    known = defaultdict(set)
    for t in triples:
        h, r, ti, _ = _dense(store, t)
        known[(h, r)].add(ti)
    return known


@dataclass
class PipelineContext:
    """Everything the ablation arms share: data, embeddings, examples."""

    cfg: PipelineConfig
    seeds: dict
    store: KGStore
    split: Split
    table: kge.EmbeddingTable
    kge_losses: list
    known: dict
    examples: list
    dropped_examples: int
    example_languages: dict


def _resample_examples(examples, proportions, total, seed):
    """Per-language resampling to fixed proportions at constant total; a
    language pool smaller than its quota is drawn with replacement."""
    pools = defaultdict(list)
    for ex in examples:
        pools[ex.lang].append(ex)
    missing = [lang for lang in proportions if not pools.get(lang)]
    if missing:
        raise ConfigError(f"no examples available for languages {missing}")
    rng = np.random.default_rng(seed)
    quotas = {lang: int(round(p * total)) for lang, p in proportions.items()}
    out = []
    for lang in sorted(quotas):
        pool = pools[lang]
        quota = quotas[lang]
        replace_draw = quota > len(pool)
        idx = rng.choice(len(pool), size=quota, replace=replace_draw)
        out.extend(pool[i] for i in idx)
    return out


def build_context(cfg: PipelineConfig) -> PipelineContext:
    cfg.validate()
    seeds = fork_seeds(cfg.master_seed)

    store, _ = gen_synthetic(replace(cfg.data, seed=seeds["data"]))
    split = make_splits(store, cfg.ratios, seeds["split"], cfg.split_mode,
                        cfg.prompt_fraction)

    heads, rels, tails = zip(*[_dense(store, t)[:3] for t in split.train])
    table, losses = kge.train(np.array(heads), np.array(rels), np.array(tails),
                              store.n_entities, store.n_relations,
                              replace(cfg.kge, seed=seeds["kge"]))

    known = known_tails_dense(store, split.non_test())

    def retrieve_fn(h, r, gold, m):
        exclude = known.get((h, r), set()) - {gold}
        ids, _ = kge.retrieve(table, h, r, m, exclude)
        return ids.tolist()

    queries = [_dense(store, t) for t in split.prompt_subset]
    queries = [(h, r, t, lang) for h, r, t, lang in queries
               if cfg.training_languages is None or lang in cfg.training_languages]
    if not queries:
        raise ConfigError("no selector training queries left after filtering")
    examples, dropped = selector.build_examples(
        queries, retrieve_fn, m_min=cfg.m_min, m_max=cfg.m_max,
        seed=seeds["examples"])
    if cfg.language_proportions is not None:
        total = cfg.n_examples or len(examples)
        examples = _resample_examples(examples, cfg.language_proportions,
                                      total, seeds["resample"])
    elif cfg.n_examples is not None and cfg.n_examples < len(examples):
        rng = np.random.default_rng(seeds["resample"])
        idx = rng.choice(len(examples), size=cfg.n_examples, replace=False)
        examples = [examples[i] for i in sorted(idx)]

    langs = defaultdict(int)
    for ex in examples:
        langs[ex.lang] += 1
    return PipelineContext(cfg, seeds, store, split, table, losses, known,
                           examples, dropped, dict(langs))


@dataclass
class ArmResult:
    ablation: str
    report: MetricsReport
    baseline: MetricsReport
    curve: list
    routing_rows: list
    selector_losses: list
    picks: list


def _selector_config_for(cfg: PipelineConfig, ablation: str) -> SelectorConfig:
    base = cfg.selector
    if ablation == "full":
        return base
    return replace(base, adapter_kind="plain")


def run_arm(ctx: PipelineContext, ablation: str) -> ArmResult:
    """Train the selector for one ablation arm and evaluate with reranking."""
    cfg = ctx.cfg
    n_rounds = 1 if ablation == "wo_kg_ier" else cfg.n_rounds
    model = SelectorModel(ctx.store.n_entities, ctx.store.n_relations,
                          replace(_selector_config_for(cfg, ablation),
                                  seed=ctx.seeds["selector"]))
    sel_losses = selector.train_selector(
        model, ctx.examples, replace(cfg.train, seed=ctx.seeds["train"]))

    def scorer(query, remaining):
        return model.select(query[0], query[1], remaining)[0]

    digest = config_digest({"pipeline": asdict(cfg), "ablation": ablation})
    ranks, base_ranks, routing_rows, picks = [], [], [], []
    per_round_ranks = defaultdict(list)
    for sample_id, triple in enumerate(ctx.split.test):
        h, r, gold, lang = _dense(ctx.store, triple)
        exclude = ctx.known.get((h, r), set()) - {gold}
        cands, _ = kge.retrieve(ctx.table, h, r, cfg.m_eval, exclude)
        cands = cands.tolist()
        fallback = kge.rank_of(ctx.table, h, r, gold, exclude)
        base_ranks.append((fallback, lang))

        rounds = min(n_rounds, len(cands))
        final, trace = rerank.rerank_trace((h, r), cands, scorer, rounds)
        ranks.append((rerank.final_rank(final, gold, fallback), lang))
        picks.append({"query": {"h": h, "r": r, "lang": lang},
                      "final_order": final, "picks": [s.pick for s in trace],
                      "n_t": rounds})

        pick_seq = [s.pick for s in trace]
        for t in range(1, rounds + 1):
            partial = pick_seq[:t] + [e for e in cands if e not in pick_seq[:t]]
            per_round_ranks[t].append(
                (rerank.final_rank(partial, gold, fallback), lang))

        _, _, decisions = model.select(h, r, tuple(cands))
        for layer, d in enumerate(decisions):
            routing_rows.append({
                "sample": sample_id, "lang": lang, "relation": r,
                "layer": layer, "group": d.group_index, "expert": d.expert_index,
            })

    report = compute_metrics(ranks, digest)
    baseline = compute_metrics(base_ranks, digest)
    curve = []
    for t in sorted(per_round_ranks):
        m = compute_metrics(per_round_ranks[t]).avg
        curve.append({"round": t, "h1": m.h1, "h3": m.h3, "h10": m.h10,
                      "mrr": m.mrr})
    return ArmResult(ablation, report, baseline, curve, routing_rows,
                     sel_losses, picks)


def run_pipeline(cfg: PipelineConfig) -> ArmResult:
    return run_arm(build_context(cfg), cfg.ablation)


def run_ablation_suite(cfg: PipelineConfig, arms=ABLATION_ARMS) -> dict:
    """All ablation arms over one shared context (same data/KGE/examples)."""
    ctx = build_context(cfg)
    return {arm: run_arm(ctx, arm) for arm in arms}


def routing_frequency_tables(routing_rows, languages=None, relations=None):
    """Wide count tables from a routing log.

    Returns (lang_table, rel_table): each a (header, rows) pair where rows
    are keyed by (layer, group, expert) and columns count selections per
    language / per relation.
    """
    if not routing_rows:
        raise ValueError("empty routing log")
    languages = sorted(languages or {r["lang"] for r in routing_rows})
    relations = sorted(relations or {r["relation"] for r in routing_rows})
    experts = sorted({(r["layer"], r["group"], r["expert"]) for r in routing_rows})

    lang_counts = defaultdict(int)
    rel_counts = defaultdict(int)
    for row in routing_rows:
        key = (row["layer"], row["group"], row["expert"])
        lang_counts[key + (row["lang"],)] += 1
        rel_counts[key + (row["relation"],)] += 1

    lang_header = ["layer", "group", "expert", *languages]
    lang_rows = [[*key, *[lang_counts[key + (lang,)] for lang in languages]]
                 for key in experts]
    rel_header = ["layer", "group", "expert", *[f"rel{r}" for r in relations]]
    rel_rows = [[*key, *[rel_counts[key + (rel,)] for rel in relations]]
                for key in experts]
    return (lang_header, lang_rows), (rel_header, rel_rows)


def write_csv(header, rows, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(map(str, header)) + "\n")
        for row in rows:
            fh.write(",".join(map(str, row)) + "\n")


def flops_forward(hidden: int, n_blocks: int, adapter_kind: str = "grouped",
                  n_groups: int = 4, n_members: int = 2, rank: int = 0,
                  m_candidates: int = 25, avg_tokens: float = 1.0) -> dict:
    """Analytic multiply-add count for one forward pass (comparative only).

    dense  = per-token mixing + frozen FFN matvecs, 4*d^2 per block
    adapter = routing plus one expert's down/up projections per block
    head   = query projection plus one dot per candidate

    `avg_tokens` scales the per-token block work. A zero-size adapter
    (kind "none" or rank 0) leaves exactly the host cost.
    """
    if hidden < 1 or n_blocks < 1 or m_candidates < 1:
        raise ValueError("hidden, n_blocks, and m_candidates must be >= 1")
    d = hidden
    dense = n_blocks * avg_tokens * (2 * d * d + 2 * d * d)
    if adapter_kind == "none" or rank == 0:
        adapter_cost = 0.0
    elif adapter_kind == "plain":
        adapter_cost = n_blocks * avg_tokens * (2 * rank * d + 2 * d * rank)
    elif adapter_kind == "grouped":
        routing = 2 * n_groups * d + 2 * n_members * d + 2 * n_members * rank
        adapter_cost = n_blocks * avg_tokens * (routing + 2 * rank * d + 2 * d * rank)
    else:
        raise ValueError(f"unknown adapter kind {adapter_kind!r}")
    head = 2 * d * d + 2 * m_candidates * d
    total = dense + adapter_cost + head
    return {"dense": dense, "adapter": adapter_cost, "head": head, "total": total}
