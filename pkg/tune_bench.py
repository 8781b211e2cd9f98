"""Scratch tuning harness for the acceptance benchmark (not shipped)."""
import sys
import time
from dataclasses import replace

import numpy as np

from mkgc.experiments import PipelineConfig, build_context, run_arm
from mkgc.kgstore import SyntheticConfig
from mkgc.kge import TransEConfig
from mkgc.selector import SelectorConfig, TrainConfig


def bench_cfg(seed, **over):
    data = SyntheticConfig(
        n_entities=over.get("n_entities", 120),
        n_relations=over.get("n_relations", 12),
        languages=("en", "fr"),
        shared_fraction=over.get("shared_fraction", 0.7),
        n_facts=over.get("n_facts", 700),
        n_types=4,
        anchored_fraction=over.get("anchored_fraction", 0.7),
    )
    return PipelineConfig(
        data=data,
        ratios=(0.6, 0.25, 0.15),
        prompt_fraction=over.get("prompt_fraction", 0.85),
        kge=TransEConfig(dim=32, margin=1.0, lr=0.05, epochs=80,
                         negatives_per_positive=2),
        selector=SelectorConfig(hidden=over.get("hidden", 40), n_blocks=2,
                                n_groups=4, n_members=2, rank=4,
                                head_init=over.get("head_init", "orthogonal"),
                                head_trainable=over.get("head_trainable", True)),
        train=TrainConfig(lr=over.get("lr", 0.01),
                          epochs=over.get("epochs", 15), batch_size=16),
        m_eval=20, m_min=over.get("m_min", 11), m_max=20, n_rounds=10,
        master_seed=seed,
    )


def trend_and_ablation(seeds, **over):
    t0 = time.time()
    rows = []
    for seed in seeds:
        ctx = build_context(bench_cfg(seed, **over))
        arms = {arm: run_arm(ctx, arm) for arm in ("full", "wo_kg", "wo_kg_ier")}
        full = arms["full"]
        curve = {c["round"]: c for c in full.curve}
        rows.append({
            "seed": seed,
            "mrr_full": full.report.avg.mrr,
            "mrr_wokg": arms["wo_kg"].report.avg.mrr,
            "mrr_wokgier": arms["wo_kg_ier"].report.avg.mrr,
            "h3_1": curve[1]["h3"], "h3_3": curve[3]["h3"], "h3_10": curve[10]["h3"],
            "mrr_1": curve[1]["mrr"], "mrr_3": curve[3]["mrr"], "mrr_10": curve[10]["mrr"],
            "h1_full": full.report.avg.h1, "h1_base": full.baseline.avg.h1,
        })
    mean = lambda k: np.mean([r[k] for r in rows])
    print(f"--- over={over} ({time.time()-t0:.0f}s)")
    print(f"ablation: full={mean('mrr_full'):.3f} wo_kg={mean('mrr_wokg'):.3f} "
          f"wo_kg_ier={mean('mrr_wokgier'):.3f} "
          f"ok={mean('mrr_full')>=mean('mrr_wokg')>=mean('mrr_wokgier')}")
    print(f"trend h3: {mean('h3_1'):.3f} -> {mean('h3_3'):.3f} -> {mean('h3_10'):.3f} "
          f"ok={mean('h3_1')<=mean('h3_3')<=mean('h3_10')}")
    print(f"trend mrr: {mean('mrr_1'):.3f} -> {mean('mrr_3'):.3f} -> {mean('mrr_10'):.3f} "
          f"ok={mean('mrr_1')<=mean('mrr_3')<=mean('mrr_10')}")
    print(f"vs baseline h1: {mean('h1_full'):.3f} vs {mean('h1_base'):.3f}")
    for r in rows:
        print("   ", {k: round(v, 3) if isinstance(v, float) else v for k, v in r.items()})


if __name__ == "__main__":
    seeds = [0, 1, 2, 3, 4]
    overrides = eval(sys.argv[1]) if len(sys.argv) > 1 else {}
    trend_and_ablation(seeds, **overrides)
