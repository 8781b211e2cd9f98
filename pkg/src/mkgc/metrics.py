"""Link-prediction metrics: Hits@{1,3,10} and MRR, per language and averaged.

The average is the unweighted arithmetic mean over languages present in
the input, independent of per-language sample counts.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass


@dataclass(frozen=True)
class Metrics:
    h1: float
    h3: float
    h10: float
    mrr: float
    n: int

    def as_dict(self):
        return {"h1": self.h1, "h3": self.h3, "h10": self.h10,
                "mrr": self.mrr, "n": self.n}


@dataclass
class MetricsReport:
    per_language: dict
    avg: Metrics
    n: int
    config_digest: str = ""


def _from_ranks(ranks) -> Metrics:
    n = len(ranks)
    return Metrics(
        h1=sum(r <= 1 for r in ranks) / n,
        h3=sum(r <= 3 for r in ranks) / n,
        h10=sum(r <= 10 for r in ranks) / n,
        mrr=sum(1.0 / r for r in ranks) / n,
        n=n,
    )


def compute_metrics(ranks, config_digest: str = "") -> MetricsReport:
    """Build a report from (rank, language) pairs; ranks are 1-based."""
    by_lang = defaultdict(list)
    count = 0
    for rank, lang in ranks:
        if rank < 1:
            raise ValueError(f"ranks are 1-based, got {rank}")
        by_lang[lang].append(rank)
        count += 1
    if count == 0:
        raise ValueError("no ranks to aggregate")

    per_language = {lang: _from_ranks(rs) for lang, rs in sorted(by_lang.items())}
    k = len(per_language)
    avg = Metrics(
        h1=sum(m.h1 for m in per_language.values()) / k,
        h3=sum(m.h3 for m in per_language.values()) / k,
        h10=sum(m.h10 for m in per_language.values()) / k,
        mrr=sum(m.mrr for m in per_language.values()) / k,
        n=count,
    )
    return MetricsReport(per_language, avg, count, config_digest)


def report_to_json(report: MetricsReport) -> dict:
    """Fixed export schema: {metrics: {lang: {...}}, avg: {...}, config_digest, n}."""
    return {
        "metrics": {lang: m.as_dict() for lang, m in report.per_language.items()},
        "avg": report.avg.as_dict(),
        "config_digest": report.config_digest,
        "n": report.n,
    }
