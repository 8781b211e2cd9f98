"""Multilingual knowledge-graph completion at desk scale.

Pipeline: translation-embedding candidate retrieval, a grouped
mixture-of-experts low-rank adapter with sample-level routing inside a
small frozen host model, and iterative entity reranking, plus synthetic
multilingual KGs, link-prediction metrics, and experiment tooling.
"""

__version__ = "0.1.0"
