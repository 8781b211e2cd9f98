"""Numpy reference implementation of the hot kernels.

Semantics are shared with the compiled twin in `_native.pyx`: sequential
updates in the given order, read-before-write within one step. All
randomness (negative ids, corruption side, visit order) is pre-generated
by the caller so both backends consume identical draws.
"""

from __future__ import annotations

import numpy as np


def transe_epoch(entities, relations, heads, rels, tails,
                 neg_entities, corrupt_head, order, lr, margin):
    """One SGD epoch of margin-ranking training over translation embeddings.

    Updates `entities` and `relations` in place and returns the summed
    violation loss max(0, margin + d(pos) - d(neg)) measured before each
    update. `neg_entities[i, k]` is the k-th corruption for triple i and
    `corrupt_head[i, k]` selects which side it replaces.
    """
    total = 0.0
    n_neg = neg_entities.shape[1]
    for idx in order:
        h, r, t = heads[idx], rels[idx], tails[idx]
        for k in range(n_neg):
            cand = neg_entities[idx, k]
            if corrupt_head[idx, k]:
                hn, tn = cand, t
            else:
                hn, tn = h, cand
            pos = entities[h] + relations[r] - entities[t]
            neg = entities[hn] + relations[r] - entities[tn]
            d_pos = np.sqrt(pos @ pos)
            d_neg = np.sqrt(neg @ neg)
            viol = margin + d_pos - d_neg
            if viol <= 0.0:
                continue
            total += viol
            u_pos = pos / d_pos if d_pos > 1e-12 else np.zeros_like(pos)
            u_neg = neg / d_neg if d_neg > 1e-12 else np.zeros_like(neg)
            # read-then-write: all four unit directions are fixed before
            # any row is touched, so coinciding ids accumulate correctly
            entities[h] -= lr * u_pos
            entities[t] += lr * u_pos
            relations[r] -= lr * (u_pos - u_neg)
            entities[hn] += lr * u_neg
            entities[tn] -= lr * u_neg
    return total


def renorm_rows(mat, tol=1e-12):
    """Project rows onto the unit sphere, skipping rows already within
    `tol` of unit norm (keeps no-op epochs bit-identical) and zero rows."""
    norms = np.sqrt(np.einsum("ij,ij->i", mat, mat))
    mask = (norms > 1e-300) & (np.abs(norms - 1.0) > tol)
    if mask.any():
        mat[mask] /= norms[mask, None]


def all_tail_scores(entities, e_h, e_r):
    """Score -||e_h + e_r - e_t||_2 against every entity row (higher = better)."""
    diff = entities - (e_h + e_r)
    return -np.sqrt(np.einsum("ij,ij->i", diff, diff))
