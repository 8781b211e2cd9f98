# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of kernels.reference; same call signatures and semantics."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, fabs


def transe_epoch(double[:, ::1] entities, double[:, ::1] relations,
                 long[::1] heads, long[::1] rels, long[::1] tails,
                 long[:, ::1] neg_entities, unsigned char[:, ::1] corrupt_head,
                 long[::1] order, double lr, double margin):
    cdef Py_ssize_t dim = entities.shape[1]
    cdef Py_ssize_t n_neg = neg_entities.shape[1]
    cdef Py_ssize_t i, k, j, idx
    cdef long h, r, t, hn, tn, cand
    cdef double d_pos, d_neg, viol, p, n, up, un, total = 0.0
    cdef double[::1] u_pos = np.empty(dim)
    cdef double[::1] u_neg = np.empty(dim)

    for i in range(order.shape[0]):
        idx = order[i]
        h = heads[idx]
        r = rels[idx]
        t = tails[idx]
        for k in range(n_neg):
            cand = neg_entities[idx, k]
            if corrupt_head[idx, k]:
                hn = cand
                tn = t
            else:
                hn = h
                tn = cand
            d_pos = 0.0
            d_neg = 0.0
            for j in range(dim):
                p = entities[h, j] + relations[r, j] - entities[t, j]
                n = entities[hn, j] + relations[r, j] - entities[tn, j]
                u_pos[j] = p
                u_neg[j] = n
                d_pos += p * p
                d_neg += n * n
            d_pos = sqrt(d_pos)
            d_neg = sqrt(d_neg)
            viol = margin + d_pos - d_neg
            if viol <= 0.0:
                continue
            total += viol
            for j in range(dim):
                up = u_pos[j] / d_pos if d_pos > 1e-12 else 0.0
                un = u_neg[j] / d_neg if d_neg > 1e-12 else 0.0
                u_pos[j] = up
                u_neg[j] = un
            for j in range(dim):
                entities[h, j] -= lr * u_pos[j]
            for j in range(dim):
                entities[t, j] += lr * u_pos[j]
            for j in range(dim):
                relations[r, j] -= lr * (u_pos[j] - u_neg[j])
            for j in range(dim):
                entities[hn, j] += lr * u_neg[j]
            for j in range(dim):
                entities[tn, j] -= lr * u_neg[j]
    return total


def renorm_rows(double[:, ::1] mat, double tol=1e-12):
    cdef Py_ssize_t i, j
    cdef double norm
    for i in range(mat.shape[0]):
        norm = 0.0
        for j in range(mat.shape[1]):
            norm += mat[i, j] * mat[i, j]
        norm = sqrt(norm)
        if norm > 1e-300 and fabs(norm - 1.0) > tol:
            for j in range(mat.shape[1]):
                mat[i, j] /= norm


def all_tail_scores(double[:, ::1] entities, double[::1] e_h, double[::1] e_r):
    cdef Py_ssize_t n = entities.shape[0]
    cdef Py_ssize_t dim = entities.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc, d
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    for i in range(n):
        acc = 0.0
        for j in range(dim):
            d = entities[i, j] - (e_h[j] + e_r[j])
            acc += d * d
        out[i] = -sqrt(acc)
    return out_arr
