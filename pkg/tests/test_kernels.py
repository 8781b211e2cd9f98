import numpy as np
import pytest

from mkgc import kernels
from mkgc.kernels import reference

try:
    from mkgc.kernels import _native
except ImportError:
    _native = None

BACKENDS = [reference] if _native is None else [reference, _native]


def make_epoch_inputs(seed, n_ent=12, n_rel=3, n_triples=30, dim=6, n_neg=2):
    rng = np.random.default_rng(seed)
    ent = rng.normal(size=(n_ent, dim))
    ent /= np.linalg.norm(ent, axis=1, keepdims=True)
    rel = rng.normal(size=(n_rel, dim))
    rel /= np.linalg.norm(rel, axis=1, keepdims=True)
    heads = rng.integers(0, n_ent, n_triples)
    rels = rng.integers(0, n_rel, n_triples)
    tails = rng.integers(0, n_ent, n_triples)
    negs = rng.integers(0, n_ent, (n_triples, n_neg))
    corrupt = rng.integers(0, 2, (n_triples, n_neg)).astype(np.uint8)
    order = rng.permutation(n_triples)
    return ent, rel, heads, rels, tails, negs, corrupt, order


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
class TestEpochKernel:
    def test_deterministic_bitwise(self, impl):
        ent0, rel0, *rest = make_epoch_inputs(0)
        runs = []
        for _ in range(2):
            ent, rel = ent0.copy(), rel0.copy()
            loss = impl.transe_epoch(ent, rel, *rest, 0.05, 1.0)
            runs.append((ent.tobytes(), rel.tobytes(), loss))
        assert runs[0] == runs[1]

    def test_zero_lr_is_identity(self, impl):
        ent0, rel0, *rest = make_epoch_inputs(1)
        ent, rel = ent0.copy(), rel0.copy()
        impl.transe_epoch(ent, rel, *rest, 0.0, 1.0)
        assert ent.tobytes() == ent0.tobytes()
        assert rel.tobytes() == rel0.tobytes()

    def test_update_matches_finite_difference_gradient(self, impl):
        # single violated triple: parameter delta / lr must equal -dL/dtheta
        rng = np.random.default_rng(3)
        dim = 5
        ent0 = rng.normal(size=(3, dim))
        rel0 = rng.normal(size=(1, dim))
        args = (np.array([0]), np.array([0]), np.array([1]),
                np.array([[2]]), np.array([[0]], dtype=np.uint8), np.array([0]))
        lr = 1e-7

        def loss_at(ent, rel):
            pos = ent[0] + rel[0] - ent[1]
            neg = ent[0] + rel[0] - ent[2]
            return max(0.0, 1.0 + np.linalg.norm(pos) - np.linalg.norm(neg))

        assert loss_at(ent0, rel0) > 0.1, "fixture must sit inside the violated region"
        ent, rel = ent0.copy(), rel0.copy()
        impl.transe_epoch(ent, rel, *args, lr, 1.0)
        analytic_ent = (ent0 - ent) / lr
        analytic_rel = (rel0 - rel) / lr

        eps = 1e-6
        for arr0, analytic in ((ent0, analytic_ent), (rel0, analytic_rel)):
            fd = np.zeros_like(arr0)
            for i in range(arr0.shape[0]):
                for j in range(dim):
                    hi, lo = ent0.copy(), ent0.copy()
                    rhi, rlo = rel0.copy(), rel0.copy()
                    (hi if arr0 is ent0 else rhi)[i, j] += eps
                    (lo if arr0 is ent0 else rlo)[i, j] -= eps
                    fd[i, j] = (loss_at(hi, rhi) - loss_at(lo, rlo)) / (2 * eps)
            np.testing.assert_allclose(analytic, fd, atol=1e-5)

    def test_loss_is_sum_of_violations(self, impl):
        ent0, rel0, heads, rels, tails, negs, corrupt, order = make_epoch_inputs(4)
        ent, rel = ent0.copy(), rel0.copy()
        loss = impl.transe_epoch(ent, rel, heads, rels, tails, negs, corrupt,
                                 order, 0.0, 1.0)
        expected = 0.0
        for idx in order:
            for k in range(negs.shape[1]):
                h, r, t = heads[idx], rels[idx], tails[idx]
                hn, tn = (negs[idx, k], t) if corrupt[idx, k] else (h, negs[idx, k])
                d_pos = np.linalg.norm(ent0[h] + rel0[r] - ent0[t])
                d_neg = np.linalg.norm(ent0[hn] + rel0[r] - ent0[tn])
                expected += max(0.0, 1.0 + d_pos - d_neg)
        assert loss == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
class TestRenorm:
    def test_rows_projected_to_unit_norm(self, impl):
        rng = np.random.default_rng(5)
        mat = rng.normal(size=(8, 4)) * 3.0
        impl.renorm_rows(mat)
        np.testing.assert_allclose(np.linalg.norm(mat, axis=1), 1.0, atol=1e-12)

    def test_near_unit_rows_untouched_bitwise(self, impl):
        rng = np.random.default_rng(6)
        mat = rng.normal(size=(5, 4))
        mat /= np.linalg.norm(mat, axis=1, keepdims=True)
        before = mat.tobytes()
        impl.renorm_rows(mat)
        assert mat.tobytes() == before

    def test_zero_row_left_alone(self, impl):
        mat = np.zeros((2, 3))
        mat[1] = [0.0, 2.0, 0.0]
        impl.renorm_rows(mat)
        assert np.array_equal(mat[0], np.zeros(3))
        np.testing.assert_allclose(mat[1], [0.0, 1.0, 0.0])


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_all_tail_scores_matches_direct_norms(impl):
    rng = np.random.default_rng(7)
    ent = rng.normal(size=(20, 6))
    e_h, e_r = rng.normal(size=6), rng.normal(size=6)
    scores = impl.all_tail_scores(ent, e_h, e_r)
    expected = -np.linalg.norm(ent - (e_h + e_r), axis=1)
    np.testing.assert_allclose(scores, expected, rtol=1e-12)


@pytest.mark.skipif(_native is None, reason="compiled kernels unavailable")
def test_backends_agree_on_full_epoch():
    ent0, rel0, *rest = make_epoch_inputs(8)
    results = []
    for impl in (reference, _native):
        ent, rel = ent0.copy(), rel0.copy()
        loss = impl.transe_epoch(ent, rel, *rest, 0.05, 1.0)
        results.append((ent, rel, loss))
    np.testing.assert_allclose(results[0][0], results[1][0], rtol=1e-10)
    np.testing.assert_allclose(results[0][1], results[1][1], rtol=1e-10)
    assert results[0][2] == pytest.approx(results[1][2], rel=1e-10)


def test_active_backend_exported():
    assert kernels.BACKEND in ("reference", "native")
    assert callable(kernels.transe_epoch)
