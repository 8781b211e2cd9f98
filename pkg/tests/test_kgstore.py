import json
from collections import Counter, defaultdict

import numpy as np
import pytest

from mkgc import kgstore
from mkgc.errors import ConfigError, NotFoundError, ParseError
from mkgc.kgstore import SyntheticConfig, Triple

LANGS5 = ("en", "fr", "it", "ja", "zh")


def write_fixture(tmp_path, triples, n_entities=6, n_relations=2, langs=LANGS5):
    tp = tmp_path / "triples.tsv"
    ep = tmp_path / "entities.jsonl"
    rp = tmp_path / "relations.jsonl"
    tp.write_text("".join(f"{h}\t{r}\t{t}\t{lang}\n" for h, r, t, lang in triples))
    with ep.open("w") as fh:
        for e in range(n_entities):
            fh.write(json.dumps({"id": e, "labels": {l: f"{l}:e{e}" for l in langs},
                                 "descriptions": {l: f"{l} about {e}" for l in langs}}) + "\n")
    with rp.open("w") as fh:
        for r in range(n_relations):
            fh.write(json.dumps({"id": r, "labels": {l: f"{l}:r{r}" for l in langs}}) + "\n")
    return tp, ep, rp


class TestIngest:
    def test_per_language_counts_match_line_counts(self, tmp_path):
        rows = []
        for i, lang in enumerate(LANGS5):
            for j in range(i + 1):  # distinct count per language
                rows.append((j % 3, j % 2, 3 + (j % 3), lang))
        paths = write_fixture(tmp_path, rows)
        store = kgstore.ingest(*paths, languages=LANGS5)
        per_lang = store.stats()["per_language"]
        expected = Counter(lang for *_, lang in rows)
        assert per_lang == dict(expected)

    def test_dangling_tail_names_line(self, tmp_path):
        rows = [(0, 0, 1, "en"), (1, 0, 99, "en")]
        paths = write_fixture(tmp_path, rows)
        with pytest.raises(ParseError, match=r"triples.tsv:2: dangling tail id 99"):
            kgstore.ingest(*paths, languages=LANGS5)

    def test_malformed_line_names_location(self, tmp_path):
        paths = write_fixture(tmp_path, [(0, 0, 1, "en")])
        paths[0].write_text("0\t0\t1\ten\nnot-enough-fields\n")
        with pytest.raises(ParseError, match=r":2"):
            kgstore.ingest(*paths, languages=LANGS5)

    def test_unknown_language_is_config_error(self, tmp_path):
        paths = write_fixture(tmp_path, [(0, 0, 1, "xx")])
        with pytest.raises(ConfigError, match="xx"):
            kgstore.ingest(*paths, languages=LANGS5)

    def test_roundtrip_is_identical(self, tmp_path):
        store, _ = kgstore.gen_synthetic(SyntheticConfig(
            n_entities=30, n_relations=8, n_facts=50, seed=3))
        out = tmp_path / "out"
        out.mkdir()
        paths = (out / "t.tsv", out / "e.jsonl", out / "r.jsonl")
        kgstore.export_store(store, *paths)
        again = kgstore.ingest(*paths, languages=store.languages)
        assert sorted(again.triples) == sorted(store.triples)
        assert {e: store.entities[e].labels for e in store.entities} == \
               {e: again.entities[e].labels for e in again.entities}
        # export of the re-ingested store is byte-identical (canonical order)
        paths2 = (out / "t2.tsv", out / "e2.jsonl", out / "r2.jsonl")
        kgstore.export_store(again, *paths2)
        for a, b in zip(paths, paths2):
            assert a.read_bytes() == b.read_bytes()


class TestNeighbors:
    @pytest.fixture
    def store(self):
        entities = [kgstore.Entity(i, {"en": f"e{i}"}) for i in range(5)]
        relations = [kgstore.Relation(0, {"en": "r0"})]
        triples = [Triple(0, 0, 1, "en"), Triple(2, 0, 0, "en"),
                   Triple(3, 0, 4, "en"), Triple(0, 0, 3, "en"),
                   Triple(4, 0, 0, "en")]
        return kgstore.KGStore(entities, relations, triples, ("en",))

    def test_fewer_than_k_returns_all(self, store):
        got = kgstore.sample_neighbors(store, store.triples, 3, k=6, seed=0)
        assert sorted(got) == [Triple(0, 0, 3, "en"), Triple(3, 0, 4, "en")]

    def test_k_zero_gives_empty(self, store):
        assert kgstore.sample_neighbors(store, store.triples, 0, k=0, seed=0) == []

    def test_seed_deterministic_without_replacement(self, store):
        a = kgstore.sample_neighbors(store, store.triples, 0, k=2, seed=42)
        b = kgstore.sample_neighbors(store, store.triples, 0, k=2, seed=42)
        assert a == b and len(set(a)) == 2

    def test_unknown_entity(self, store):
        with pytest.raises(NotFoundError):
            kgstore.sample_neighbors(store, store.triples, 10**6, k=1, seed=0)


class TestSynthetic:
    def test_fully_shared_has_equal_per_language_counts(self):
        store, manifest = kgstore.gen_synthetic(SyntheticConfig(
            n_entities=40, n_relations=5, n_facts=80, shared_fraction=1.0,
            languages=("en", "fr", "it"), seed=0))
        counts = store.stats()["per_language"]
        assert len(set(counts.values())) == 1
        assert all(len(m["shared_in"]) == 3 for m in manifest)

    def test_zero_sharing_keeps_content_monolingual(self):
        store, _ = kgstore.gen_synthetic(SyntheticConfig(
            n_entities=40, n_relations=5, n_facts=80, shared_fraction=0.0, seed=0))
        langs_per_content = defaultdict(set)
        for t in store.triples:
            langs_per_content[t.content].add(t.lang)
        assert all(len(v) == 1 for v in langs_per_content.values())

    def test_measured_share_close_to_request(self):
        cfg = SyntheticConfig(n_entities=200, n_relations=10, n_facts=600,
                              shared_fraction=0.5, seed=7)
        _, manifest = kgstore.gen_synthetic(cfg)
        measured = np.mean([len(m["shared_in"]) > 1 for m in manifest])
        assert abs(measured - 0.5) <= 0.05

    def test_bit_reproducible(self):
        cfg = SyntheticConfig(seed=11)
        (s1, m1), (s2, m2) = kgstore.gen_synthetic(cfg), kgstore.gen_synthetic(cfg)
        assert s1.triples == s2.triples and m1 == m2

    def test_infeasible_config_rejected(self):
        with pytest.raises(ConfigError):
            kgstore.gen_synthetic(SyntheticConfig(shared_fraction=1.5))
        with pytest.raises(ConfigError):
            kgstore.gen_synthetic(SyntheticConfig(
                n_entities=3, n_relations=1, n_facts=10**6))


class TestSplits:
    @pytest.fixture
    def store(self):
        store, _ = kgstore.gen_synthetic(SyntheticConfig(
            n_entities=100, n_relations=8, n_facts=500, shared_fraction=0.6, seed=5))
        return store

    def test_sizes_follow_ratios_up_to_closure_moves(self, store):
        split = kgstore.make_splits(store, (0.8, 0.1, 0.1), seed=0, prompt_fraction=0.0)
        n = len(store.triples)
        assert len(split.train) == round(0.8 * n) + split.moved_for_closure
        leftover = n - len(split.train)
        assert abs(len(split.validation) - leftover / 2) <= split.moved_for_closure + 1
        assert sum(len(l) for l in split.all_lists()) == n

    def test_seed_deterministic(self, store):
        a = kgstore.make_splits(store, (0.7, 0.2, 0.1), seed=9)
        b = kgstore.make_splits(store, (0.7, 0.2, 0.1), seed=9)
        assert a.all_lists() == b.all_lists()

    def test_disjoint_and_exhaustive(self, store):
        split = kgstore.make_splits(store, (0.7, 0.2, 0.1), seed=1)
        lists = split.all_lists()
        union = set().union(*map(set, lists))
        assert sum(map(len, lists)) == len(union) == len(store.triples)

    def test_no_unseen_test_ids(self, store):
        split = kgstore.make_splits(store, (0.7, 0.2, 0.1), seed=2)
        ents = {t.head for t in split.train} | {t.tail for t in split.train}
        rels = {t.relation for t in split.train}
        for t in split.validation + split.test + split.prompt_subset:
            assert t.head in ents and t.tail in ents and t.relation in rels

    def test_prompt_subset_carved_from_validation(self, store):
        full = kgstore.make_splits(store, (0.7, 0.2, 0.1), seed=3, prompt_fraction=0.0)
        carved = kgstore.make_splits(store, (0.7, 0.2, 0.1), seed=3, prompt_fraction=0.4)
        pool = set(full.validation)
        assert set(carved.prompt_subset) <= pool
        assert set(carved.validation) == pool - set(carved.prompt_subset)

    def test_content_mode_keeps_copies_together(self, store):
        split = kgstore.make_splits(store, (0.7, 0.2, 0.1), seed=4, mode="content")
        owner = {}
        for name, lst in zip("tvpx", (split.train, split.validation,
                                      split.test, split.prompt_subset)):
            for t in lst:
                # prompt subset still counts as validation-pool content
                bucket = "v" if name == "x" else name
                assert owner.setdefault(t.content, bucket) == bucket

    def test_bad_ratios_rejected(self, store):
        with pytest.raises(ConfigError):
            kgstore.make_splits(store, (0.5, 0.2, 0.2), seed=0)


def test_train_share_languages():
    store, _ = kgstore.gen_synthetic(SyntheticConfig(
        n_entities=60, n_relations=6, n_facts=200, shared_fraction=0.8,
        languages=("en", "fr"), seed=6))
    split = kgstore.make_splits(store, (0.7, 0.2, 0.1), seed=0)
    share = kgstore.train_share_languages(split)
    assert set(share) == set(split.test)
    train_content = defaultdict(set)
    for t in split.train:
        train_content[t.content].add(t.lang)
    for t, langs in share.items():
        assert langs == sorted(train_content.get(t.content, ()))


def test_triples_as_arrays_roundtrip():
    store, _ = kgstore.gen_synthetic(SyntheticConfig(n_entities=25, n_facts=50, seed=2))
    h, r, t = kgstore.triples_as_arrays(store, store.triples)
    assert h.dtype == np.int64 and len(h) == len(store.triples)
    for i, tr in enumerate(store.triples[:10]):
        assert store.entity_ids[h[i]] == tr.head
        assert store.relation_ids[r[i]] == tr.relation
        assert store.entity_ids[t[i]] == tr.tail
