import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semaff.affinity import (
    FORM_FIRST,
    AffinityRecord,
    ConceptVectors,
    aggregate,
    all_affinities,
    centroid,
    concept_affinity,
    cosines_to_centroid,
    resolve_vector,
    sdist,
    sdist_matrix,
    sem_aff,
)
from semaff.alignment import LinearMap, MultilingualSpace
from semaff.embedding_io import Concept, ConceptLexicon, EmbeddingTable
from semaff.errors import CoverageError, DegenerateClusterError
from semaff.synthetic import random_orthogonal

from conftest import unit_rows


def direct_sem_aff(vectors):
    """Mean cosine to the centroid written out with plain loops."""
    n, d = len(vectors), len(vectors[0])
    c = [sum(v[k] for v in vectors) / n for k in range(d)]
    cn = math.sqrt(sum(x * x for x in c))
    total = 0.0
    for v in vectors:
        vn = math.sqrt(sum(x * x for x in v))
        total += sum(a * b for a, b in zip(v, c)) / (vn * cn)
    return total / n


def make_space(vectors_by_lang):
    """``{lang: {word: vector}}`` to a space with identity maps."""
    tables = {lang: EmbeddingTable(lang, list(words), np.array(list(words.values()))) for lang, words in vectors_by_lang.items()}
    pivot = next(iter(tables))
    dim = tables[pivot].dim
    return MultilingualSpace(pivot, tables, {lang: LinearMap.identity(lang, dim) for lang in tables})


def test_orthogonal_pair():
    assert abs(sem_aff([[1, 0], [0, 1]]) - math.sqrt(2) / 2) <= 1e-9


def test_identical_vectors():
    v = np.array([0.6, 0.8, 0.0])
    assert abs(sem_aff(np.tile(v, (7, 1))) - 1.0) <= 1e-12


def test_single_member_is_one():
    assert sem_aff([[0.0, 1.0]]) == 1.0


def test_antipodal_is_degenerate():
    with pytest.raises(DegenerateClusterError):
        sem_aff([[1, 0], [-1, 0]])


def test_centroid_is_unnormalized():
    np.testing.assert_allclose(centroid([[1, 0], [0, 1]]), [0.5, 0.5])


def test_concept_vectors_input():
    cv = ConceptVectors.from_arrays([[1, 0], [0, 1]], "C", ["a", "b"])
    assert cv.languages == ("a", "b")
    assert sem_aff(cv) == sem_aff(cv.matrix)


@pytest.mark.parametrize("seed", range(20))
def test_matches_direct_formula(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 36))
    d = int(rng.choice([3, 50, 300]))
    m = unit_rows(rng, n, d) + 0.5 * unit_rows(rng, 1, d)
    m /= np.linalg.norm(m, axis=1, keepdims=True)
    assert abs(sem_aff(m) - direct_sem_aff(m.tolist())) <= 1e-10


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 12), st.integers(2, 10))
def test_permutation_and_rotation_invariance(seed, n, d):
    rng = np.random.default_rng(seed)
    m = unit_rows(rng, n, d) + unit_rows(rng, 1, d)
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if np.any(norms < 1e-3):
        return
    m /= norms
    try:
        base = sem_aff(m)
    except DegenerateClusterError:
        return
    assert -1.0 - 1e-12 <= base <= 1.0 + 1e-12
    assert abs(sem_aff(m[rng.permutation(n)]) - base) <= 1e-9
    q = random_orthogonal(d, rng)
    assert abs(sem_aff(m @ q.T) - base) <= 1e-9


def test_cosines_are_bounded(rng):
    cos = cosines_to_centroid(unit_rows(rng, 10, 4))
    assert np.all(np.abs(cos) <= 1.0 + 1e-12)


@pytest.fixture
def small():
    e = np.eye(3)
    vecs = {
        "eng": {"eye": e[0], "eyeball": e[1], "hand": e[2]},
        "fra": {"oeil": e[0], "main": e[2]},
        "deu": {"auge": (e[0] + e[1]) / math.sqrt(2), "hand_de": e[2]},
    }
    lex = ConceptLexicon([
        Concept("EYE", "eye", "NOUN", frozenset({"Body"}), {"eng": ("eye", "eyeball"), "fra": ("oeil",), "deu": ("auge",)}),
        Concept("HAND", "hand", "NOUN", frozenset({"Body"}), {"eng": ("hand",), "fra": ("main",), "deu": ("hand_de",)}),
        Concept("LONE", "lone", "ADJ", frozenset(), {"eng": ("missing",), "fra": ("main",)}),
    ])
    return make_space(vecs), lex


def test_resolve_mean_and_first(small):
    space, _ = small
    v, reason = resolve_vector(space, "eng", ("eye", "eyeball"))
    assert reason is None
    np.testing.assert_allclose(v, np.array([1, 1, 0]) / math.sqrt(2))
    v, _ = resolve_vector(space, "eng", ("eye", "eyeball"), FORM_FIRST)
    np.testing.assert_array_equal(v, [1, 0, 0])
    assert resolve_vector(space, "eng", ("zzz",)) == (None, "all-forms-oov")
    assert resolve_vector(space, "ita", ("x",)) == (None, "language-not-in-space")


def test_concept_affinity_record(small):
    space, lex = small
    rec = concept_affinity(space, lex, "HAND")
    assert rec.coverage == 3 and abs(rec.sem_aff - 1.0) <= 1e-12
    assert set(rec.cosines) == {"deu", "eng", "fra"}
    eye = concept_affinity(space, lex, "EYE", form_mode=FORM_FIRST)
    members = np.array([[1, 0, 0], [1, 0, 0], [1 / math.sqrt(2), 1 / math.sqrt(2), 0]])
    assert abs(eye.sem_aff - direct_sem_aff(members.tolist())) <= 1e-12


def test_coverage_threshold(small):
    space, lex = small
    with pytest.raises(CoverageError, match="LONE"):
        concept_affinity(space, lex, "LONE", min_coverage=2)
    rec = concept_affinity(space, lex, "LONE", min_coverage=1)
    assert rec.sem_aff == 1.0
    assert rec.skipped == {"eng": "all-forms-oov", "deu": "no-lexicon-entry"}
    records, failures = all_affinities(space, lex, 2)
    assert [r.concept_id for r in records] == ["EYE", "HAND"]
    assert "LONE" in failures


def test_negative_affinity_flagged_not_clamped():
    rec = AffinityRecord("X", -0.2, 3, {})
    assert rec.negative and rec.sem_aff == -0.2


def _records(values):
    return [AffinityRecord(cid, v, 2, {}) for cid, v in values.items()]


def test_aggregate_min_group_size():
    values = {f"A{i}": 0.5 + 0.01 * i for i in range(5)}
    values.update({f"B{i}": 0.9 for i in range(4)})
    grouping = {cid: cid[0] for cid in values}
    summaries, omitted = aggregate(_records(values), grouping, 5)
    assert [s.name for s in summaries] == ["A"]
    assert omitted == {"B": 4}
    a = summaries[0]
    vals = [values[f"A{i}"] for i in range(5)]
    mu = sum(vals) / 5
    assert abs(a.mean - mu) < 1e-12
    assert abs(a.sd - math.sqrt(sum((v - mu) ** 2 for v in vals) / 5)) < 1e-12


def test_aggregate_multi_membership_and_order():
    values = {f"C{i}": 0.1 * i for i in range(6)}
    grouping = {cid: {"all", "low" if i < 3 else "high"} for i, cid in enumerate(values)}
    summaries, omitted = aggregate(_records(values), grouping, 3)
    assert [s.name for s in summaries] == ["high", "all", "low"]
    assert next(s for s in summaries if s.name == "all").count == 6


def test_sdist_symmetry_exact(toy_world, toy_space):
    for a in toy_world.languages:
        for b in toy_world.languages:
            if a < b:
                assert sdist(toy_space, toy_world.lexicon, a, b).value == sdist(toy_space, toy_world.lexicon, b, a).value


def test_sdist_matrix(toy_world, toy_space):
    langs = list(toy_world.languages)
    m, counts = sdist_matrix(toy_space, toy_world.lexicon, langs)
    assert m.is_symmetric() and np.all(np.diag(m.values) == 0)
    assert m["la", "eng"] == sdist(toy_space, toy_world.lexicon, "eng", "la").value
    # UNCLE has no vector in ld
    assert counts[langs.index("eng"), langs.index("ld")] == len(toy_world.lexicon) - 1
    assert counts[langs.index("eng"), langs.index("la")] == len(toy_world.lexicon)


def test_sdist_by_hand(small):
    space, lex = small
    d = sdist(space, lex, "eng", "deu", ["EYE", "HAND"])
    assert d.n_concepts == 2
    assert abs(d.value - (1 - (1.0 + 1.0) / 2)) <= 1e-12
    d = sdist(space, lex, "eng", "fra", ["EYE"], form_mode=FORM_FIRST)
    assert abs(d.value) <= 1e-12


def test_identical_domain_gives_zero():
    rng = np.random.default_rng(4)
    base = unit_rows(rng, 4, 6)
    space = make_space({lang: {f"{lang}{i}": base[i] for i in range(4)} for lang in ("a", "b", "c")})
    lex = ConceptLexicon(Concept(f"K{i}", "", "NOUN", frozenset(), {lang: (f"{lang}{i}",) for lang in "abc"}) for i in range(4))
    m, _ = sdist_matrix(space, lex, ["a", "b", "c"])
    assert np.max(np.abs(m.values)) <= 1e-12


def test_sdist_no_shared_concepts(small):
    space, lex = small
    with pytest.raises(CoverageError, match="deu"):
        sdist(space, lex, "deu", "fra", ["LONE"])
