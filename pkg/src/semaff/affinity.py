"""Concept affinity, domain aggregation and language-pair semantic distance."""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from semaff.alignment import MultilingualSpace
from semaff.embedding_io import Concept, ConceptLexicon
from semaff.errors import CoverageError, DegenerateClusterError

CENTROID_EPS = 1e-9
FORM_MEAN = "mean"
FORM_FIRST = "first"


@dataclass(frozen=True)
class ConceptVectors:
    """One unit vector per language for a single concept."""

    concept_id: str
    members: tuple[tuple[str, np.ndarray], ...]

    @classmethod
    def from_arrays(cls, vectors: Iterable, concept_id: str = "", languages: Sequence[str] | None = None) -> ConceptVectors:
        vectors = [np.asarray(v, dtype=np.float64) for v in vectors]
        if languages is None:
            languages = [f"L{i + 1}" for i in range(len(vectors))]
        return cls(concept_id, tuple(zip(languages, vectors)))

    @property
    def matrix(self) -> np.ndarray:
        return np.vstack([v for _, v in self.members])

    @property
    def languages(self) -> tuple[str, ...]:
        return tuple(lang for lang, _ in self.members)

    def __len__(self) -> int:
        return len(self.members)


def _as_matrix(vectors) -> np.ndarray:
    if isinstance(vectors, ConceptVectors):
        m = vectors.matrix
    else:
        m = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if m.shape[0] < 1:
        raise ValueError("need at least one member vector")
    return m


def centroid(vectors) -> np.ndarray:
    """Unnormalized mean of the member vectors.

    Raises
    ------
    DegenerateClusterError
        If the mean has norm below ``CENTROID_EPS`` (e.g. antipodal members).
    """
    m = _as_matrix(vectors)
    cent = m.sum(axis=0) / m.shape[0]
    if np.linalg.norm(cent) < CENTROID_EPS:
        raise DegenerateClusterError(f"centroid norm {np.linalg.norm(cent):.3g} below {CENTROID_EPS}")
    return cent


def cosines_to_centroid(vectors) -> np.ndarray:
    m = _as_matrix(vectors)
    cent = centroid(m)
    return (m @ cent) / (np.linalg.norm(m, axis=1) * np.linalg.norm(cent))


def sem_aff(vectors) -> float:
    """Mean cosine of the members to their centroid; exactly 1.0 for one member."""
    m = _as_matrix(vectors)
    if m.shape[0] == 1:
        centroid(m)
        return 1.0
    return float(np.mean(cosines_to_centroid(m)))


def resolve_vector(space: MultilingualSpace, language: str, forms: Sequence[str], form_mode: str = FORM_MEAN):
    """Reduce a (concept, language) form list to one unit vector.

    ``mean`` averages the in-vocabulary forms and re-normalizes, falling back
    to the first in-vocabulary form if the average vanishes; ``first`` uses
    the first in-vocabulary form. Returns ``(vector, reason)`` where exactly
    one of the two is ``None``.
    """
    table = space.tables.get(language)
    if table is None:
        return None, "language-not-in-space"
    found = [table[f] for f in forms if f in table]
    if not found:
        return None, "all-forms-oov"
    if form_mode == FORM_FIRST or len(found) == 1:
        return found[0], None
    if form_mode != FORM_MEAN:
        raise ValueError(f"unknown form mode {form_mode!r}")
    avg = np.sum(found, axis=0)
    norm = np.linalg.norm(avg)
    if norm < CENTROID_EPS:
        return found[0], None
    return avg / norm, None


@dataclass(frozen=True)
class AffinityRecord:
    concept_id: str
    sem_aff: float
    coverage: int
    cosines: Mapping[str, float]
    skipped: Mapping[str, str] = field(default_factory=dict)

    @property
    def negative(self) -> bool:
        return self.sem_aff < 0.0


def concept_vectors(
    space: MultilingualSpace,
    concept: Concept,
    languages: Sequence[str] | None = None,
    form_mode: str = FORM_MEAN,
) -> tuple[ConceptVectors, dict[str, str]]:
    langs = list(languages) if languages is not None else sorted(set(space.languages) | set(concept.forms))
    members, skipped = [], {}
    for lang in langs:
        forms = concept.forms.get(lang)
        if not forms:
            skipped[lang] = "no-lexicon-entry"
            continue
        vec, reason = resolve_vector(space, lang, forms, form_mode)
        if vec is None:
            skipped[lang] = reason
        else:
            members.append((lang, vec))
    return ConceptVectors(concept.concept_id, tuple(members)), skipped


def concept_affinity(
    space: MultilingualSpace,
    lexicon: ConceptLexicon,
    concept_id: str,
    min_coverage: int = 2,
    *,
    languages: Sequence[str] | None = None,
    form_mode: str = FORM_MEAN,
) -> AffinityRecord:
    """Semantic affinity of one concept over the languages that cover it.

    Languages are visited in sorted order unless ``languages`` is given.
    """
    try:
        concept = lexicon[concept_id]
    except KeyError:
        raise CoverageError(f"concept {concept_id!r} not in lexicon") from None
    cv, skipped = concept_vectors(space, concept, languages, form_mode)
    if len(cv) < max(min_coverage, 1):
        raise CoverageError(
            f"{concept_id}: covered by {len(cv)} language(s), minimum is {min_coverage}"
        )
    cos = cosines_to_centroid(cv)
    value = 1.0 if len(cv) == 1 else float(np.mean(cos))
    return AffinityRecord(
        concept_id,
        value,
        len(cv),
        dict(zip(cv.languages, (float(c) for c in cos))),
        skipped,
    )


def all_affinities(
    space: MultilingualSpace,
    lexicon: ConceptLexicon,
    min_coverage: int = 2,
    *,
    languages: Sequence[str] | None = None,
    form_mode: str = FORM_MEAN,
) -> tuple[list[AffinityRecord], dict[str, str]]:
    """Affinity of every lexicon concept; returns ``(records, failures)``."""
    records, failures = [], {}
    for cid in lexicon:
        try:
            records.append(concept_affinity(space, lexicon, cid, min_coverage, languages=languages, form_mode=form_mode))
        except (CoverageError, DegenerateClusterError) as exc:
            failures[cid] = str(exc)
    return records, failures


@dataclass(frozen=True)
class DomainSummary:
    name: str
    count: int
    mean: float
    sd: float
    members: tuple[str, ...] = ()


def aggregate(
    records: Iterable[AffinityRecord],
    grouping: Mapping[str, str | Iterable[str]],
    min_group_size: int = 5,
) -> tuple[list[DomainSummary], dict[str, int]]:
    """Unweighted mean and population SD of ``sem_aff`` per group.

    A concept may belong to several groups. Groups with fewer than
    ``min_group_size`` members are left out and returned, with their sizes,
    in the second element. Summaries are sorted by decreasing mean.
    """
    by_group: dict[str, list[AffinityRecord]] = {}
    for rec in records:
        labels = grouping.get(rec.concept_id)
        if labels is None:
            continue
        if isinstance(labels, str):
            labels = [labels]
        for label in sorted(set(labels)):
            by_group.setdefault(label, []).append(rec)
    summaries, omitted = [], {}
    for label in sorted(by_group):
        members = by_group[label]
        if len(members) < min_group_size:
            omitted[label] = len(members)
            continue
        values = np.array([r.sem_aff for r in members])
        summaries.append(
            DomainSummary(label, len(members), float(values.mean()), float(values.std()), tuple(r.concept_id for r in members))
        )
    summaries.sort(key=lambda s: (-s.mean, s.name))
    return summaries, omitted


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric language-by-language matrix with zero diagonal."""

    languages: tuple[str, ...]
    values: np.ndarray
    kind: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        n = len(self.languages)
        if values.shape != (n, n):
            raise ValueError(f"{self.kind}: expected {n}x{n} matrix, got {values.shape}")
        object.__setattr__(self, "languages", tuple(self.languages))
        object.__setattr__(self, "values", values)

    def __getitem__(self, pair: tuple[str, str]) -> float:
        i, j = (self.languages.index(p) for p in pair)
        return float(self.values[i, j])

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.values, self.values.T))

    def reorder(self, languages: Sequence[str]) -> DistanceMatrix:
        idx = [self.languages.index(lang) for lang in languages]
        return DistanceMatrix(tuple(languages), self.values[np.ix_(idx, idx)], self.kind)


@dataclass(frozen=True)
class PairDistance:
    value: float
    n_concepts: int


def _sdist_from_vectors(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> float:
    total = math.fsum(float(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v)) for u, v in zip(a, b))
    return 1.0 - total / len(a)


def _resolved(space, concept, language, form_mode):
    forms = concept.forms.get(language)
    if not forms:
        return None
    return resolve_vector(space, language, forms, form_mode)[0]


def sdist(
    space: MultilingualSpace,
    lexicon: ConceptLexicon,
    lang_i: str,
    lang_j: str,
    concepts: Iterable[str] | None = None,
    *,
    form_mode: str = FORM_MEAN,
) -> PairDistance:
    """One minus the mean cosine between two languages' vectors over ``concepts``.

    Concepts not resolvable in both languages are skipped. The pair is put in
    canonical (sorted) order first, so ``sdist(a, b) == sdist(b, a)`` exactly.
    """
    a_lang, b_lang = sorted((lang_i, lang_j))
    ids = sorted(lexicon if concepts is None else concepts)
    a_vecs, b_vecs = [], []
    for cid in ids:
        concept = lexicon.get(cid)
        if concept is None:
            continue
        u = _resolved(space, concept, a_lang, form_mode)
        v = _resolved(space, concept, b_lang, form_mode)
        if u is not None and v is not None:
            a_vecs.append(u)
            b_vecs.append(v)
    if not a_vecs:
        raise CoverageError(f"({a_lang}, {b_lang}): no concept resolvable in both languages")
    return PairDistance(_sdist_from_vectors(a_vecs, b_vecs), len(a_vecs))


def sdist_matrix(
    space: MultilingualSpace,
    lexicon: ConceptLexicon,
    languages: Sequence[str],
    concepts: Iterable[str] | None = None,
    *,
    form_mode: str = FORM_MEAN,
) -> tuple[DistanceMatrix, np.ndarray]:
    """Pairwise SDist over ``languages``; also returns the matrix of concept counts."""
    languages = list(languages)
    if len(languages) < 2:
        raise CoverageError("SDist matrix needs at least two languages")
    ids = sorted(lexicon if concepts is None else concepts)
    resolved = {
        lang: {cid: _resolved(space, lexicon[cid], lang, form_mode) for cid in ids if cid in lexicon}
        for lang in languages
    }
    n = len(languages)
    values = np.zeros((n, n))
    counts = np.zeros((n, n), dtype=int)
    for i in range(n):
        for j in range(i + 1, n):
            a_lang, b_lang = sorted((languages[i], languages[j]))
            pairs = [
                (resolved[a_lang][cid], resolved[b_lang][cid])
                for cid in resolved[a_lang]
                if resolved[a_lang][cid] is not None and resolved[b_lang][cid] is not None
            ]
            if not pairs:
                raise CoverageError(f"({a_lang}, {b_lang}): no concept resolvable in both languages")
            a_vecs, b_vecs = zip(*pairs)
            values[i, j] = values[j, i] = _sdist_from_vectors(a_vecs, b_vecs)
            counts[i, j] = counts[j, i] = len(pairs)
    return DistanceMatrix(tuple(languages), values, "SDist"), counts
