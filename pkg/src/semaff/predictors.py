"""Concept-level predictors: mean word rank, degree of polysemy, mean word length."""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from semaff.embedding_io import ConceptLexicon, FrequencyRanking, SenseInventory, nfc
from semaff.errors import CoverageError


def _concept(lexicon: ConceptLexicon, concept_id: str):
    try:
        return lexicon[concept_id]
    except KeyError:
        raise CoverageError(f"concept {concept_id!r} not in lexicon") from None


def word_ranks(
    concept_id: str,
    rankings: Mapping[str, FrequencyRanking],
    lexicon: ConceptLexicon,
    *,
    languages: Iterable[str] | None = None,
    strict: bool = True,
) -> dict[str, int]:
    """Best (lowest) rank among each language's forms for the concept.

    In strict mode a language whose forms are all unranked is skipped;
    otherwise it gets ``len(ranking) + 1``.
    """
    concept = _concept(lexicon, concept_id)
    langs = sorted(set(concept.forms) & set(rankings) if languages is None else set(languages) & set(rankings))
    ranks = {}
    for lang in langs:
        forms = concept.forms.get(lang)
        if not forms:
            continue
        found = [r for r in (rankings[lang].rank(f) for f in forms) if r is not None]
        if found:
            ranks[lang] = min(found)
        elif not strict:
            ranks[lang] = len(rankings[lang]) + 1
    return ranks


def mean_word_rank(
    concept_id: str,
    rankings: Mapping[str, FrequencyRanking],
    lexicon: ConceptLexicon,
    *,
    languages: Iterable[str] | None = None,
    strict: bool = True,
) -> float:
    ranks = word_ranks(concept_id, rankings, lexicon, languages=languages, strict=strict)
    if not ranks:
        raise CoverageError(f"{concept_id}: no language ranks any of its word forms")
    return sum(ranks[lang] for lang in sorted(ranks)) / len(ranks)


def degree_of_polysemy(concept_id: str, inventory: SenseInventory, languages: Iterable[str] | None = None) -> int:
    """Number of distinct sense ids over the concept's records in ``languages``."""
    allowed = None if languages is None else set(languages)
    senses: set[str] = set()
    n_records = 0
    for (lang, _form), ids in inventory.for_concept(concept_id).items():
        if allowed is None or lang in allowed:
            senses |= ids
            n_records += 1
    if n_records == 0:
        raise CoverageError(f"{concept_id}: no sense records in the selected languages")
    return len(senses)


def mean_word_length(
    concept_id: str,
    lexicon: ConceptLexicon,
    languages: Iterable[str] | None = None,
    *,
    all_forms: bool = False,
) -> float:
    """Mean length in Unicode scalar values (after NFC) of the concept's forms.

    By default only the first listed form of each language counts.
    """
    concept = _concept(lexicon, concept_id)
    langs = sorted(concept.forms if languages is None else set(languages) & set(concept.forms))
    lengths = []
    for lang in langs:
        forms = concept.forms[lang] if all_forms else concept.forms[lang][:1]
        lengths.extend(len(nfc(f)) for f in forms)
    if not lengths:
        raise CoverageError(f"{concept_id}: no word forms in the selected languages")
    return sum(lengths) / len(lengths)


@dataclass(frozen=True)
class PredictorRow:
    concept_id: str
    mean_word_rank: float | None
    degree_of_polysemy: int | None
    mean_word_length: float | None
    languages_used: Mapping[str, int] = field(default_factory=dict)
    flags: tuple[str, ...] = ()

    @property
    def partial(self) -> bool:
        return bool(self.flags)

    def values(self) -> tuple[float, float, float]:
        return (self.mean_word_rank, float(self.degree_of_polysemy), self.mean_word_length)


PREDICTOR_NAMES = ("mean_word_rank", "degree_of_polysemy", "mean_word_length")


def build_predictor_table(
    concept_ids: Sequence[str],
    lexicon: ConceptLexicon,
    rankings: Mapping[str, FrequencyRanking],
    inventory: SenseInventory,
    languages: Iterable[str] | None = None,
    *,
    strict_ranks: bool = True,
    all_forms_length: bool = False,
) -> list[PredictorRow]:
    """One row per concept; rows missing a predictor carry a flag and ``None``."""
    langs = None if languages is None else sorted(set(languages))
    rows = []
    for cid in concept_ids:
        flags = []
        used = {}
        try:
            ranks = word_ranks(cid, rankings, lexicon, languages=langs, strict=strict_ranks)
            if not ranks:
                raise CoverageError(cid)
            rank = sum(ranks[lang] for lang in sorted(ranks)) / len(ranks)
            used["mean_word_rank"] = len(ranks)
        except CoverageError:
            rank = None
            flags.append("no-rank")
        try:
            poly = degree_of_polysemy(cid, inventory, langs)
            used["degree_of_polysemy"] = len(
                {lang for lang, _ in inventory.for_concept(cid) if langs is None or lang in langs}
            )
        except CoverageError:
            poly = None
            flags.append("no-senses")
        try:
            length = mean_word_length(cid, lexicon, langs, all_forms=all_forms_length)
            concept = lexicon[cid]
            used["mean_word_length"] = len(concept.forms if langs is None else set(langs) & set(concept.forms))
        except CoverageError:
            length = None
            flags.append("no-forms")
        rows.append(PredictorRow(cid, rank, poly, length, used, tuple(flags)))
    return rows
