"""Readers and writers for the toolkit's input files.

Formats
-------
* word vectors: fastText ``.vec`` text, header ``<count> <dim>`` followed by
  ``<word> <v1> ... <v_dim>`` lines
* concept lexicon: TSV with a header naming ``concept_id, gloss, pos,
  domains, language, forms`` (domains comma separated, forms pipe separated)
* bilingual dictionary: ``<src_word>\\t<tgt_word>`` lines, no header
* sense inventory: TSV with header ``concept_id, language, word_form,
  sense_ids`` (sense ids comma separated)
* frequency ranking: one word per line, rank = line number

Every word form is NFC-normalized on the way in; no case folding is applied.
"""

from __future__ import annotations

import csv
import unicodedata
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from semaff.errors import FormatError

#: Rows whose norm is already this close to one are left untouched, which
#: keeps normalization exactly idempotent.
_UNIT_SLACK = 1e-14


def nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """Return a copy of ``matrix`` with every row scaled to unit L2 norm.

    Raises
    ------
    FormatError
        If any row has zero norm.
    """
    matrix = np.array(matrix, dtype=np.float64, copy=True)
    if matrix.ndim == 1:
        matrix = matrix[None, :]
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0.0) or not np.all(np.isfinite(norms)):
        bad = int(np.flatnonzero((norms == 0.0) | ~np.isfinite(norms))[0])
        raise FormatError(f"row {bad} has zero or non-finite norm")
    rescale = np.abs(norms - 1.0) > _UNIT_SLACK
    matrix[rescale] /= norms[rescale, None]
    return matrix


class EmbeddingTable:
    """Vocabulary of one language mapped to unit vectors of a fixed dimension.

    The table is read-only once built: the underlying matrix is flagged
    non-writeable so it can be shared between threads.
    """

    def __init__(self, language: str, words: Iterable[str], vectors: np.ndarray, *, normalize: bool = True):
        words = [nfc(w) for w in words]
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(words):
            raise FormatError(
                f"{language}: expected a {len(words)}xD matrix, got shape {vectors.shape}"
            )
        if vectors.shape[1] < 1:
            raise FormatError(f"{language}: dimension must be positive")
        index: dict[str, int] = {}
        for i, w in enumerate(words):
            if w in index:
                raise FormatError(f"{language}: duplicate word {w!r}")
            index[w] = i
        if normalize:
            norms = np.linalg.norm(vectors, axis=1)
            bad = np.flatnonzero((norms == 0.0) | ~np.isfinite(norms))
            if bad.size:
                raise FormatError(f"{language}: zero or non-finite vector for {words[int(bad[0])]!r}")
            vectors = normalize_rows(vectors)
        else:
            vectors = vectors.copy()
        vectors.flags.writeable = False
        self.language = language
        self.words: tuple[str, ...] = tuple(words)
        self.vectors = vectors
        self._index = index

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: object) -> bool:
        return isinstance(word, str) and nfc(word) in self._index

    def __getitem__(self, word: str) -> np.ndarray:
        return self.vectors[self._index[nfc(word)]]

    def index(self, word: str) -> int:
        return self._index[nfc(word)]

    def get(self, word: str) -> np.ndarray | None:
        i = self._index.get(nfc(word))
        return None if i is None else self.vectors[i]

    def equals(self, other: EmbeddingTable) -> bool:
        return (
            self.language == other.language
            and self.words == other.words
            and np.array_equal(self.vectors, other.vectors)
        )

    def __repr__(self) -> str:
        return f"EmbeddingTable({self.language!r}, n={len(self)}, dim={self.dim})"


def load_embeddings(path: str | Path, language: str | None = None, expected_dim: int | None = None) -> EmbeddingTable:
    """Read a fastText-style text vector file and L2-normalize every vector.

    ``language`` defaults to the file stem.
    """
    path = Path(path)
    language = language or path.stem
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise FormatError(f"{path}: malformed header {' '.join(header)!r}")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise FormatError(f"{path}: malformed header {' '.join(header)!r}") from None
        if count < 0 or dim < 1:
            raise FormatError(f"{path}: malformed header {count} {dim}")
        if expected_dim is not None and dim != expected_dim:
            raise FormatError(f"{path}: dimension mismatch, header dim {dim} != expected {expected_dim}")

        words: list[str] = []
        seen: set[str] = set()
        matrix = np.empty((count, dim), dtype=np.float64)
        for lineno, line in enumerate(fh, start=2):
            fields = line.rstrip("\r\n ").split(" ")
            if fields == [""]:
                continue
            if len(words) == count:
                raise FormatError(f"{path}:{lineno}: more than {count} entries")
            if len(fields) != dim + 1:
                raise FormatError(
                    f"{path}:{lineno}: dimension mismatch, expected {dim} components, got {len(fields) - 1}"
                )
            word = nfc(fields[0])
            if word in seen:
                raise FormatError(f"{path}:{lineno}: duplicate word {word!r}")
            try:
                matrix[len(words)] = [float(x) for x in fields[1:]]
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric component") from None
            seen.add(word)
            words.append(word)
    if len(words) != count:
        raise FormatError(f"{path}: count mismatch, header announces {count} entries, found {len(words)}")
    try:
        return EmbeddingTable(language, words, matrix)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    """Write ``table`` in the same text format, with round-trip float precision."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(table)} {table.dim}\n")
        for word, vec in zip(table.words, table.vectors):
            fh.write(word + " " + " ".join(repr(float(x)) for x in vec) + "\n")


@dataclass(frozen=True)
class Concept:
    concept_id: str
    gloss: str
    pos: str
    domains: frozenset[str]
    forms: Mapping[str, tuple[str, ...]]

    @property
    def languages(self) -> tuple[str, ...]:
        return tuple(self.forms)


class ConceptLexicon(Mapping[str, Concept]):
    """Ordered read-only mapping ``concept_id -> Concept``."""

    def __init__(self, concepts: Iterable[Concept]):
        self._concepts: dict[str, Concept] = {}
        for c in concepts:
            if c.concept_id in self._concepts:
                raise FormatError(f"duplicate concept id {c.concept_id!r}")
            for lang, forms in c.forms.items():
                if not forms:
                    raise FormatError(f"{c.concept_id}/{lang}: empty form list")
            self._concepts[c.concept_id] = c

    def __getitem__(self, key: str) -> Concept:
        return self._concepts[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._concepts)

    def __len__(self) -> int:
        return len(self._concepts)

    @property
    def languages(self) -> tuple[str, ...]:
        langs: dict[str, None] = {}
        for c in self._concepts.values():
            langs.update(dict.fromkeys(c.forms))
        return tuple(langs)

    def all_forms(self) -> set[tuple[str, str]]:
        """Every ``(language, word_form)`` pair attested for any concept."""
        return {
            (lang, form)
            for c in self._concepts.values()
            for lang, forms in c.forms.items()
            for form in forms
        }

    def grouping(self, by: str) -> dict[str, frozenset[str]]:
        """Map each concept id to its group labels, ``by`` is ``"pos"`` or ``"domain"``."""
        if by == "pos":
            return {cid: frozenset([c.pos]) for cid, c in self._concepts.items() if c.pos}
        if by == "domain":
            return {cid: c.domains for cid, c in self._concepts.items() if c.domains}
        raise ValueError(f"unknown grouping {by!r}")


def _read_tsv(path: Path, required: tuple[str, ...]) -> Iterator[tuple[int, dict[str, str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise FormatError(f"{path}: empty file, expected a header row") from None
        missing = [col for col in required if col not in header]
        if missing:
            raise FormatError(f"{path}: missing column(s) {', '.join(missing)}")
        pos = {col: header.index(col) for col in required}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                row = row + [""] * (len(header) - len(row))
            yield lineno, {col: row[i].strip() for col, i in pos.items()}


LEXICON_COLUMNS = ("concept_id", "gloss", "pos", "domains", "language", "forms")


def load_lexicon(path: str | Path) -> ConceptLexicon:
    path = Path(path)
    meta: dict[str, tuple[str, str, frozenset[str]]] = {}
    forms: dict[str, dict[str, tuple[str, ...]]] = {}
    for lineno, row in _read_tsv(path, LEXICON_COLUMNS):
        cid, lang = row["concept_id"], row["language"]
        if not cid or not lang:
            raise FormatError(f"{path}:{lineno}: empty concept_id or language")
        domains = frozenset(d.strip() for d in row["domains"].split(",") if d.strip())
        entry = (row["gloss"], row["pos"], domains)
        if cid in meta and meta[cid] != entry:
            raise FormatError(f"{path}:{lineno}: gloss/pos/domains of {cid} differ from earlier rows")
        meta.setdefault(cid, entry)
        per_lang = forms.setdefault(cid, {})
        if lang in per_lang:
            raise FormatError(f"{path}:{lineno}: duplicate row for ({cid}, {lang})")
        words = tuple(nfc(f.strip()) for f in row["forms"].split("|") if f.strip())
        if not words:
            raise FormatError(f"{path}:{lineno}: empty forms for ({cid}, {lang})")
        per_lang[lang] = words
    return ConceptLexicon(
        Concept(cid, *meta[cid], forms=per_lang) for cid, per_lang in forms.items()
    )


def save_lexicon(lexicon: ConceptLexicon, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(LEXICON_COLUMNS) + "\n")
        for c in lexicon.values():
            domains = ",".join(sorted(c.domains))
            for lang, words in c.forms.items():
                fh.write("\t".join([c.concept_id, c.gloss, c.pos, domains, lang, "|".join(words)]) + "\n")


@dataclass(frozen=True)
class BilingualDictionary:
    """Translation pairs from ``source_language`` to ``target_language``.

    Pairs may be many-to-many and may repeat; repeated pairs are kept.
    """

    source_language: str
    target_language: str
    pairs: tuple[tuple[str, str], ...] = ()

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[tuple[str, str]]:
        return iter(self.pairs)


def load_dictionary(path: str | Path, source_language: str, target_language: str) -> BilingualDictionary:
    path = Path(path)
    pairs: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) == 1:
                # MUSE dictionaries are often space separated
                fields = line.split()
            if len(fields) != 2 or not all(f.strip() for f in fields):
                raise FormatError(f"{path}:{lineno}: expected 2 fields, got {len(fields)}")
            pairs.append((nfc(fields[0].strip()), nfc(fields[1].strip())))
    return BilingualDictionary(source_language, target_language, tuple(pairs))


def save_dictionary(dictionary: BilingualDictionary, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for src, tgt in dictionary.pairs:
            fh.write(f"{src}\t{tgt}\n")


@dataclass(frozen=True)
class SenseInventory:
    """Sense identifiers keyed by ``(concept_id, language, word_form)``."""

    records: Mapping[tuple[str, str, str], frozenset[str]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def get(self, concept_id: str, language: str, word_form: str) -> frozenset[str] | None:
        return self.records.get((concept_id, language, nfc(word_form)))

    def for_concept(self, concept_id: str) -> dict[tuple[str, str], frozenset[str]]:
        return {(lang, form): senses for (cid, lang, form), senses in self.records.items() if cid == concept_id}


SENSE_COLUMNS = ("concept_id", "language", "word_form", "sense_ids")


def load_sense_inventory(path: str | Path) -> SenseInventory:
    path = Path(path)
    records: dict[tuple[str, str, str], frozenset[str]] = {}
    for lineno, row in _read_tsv(path, SENSE_COLUMNS):
        key = (row["concept_id"], row["language"], nfc(row["word_form"]))
        senses = frozenset(s.strip() for s in row["sense_ids"].split(",") if s.strip())
        if not senses:
            raise FormatError(f"{path}:{lineno}: empty sense_ids for {key}")
        if key in records:
            raise FormatError(f"{path}:{lineno}: duplicate record {key}")
        records[key] = senses
    return SenseInventory(records)


def save_sense_inventory(inventory: SenseInventory, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(SENSE_COLUMNS) + "\n")
        for (cid, lang, form), senses in inventory.records.items():
            fh.write("\t".join([cid, lang, form, ",".join(sorted(senses))]) + "\n")


class FrequencyRanking:
    """Words of one language ordered from most to least frequent (rank 1 first)."""

    def __init__(self, language: str, ranked_words: Iterable[str]):
        self.language = language
        self.ranked_words = tuple(nfc(w) for w in ranked_words)
        self._rank: dict[str, int] = {}
        for i, w in enumerate(self.ranked_words, start=1):
            if w in self._rank:
                raise FormatError(f"{language}: duplicate ranked word {w!r}")
            self._rank[w] = i

    def __len__(self) -> int:
        return len(self.ranked_words)

    def rank(self, word: str) -> int | None:
        return self._rank.get(nfc(word))


def load_frequency_ranking(path: str | Path, language: str | None = None) -> FrequencyRanking:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        words = [line.strip() for line in fh]
    while words and not words[-1]:
        words.pop()
    if any(not w for w in words):
        raise FormatError(f"{path}: blank line inside ranking")
    return FrequencyRanking(language or path.stem, words)


def save_frequency_ranking(ranking: FrequencyRanking, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for w in ranking.ranked_words:
            fh.write(w + "\n")
