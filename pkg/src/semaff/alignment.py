"""Supervised alignment of monolingual spaces into one pivot-anchored frame.

Matrices follow the column convention: ``X`` and ``Y`` are ``d x n`` with one
dictionary pair per column, and a fitted map ``W`` satisfies ``W X ~ Y``.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from semaff.embedding_io import BilingualDictionary, EmbeddingTable, load_dictionary, normalize_rows
from semaff.errors import AlignmentError

log = logging.getLogger(__name__)

LEAST_SQUARES = "least-squares"
ORTHOGONAL = "orthogonal"
_MODE_ALIASES = {
    "ls": LEAST_SQUARES,
    "least-squares": LEAST_SQUARES,
    "lstsq": LEAST_SQUARES,
    "procrustes": ORTHOGONAL,
    "orthogonal": ORTHOGONAL,
}


def canonical_mode(mode: str) -> str:
    try:
        return _MODE_ALIASES[mode.lower()]
    except KeyError:
        raise AlignmentError(f"unknown alignment mode {mode!r}") from None


def frobenius_norm(a) -> float:
    """Square root of the sum of squared entries."""
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0:
        raise ValueError("Frobenius norm of an empty matrix")
    return float(np.sqrt(np.sum(a * a)))


@dataclass(frozen=True)
class LinearMap:
    source_language: str
    target_language: str
    matrix: np.ndarray
    mode: str
    residual: float = 0.0
    n_pairs: int = 0

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        """Map row vectors (``n x d``) into the target frame."""
        return np.asarray(vectors) @ self.matrix.T

    def orthogonality_error(self) -> float:
        w = self.matrix
        return frobenius_norm(w.T @ w - np.eye(w.shape[0]))

    @classmethod
    def identity(cls, language: str, dim: int) -> LinearMap:
        return cls(language, language, np.eye(dim), ORTHOGONAL)


def _check_pair_matrices(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape != y.shape:
        raise AlignmentError(f"X and Y must be d x n matrices of equal shape, got {x.shape} and {y.shape}")
    if x.shape[1] < 1:
        raise AlignmentError("cannot fit a map from an empty dictionary")
    return x, y


def fit_least_squares(x, y, *, ridge: float = 0.0, source: str = "", target: str = "") -> LinearMap:
    """Unconstrained minimizer of ``||W X - Y||_F``.

    A rank-deficient ``X`` has no unique solution; it is rejected unless a
    positive ``ridge`` is given, in which case ``W = Y X^T (X X^T + ridge I)^-1``.
    """
    x, y = _check_pair_matrices(x, y)
    d, n = x.shape
    rank = np.linalg.matrix_rank(x)
    if rank < d:
        if ridge <= 0.0:
            raise AlignmentError(
                f"source matrix is rank deficient (rank {rank} < dim {d}, n={n}); enable ridge fallback"
            )
        w = np.linalg.solve(x @ x.T + ridge * np.eye(d), x @ y.T).T
    else:
        # min ||X^T W^T - Y^T||
        w = np.linalg.lstsq(x.T, y.T, rcond=None)[0].T
    return LinearMap(source, target, w, LEAST_SQUARES, frobenius_norm(w @ x - y), n)


def _fix_signs(u: np.ndarray, vt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # largest-magnitude entry of each left singular vector made positive
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs, vt * signs[:, None]


def fit_procrustes(x, y, *, source: str = "", target: str = "") -> LinearMap:
    """Orthogonal minimizer of ``||W X - Y||_F``: ``W = U V^T`` where ``Y X^T = U S V^T``."""
    x, y = _check_pair_matrices(x, y)
    m = y @ x.T
    if not np.any(m):
        raise AlignmentError("Y X^T is all zero; orthogonal map undefined")
    u, _, vt = np.linalg.svd(m)
    u, vt = _fix_signs(u, vt)
    w = u @ vt
    return LinearMap(source, target, w, ORTHOGONAL, frobenius_norm(w @ x - y), x.shape[1])


def fit_map(x, y, mode: str, *, ridge: float = 0.0, source: str = "", target: str = "") -> LinearMap:
    if canonical_mode(mode) == ORTHOGONAL:
        return fit_procrustes(x, y, source=source, target=target)
    return fit_least_squares(x, y, ridge=ridge, source=source, target=target)


def filter_dictionary(dictionary: BilingualDictionary, exclusion) -> BilingualDictionary:
    """Drop every pair whose source or target form is in ``exclusion``.

    ``exclusion`` holds ``(language, word_form)`` tuples.
    """
    src, tgt = dictionary.source_language, dictionary.target_language
    kept = tuple(
        (s, t) for s, t in dictionary.pairs if (src, s) not in exclusion and (tgt, t) not in exclusion
    )
    if not kept:
        raise AlignmentError(
            f"{src}->{tgt}: no dictionary pairs left after excluding target-concept words"
        )
    return BilingualDictionary(src, tgt, kept)


def pair_matrices(
    dictionary: BilingualDictionary, source: EmbeddingTable, target: EmbeddingTable
) -> tuple[np.ndarray, np.ndarray, int]:
    """Stack in-vocabulary pairs as columns; returns ``(X, Y, n_oov)``."""
    src_idx, tgt_idx = [], []
    oov = 0
    for s, t in dictionary.pairs:
        if s in source and t in target:
            src_idx.append(source.index(s))
            tgt_idx.append(target.index(t))
        else:
            oov += 1
    x = source.vectors[src_idx].T
    y = target.vectors[tgt_idx].T
    return x, y, oov


@dataclass
class AlignmentConfig:
    pivot: str
    dictionary_paths: Mapping[str, str | Path] = field(default_factory=dict)
    mode: str = ORTHOGONAL
    exclusion: frozenset[tuple[str, str]] = frozenset()
    ridge: float = 0.0

    def digest(self) -> str:
        payload = {
            "pivot": self.pivot,
            "mode": canonical_mode(self.mode),
            "ridge": self.ridge,
            "dictionaries": {k: str(v) for k, v in sorted(self.dictionary_paths.items())},
            "exclusion": sorted(map(list, self.exclusion)),
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class LanguageFit:
    language: str
    n_pairs: int
    n_oov: int
    n_excluded: int
    residual: float
    train_cosine: float


@dataclass(frozen=True)
class MultilingualSpace:
    pivot: str
    tables: Mapping[str, EmbeddingTable]
    maps: Mapping[str, LinearMap]
    fits: Mapping[str, LanguageFit] = field(default_factory=dict)
    provenance: str = ""

    @property
    def languages(self) -> tuple[str, ...]:
        return tuple(self.tables)

    @property
    def dim(self) -> int:
        return self.tables[self.pivot].dim

    def vector(self, language: str, word: str) -> np.ndarray | None:
        table = self.tables.get(language)
        return None if table is None else table.get(word)


def _project(table: EmbeddingTable, linear_map: LinearMap) -> EmbeddingTable:
    projected = normalize_rows(linear_map.apply(table.vectors))
    return EmbeddingTable(table.language, table.words, projected, normalize=False)


def build_multilingual_space(
    config: AlignmentConfig,
    tables: Mapping[str, EmbeddingTable],
    dictionaries: Mapping[str, BilingualDictionary] | None = None,
) -> MultilingualSpace:
    """Fit one map per non-pivot language onto the pivot and project its table.

    Dictionaries run from each language to the pivot. When ``dictionaries``
    is not given they are loaded from ``config.dictionary_paths``.
    """
    pivot = config.pivot
    if pivot not in tables:
        raise AlignmentError(f"pivot language {pivot!r} has no embedding table")
    dim = tables[pivot].dim
    for lang, table in tables.items():
        if table.dim != dim:
            raise AlignmentError(f"{lang}: dimension {table.dim} differs from pivot dimension {dim}")

    out_tables: dict[str, EmbeddingTable] = {pivot: tables[pivot]}
    maps: dict[str, LinearMap] = {pivot: LinearMap.identity(pivot, dim)}
    fits: dict[str, LanguageFit] = {}
    for lang in tables:
        if lang == pivot:
            continue
        if dictionaries is not None and lang in dictionaries:
            dictionary = dictionaries[lang]
        elif lang in config.dictionary_paths:
            dictionary = load_dictionary(config.dictionary_paths[lang], lang, pivot)
        else:
            raise AlignmentError(f"{lang}: no dictionary to pivot {pivot!r}")
        try:
            kept = filter_dictionary(dictionary, config.exclusion) if config.exclusion else dictionary
            x, y, oov = pair_matrices(kept, tables[lang], tables[pivot])
            fitted = fit_map(x, y, config.mode, ridge=config.ridge, source=lang, target=pivot)
        except AlignmentError as exc:
            raise AlignmentError(f"{lang}: {exc}") from exc
        projected = normalize_rows(fitted.apply(x.T))
        train_cos = float(np.mean(np.sum(projected * y.T, axis=1)))
        fits[lang] = LanguageFit(lang, x.shape[1], oov, len(dictionary) - len(kept), fitted.residual, train_cos)
        log.info("%s: fitted %s map on %d pairs (%d OOV), residual %.4g", lang, fitted.mode, x.shape[1], oov, fitted.residual)
        maps[lang] = fitted
        out_tables[lang] = _project(tables[lang], fitted)
    return MultilingualSpace(pivot, out_tables, maps, fits, config.digest())


@dataclass(frozen=True)
class AlignmentQuality:
    mean_cosine: float
    n_used: int
    n_skipped: int

    def __float__(self) -> float:
        return self.mean_cosine


def alignment_quality(space: MultilingualSpace, heldout: BilingualDictionary) -> AlignmentQuality:
    """Mean cosine between projected vectors of held-out translation pairs."""
    src = space.tables.get(heldout.source_language)
    tgt = space.tables.get(heldout.target_language)
    if src is None or tgt is None:
        raise AlignmentError(f"{heldout.source_language}->{heldout.target_language}: language not in space")
    cosines = []
    skipped = 0
    for s, t in heldout.pairs:
        u, v = src.get(s), tgt.get(t)
        if u is None or v is None:
            skipped += 1
            continue
        cosines.append(float(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v)))
    if not cosines:
        raise AlignmentError(
            f"{heldout.source_language}->{heldout.target_language}: no held-out pair is in vocabulary"
        )
    return AlignmentQuality(float(np.mean(cosines)), len(cosines), skipped)


def save_map(linear_map: LinearMap, path: str | Path) -> None:
    """Row-major text matrix, one row per line, preceded by a ``#`` metadata line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {linear_map.source_language} {linear_map.target_language} {linear_map.mode}\n")
        for row in linear_map.matrix:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_map(path: str | Path) -> LinearMap:
    source = target = ""
    mode = LEAST_SQUARES
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 3:
                    source, target, mode = parts
                continue
            if line.strip():
                rows.append([float(v) for v in line.split()])
    matrix = np.array(rows, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise AlignmentError(f"{path}: map is not a square matrix")
    return LinearMap(source, target, matrix, canonical_mode(mode))
