"""End-to-end runs driven by one INI-style config file.

A config names the pivot, per-language vector/dictionary/ranking files and
the shared data files; relative paths resolve against the config's folder::

    [run]
    pivot = eng
    mode = procrustes          ; or ls
    min_coverage = 2
    min_group_size = 5
    standardize = on
    strict_ranks = on
    seed = 0

    [vectors]
    eng = vectors/eng.vec
    fra = vectors/fra.vec

    [dictionaries]
    fra = dictionaries/fra-eng.tsv

    [ranks]
    eng = ranks/eng.txt

    [data]
    lexicon = lexicon.tsv
    senses = senses.tsv
    tree = tree.nwk
    geo = geo.tsv
    climate = climate.tsv

Optional sections: ``[heldout]`` (per-language held-out dictionaries),
``[analysis]`` (``languages``, ``domains``), ``[report]`` (``kinship`` as
``female:male`` pairs, ``scatter`` concept ids).
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
import json
import logging
import os
import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from semaff import __version__
from semaff.affinity import (
    FORM_FIRST,
    FORM_MEAN,
    AffinityRecord,
    DistanceMatrix,
    DomainSummary,
    aggregate,
    all_affinities,
    sdist_matrix,
)
from semaff.alignment import (
    AlignmentConfig,
    LanguageFit,
    LinearMap,
    MultilingualSpace,
    alignment_quality,
    build_multilingual_space,
    canonical_mode,
)
from semaff.embedding_io import (
    ConceptLexicon,
    EmbeddingTable,
    load_dictionary,
    load_embeddings,
    load_frequency_ranking,
    load_lexicon,
    load_sense_inventory,
)
from semaff.errors import ConfigError, CoverageError, SemAffError, StaleCacheError, StatsError
from semaff.predictors import PREDICTOR_NAMES, PredictorRow, build_predictor_table
from semaff.stats import RegressionResult, mantel_test, ols_fit, partial_correlation, pearson, vectorize_matrix
from semaff.typology import factor_matrices, load_climate, load_geo, load_tree

log = logging.getLogger(__name__)

FACTORS = ("PHY", "GEO", "CLM")


class StageError(SemAffError):
    """An error raised inside a named pipeline stage."""

    def __init__(self, stage: str, error: Exception):
        super().__init__(f"[{stage}] {error}")
        self.stage = stage
        self.error = error


class CacheVersionWarning(UserWarning):
    pass


def _flag(value: str | bool) -> bool:
    if isinstance(value, bool):
        return value
    v = value.strip().lower()
    if v in ("on", "true", "yes", "1"):
        return True
    if v in ("off", "false", "no", "0"):
        return False
    raise ConfigError(f"expected on/off, got {value!r}")


def _list(value: str | None) -> list[str] | None:
    if value is None or not value.strip():
        return None
    return [v.strip() for v in value.split(",") if v.strip()]


@dataclass
class RunConfig:
    root: Path
    pivot: str
    vectors: dict[str, str]
    dictionaries: dict[str, str] = field(default_factory=dict)
    heldout: dict[str, str] = field(default_factory=dict)
    ranks: dict[str, str] = field(default_factory=dict)
    data: dict[str, str] = field(default_factory=dict)
    mode: str = "orthogonal"
    ridge: float = 0.0
    min_coverage: int = 2
    min_group_size: int = 5
    form_mode: str = FORM_MEAN
    standardize: bool = True
    strict_ranks: bool = True
    seed: int = 0
    mantel: bool = False
    permutations: int = 9999
    great_circle: bool = False
    zscore_climate: bool = False
    languages: list[str] | None = None
    domains: list[str] | None = None
    kinship: list[tuple[str, str]] = field(default_factory=list)
    scatter: list[str] = field(default_factory=list)

    def path(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.root / p

    def data_path(self, key: str) -> Path:
        if key not in self.data:
            raise ConfigError(f"[data] {key} is not configured")
        return self.path(self.data[key])

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)

    def settings(self) -> dict:
        """Every setting that can change a result, with paths as written."""
        out = dataclasses.asdict(self)
        out.pop("root")
        out["mode"] = canonical_mode(self.mode)
        out["kinship"] = [list(p) for p in self.kinship]
        return out

    def digest(self) -> str:
        return _sha256(_canonical(self.settings()))

    def input_files(self) -> dict[str, str]:
        files = {}
        for section in (self.vectors, self.dictionaries, self.heldout, self.ranks, self.data):
            for rel in section.values():
                files[rel] = rel
        return dict(sorted(files.items()))


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    cp.optionxform = str
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not cp.has_section("run") or not cp.has_option("run", "pivot"):
        raise ConfigError(f"{path}: [run] pivot is required")
    if not cp.has_section("vectors"):
        raise ConfigError(f"{path}: [vectors] section is required")
    run = cp["run"]
    section = lambda name: dict(cp[name]) if cp.has_section(name) else {}
    analysis, report = section("analysis"), section("report")
    kinship = []
    for item in _list(report.get("kinship")) or []:
        female, sep, male = item.partition(":")
        if not sep:
            raise ConfigError(f"{path}: kinship entries must be female:male, got {item!r}")
        kinship.append((female.strip(), male.strip()))
    try:
        cfg = RunConfig(
            root=path.parent.resolve(),
            pivot=run["pivot"].strip(),
            vectors=section("vectors"),
            dictionaries=section("dictionaries"),
            heldout=section("heldout"),
            ranks=section("ranks"),
            data=section("data"),
            mode=canonical_mode(run.get("mode", "orthogonal")),
            ridge=float(run.get("ridge", "0")),
            min_coverage=int(run.get("min_coverage", "2")),
            min_group_size=int(run.get("min_group_size", "5")),
            form_mode=run.get("form_mode", FORM_MEAN).strip(),
            standardize=_flag(run.get("standardize", "on")),
            strict_ranks=_flag(run.get("strict_ranks", "on")),
            seed=int(run.get("seed", "0")),
            mantel=_flag(run.get("mantel", "off")),
            permutations=int(run.get("permutations", "9999")),
            great_circle=_flag(run.get("great_circle", "off")),
            zscore_climate=_flag(run.get("zscore_climate", "off")),
            languages=_list(analysis.get("languages")),
            domains=_list(analysis.get("domains")),
            kinship=kinship,
            scatter=_list(report.get("scatter")) or [],
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if cfg.form_mode not in (FORM_MEAN, FORM_FIRST):
        raise ConfigError(f"{path}: form_mode must be {FORM_MEAN} or {FORM_FIRST}")
    if cfg.pivot not in cfg.vectors:
        raise ConfigError(f"{path}: pivot {cfg.pivot!r} has no [vectors] entry")
    return cfg


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    config_digest: str
    inputs: dict[str, str]
    version: str = __version__
    settings: dict = field(default_factory=dict)
    created: str | None = None
    counts: dict[str, int] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)

    @property
    def digest(self) -> str:
        """Identity of the run: config, inputs and toolkit version only."""
        return _sha256(_canonical({"config": self.config_digest, "inputs": self.inputs, "version": self.version}))

    def to_json(self) -> dict:
        return {
            "toolkit": "semaff",
            "version": self.version,
            "digest": self.digest,
            "config_digest": self.config_digest,
            "settings": self.settings,
            "inputs": self.inputs,
            "created": self.created,
            "counts": dict(sorted(self.counts.items())),
            "outputs": dict(sorted(self.outputs.items())),
        }


def make_manifest(cfg: RunConfig) -> RunManifest:
    inputs = {}
    for rel in cfg.input_files():
        p = cfg.path(rel)
        if not p.is_file():
            raise StageError("load", ConfigError(f"input file not found: {p}"))
        inputs[rel] = file_digest(p)
    # wall-clock time would break byte-identical reruns
    created = os.environ.get("SOURCE_DATE_EPOCH")
    return RunManifest(cfg.digest(), inputs, settings=cfg.settings(), created=created)


# --------------------------------------------------------------------------
# space cache

_MAGIC = b"SEMAFF-SPACE 1\n"


def cache_space(space: MultilingualSpace, path: str | Path, *, key: str = "") -> None:
    """Write ``space`` to a single self-verifying binary file.

    Layout: magic line, sha256 line, JSON header line, then raw little-endian
    float64 blocks. The digest covers the header line and the payload.
    """
    payload = io.BytesIO()
    langs = []
    for lang, table in space.tables.items():
        words = _canonical(list(table.words))
        vecs = np.ascontiguousarray(table.vectors, dtype="<f8").tobytes()
        lm = space.maps[lang]
        mat = np.ascontiguousarray(lm.matrix, dtype="<f8").tobytes()
        for blob in (words, vecs, mat):
            payload.write(blob)
        fit = space.fits.get(lang)
        langs.append({
            "language": lang,
            "n": len(table),
            "dim": table.dim,
            "sizes": [len(words), len(vecs), len(mat)],
            "map": {"source": lm.source_language, "target": lm.target_language, "mode": lm.mode,
                    "residual": lm.residual, "n_pairs": lm.n_pairs},
            "fit": dataclasses.asdict(fit) if fit else None,
        })
    header = _canonical({
        "version": __version__,
        "key": key,
        "pivot": space.pivot,
        "provenance": space.provenance,
        "languages": langs,
    })
    body = payload.getvalue()
    digest = _sha256(header + b"\n" + body)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC + digest.encode() + b"\n" + header + b"\n" + body)
    os.replace(tmp, path)


def load_cached_space(path: str | Path, *, key: str | None = None) -> MultilingualSpace:
    """Read a file written by :func:`cache_space`, verifying its digest.

    Raises
    ------
    StaleCacheError
        On any integrity failure, or when ``key`` is given and differs.
    """
    raw = Path(path).read_bytes()
    if not raw.startswith(_MAGIC):
        raise StaleCacheError(f"{path}: not a space cache")
    rest = raw[len(_MAGIC):]
    try:
        digest, header, body = rest.split(b"\n", 2)
    except ValueError:
        raise StaleCacheError(f"{path}: truncated cache") from None
    if _sha256(header + b"\n" + body) != digest.decode("ascii", "replace"):
        raise StaleCacheError(f"{path}: digest mismatch")
    meta = json.loads(header)
    if meta["version"] != __version__:
        warnings.warn(
            f"{path}: written by toolkit version {meta['version']}, running {__version__}",
            CacheVersionWarning,
            stacklevel=2,
        )
    if key is not None and meta["key"] != key:
        raise StaleCacheError(f"{path}: cache key does not match current inputs/config")
    tables, maps, fits = {}, {}, {}
    offset = 0
    for entry in meta["languages"]:
        n_words, n_vecs, n_mat = entry["sizes"]
        words = json.loads(body[offset:offset + n_words])
        offset += n_words
        vecs = np.frombuffer(body[offset:offset + n_vecs], dtype="<f8").reshape(entry["n"], entry["dim"])
        offset += n_vecs
        mat = np.frombuffer(body[offset:offset + n_mat], dtype="<f8").reshape(entry["dim"], entry["dim"])
        offset += n_mat
        lang = entry["language"]
        tables[lang] = EmbeddingTable(lang, words, vecs.astype(np.float64), normalize=False)
        m = entry["map"]
        maps[lang] = LinearMap(m["source"], m["target"], mat.astype(np.float64), m["mode"], m["residual"], m["n_pairs"])
        if entry["fit"]:
            fits[lang] = LanguageFit(**entry["fit"])
    return MultilingualSpace(meta["pivot"], tables, maps, fits, meta["provenance"])


# --------------------------------------------------------------------------
# stages


def _stage(name):
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except (SemAffError, OSError, ValueError) as exc:
                raise StageError(name, exc) from exc
        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner
    return wrap


@_stage("load")
def load_lexicon_for(cfg: RunConfig) -> ConceptLexicon:
    return load_lexicon(cfg.data_path("lexicon"))


def space_key(cfg: RunConfig, manifest: RunManifest) -> str:
    relevant = {
        "pivot": cfg.pivot,
        "mode": canonical_mode(cfg.mode),
        "ridge": cfg.ridge,
        "vectors": {k: manifest.inputs[v] for k, v in sorted(cfg.vectors.items())},
        "dictionaries": {k: manifest.inputs[v] for k, v in sorted(cfg.dictionaries.items())},
        "lexicon": manifest.inputs.get(cfg.data.get("lexicon", ""), ""),
        "version": __version__,
    }
    return _sha256(_canonical(relevant))


@_stage("build-space")
def build_space(cfg: RunConfig, lexicon: ConceptLexicon, *, cache_dir: Path | None = None, manifest: RunManifest | None = None) -> MultilingualSpace:
    """Load vectors and dictionaries, fit maps, and cache the result by content key."""
    manifest = manifest or make_manifest(cfg)
    key = space_key(cfg, manifest)
    cache_path = None
    if cache_dir is not None:
        cache_path = Path(cache_dir) / f"space-{key[:16]}.bin"
        if cache_path.is_file():
            try:
                space = load_cached_space(cache_path, key=key)
                log.info("loaded cached space %s", cache_path)
                return space
            except StaleCacheError as exc:
                log.warning("ignoring cache: %s", exc)
    tables = {}
    for lang, rel in cfg.vectors.items():
        tables[lang] = load_embeddings(cfg.path(rel), language=lang)
    dictionaries = {
        lang: load_dictionary(cfg.path(rel), lang, cfg.pivot) for lang, rel in cfg.dictionaries.items() if lang in tables
    }
    acfg = AlignmentConfig(cfg.pivot, dict(cfg.dictionaries), cfg.mode, frozenset(lexicon.all_forms()), cfg.ridge)
    space = build_multilingual_space(acfg, tables, dictionaries)
    space = dataclasses.replace(space, provenance=key)
    if cache_path is not None:
        cache_space(space, cache_path, key=key)
    return space


@_stage("build-space")
def heldout_quality(cfg: RunConfig, space: MultilingualSpace) -> dict[str, tuple[float, int, int]]:
    out = {}
    for lang, rel in sorted(cfg.heldout.items()):
        q = alignment_quality(space, load_dictionary(cfg.path(rel), lang, cfg.pivot))
        out[lang] = (q.mean_cosine, q.n_used, q.n_skipped)
    return out


@dataclass
class ConceptAnalysis:
    records: list[AffinityRecord]
    failures: dict[str, str]
    predictors: list[PredictorRow]
    regression: RegressionResult | None
    pos: list[DomainSummary]
    pos_omitted: dict[str, int]
    domains: list[DomainSummary]
    domains_omitted: dict[str, int]
    lexicon: ConceptLexicon


@_stage("affinity")
def compute_affinities(cfg: RunConfig, space: MultilingualSpace, lexicon: ConceptLexicon):
    return all_affinities(space, lexicon, cfg.min_coverage, form_mode=cfg.form_mode)


@_stage("predictors")
def compute_predictors(cfg: RunConfig, space: MultilingualSpace, lexicon: ConceptLexicon, concept_ids: Sequence[str]):
    rankings = {lang: load_frequency_ranking(cfg.path(rel), lang) for lang, rel in cfg.ranks.items()}
    inventory = load_sense_inventory(cfg.data_path("senses"))
    return build_predictor_table(
        list(concept_ids), lexicon, rankings, inventory, space.languages, strict_ranks=cfg.strict_ranks
    )


@_stage("regress")
def regress_concepts(cfg: RunConfig, records: Sequence[AffinityRecord], rows: Sequence[PredictorRow]) -> RegressionResult:
    aff = {r.concept_id: r.sem_aff for r in records}
    complete = [row for row in rows if not row.partial and row.concept_id in aff]
    if len(complete) <= len(PREDICTOR_NAMES) + 1:
        raise StatsError(f"insufficient data: {len(complete)} complete concept rows for {len(PREDICTOR_NAMES)} predictors")
    x = np.array([row.values() for row in complete], dtype=np.float64)
    y = np.array([aff[row.concept_id] for row in complete])
    return ols_fit(x, y, names=PREDICTOR_NAMES, standardize=cfg.standardize)


def run_concept_analysis(cfg: RunConfig, space: MultilingualSpace | None = None, lexicon: ConceptLexicon | None = None, *, cache_dir: Path | None = None) -> ConceptAnalysis:
    """Affinities for every concept, the predictor table and the affinity regression."""
    lexicon = lexicon or load_lexicon_for(cfg)
    space = space or build_space(cfg, lexicon, cache_dir=cache_dir)
    records, failures = compute_affinities(cfg, space, lexicon)
    rows = compute_predictors(cfg, space, lexicon, [r.concept_id for r in records])
    regression = regress_concepts(cfg, records, rows)
    pos, pos_omitted = aggregate(records, lexicon.grouping("pos"), cfg.min_group_size)
    domains, dom_omitted = aggregate(records, lexicon.grouping("domain"), cfg.min_group_size)
    return ConceptAnalysis(records, failures, rows, regression, pos, pos_omitted, domains, dom_omitted, lexicon)


@dataclass
class LanguageAnalysis:
    languages: tuple[str, ...]
    matrices: dict[str, DistanceMatrix]
    concept_counts: np.ndarray
    pairs: list[tuple[str, str]]
    correlations: list[dict]
    regression: RegressionResult
    partial: list[dict]
    mantel: list[dict] = field(default_factory=list)


def analysis_languages(cfg: RunConfig, space: MultilingualSpace) -> list[str]:
    langs = cfg.languages or list(space.languages)
    missing = [lang for lang in langs if lang not in space.tables]
    if missing:
        raise CoverageError(f"analysis languages not in space: {', '.join(missing)}")
    return langs


@_stage("factors")
def compute_factors(cfg: RunConfig, languages: Sequence[str]) -> dict[str, DistanceMatrix]:
    tree = load_tree(cfg.data_path("tree"))
    geo = load_geo(cfg.data_path("geo"))
    clim = load_climate(cfg.data_path("climate"))
    return factor_matrices(languages, tree, geo, clim, great_circle=cfg.great_circle, zscore_climate=cfg.zscore_climate)


@_stage("sdist")
def compute_sdist(cfg: RunConfig, space: MultilingualSpace, lexicon: ConceptLexicon, languages: Sequence[str], concepts=None):
    return sdist_matrix(space, lexicon, languages, concepts, form_mode=cfg.form_mode)


def analysis_domains(cfg: RunConfig, lexicon: ConceptLexicon) -> dict[str, list[str]]:
    members: dict[str, list[str]] = {}
    for cid, labels in lexicon.grouping("domain").items():
        for label in labels:
            members.setdefault(label, []).append(cid)
    if cfg.domains is not None:
        unknown = [d for d in cfg.domains if d not in members]
        if unknown:
            raise CoverageError(f"unknown domain(s): {', '.join(unknown)}")
        names = list(cfg.domains)
    else:
        names = sorted(d for d, ids in members.items() if len(ids) >= cfg.min_group_size)
    return {name: sorted(members[name]) for name in names}


def _partial_rows(domain: str, sd: DistanceMatrix, factors: Mapping[str, DistanceMatrix], n_concepts: int) -> list[dict]:
    y, _ = vectorize_matrix(sd)
    vecs = {k: vectorize_matrix(factors[k])[0] for k in FACTORS}
    rows = []
    for factor in FACTORS:
        others = [k for k in FACTORS if k != factor]
        row = {"domain": domain, "factor": factor, "controls": ",".join(others), "n_pairs": int(y.size), "n_concepts": n_concepts}
        try:
            res = partial_correlation(y, vecs[factor], [vecs[k] for k in others], names=others)
            row.update(r=res.r, p_value=res.p, significant=res.significant, note="")
        except StatsError as exc:
            row.update(r=float("nan"), p_value=float("nan"), significant=False, note=f"undefined: {exc}")
        rows.append(row)
    return rows


def run_language_analysis(cfg: RunConfig, space: MultilingualSpace | None = None, lexicon: ConceptLexicon | None = None, *, cache_dir: Path | None = None) -> LanguageAnalysis:
    """SDist and factor matrices, their correlations, the SDist regression and per-domain partial correlations."""
    lexicon = lexicon or load_lexicon_for(cfg)
    space = space or build_space(cfg, lexicon, cache_dir=cache_dir)
    try:
        languages = analysis_languages(cfg, space)
    except CoverageError as exc:
        raise StageError("sdist", exc) from exc
    factors = compute_factors(cfg, languages)
    sd, counts = compute_sdist(cfg, space, lexicon, languages)
    matrices = {"SDist": sd, **factors}
    y, pairs = vectorize_matrix(sd)
    n_pairs = len(pairs)
    if n_pairs <= len(FACTORS) + 1:
        raise StageError("regress", StatsError(
            f"insufficient data: {len(languages)} languages give {n_pairs} pair(s), regression on {len(FACTORS)} factors needs at least {len(FACTORS) + 2}"
        ))
    vec = {k: vectorize_matrix(m)[0] for k, m in matrices.items()}
    correlations = []
    names = ["SDist", *FACTORS]
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            try:
                r, p = pearson(vec[a], vec[b])
            except StatsError:
                r, p = float("nan"), float("nan")
            correlations.append({"var1": a, "var2": b, "r": r, "p_value": p, "n_pairs": n_pairs})
    try:
        regression = ols_fit(np.column_stack([vec[k] for k in FACTORS]), y, names=FACTORS, standardize=cfg.standardize)
    except StatsError as exc:
        raise StageError("regress", exc) from exc
    partial = _partial_rows("ALL", sd, factors, len(lexicon))
    try:
        domains = analysis_domains(cfg, lexicon)
    except CoverageError as exc:
        raise StageError("pcorr", exc) from exc
    for domain, ids in domains.items():
        dsd, _ = compute_sdist(cfg, space, lexicon, languages, ids)
        partial.extend(_partial_rows(domain, dsd, factors, len(ids)))
    mantel = []
    if cfg.mantel:
        for factor in FACTORS:
            r, p = mantel_test(sd, factors[factor], permutations=cfg.permutations, seed=cfg.seed)
            mantel.append({"var1": "SDist", "var2": factor, "r": r, "p_value": p, "permutations": cfg.permutations, "seed": cfg.seed})
    return LanguageAnalysis(tuple(languages), matrices, counts, pairs, correlations, regression, partial, mantel)


def run_all(cfg: RunConfig, out_dir: str | Path, *, cache_dir: str | Path | None = None) -> RunManifest:
    """Run every stage and write the full output tree plus ``manifest.json``."""
    from semaff import report

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = make_manifest(cfg)
    lexicon = load_lexicon_for(cfg)
    cache = Path(cache_dir) if cache_dir is not None else out / "cache"
    space = build_space(cfg, lexicon, cache_dir=cache, manifest=manifest)
    writer = report.OutputWriter(out, manifest)
    report.write_space(writer, cfg, space, heldout_quality(cfg, space))
    concepts = run_concept_analysis(cfg, space, lexicon)
    report.write_concepts(writer, concepts)
    languages = run_language_analysis(cfg, space, lexicon)
    report.write_languages(writer, languages)
    report.write_figures(writer, cfg, space, concepts, languages)
    manifest.counts.update({
        "languages_in_space": len(space.languages),
        "concepts": len(lexicon),
        "affinity_records": len(concepts.records),
        "affinity_failures": len(concepts.failures),
        "predictor_rows_complete": sum(not r.partial for r in concepts.predictors),
        "language_pairs": len(languages.pairs),
        "partial_correlation_rows": len(languages.partial),
    })
    cached = cache / f"space-{space.provenance[:16]}.bin"
    if cached.is_file() and cached.resolve().is_relative_to(out.resolve()):
        writer.register(cached)
    return writer.finish()
