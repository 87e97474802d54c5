"""Tables, JSON mirrors and SVG charts for analysis results.

Charts are plain hand-written SVG. Every number drawn is rounded once, and
that rounded string is what lands in both the chart (``data-value``) and the
companion TSV, so the two never disagree.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from semaff.affinity import AffinityRecord, DistanceMatrix, DomainSummary, concept_vectors
from semaff.errors import CoverageError
from semaff.stats import RegressionResult, vectorize_matrix

CHART_KINDS = ("affinity-table", "domain-bars", "kinship-profile", "partial-corr-bars", "scatter-2d")
_FORMATS = {
    "affinity-table": ("TSV", "JSON"),
    "domain-bars": ("SVG", "TSV"),
    "kinship-profile": ("SVG", "TSV"),
    "partial-corr-bars": ("SVG", "TSV"),
    "scatter-2d": ("SVG", "TSV"),
}


@dataclass(frozen=True)
class ReportSpec:
    kind: str
    output: Path
    format: str

    def __post_init__(self):
        if self.kind not in _FORMATS:
            raise ValueError(f"unknown report kind {self.kind!r}")
        if self.format not in _FORMATS[self.kind]:
            raise ValueError(f"{self.kind} cannot be written as {self.format}")


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "yes" if value else "no"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return format(float(value), ".10g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if math.isnan(obj) else float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


class OutputWriter:
    """Writes artifacts under one run directory, stamping each with the manifest digest."""

    def __init__(self, root: Path, manifest):
        self.root = Path(root)
        self.manifest = manifest
        self.digest = manifest.digest

    def _path(self, rel: str) -> Path:
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def register(self, path: Path) -> None:
        rel = path.relative_to(self.root).as_posix()
        self.manifest.outputs[rel] = hashlib.sha256(path.read_bytes()).hexdigest()

    def text(self, rel: str, content: str) -> Path:
        p = self._path(rel)
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(content)
        self.register(p)
        return p

    def tsv(self, rel: str, columns: Sequence[str], rows: Sequence[Sequence]) -> Path:
        lines = [f"# manifest: {self.digest}", "\t".join(columns)]
        for row in rows:
            lines.append("\t".join(cell if isinstance(cell, str) else fmt(cell) for cell in row))
        return self.text(rel, "\n".join(lines) + "\n")

    def json(self, rel: str, payload) -> Path:
        body = {"manifest": self.digest, **_jsonable(payload)}
        return self.text(rel, json.dumps(body, indent=2, sort_keys=True, ensure_ascii=False) + "\n")

    def finish(self):
        self.manifest.outputs.pop("manifest.json", None)
        p = self._path("manifest.json")
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(_jsonable(self.manifest.to_json()), indent=2, sort_keys=True) + "\n")
        return self.manifest


# --------------------------------------------------------------------------
# table writers


def affinity_rows(records: Sequence[AffinityRecord], lexicon) -> list[list]:
    rows = []
    for r in records:
        c = lexicon[r.concept_id]
        rows.append([r.concept_id, c.gloss, c.pos, ",".join(sorted(c.domains)), r.coverage, r.sem_aff])
    return rows


AFFINITY_COLUMNS = ("concept_id", "gloss", "pos", "domains", "coverage", "sem_aff")
REGRESSION_COLUMNS = ("predictor", "coef_x10", "coef", "std_err", "t_stat", "p_value")
SUMMARY_COLUMNS = ("group", "count", "sem_aff", "sd")


def write_affinities(writer: OutputWriter, records, failures, lexicon) -> None:
    writer.tsv("concepts/affinity.tsv", AFFINITY_COLUMNS, affinity_rows(records, lexicon))
    writer.json("concepts/affinity.json", {
        "records": [
            {
                "concept_id": r.concept_id,
                "sem_aff": r.sem_aff,
                "coverage": r.coverage,
                "negative": r.negative,
                "cosines": dict(r.cosines),
                "skipped": dict(r.skipped),
            }
            for r in records
        ],
        "failures": failures,
    })


def regression_payload(res: RegressionResult, response: str) -> dict:
    return {
        "response": response,
        "n": res.n,
        "dof": res.dof,
        "r2": res.r2,
        "adj_r2": res.adj_r2,
        "standardized": res.standardized,
        "coefficients": res.rows(),
    }


def write_regression(writer: OutputWriter, rel_stem: str, res: RegressionResult, response: str) -> None:
    rows = [[r["predictor"], r["coef_x10"], r["coef"], r["std_err"], r["t_stat"], r["p_value"]] for r in res.rows()]
    writer.tsv(rel_stem + ".tsv", REGRESSION_COLUMNS, rows)
    writer.json(rel_stem + ".json", regression_payload(res, response))


def write_summaries(writer: OutputWriter, rel_stem: str, summaries: Sequence[DomainSummary], omitted: Mapping[str, int]) -> None:
    writer.tsv(rel_stem + ".tsv", SUMMARY_COLUMNS, [[s.name, s.count, s.mean, s.sd] for s in summaries])
    writer.json(rel_stem + ".json", {
        "groups": [{"group": s.name, "count": s.count, "sem_aff": s.mean, "sd": s.sd, "members": list(s.members)} for s in summaries],
        "omitted": dict(omitted),
        "sd": "population",
    })


def write_space(writer: OutputWriter, cfg, space, heldout: Mapping[str, tuple[float, int, int]]) -> None:
    from semaff.alignment import save_map

    rows = []
    for lang in space.languages:
        fit = space.fits.get(lang)
        q = heldout.get(lang)
        rows.append([
            lang,
            "pivot" if lang == space.pivot else space.maps[lang].mode,
            fit.n_pairs if fit else 0,
            fit.n_oov if fit else 0,
            fit.n_excluded if fit else 0,
            fit.residual if fit else 0.0,
            fit.train_cosine if fit else 1.0,
            q[0] if q else None,
            q[1] if q else None,
        ])
        mp = writer._path(f"space/maps/{lang}.txt")
        save_map(space.maps[lang], mp)
        writer.register(mp)
    writer.tsv(
        "space/alignment.tsv",
        ("language", "mode", "n_pairs", "n_oov", "n_excluded", "residual", "train_cosine", "heldout_cosine", "heldout_pairs"),
        rows,
    )


def write_concepts(writer: OutputWriter, analysis) -> None:
    write_affinities(writer, analysis.records, analysis.failures, analysis.lexicon)
    writer.tsv(
        "concepts/predictors.tsv",
        ("concept_id", "mean_word_rank", "degree_of_polysemy", "mean_word_length", "flags"),
        [[p.concept_id, p.mean_word_rank, p.degree_of_polysemy, p.mean_word_length, ",".join(p.flags)] for p in analysis.predictors],
    )
    write_regression(writer, "concepts/regression", analysis.regression, "sem_aff")
    write_summaries(writer, "concepts/pos", analysis.pos, analysis.pos_omitted)
    write_summaries(writer, "concepts/domains", analysis.domains, analysis.domains_omitted)


def matrix_rows(m: DistanceMatrix) -> list[list]:
    return [[lang, *[float(v) for v in m.values[i]]] for i, lang in enumerate(m.languages)]


def write_matrices(writer: OutputWriter, matrices: Mapping[str, DistanceMatrix]) -> None:
    for kind, m in matrices.items():
        writer.tsv(f"languages/{kind.lower()}.tsv", ("language", *m.languages), matrix_rows(m))


PARTIAL_COLUMNS = ("domain", "factor", "controls", "r", "p_value", "significant", "n_pairs", "n_concepts", "note")


def write_languages(writer: OutputWriter, analysis) -> None:
    write_matrices(writer, analysis.matrices)
    vecs = {k: vectorize_matrix(m)[0] for k, m in analysis.matrices.items()}
    kinds = list(analysis.matrices)
    counts = analysis.concept_counts[np.triu_indices(len(analysis.languages), k=1)]
    writer.tsv(
        "languages/pairs.tsv",
        ("lang_i", "lang_j", *kinds, "n_concepts"),
        [[a, b, *[vecs[k][i] for k in kinds], int(counts[i])] for i, (a, b) in enumerate(analysis.pairs)],
    )
    writer.tsv("languages/correlations.tsv", ("var1", "var2", "r", "p_value", "n_pairs"),
               [[c["var1"], c["var2"], c["r"], c["p_value"], c["n_pairs"]] for c in analysis.correlations])
    write_regression(writer, "languages/regression", analysis.regression, "SDist")
    writer.tsv("languages/partial_correlations.tsv", PARTIAL_COLUMNS, [[row[c] for c in PARTIAL_COLUMNS] for row in analysis.partial])
    writer.json("languages/partial_correlations.json", {"rows": analysis.partial, "threshold": 0.05})
    if analysis.mantel:
        writer.tsv("languages/mantel.tsv", ("var1", "var2", "r", "p_value", "permutations", "seed"),
                   [[m["var1"], m["var2"], m["r"], m["p_value"], m["permutations"], m["seed"]] for m in analysis.mantel])


# --------------------------------------------------------------------------
# projection and kinship data


def project_2d(vectors) -> tuple[np.ndarray, bool]:
    """Coordinates on the top two principal axes of the centred vectors.

    Each axis is signed so its largest-magnitude loading is positive. Returns
    ``(points, degenerate)``; identical inputs give all-zero points and
    ``degenerate=True``.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least two vectors")
    centred = x - x.mean(axis=0)
    if not np.any(np.abs(centred) > 1e-12):
        return np.zeros((x.shape[0], 2)), True
    _, s, vt = np.linalg.svd(centred, full_matrices=False)
    axes = np.zeros((2, x.shape[1]))
    k = min(2, vt.shape[0])
    axes[:k] = vt[:k]
    # axes without variance contribute nothing
    axes[k:] = 0.0
    if k == 2 and s[1] <= 1e-12 * max(s[0], 1.0):
        axes[1] = 0.0
    for i in range(2):
        j = int(np.argmax(np.abs(axes[i])))
        if axes[i, j] < 0:
            axes[i] = -axes[i]
    return centred @ axes.T, False


@dataclass(frozen=True)
class KinshipProfile:
    pairs: tuple[tuple[str, str], ...]
    female: tuple[float, ...]
    male: tuple[float, ...]

    def rows(self) -> list[list]:
        return [[i + 1, f, fv, m, mv] for i, ((f, m), fv, mv) in enumerate(zip(self.pairs, self.female, self.male))]


def _rounded(v: float) -> float:
    return float(f"{v:.6f}")


def kinship_profile(records: Sequence[AffinityRecord], ordering: Sequence[tuple[str, str]]) -> KinshipProfile:
    """Female/male affinity series in the given ego-relatedness order.

    ``ordering`` holds ``(female_id, male_id)`` pairs, closest kin first.
    """
    if not ordering:
        raise CoverageError("kinship ordering is empty")
    by_id = {r.concept_id: r.sem_aff for r in records}
    missing = [cid for pair in ordering for cid in pair if cid not in by_id]
    if missing:
        raise CoverageError(f"no affinity record for kinship concept(s): {', '.join(missing)}")
    pairs = tuple((f, m) for f, m in ordering)
    return KinshipProfile(pairs, tuple(_rounded(by_id[f]) for f, _ in pairs), tuple(_rounded(by_id[m]) for _, m in pairs))


# --------------------------------------------------------------------------
# SVG

_W, _H = 640, 360
_M = {"left": 60, "right": 20, "top": 40, "bottom": 90}
_PALETTE = ("#4472c4", "#ed7d31", "#70ad47", "#7f7f7f")


def _svg(title: str, digest: str, body: list[str]) -> str:
    head = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f"<desc>manifest: {escape(digest)}</desc>",
        f'<text x="{_W / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
    ]
    return "\n".join(head + body + ["</svg>"]) + "\n"


def _scale(values: Sequence[float]) -> tuple[float, float]:
    finite = [v for v in values if not math.isnan(v)]
    lo = min(0.0, *finite) if finite else 0.0
    hi = max(0.0, *finite) if finite else 1.0
    if hi == lo:
        hi = lo + 1.0
    return lo, hi


def _y(v: float, lo: float, hi: float) -> float:
    plot_h = _H - _M["top"] - _M["bottom"]
    return _M["top"] + plot_h * (hi - v) / (hi - lo)


def grouped_bars_svg(
    title: str,
    groups: Sequence[str],
    series: Sequence[str],
    values: Sequence[Sequence[float]],
    digest: str,
    *,
    hollow: Sequence[Sequence[bool]] | None = None,
) -> str:
    """``values[g][s]`` is drawn as one bar; hollow bars get no fill."""
    flat = [v for row in values for v in row]
    lo, hi = _scale(flat)
    plot_w = _W - _M["left"] - _M["right"]
    slot = plot_w / max(len(groups), 1)
    bar_w = slot * 0.8 / max(len(series), 1)
    zero = _y(0.0, lo, hi)
    body = [
        f'<line x1="{_M["left"]}" y1="{zero:.2f}" x2="{_W - _M["right"]}" y2="{zero:.2f}" stroke="black"/>',
        f'<text x="{_M["left"] - 6}" y="{_y(hi, lo, hi):.2f}" text-anchor="end" font-family="sans-serif" font-size="10">{hi:.3f}</text>',
        f'<text x="{_M["left"] - 6}" y="{_y(lo, lo, hi):.2f}" text-anchor="end" font-family="sans-serif" font-size="10">{lo:.3f}</text>',
    ]
    for gi, group in enumerate(groups):
        x0 = _M["left"] + gi * slot + slot * 0.1
        for si, name in enumerate(series):
            v = values[gi][si]
            if math.isnan(v):
                continue
            top, bottom = sorted((_y(v, lo, hi), zero))
            colour = _PALETTE[si % len(_PALETTE)]
            empty = bool(hollow and hollow[gi][si])
            fill = "none" if empty else colour
            body.append(
                f'<rect class="bar" data-group={quoteattr(group)} data-series={quoteattr(name)} data-value="{v:.6f}" '
                f'x="{x0 + si * bar_w:.2f}" y="{top:.2f}" width="{bar_w * 0.9:.2f}" height="{bottom - top:.2f}" '
                f'fill="{fill}" stroke="{colour}"/>'
            )
        cx = _M["left"] + (gi + 0.5) * slot
        body.append(
            f'<text x="{cx:.2f}" y="{_H - _M["bottom"] + 14}" text-anchor="end" font-family="sans-serif" font-size="10" '
            f'transform="rotate(-35 {cx:.2f} {_H - _M["bottom"] + 14})">{escape(group)}</text>'
        )
    if len(series) > 1:
        for si, name in enumerate(series):
            lx = _M["left"] + si * 110
            body.append(f'<rect x="{lx}" y="{_H - 18}" width="10" height="10" fill="{_PALETTE[si % len(_PALETTE)]}"/>')
            body.append(f'<text x="{lx + 14}" y="{_H - 9}" font-family="sans-serif" font-size="10">{escape(name)}</text>')
    return _svg(title, digest, body)


def scatter_svg(title: str, points: Sequence[tuple[str, str, float, float]], digest: str) -> str:
    """``points`` are ``(series, label, x, y)``."""
    xs = [p[2] for p in points] or [0.0]
    ys = [p[3] for p in points] or [0.0]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    x_hi = x_hi if x_hi > x_lo else x_lo + 1.0
    y_hi = y_hi if y_hi > y_lo else y_lo + 1.0
    plot_w = _W - _M["left"] - _M["right"]
    plot_h = _H - _M["top"] - _M["bottom"]
    series = sorted({p[0] for p in points})
    body = []
    for s, label, x, y in points:
        px = _M["left"] + plot_w * (x - x_lo) / (x_hi - x_lo)
        py = _M["top"] + plot_h * (y_hi - y) / (y_hi - y_lo)
        colour = _PALETTE[series.index(s) % len(_PALETTE)]
        body.append(
            f'<circle class="point" data-series={quoteattr(s)} data-label={quoteattr(label)} data-x="{x:.6f}" data-y="{y:.6f}" '
            f'cx="{px:.2f}" cy="{py:.2f}" r="4" fill="{colour}"/>'
        )
        body.append(f'<text x="{px + 6:.2f}" y="{py + 3:.2f}" font-family="sans-serif" font-size="9">{escape(label)}</text>')
    for si, name in enumerate(series):
        lx = _M["left"] + si * 110
        body.append(f'<rect x="{lx}" y="{_H - 18}" width="10" height="10" fill="{_PALETTE[si % len(_PALETTE)]}"/>')
        body.append(f'<text x="{lx + 14}" y="{_H - 9}" font-family="sans-serif" font-size="10">{escape(name)}</text>')
    return _svg(title, digest, body)


def write_domain_bars(writer: OutputWriter, rel_stem: str, title: str, summaries: Sequence[DomainSummary]) -> None:
    values = [_rounded(s.mean) for s in summaries]
    sds = [_rounded(s.sd) for s in summaries]
    writer.tsv(rel_stem + ".tsv", ("group", "count", "sem_aff", "sd"),
               [[s.name, s.count, f"{v:.6f}", f"{sd:.6f}"] for s, v, sd in zip(summaries, values, sds)])
    writer.text(rel_stem + ".svg", grouped_bars_svg(title, [s.name for s in summaries], ["SemAff"], [[v] for v in values], writer.digest))


def write_kinship(writer: OutputWriter, profile: KinshipProfile) -> None:
    writer.tsv("reports/kinship-profile.tsv", ("position", "female", "female_sem_aff", "male", "male_sem_aff"),
               [[i, f, f"{fv:.6f}", m, f"{mv:.6f}"] for i, f, fv, m, mv in profile.rows()])
    labels = [f"{f}/{m}" for f, m in profile.pairs]
    writer.text("reports/kinship-profile.svg", grouped_bars_svg(
        "Semantic affinity of kin terms by relatedness to ego", labels, ["female", "male"],
        [[fv, mv] for fv, mv in zip(profile.female, profile.male)], writer.digest))


def write_partial_bars(writer: OutputWriter, rows: Sequence[dict]) -> None:
    from semaff.pipeline import FACTORS

    domains = list(dict.fromkeys(r["domain"] for r in rows))
    cell = {(r["domain"], r["factor"]): r for r in rows}
    values, hollow, table = [], [], []
    for d in domains:
        vrow, hrow = [], []
        for f in FACTORS:
            r = cell[(d, f)]
            v = float("nan") if math.isnan(r["r"]) else _rounded(r["r"])
            vrow.append(v)
            hrow.append(not r["significant"])
            table.append([d, f, "nan" if math.isnan(v) else f"{v:.6f}", r["p_value"], r["significant"]])
        values.append(vrow)
        hollow.append(hrow)
    writer.tsv("reports/partial-corr-bars.tsv", ("domain", "factor", "r", "p_value", "significant"), table)
    writer.text("reports/partial-corr-bars.svg", grouped_bars_svg(
        "Partial correlation of SDist with each factor (hollow: p > 0.05)", domains, list(FACTORS), values, writer.digest, hollow=hollow))


def write_scatter(writer: OutputWriter, space, lexicon, concept_ids: Sequence[str], form_mode: str) -> None:
    labels, vecs = [], []
    for cid in concept_ids:
        if cid not in lexicon:
            raise CoverageError(f"scatter concept {cid!r} not in lexicon")
        cv, _ = concept_vectors(space, lexicon[cid], None, form_mode)
        for lang, v in cv.members:
            labels.append((cid, lang))
            vecs.append(v)
    if len(vecs) < 2:
        raise CoverageError("scatter plot needs at least two resolvable vectors")
    pts, _degenerate = project_2d(np.array(vecs))
    rounded = [(c, lang, _rounded(x), _rounded(y)) for (c, lang), (x, y) in zip(labels, pts)]
    writer.tsv("reports/scatter-2d.tsv", ("concept_id", "language", "x", "y"),
               [[c, lang, f"{x:.6f}", f"{y:.6f}"] for c, lang, x, y in rounded])
    writer.text("reports/scatter-2d.svg", scatter_svg("PCA projection of concept vectors", rounded, writer.digest))


def write_figures(writer: OutputWriter, cfg, space, concepts, languages, kinds: Sequence[str] = CHART_KINDS) -> None:
    if "affinity-table" in kinds:
        write_affinities(writer, concepts.records, concepts.failures, concepts.lexicon)
    if "domain-bars" in kinds:
        write_domain_bars(writer, "reports/domain-bars", "Semantic affinity by domain", concepts.domains)
        write_domain_bars(writer, "reports/pos-bars", "Semantic affinity by part of speech", concepts.pos)
    if "kinship-profile" in kinds and cfg.kinship:
        write_kinship(writer, kinship_profile(concepts.records, cfg.kinship))
    if "partial-corr-bars" in kinds and languages is not None:
        write_partial_bars(writer, languages.partial)
    if "scatter-2d" in kinds and cfg.scatter:
        write_scatter(writer, space, concepts.lexicon, cfg.scatter, cfg.form_mode)
