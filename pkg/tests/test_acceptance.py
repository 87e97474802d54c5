"""Acceptance criteria 1-9, each at its stated tolerance and runtime limit.

Every test writes one ``ACCEPTANCE <n> PASS|FAIL`` line to the terminal.
Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import csv
import json
import math
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from semaff import pipeline, synthetic
from semaff.affinity import AffinityRecord, aggregate, all_affinities, sdist, sdist_matrix, sem_aff
from semaff.alignment import (
    AlignmentConfig,
    alignment_quality,
    build_multilingual_space,
    fit_least_squares,
    fit_procrustes,
    frobenius_norm,
)
from semaff.cli import main as cli_main
from semaff.errors import DegenerateClusterError
from semaff.stats import ols_fit, partial_correlation, t_two_sided_p, vectorize_matrix
from semaff.synthetic import random_orthogonal


@pytest.fixture
def criterion(request):
    """Yields a checker; prints the verdict line and fails the test on any miss."""
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    @contextmanager
    def run(number, title, limit_s):
        failures = []
        start = time.perf_counter()
        try:
            yield failures
        except Exception as exc:  # recorded so the verdict line still prints
            failures.append(f"{type(exc).__name__}: {exc}")
        elapsed = time.perf_counter() - start
        if elapsed >= limit_s:
            failures.append(f"runtime {elapsed:.2f}s exceeds {limit_s}s")
        verdict = "PASS" if not failures else "FAIL"
        line = f"ACCEPTANCE {number} {verdict} ({elapsed:.2f}s) {title}"
        if failures:
            line += " :: " + "; ".join(failures)
        if reporter is not None:
            reporter.write_line(line)
        else:
            print(line)
        assert not failures, line

    return run


def check(failures, ok, message):
    if not ok:
        failures.append(message)


def direct_sem_aff(vectors):
    n, d = len(vectors), len(vectors[0])
    c = [math.fsum(v[k] for v in vectors) / n for k in range(d)]
    cn = math.sqrt(math.fsum(x * x for x in c))
    total = 0.0
    for v in vectors:
        vn = math.sqrt(math.fsum(x * x for x in v))
        total += math.fsum(a * b for a, b in zip(v, c)) / (vn * cn)
    return total / n


def unit_columns(rng, d, n):
    x = rng.standard_normal((d, n))
    return x / np.linalg.norm(x, axis=0)


def test_1_analytic_affinity(criterion):
    with criterion(1, "analytic affinity", 1.0) as f:
        check(f, abs(sem_aff([[1.0, 0.0], [0.0, 1.0]]) - math.sqrt(2) / 2) <= 1e-9, "orthogonal pair")
        for n in (1, 2, 10, 35):
            v = np.array([0.48, 0.6, 0.64])
            check(f, abs(sem_aff(np.tile(v, (n, 1))) - 1.0) <= 1e-12, f"{n} identical vectors")
        try:
            sem_aff([[1.0, 0.0], [-1.0, 0.0]])
            f.append("antipodal pair did not raise")
        except DegenerateClusterError:
            pass


def test_2_oracle_equivalence(criterion):
    with criterion(2, "sem_aff matches direct formula on 200 seeded sets", 5.0) as f:
        worst = 0.0
        for seed in range(200):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(2, 36))
            d = int(rng.choice([3, 50, 300]))
            m = rng.standard_normal((n, d)) + rng.uniform(0.0, 2.0) * rng.standard_normal(d)
            m /= np.linalg.norm(m, axis=1, keepdims=True)
            worst = max(worst, abs(sem_aff(m) - direct_sem_aff(m.tolist())))
        check(f, worst <= 1e-10, f"max deviation {worst:.3g}")


def test_3_procrustes_recovery(criterion):
    with criterion(3, "Procrustes recovery and least-squares oracle, 50 maps", 30.0) as f:
        worst_w = worst_orth = worst_ls = 0.0
        for seed in range(50):
            rng = np.random.default_rng(1000 + seed)
            w = random_orthogonal(50, rng)
            x = unit_columns(rng, 50, 500)
            fit = fit_procrustes(x, w @ x)
            worst_w = max(worst_w, float(np.max(np.abs(fit.matrix - w))))
            worst_orth = max(worst_orth, fit.orthogonality_error())
            y = w @ x + 0.05 * rng.standard_normal((50, 500))
            oracle = y @ x.T @ np.linalg.inv(x @ x.T)
            worst_ls = max(worst_ls, float(np.max(np.abs(fit_least_squares(x, y).matrix - oracle))))
        check(f, worst_w <= 1e-6, f"max |W - W*| {worst_w:.3g}")
        check(f, worst_orth <= 1e-8, f"max orthogonality error {worst_orth:.3g}")
        check(f, worst_ls <= 1e-8, f"max least-squares deviation {worst_ls:.3g}")


def _tiers(records, noise):
    tiers = {}
    for r in records:
        tiers.setdefault(noise[r.concept_id], []).append(r.sem_aff)
    return [tiers[k] for k in sorted(tiers)]


def test_4_synthetic_world(criterion):
    with criterion(4, "synthetic world: held-out cosine and noise-tier ordering", 60.0) as f:
        trials, ordered, worst_q = 40, 0, 1.0
        for seed in range(trials):
            world = synthetic.make_world(seed, noise_tiers=(0.0, 0.1, 0.3), filler_noise=0.02, phylo_weight=0.0)
            cfg = AlignmentConfig(world.pivot, {}, "procrustes", frozenset(world.lexicon.all_forms()))
            space = build_multilingual_space(cfg, world.tables, world.dictionaries)
            for lang in world.languages[1:]:
                worst_q = min(worst_q, alignment_quality(space, world.heldout[lang]).mean_cosine)
            records, failures = all_affinities(space, world.lexicon)
            check(f, not failures, f"seed {seed}: affinity failures {failures}")
            t0, t1, t2 = _tiers(records, world.noise)
            # every concept of a noisier tier sits below every concept of the tier before it
            ordered += min(t0) > max(t1) and min(t1) > max(t2)
        check(f, worst_q >= 0.999, f"worst held-out mean cosine {worst_q:.6f}")
        check(f, ordered / trials >= 0.95, f"tier ordering held in {ordered}/{trials} trials")


def test_5_statistics(criterion):
    with criterion(5, "OLS recovery, single-control partial correlation, p monotonicity", 10.0) as f:
        rng = np.random.default_rng(5)
        x = rng.standard_normal((50, 3))
        beta = np.array([0.7, -1.25, 0.5, 2.0])
        res = ols_fit(x, beta[0] + x @ beta[1:])
        check(f, np.max(np.abs(res.coef - beta)) <= 1e-8, f"OLS error {np.max(np.abs(res.coef - beta)):.3g}")
        worst = 0.0
        for seed in range(100):
            r = np.random.default_rng(seed)
            n = int(r.integers(8, 80))
            z = r.standard_normal(n)
            a = r.normal() * z + r.standard_normal(n)
            b = r.normal() * z + r.normal() * a + r.standard_normal(n)
            rab, raz, rbz = (np.corrcoef(u, v)[0, 1] for u, v in ((a, b), (a, z), (b, z)))
            closed = (rab - raz * rbz) / math.sqrt((1 - raz**2) * (1 - rbz**2))
            worst = max(worst, abs(partial_correlation(a, b, [z]).r - closed))
        check(f, worst <= 1e-10, f"partial correlation deviation {worst:.3g}")
        grid = np.linspace(0.0, 50.0, 20001)
        for dof in (1, 2, 5, 30, 1000):
            p = t_two_sided_p(grid, dof)
            check(f, bool(np.all(np.diff(p) <= 0.0)), f"p not monotone for dof {dof}")
            check(f, bool(np.array_equal(p, t_two_sided_p(-grid, dof))), f"p not symmetric for dof {dof}")


def test_6_planted_language_dependency(criterion, tmp_path):
    with criterion(6, "planted SDist = 0.1 PHY + eps", 30.0) as f:
        langs = tuple(f"l{i}" for i in range(8))
        # balanced tree, equal leaf depth 3, weight^2 = 0.5: noise-free SDist is exactly 0.1 PHY
        world = synthetic.make_world(3, languages=langs, noise_tiers=(0.0,), phylo_weight=math.sqrt(0.5))
        cfg = pipeline.load_config(synthetic.write_world(world, tmp_path / "w")).replace(standardize=False)
        la = pipeline.run_language_analysis(cfg)
        sd, _ = vectorize_matrix(la.matrices["SDist"])
        factors = {k: vectorize_matrix(la.matrices[k])[0] for k in ("PHY", "GEO", "CLM")}
        y = sd + np.random.default_rng(0).normal(0.0, 1e-4, sd.size)
        res = ols_fit(np.column_stack([factors[k] for k in ("PHY", "GEO", "CLM")]), y, names=("PHY", "GEO", "CLM"))
        phy = res.coefficient("PHY")
        check(f, abs(phy - 0.1) <= 0.02 * 0.1, f"PHY weight {phy:.6g}")
        for k in ("GEO", "CLM"):
            check(f, abs(res.coefficient(k)) < 1e-3, f"{k} weight {res.coefficient(k):.3g}")
        p = {}
        for k in factors:
            others = [o for o in factors if o != k]
            p[k] = partial_correlation(y, factors[k], [factors[o] for o in others]).p
        check(f, p["PHY"] < 0.001, f"PHY partial p {p['PHY']:.3g}")
        for k in ("GEO", "CLM"):
            check(f, p[k] > 0.05, f"{k} partial p {p[k]:.3g}")


def test_7_invariances(criterion, toy_world, toy_space):
    with criterion(7, "invariance suite", 10.0) as f:
        for seed in range(100):
            rng = np.random.default_rng(seed)
            n, d = int(rng.integers(2, 20)), int(rng.integers(2, 30))
            m = rng.standard_normal((n, d)) + rng.standard_normal(d)
            m /= np.linalg.norm(m, axis=1, keepdims=True)
            base = sem_aff(m)
            check(f, abs(sem_aff(m[rng.permutation(n)]) - base) <= 1e-9, f"permutation, seed {seed}")
            check(f, abs(sem_aff(m @ random_orthogonal(d, rng).T) - base) <= 1e-9, f"rotation, seed {seed}")
            a = rng.standard_normal((n, d))
            check(f, abs(frobenius_norm(a) - frobenius_norm(a.T)) <= 1e-12, f"Frobenius transpose, seed {seed}")
        langs = list(toy_world.languages)
        for a in langs:
            for b in langs:
                if a != b:
                    same = sdist(toy_space, toy_world.lexicon, a, b).value == sdist(toy_space, toy_world.lexicon, b, a).value
                    check(f, same, f"SDist({a},{b}) asymmetric")
        m, _ = sdist_matrix(toy_space, toy_world.lexicon, langs)
        check(f, m.is_symmetric(), "SDist matrix asymmetric")
        records = [AffinityRecord(f"A{i}", 0.5, 3, {}) for i in range(5)] + [AffinityRecord(f"B{i}", 0.9, 3, {}) for i in range(4)]
        summaries, omitted = aggregate(records, {r.concept_id: r.concept_id[0] for r in records}, 5)
        check(f, [s.name for s in summaries] == ["A"] and omitted == {"B": 4}, "group of 4 not omitted at threshold 5")


def _tree(root: Path) -> dict[str, bytes]:
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_8_determinism(criterion, tmp_path, capsys):
    with criterion(8, "run-all twice on the bundled toy data is byte-identical", 60.0) as f:
        cfg = str(synthetic.toy_config())
        for name in ("a", "b"):
            code = cli_main(["run-all", "--config", cfg, "--out", str(tmp_path / name)])
            check(f, code == 0, f"run {name} exit {code}: {capsys.readouterr().err}")
        a, b = _tree(tmp_path / "a"), _tree(tmp_path / "b")
        check(f, len(a) > 20, f"only {len(a)} files written")
        check(f, a == b, f"differing files: {sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))}")
        da = json.loads(a["manifest.json"])["digest"]
        db = json.loads(b["manifest.json"])["digest"]
        check(f, da == db, "manifest digests differ")


def _read_tsv(path: Path):
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    rows = list(csv.reader(lines, delimiter="\t"))
    return rows[0], rows[1:]


HARNESS_DOMAINS = ("Kinship", "Body Parts", "Numerals", "Colors", "Motion", "Emotions")


def test_9_replication_harness(criterion, tmp_path, capsys):
    with criterion(9, "23-language harness emits complete concept, group and language reports", 120.0) as f:
        langs = ("eng",) + tuple(f"x{i:02d}" for i in range(22))
        concepts = [
            (f"{dom[:3].upper()}{k}", f"{dom} {k}", ("NOUN", "VERB", "ADJ")[k % 3], dom, 0.3 + 0.1 * (k % 4))
            for dom in HARNESS_DOMAINS for k in range(6)
        ]
        world = synthetic.make_world(11, languages=langs, concepts=concepts, dim=50, n_filler=200,
                                     filler_noise=0.02, multi_form_rate=0.1)
        analysis = {"analysis": {"languages": ", ".join(langs[1:]), "domains": ", ".join(HARNESS_DOMAINS)}}
        cfg = synthetic.write_world(world, tmp_path / "data", name="real.cfg", extra=analysis)
        out = tmp_path / "out"
        code = cli_main(["run-all", "--config", str(cfg), "--out", str(out)])
        check(f, code == 0, f"run-all exit {code}: {capsys.readouterr().err}")

        header, rows = _read_tsv(out / "concepts/regression.tsv")
        check(f, header == ["predictor", "coef_x10", "coef", "std_err", "t_stat", "p_value"], f"concept regression header {header}")
        check(f, [r[0] for r in rows] == ["intercept", "mean_word_rank", "degree_of_polysemy", "mean_word_length"], "concept regression rows")
        reg = json.loads((out / "concepts/regression.json").read_text())
        check(f, {"r2", "adj_r2", "n"} <= set(reg), "concept regression fit statistics missing")

        for rel in ("concepts/pos.tsv", "concepts/domains.tsv"):
            header, rows = _read_tsv(out / rel)
            check(f, header == ["group", "count", "sem_aff", "sd"], f"group summary header in {rel}")
            check(f, len(rows) > 0, f"{rel} empty")
        _, dom_rows = _read_tsv(out / "concepts/domains.tsv")
        check(f, sorted(r[0] for r in dom_rows) == sorted(HARNESS_DOMAINS), "domain summary incomplete")

        header, rows = _read_tsv(out / "languages/regression.tsv")
        check(f, [r[0] for r in rows] == ["intercept", "PHY", "GEO", "CLM"], "language regression rows")
        header, rows = _read_tsv(out / "languages/pairs.tsv")
        check(f, header == ["lang_i", "lang_j", "SDist", "PHY", "GEO", "CLM", "n_concepts"], f"pairs header {header}")
        expected = {tuple(sorted((a, b))) for i, a in enumerate(langs[1:]) for b in langs[i + 2:]}
        got = {tuple(sorted((r[0], r[1]))) for r in rows}
        check(f, len(expected) == 231 and got == expected, f"{len(got)} of 231 language pairs covered")
        check(f, all(v not in ("", "nan") for r in rows for v in r[2:]), "missing values in pair table")

        for kind in ("sdist", "phy", "geo", "clm"):
            header, rows = _read_tsv(out / f"languages/{kind}.tsv")
            check(f, len(rows) == 22 and len(header) == 23, f"{kind} matrix is not 22 x 22")

        header, rows = _read_tsv(out / "languages/partial_correlations.tsv")
        cells = {(r[0], r[1]) for r in rows}
        want = {(d, k) for d in ("ALL",) + HARNESS_DOMAINS for k in ("PHY", "GEO", "CLM")}
        check(f, cells == want, "partial-correlation table incomplete")
        check(f, all(r[header.index("n_pairs")] == "231" for r in rows), "partial correlations not over 231 pairs")
