"""Command-line front end: ``semaff <subcommand> --config run.cfg --out DIR``.

Every subcommand writes its artifacts plus ``manifest.json`` under ``--out``.
Exit status is 0 on success, 1 on a runtime failure and 2 on a usage or
config error. Failures also print one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from semaff import __version__, pipeline, report
from semaff.affinity import aggregate
from semaff.errors import ConfigError, SemAffError

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _emit_error(kind: str, message: str, stage: str | None = None) -> None:
    payload = {"error": kind, "message": message}
    if stage is not None:
        payload["stage"] = stage
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _emit_error("UsageError", message)
        raise SystemExit(EXIT_USAGE)


def _on_off(value: str) -> bool:
    v = value.lower()
    if v not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return v == "on"


def _seed(value: str) -> int:
    n = int(value)
    if not 0 <= n < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="run config file")
    common.add_argument("--out", type=Path, default=Path("semaff-out"), help="output directory (default: semaff-out)")
    common.add_argument("--cache-dir", type=Path, default=None, help="space cache directory (default: OUT/cache)")
    common.add_argument("--mode", choices=("ls", "procrustes"), help="alignment fit")
    common.add_argument("--min-coverage", type=int, help="minimum languages per concept")
    common.add_argument("--standardize", type=_on_off, help="z-score regression predictors (on|off)")
    common.add_argument("--seed", type=_seed, help="seed for permutation tests")
    common.add_argument("--strict-ranks", type=_on_off, help="exclude concepts with unranked forms (on|off)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="semaff", description="Semantic affinity of concepts across languages.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand", parser_class=_Parser)
    sub.add_parser("build-space", parents=[common], help="align all languages into the pivot space")
    sub.add_parser("affinity", parents=[common], help="per-concept semantic affinity")
    sub.add_parser("aggregate", parents=[common], help="affinity by part of speech and domain")
    sub.add_parser("sdist", parents=[common], help="language-by-language semantic distance")
    sub.add_parser("factors", parents=[common], help="phylogenetic, geographic and climate distances")
    p = sub.add_parser("regress", parents=[common], help="OLS for concepts or language pairs")
    p.add_argument("--level", choices=("concept", "language"), default="concept")
    sub.add_parser("pcorr", parents=[common], help="per-domain partial correlations")
    p = sub.add_parser("report", parents=[common], help="one table or chart")
    p.add_argument("--kind", required=True, choices=report.CHART_KINDS)
    sub.add_parser("run-all", parents=[common], help="every stage and every report")
    return parser


def config_from_args(args) -> pipeline.RunConfig:
    cfg = pipeline.load_config(args.config)
    changes = {}
    if args.mode is not None:
        changes["mode"] = args.mode
    if args.min_coverage is not None:
        if args.min_coverage < 1:
            raise ConfigError("--min-coverage must be at least 1")
        changes["min_coverage"] = args.min_coverage
    if args.standardize is not None:
        changes["standardize"] = args.standardize
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.strict_ranks is not None:
        changes["strict_ranks"] = args.strict_ranks
    return cfg.replace(**changes) if changes else cfg


class _Session:
    """Lazily shared state for one invocation."""

    def __init__(self, cfg: pipeline.RunConfig, out: Path, cache_dir: Path | None):
        self.cfg = cfg
        self.out = out
        self.cache = cache_dir if cache_dir is not None else out / "cache"
        self.manifest = pipeline.make_manifest(cfg)
        self.writer = report.OutputWriter(out, self.manifest)
        self._lexicon = self._space = self._concepts = self._languages = None

    @property
    def lexicon(self):
        if self._lexicon is None:
            self._lexicon = pipeline.load_lexicon_for(self.cfg)
        return self._lexicon

    @property
    def space(self):
        if self._space is None:
            self._space = pipeline.build_space(self.cfg, self.lexicon, cache_dir=self.cache, manifest=self.manifest)
        return self._space

    @property
    def concepts(self):
        if self._concepts is None:
            self._concepts = pipeline.run_concept_analysis(self.cfg, self.space, self.lexicon)
        return self._concepts

    @property
    def languages(self):
        if self._languages is None:
            self._languages = pipeline.run_language_analysis(self.cfg, self.space, self.lexicon)
        return self._languages

    def affinities(self):
        return pipeline.compute_affinities(self.cfg, self.space, self.lexicon)


def _cmd_build_space(s: _Session, args) -> None:
    report.write_space(s.writer, s.cfg, s.space, pipeline.heldout_quality(s.cfg, s.space))


def _cmd_affinity(s: _Session, args) -> None:
    records, failures = s.affinities()
    report.write_affinities(s.writer, records, failures, s.lexicon)


def _cmd_aggregate(s: _Session, args) -> None:
    records, _ = s.affinities()
    for key, stem in (("pos", "concepts/pos"), ("domain", "concepts/domains")):
        summaries, omitted = aggregate(records, s.lexicon.grouping(key), s.cfg.min_group_size)
        report.write_summaries(s.writer, stem, summaries, omitted)


def _cmd_sdist(s: _Session, args) -> None:
    try:
        langs = pipeline.analysis_languages(s.cfg, s.space)
    except SemAffError as exc:
        raise pipeline.StageError("sdist", exc) from exc
    sd, _ = pipeline.compute_sdist(s.cfg, s.space, s.lexicon, langs)
    report.write_matrices(s.writer, {"SDist": sd})


def _cmd_factors(s: _Session, args) -> None:
    langs = s.cfg.languages or sorted(s.cfg.vectors)
    report.write_matrices(s.writer, pipeline.compute_factors(s.cfg, langs))


def _cmd_regress(s: _Session, args) -> None:
    if args.level == "concept":
        report.write_regression(s.writer, "concepts/regression", s.concepts.regression, "sem_aff")
    else:
        report.write_regression(s.writer, "languages/regression", s.languages.regression, "SDist")


def _cmd_pcorr(s: _Session, args) -> None:
    rows = s.languages.partial
    s.writer.tsv("languages/partial_correlations.tsv", report.PARTIAL_COLUMNS,
                 [[row[c] for c in report.PARTIAL_COLUMNS] for row in rows])
    s.writer.json("languages/partial_correlations.json", {"rows": rows, "threshold": 0.05})


def _cmd_report(s: _Session, args) -> None:
    kind = args.kind
    if kind == "kinship-profile" and not s.cfg.kinship:
        raise ConfigError("[report] kinship is not configured")
    if kind == "scatter-2d" and not s.cfg.scatter:
        raise ConfigError("[report] scatter is not configured")
    languages = s.languages if kind == "partial-corr-bars" else None
    report.write_figures(s.writer, s.cfg, s.space, s.concepts, languages, kinds=(kind,))


def _cmd_run_all(s: _Session, args) -> None:
    pipeline.run_all(s.cfg, s.out, cache_dir=s.cache)


COMMANDS = {
    "build-space": _cmd_build_space,
    "affinity": _cmd_affinity,
    "aggregate": _cmd_aggregate,
    "sdist": _cmd_sdist,
    "factors": _cmd_factors,
    "regress": _cmd_regress,
    "pcorr": _cmd_pcorr,
    "report": _cmd_report,
    "run-all": _cmd_run_all,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        _emit_error("ConfigError", str(exc))
        return EXIT_USAGE
    try:
        session = _Session(cfg, args.out, args.cache_dir)
        COMMANDS[args.command](session, args)
        if args.command != "run-all":
            session.writer.finish()
    except pipeline.StageError as exc:
        _emit_error(type(exc.error).__name__, str(exc.error), exc.stage)
        return EXIT_RUNTIME
    except ConfigError as exc:
        _emit_error("ConfigError", str(exc))
        return EXIT_USAGE
    except (SemAffError, OSError, ValueError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
