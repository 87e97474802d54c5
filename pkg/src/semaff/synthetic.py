"""Seeded synthetic worlds with known ground truth.

Every language's native space is a random rotation of the pivot frame. In
the pivot frame each concept's word vector is built from an orthonormal
per-concept basis: a shared direction, one component per tree edge on the
root-to-leaf path (so phylogenetically close languages share more), and
isotropic noise whose expected norm is the concept's ``noise`` value.

When all leaves sit at the same depth and no noise is added, the cosine
between two languages' vectors is exactly ``1 - slope * PHY`` with
``slope = phylo_weight**2 / (2 * (1 + phylo_weight**2 * depth))``.

``rank_law=(a, b)`` switches concept vectors to a symmetric construction
whose affinity is exactly ``a - b * mean_word_rank``.
"""

from __future__ import annotations

import configparser
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from semaff.embedding_io import (
    BilingualDictionary,
    Concept,
    ConceptLexicon,
    EmbeddingTable,
    FrequencyRanking,
    SenseInventory,
    save_dictionary,
    save_embeddings,
    save_frequency_ranking,
    save_lexicon,
    save_sense_inventory,
)
from semaff.typology import ClimateTable, GeoTable, PhyloTree, parse_newick

TOY_LANGUAGES = ("eng", "la", "lb", "lc", "ld")
TOY_TREE = "((eng,la),((lb,lc),ld));"

# (concept_id, gloss, pos, domains, noise)
TOY_CONCEPTS = (
    ("DAUGHTER", "daughter", "NOUN", "Kinship", 0.55),
    ("SON", "son", "NOUN", "Kinship", 0.55),
    ("SISTER", "sister", "NOUN", "Kinship", 0.65),
    ("BROTHER", "brother", "NOUN", "Kinship", 0.65),
    ("MOTHER", "mother", "NOUN", "Kinship", 0.7),
    ("FATHER", "father", "NOUN", "Kinship", 0.7),
    ("GRANDMOTHER", "grandmother", "NOUN", "Kinship", 0.95),
    ("GRANDFATHER", "grandfather", "NOUN", "Kinship", 0.95),
    ("AUNT", "aunt", "NOUN", "Kinship", 1.5),
    ("UNCLE", "uncle", "NOUN", "Kinship", 1.5),
    ("EYE", "eye", "NOUN", "Body Parts", 0.6),
    ("EAR", "ear", "NOUN", "Body Parts", 0.75),
    ("NOSE", "nose", "NOUN", "Body Parts", 0.7),
    ("HAND", "hand", "NOUN", "Body Parts", 0.8),
    ("TONGUE", "tongue", "NOUN", "Body Parts", 1.0),
    ("FOOT", "foot", "NOUN", "Body Parts", 0.85),
    ("ONE", "one", "NUM", "Numerals", 0.4),
    ("TWO", "two", "NUM", "Numerals", 0.4),
    ("THREE", "three", "NUM", "Numerals", 0.45),
    ("FOUR", "four", "NUM", "Numerals", 0.5),
    ("FIVE", "five", "NUM", "Numerals", 0.5),
    ("RED", "red", "ADJ", "Colors", 0.7),
    ("GREEN", "green", "ADJ", "Colors", 0.85),
    ("BLUE", "blue", "ADJ", "Colors", 0.9),
    ("BLACK", "black", "ADJ", "Colors", 0.6),
    ("WHITE", "white", "ADJ", "Colors", 0.65),
    ("CUP", "cup", "NOUN", "Containers", 1.3),
    ("BOTTLE", "bottle", "NOUN", "Containers", 1.4),
    ("BOX", "box", "NOUN", "Containers", 1.5),
    ("EDGE", "edge", "ADP", "Spatial Relations", 1.6),
)

KINSHIP_ORDER = (
    ("DAUGHTER", "SON"),
    ("SISTER", "BROTHER"),
    ("MOTHER", "FATHER"),
    ("GRANDMOTHER", "GRANDFATHER"),
    ("AUNT", "UNCLE"),
)

_ONSETS = ("", "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sk", "tr", "pl")
_NUCLEI = ("a", "e", "i", "o", "u", "ai", "ou", "ä", "ö", "é")
_CODAS = ("", "", "n", "r", "s", "t", "k", "l")


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def orthonormal_columns(d: int, k: int, rng: np.random.Generator) -> np.ndarray:
    if k > d:
        raise ValueError(f"need dim >= {k} for {k} orthonormal directions, got {d}")
    q, r = np.linalg.qr(rng.standard_normal((d, k)))
    return q * np.sign(np.diag(r))


def balanced_newick(languages: Sequence[str]) -> str:
    def build(items):
        if len(items) == 1:
            return items[0]
        mid = (len(items) + 1) // 2
        return f"({build(items[:mid])},{build(items[mid:])})"

    return build(list(languages)) + ";"


class _WordMaker:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.used: set[str] = set()

    def __call__(self, syllables: int | None = None) -> str:
        while True:
            n = syllables or int(self.rng.integers(1, 4))
            word = "".join(
                _ONSETS[self.rng.integers(len(_ONSETS))]
                + _NUCLEI[self.rng.integers(len(_NUCLEI))]
                + _CODAS[self.rng.integers(len(_CODAS))]
                for _ in range(n)
            )
            if word not in self.used:
                self.used.add(word)
                return word


@dataclass
class World:
    pivot: str
    languages: tuple[str, ...]
    tables: dict[str, EmbeddingTable]
    ground_truth: dict[str, np.ndarray]  # native -> pivot frame
    dictionaries: dict[str, BilingualDictionary]
    heldout: dict[str, BilingualDictionary]
    lexicon: ConceptLexicon
    senses: SenseInventory
    rankings: dict[str, FrequencyRanking]
    newick: str
    geo: GeoTable
    climate: ClimateTable
    noise: dict[str, float] = field(default_factory=dict)
    settings: dict[str, str] = field(default_factory=dict)

    @property
    def tree(self) -> PhyloTree:
        return parse_newick(self.newick)


def make_world(
    seed: int = 0,
    *,
    languages: Sequence[str] = TOY_LANGUAGES,
    concepts: Sequence[tuple[str, str, str, str, float]] | None = None,
    n_concepts: int | None = None,
    noise_tiers: Sequence[float] = (0.0, 0.1, 0.3),
    dim: int = 20,
    n_filler: int = 150,
    filler_noise: float = 0.0,
    heldout_fraction: float = 0.2,
    phylo_weight: float = 0.3,
    newick: str | None = None,
    rank_law: tuple[float, float] | None = None,
    multi_form_rate: float = 0.0,
    synonym_rate: float = 0.0,
    oov: Sequence[tuple[str, str]] = (),
    no_senses: Sequence[str] = (),
) -> World:
    """Generate a synthetic multilingual world.

    ``concepts`` entries are ``(concept_id, gloss, pos, domains, noise)``;
    without them ``n_concepts`` generic concepts cycle through ``noise_tiers``.
    ``oov`` lists ``(concept_id, language)`` whose forms get no vector.
    """
    rng = np.random.default_rng(seed)
    languages = tuple(languages)
    pivot = languages[0]
    if concepts is None:
        count = 30 if n_concepts is None else n_concepts
        concepts = [
            (f"C{i + 1:03d}", f"concept {i + 1}", ("NOUN", "VERB", "ADJ")[i % 3], f"Tier {i % len(noise_tiers)}",
             float(noise_tiers[i % len(noise_tiers)]))
            for i in range(count)
        ]
    newick = newick or (TOY_TREE if languages == TOY_LANGUAGES else balanced_newick(languages))
    tree = parse_newick(newick)
    paths = {lang: [c for c in tree.path_to_root(tree.leaf(lang)) if tree.parent[c] >= 0] for lang in languages}
    n_edges = tree.n_nodes - 1

    words = {lang: _WordMaker(rng) for lang in languages}
    pivot_vecs: dict[str, dict[str, np.ndarray]] = {lang: {} for lang in languages}
    forms: dict[str, dict[str, tuple[str, ...]]] = {}
    noise_of = {}

    # ranks first: the rank law needs them before vectors exist
    n_lang = len(languages)
    rank_target = {}
    for cid, *_rest, noise in concepts:
        noise_of[cid] = noise
    if rank_law is not None:
        # distinct ranks within each language
        drawn = np.array([rng.choice(np.arange(1, 3 * len(concepts) + 1), size=len(concepts), replace=False)
                          for _ in languages])
        rank_target = {cid: drawn[:, i] for i, (cid, *_rest) in enumerate(concepts)}

    for cid, _gloss, _pos, _domains, noise in concepts:
        forms[cid] = {}
        if rank_law is not None:
            a, b = rank_law
            target = a - b * float(np.mean(rank_target[cid]))
            rho = (target**2 - 1.0 / n_lang) / (1.0 - 1.0 / n_lang)
            if not 0.0 <= rho <= 1.0:
                raise ValueError(f"rank law gives unreachable affinity {target:.4f} for {cid}")
            basis = orthonormal_columns(dim, n_lang + 1, rng)
            vecs = {lang: math.sqrt(rho) * basis[:, 0] + math.sqrt(1 - rho) * basis[:, k + 1] for k, lang in enumerate(languages)}
        else:
            basis = orthonormal_columns(dim, n_edges + 1, rng)
            vecs = {}
            for lang in languages:
                v = basis[:, 0].copy()
                for node in paths[lang]:
                    v += phylo_weight * basis[:, node]
                if noise > 0:
                    v += noise * rng.standard_normal(dim) / math.sqrt(dim)
                vecs[lang] = v / np.linalg.norm(v)
        for lang in languages:
            word = words[lang](int(rng.integers(1, 4)))
            entry = [word]
            pivot_vecs[lang][word] = vecs[lang]
            if multi_form_rate and rng.random() < multi_form_rate:
                alt = words[lang]()
                w = vecs[lang] + 0.05 * rng.standard_normal(dim) / math.sqrt(dim)
                pivot_vecs[lang][alt] = w / np.linalg.norm(w)
                entry.append(alt)
            forms[cid][lang] = tuple(entry)

    # filler vocabulary used only for alignment
    filler: dict[str, list[str]] = {lang: [] for lang in languages}
    synonyms: dict[int, str] = {}
    for k in range(n_filler):
        base = rng.standard_normal(dim)
        base /= np.linalg.norm(base)
        for lang in languages:
            v = base
            if lang != pivot and filler_noise > 0:
                v = base + filler_noise * rng.standard_normal(dim) / math.sqrt(dim)
                v = v / np.linalg.norm(v)
            word = words[lang]()
            filler[lang].append(word)
            pivot_vecs[lang][word] = v
        if synonym_rate and rng.random() < synonym_rate:
            syn = words[pivot]()
            v = base + 0.01 * rng.standard_normal(dim) / math.sqrt(dim)
            pivot_vecs[pivot][syn] = v / np.linalg.norm(v)
            synonyms[k] = syn

    oov = set(oov)
    tables, truth = {}, {}
    for lang in languages:
        rot = np.eye(dim) if lang == pivot else random_orthogonal(dim, rng)
        truth[lang] = rot.T
        skip = {f for cid, l in oov if l == lang for f in forms[cid][lang]}
        vocab = [w for w in pivot_vecs[lang] if w not in skip]
        matrix = np.array([rot @ pivot_vecs[lang][w] for w in vocab])
        tables[lang] = EmbeddingTable(lang, vocab, matrix)

    dictionaries, heldout = {}, {}
    n_held = int(round(heldout_fraction * n_filler))
    for lang in languages[1:]:
        train, held = [], []
        for k in range(n_filler):
            pair = (filler[lang][k], filler[pivot][k])
            (held if k >= n_filler - n_held else train).append(pair)
            if k in synonyms and k < n_filler - n_held:
                train.append((filler[lang][k], synonyms[k]))
        # translation pairs of the target concepts, to be removed by exclusion
        for cid in forms:
            train.append((forms[cid][lang][0], forms[cid][pivot][0]))
        dictionaries[lang] = BilingualDictionary(lang, pivot, tuple(train))
        heldout[lang] = BilingualDictionary(lang, pivot, tuple(held))

    lexicon = ConceptLexicon(
        Concept(cid, gloss, pos, frozenset(d for d in domains.split(",") if d), forms[cid])
        for cid, gloss, pos, domains, _noise in concepts
    )

    rankings = {}
    for li, lang in enumerate(languages):
        concept_words = {w for cid in forms for w in forms[cid][lang]}
        others = [w for w in tables[lang].words if w not in concept_words]
        if rank_law is not None:
            # concept forms sit at the planted positions, filler fills the gaps
            slot = {int(rank_target[cid][li]): forms[cid][lang][0] for cid in forms}
            rest = iter(sorted(others, key=lambda w: (rng.random(), w)))
            ordered = [slot[pos] if pos in slot else next(rest) for pos in range(1, len(tables[lang]) + 1)]
        else:
            score = {w: 2000.0 + 1000.0 * rng.random() for w in others}
            for cid in forms:
                for j, w in enumerate(forms[cid][lang]):
                    if w in tables[lang]:
                        score[w] = 100.0 * noise_of[cid] + 20.0 * rng.random() + 50.0 * j
            ordered = sorted(score, key=lambda w: (score[w], w))
        rankings[lang] = FrequencyRanking(lang, ordered)

    records = {}
    no_senses = set(no_senses)
    for cid, *_rest, noise in concepts:
        if cid in no_senses:
            continue
        pool = [f"{cid}:s{k}" for k in range(3 + int(round(8 * noise)))]
        for lang in languages:
            extra = rng.poisson(0.5 + 3.0 * noise)
            picks = rng.choice(len(pool), size=min(extra, len(pool)), replace=False)
            senses = {f"{cid}:core"} | {pool[p] for p in picks}
            records[(cid, lang, forms[cid][lang][0])] = frozenset(senses)
    senses = SenseInventory(records)

    coords, climate = {}, {}
    months = np.arange(12)
    for lang in languages:
        lon = float(np.round(rng.uniform(-10.0, 60.0), 4))
        lat = float(np.round(rng.uniform(35.0, 70.0), 4))
        coords[lang] = (lon, lat)
        temp = 30.0 - 0.5 * lat + 8.0 * np.sin(2 * np.pi * (months - 3) / 12) + rng.normal(0, 1.0, 12)
        prec = 60.0 + 0.3 * lon + 20.0 * rng.random(12)
        climate[lang] = np.round(np.concatenate([temp, prec]), 4)

    settings = {"seed": str(seed), "dim": str(dim)}
    return World(
        pivot, languages, tables, truth, dictionaries, heldout, lexicon, senses, rankings,
        newick, GeoTable(coords), ClimateTable(climate), noise_of, settings,
    )


def write_world(world: World, directory: str | Path, *, name: str = "toy.cfg", extra: dict | None = None) -> Path:
    """Write every input file of ``world`` plus a run config; returns the config path."""
    root = Path(directory)
    for sub in ("vectors", "dictionaries", "ranks"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    cfg = configparser.ConfigParser(interpolation=None)
    cfg.optionxform = str  # keep language codes as written
    cfg["run"] = {"pivot": world.pivot, "mode": "procrustes", "min_coverage": "2", "min_group_size": "5",
                  "standardize": "on", "strict_ranks": "on", "seed": world.settings.get("seed", "0")}
    cfg["vectors"], cfg["dictionaries"], cfg["heldout"], cfg["ranks"] = {}, {}, {}, {}
    for lang in world.languages:
        save_embeddings(world.tables[lang], root / "vectors" / f"{lang}.vec")
        cfg["vectors"][lang] = f"vectors/{lang}.vec"
        save_frequency_ranking(world.rankings[lang], root / "ranks" / f"{lang}.txt")
        cfg["ranks"][lang] = f"ranks/{lang}.txt"
        if lang == world.pivot:
            continue
        save_dictionary(world.dictionaries[lang], root / "dictionaries" / f"{lang}-{world.pivot}.tsv")
        save_dictionary(world.heldout[lang], root / "dictionaries" / f"{lang}-{world.pivot}.heldout.tsv")
        cfg["dictionaries"][lang] = f"dictionaries/{lang}-{world.pivot}.tsv"
        cfg["heldout"][lang] = f"dictionaries/{lang}-{world.pivot}.heldout.tsv"
    save_lexicon(world.lexicon, root / "lexicon.tsv")
    save_sense_inventory(world.senses, root / "senses.tsv")
    (root / "tree.nwk").write_text(world.newick + "\n", encoding="utf-8")
    with open(root / "geo.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("language\tlon\tlat\n")
        for lang, (lon, lat) in world.geo.coords.items():
            fh.write(f"{lang}\t{lon!r}\t{lat!r}\n")
    with open(root / "climate.tsv", "w", encoding="utf-8", newline="\n") as fh:
        k = len(next(iter(world.climate.vectors.values())))
        fh.write("language\t" + "\t".join(f"v{i + 1}" for i in range(k)) + "\n")
        for lang, vec in world.climate.vectors.items():
            fh.write(lang + "\t" + "\t".join(repr(float(x)) for x in vec) + "\n")
    cfg["data"] = {"lexicon": "lexicon.tsv", "senses": "senses.tsv", "tree": "tree.nwk",
                   "geo": "geo.tsv", "climate": "climate.tsv"}
    for section, values in (extra or {}).items():
        if section not in cfg:
            cfg[section] = {}
        for key, value in values.items():
            cfg[section][key] = str(value)
    path = root / name
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        cfg.write(fh)
    return path


def make_toy_world(seed: int = 7) -> World:
    """The bundled toy dataset: 5 languages, 30 concepts, dim 20."""
    return make_world(
        seed,
        concepts=TOY_CONCEPTS,
        dim=20,
        n_filler=150,
        filler_noise=0.02,
        phylo_weight=0.35,
        multi_form_rate=0.1,
        synonym_rate=0.05,
        oov=[("UNCLE", "ld")],
        no_senses=["BOX"],
    )


TOY_DIR = Path(__file__).resolve().parent / "data" / "toy"


def toy_config() -> Path:
    """Path of the bundled toy run config."""
    return TOY_DIR / "toy.cfg"


TOY_EXTRA = {
    "analysis": {"domains": "Kinship, Body Parts, Numerals, Colors"},
    "report": {
        "kinship": ", ".join(f"{f}:{m}" for f, m in KINSHIP_ORDER),
        "scatter": "DAUGHTER, EDGE",
    },
}


def main(argv=None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="Write the bundled toy dataset")
    parser.add_argument("out", help="output directory")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)
    print(write_world(make_toy_world(args.seed), args.out, extra=TOY_EXTRA))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
