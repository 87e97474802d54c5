"""Phylogenetic, geographic and climate distances between languages."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from semaff.affinity import DistanceMatrix
from semaff.errors import CoverageError, FormatError


class PhyloTree:
    """Rooted tree over language leaves; branch lengths and internal labels are ignored.

    Nodes are integers, ``0`` is the root. ``parent[k]`` is ``-1`` for the root.
    """

    def __init__(self, parent: Sequence[int], leaves: Mapping[str, int]):
        self.parent = list(parent)
        self.leaves = dict(leaves)
        self.depth = [0] * len(self.parent)
        for node in range(1, len(self.parent)):
            # parents are always created before children
            self.depth[node] = self.depth[self.parent[node]] + 1

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    def edges(self) -> list[tuple[int, int]]:
        return [(p, c) for c, p in enumerate(self.parent) if p >= 0]

    def path_to_root(self, node: int) -> list[int]:
        path = [node]
        while self.parent[path[-1]] >= 0:
            path.append(self.parent[path[-1]])
        return path

    def leaf(self, label: str) -> int:
        try:
            return self.leaves[label]
        except KeyError:
            raise CoverageError(f"language {label!r} is not a leaf of the tree") from None


class _NewickParser:
    _SPECIAL = set("(),:;[]")

    def __init__(self, text: str):
        self.text = text
        self.i = 0
        self.parent: list[int] = []
        self.leaves: dict[str, int] = {}

    def error(self, msg: str) -> FormatError:
        return FormatError(f"newick: {msg} at offset {self.i}")

    def skip_ws(self):
        while self.i < len(self.text):
            ch = self.text[self.i]
            if ch.isspace():
                self.i += 1
            elif ch == "[":
                end = self.text.find("]", self.i)
                if end < 0:
                    raise self.error("unterminated comment")
                self.i = end + 1
            else:
                break

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.i] if self.i < len(self.text) else ""

    def label(self) -> str:
        self.skip_ws()
        if self.peek() == "'":
            out = []
            self.i += 1
            while True:
                if self.i >= len(self.text):
                    raise self.error("unterminated quoted label")
                ch = self.text[self.i]
                if ch == "'":
                    if self.text[self.i + 1 : self.i + 2] == "'":
                        out.append("'")
                        self.i += 2
                        continue
                    self.i += 1
                    break
                out.append(ch)
                self.i += 1
            return "".join(out)
        start = self.i
        while self.i < len(self.text) and self.text[self.i] not in self._SPECIAL and not self.text[self.i].isspace():
            self.i += 1
        return self.text[start : self.i]

    def branch_length(self):
        if self.peek() == ":":
            self.i += 1
            self.label()

    def node(self, parent: int) -> None:
        me = len(self.parent)
        self.parent.append(parent)
        if self.peek() == "(":
            self.i += 1
            while True:
                self.node(me)
                ch = self.peek()
                if ch == ",":
                    self.i += 1
                elif ch == ")":
                    self.i += 1
                    break
                else:
                    raise self.error("expected ',' or ')'")
            self.label()  # internal label, ignored
        else:
            name = self.label()
            if not name:
                raise self.error("empty leaf label")
            if name in self.leaves:
                raise self.error(f"duplicate leaf {name!r}")
            self.leaves[name] = me
        self.branch_length()

    def parse(self) -> PhyloTree:
        self.node(-1)
        if self.peek() == ";":
            self.i += 1
        if self.peek():
            raise self.error("trailing characters")
        return PhyloTree(self.parent, self.leaves)


def parse_newick(text: str) -> PhyloTree:
    return _NewickParser(text.strip()).parse()


def load_tree(path: str | Path) -> PhyloTree:
    return parse_newick(Path(path).read_text(encoding="utf-8"))


def phylo_distance(tree: PhyloTree, lang_i: str, lang_j: str) -> int:
    """Number of edges on the path between two leaves."""
    a, b = tree.leaf(lang_i), tree.leaf(lang_j)
    ancestors = set(tree.path_to_root(a))
    lca = next(n for n in tree.path_to_root(b) if n in ancestors)
    return tree.depth[a] + tree.depth[b] - 2 * tree.depth[lca]


@dataclass(frozen=True)
class GeoTable:
    coords: Mapping[str, tuple[float, float]]  # language -> (longitude, latitude)

    def __post_init__(self):
        for lang, (lon, lat) in self.coords.items():
            if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                raise FormatError(f"{lang}: coordinates out of range ({lon}, {lat})")

    def __getitem__(self, lang: str) -> tuple[float, float]:
        try:
            return self.coords[lang]
        except KeyError:
            raise CoverageError(f"language {lang!r} missing from geography table") from None


@dataclass(frozen=True)
class ClimateTable:
    vectors: Mapping[str, np.ndarray]

    def __post_init__(self):
        lengths = {len(v) for v in self.vectors.values()}
        if len(lengths) > 1:
            raise FormatError(f"climate vectors have differing lengths {sorted(lengths)}")
        if lengths and min(lengths) < 1:
            raise FormatError("climate vectors must have at least one component")

    def __getitem__(self, lang: str) -> np.ndarray:
        try:
            return self.vectors[lang]
        except KeyError:
            raise CoverageError(f"language {lang!r} missing from climate table") from None

    def zscored(self, languages: Sequence[str] | None = None) -> ClimateTable:
        """Standardize each component across ``languages`` (default: all rows).

        Components with zero spread are centred only.
        """
        langs = list(self.vectors if languages is None else languages)
        m = np.vstack([self[lang] for lang in langs])
        sd = m.std(axis=0)
        sd[sd == 0] = 1.0
        z = (m - m.mean(axis=0)) / sd
        return ClimateTable(dict(zip(langs, z)))


def _rows(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = [f.strip() for f in line.split("\t")]
            if fields[0] == "language":
                continue
            yield lineno, fields


def load_geo(path: str | Path) -> GeoTable:
    path = Path(path)
    coords = {}
    for lineno, fields in _rows(path):
        if len(fields) != 3:
            raise FormatError(f"{path}:{lineno}: expected language, lon, lat")
        try:
            coords[fields[0]] = (float(fields[1]), float(fields[2]))
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-numeric coordinate") from None
    return GeoTable(coords)


def load_climate(path: str | Path) -> ClimateTable:
    path = Path(path)
    vectors = {}
    for lineno, fields in _rows(path):
        if len(fields) < 2:
            raise FormatError(f"{path}:{lineno}: expected language and at least one value")
        try:
            values = np.array([float(x) for x in fields[1:]])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-numeric or missing climate component") from None
        if not np.all(np.isfinite(values)):
            raise FormatError(f"{path}:{lineno}: missing climate component")
        vectors[fields[0]] = values
    return ClimateTable(vectors)


EARTH_RADIUS_KM = 6371.0088


def geo_distance(geo: GeoTable, lang_i: str, lang_j: str, *, great_circle: bool = False) -> float:
    """Euclidean distance in (longitude, latitude) degree space.

    With ``great_circle`` the haversine distance in kilometres is returned instead.
    """
    (lon1, lat1), (lon2, lat2) = geo[lang_i], geo[lang_j]
    if not great_circle:
        return math.hypot(lon1 - lon2, lat1 - lat2)
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp, dl = p2 - p1, math.radians(lon2 - lon1)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def climate_distance(clim: ClimateTable, lang_i: str, lang_j: str) -> float:
    u, v = clim[lang_i], clim[lang_j]
    if len(u) != len(v):
        raise FormatError(f"climate vectors of {lang_i} and {lang_j} differ in length")
    return float(np.sqrt(np.sum((u - v) ** 2)))


def _matrix(languages, kind, fn) -> DistanceMatrix:
    n = len(languages)
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            values[i, j] = values[j, i] = fn(languages[i], languages[j])
    return DistanceMatrix(tuple(languages), values, kind)


def factor_matrices(
    languages: Sequence[str],
    tree: PhyloTree,
    geo: GeoTable,
    clim: ClimateTable,
    *,
    great_circle: bool = False,
    zscore_climate: bool = False,
) -> dict[str, DistanceMatrix]:
    """PHY, GEO and CLM matrices over one language ordering."""
    languages = list(languages)
    for lang in languages:
        for source, present in (
            ("tree", lang in tree.leaves),
            ("geography", lang in geo.coords),
            ("climate", lang in clim.vectors),
        ):
            if not present:
                raise CoverageError(f"language {lang!r} missing from {source} data")
    if zscore_climate:
        clim = clim.zscored(languages)
    return {
        "PHY": _matrix(languages, "PHY", lambda a, b: float(phylo_distance(tree, a, b))),
        "GEO": _matrix(languages, "GEO", lambda a, b: geo_distance(geo, a, b, great_circle=great_circle)),
        "CLM": _matrix(languages, "CLM", lambda a, b: climate_distance(clim, a, b)),
    }
