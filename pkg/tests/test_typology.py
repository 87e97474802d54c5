import math
from collections import deque

import numpy as np
import pytest

from semaff.errors import CoverageError, FormatError
from semaff.synthetic import balanced_newick
from semaff.typology import (
    ClimateTable,
    GeoTable,
    climate_distance,
    factor_matrices,
    geo_distance,
    load_climate,
    load_geo,
    load_tree,
    parse_newick,
    phylo_distance,
)


def bfs_distance(tree, a, b):
    adj = {n: set() for n in range(tree.n_nodes)}
    for p, c in tree.edges():
        adj[p].add(c)
        adj[c].add(p)
    start, goal = tree.leaves[a], tree.leaves[b]
    seen = {start: 0}
    queue = deque([start])
    while queue:
        n = queue.popleft()
        for m in adj[n]:
            if m not in seen:
                seen[m] = seen[n] + 1
                queue.append(m)
    return seen[goal]


def test_sibling_and_cousin_distances():
    t = parse_newick("((A,B),(C,D));")
    assert phylo_distance(t, "A", "B") == 2
    assert phylo_distance(t, "A", "C") == 4
    assert phylo_distance(t, "A", "A") == 0


def test_branch_lengths_and_labels_ignored():
    t = parse_newick("((A:0.1,B:2.5)ab:1,'C d':3)root;")
    assert phylo_distance(t, "A", "B") == 2
    assert phylo_distance(t, "A", "C d") == 3


def test_comments_and_whitespace():
    t = parse_newick(" ( A [note] , ( B , C ) ) ; ")
    assert phylo_distance(t, "B", "C") == 2
    assert phylo_distance(t, "A", "C") == 3


def test_quoted_label_with_escape():
    t = parse_newick("('o''brien',x);")
    assert "o'brien" in t.leaves


@pytest.mark.parametrize("text", ["((A,B),(C,D);", "(A,A);", "(A,B));", "(A,,B);", "('A,B);"])
def test_bad_newick(text):
    with pytest.raises(FormatError):
        parse_newick(text)


def test_bfs_oracle_balanced():
    langs = [f"L{i}" for i in range(11)]
    t = parse_newick(balanced_newick(langs))
    for a in langs:
        for b in langs:
            assert phylo_distance(t, a, b) == bfs_distance(t, a, b)


def test_bfs_oracle_random_trees():
    rng = np.random.default_rng(9)
    for _ in range(10):
        items = [f"x{i}" for i in range(12)]
        while len(items) > 1:
            k = int(rng.integers(2, min(4, len(items)) + 1))
            idx = sorted(rng.choice(len(items), size=k, replace=False), reverse=True)
            group = [items.pop(i) for i in idx]
            items.append("(" + ",".join(group) + ")")
        t = parse_newick(items[0] + ";")
        for a in t.leaves:
            for b in t.leaves:
                assert phylo_distance(t, a, b) == bfs_distance(t, a, b)


def test_missing_leaf():
    with pytest.raises(CoverageError, match="Z"):
        phylo_distance(parse_newick("(A,B);"), "A", "Z")


def test_geo_distances():
    geo = GeoTable({"a": (0.0, 0.0), "b": (3.0, 4.0), "c": (90.0, 0.0)})
    assert geo_distance(geo, "a", "b") == 5.0
    quarter = 2 * math.pi * 6371.0088 / 4
    assert abs(geo_distance(geo, "a", "c", great_circle=True) - quarter) < 1e-6


def test_geo_range_checked():
    with pytest.raises(FormatError):
        GeoTable({"a": (0.0, 91.0)})


def test_climate_distance_and_zscore():
    clim = ClimateTable({"a": np.array([0.0, 10.0]), "b": np.array([3.0, 14.0]), "c": np.array([6.0, 12.0])})
    assert climate_distance(clim, "a", "b") == 5.0
    z = clim.zscored()
    m = np.vstack([z["a"], z["b"], z["c"]])
    np.testing.assert_allclose(m.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(m.std(axis=0), 1, atol=1e-12)


def test_climate_lengths_checked():
    with pytest.raises(FormatError):
        ClimateTable({"a": np.zeros(2), "b": np.zeros(3)})


def test_loaders(tmp_path):
    (tmp_path / "t.nwk").write_text("((a,b),c);\n")
    (tmp_path / "g.tsv").write_text("language\tlon\tlat\n# comment\na\t1\t2\nb\t1.5\t-3\n")
    (tmp_path / "c.tsv").write_text("a\t1\t2\t3\nb\t0\t0\t0\n")
    assert phylo_distance(load_tree(tmp_path / "t.nwk"), "a", "c") == 3
    assert load_geo(tmp_path / "g.tsv")["b"] == (1.5, -3.0)
    assert climate_distance(load_climate(tmp_path / "c.tsv"), "a", "b") == math.sqrt(14)
    (tmp_path / "bad.tsv").write_text("a\t1\t\t3\n")
    with pytest.raises(FormatError):
        load_climate(tmp_path / "bad.tsv")


def test_factor_matrices(toy_world):
    langs = list(toy_world.languages)
    m = factor_matrices(langs, toy_world.tree, toy_world.geo, toy_world.climate)
    assert set(m) == {"PHY", "GEO", "CLM"}
    for mat in m.values():
        assert mat.is_symmetric() and mat.languages == tuple(langs)
    assert m["PHY"]["eng", "la"] == 2
    assert m["PHY"]["eng", "ld"] == 4


def test_factor_coverage_names_source(toy_world):
    geo = GeoTable({k: v for k, v in toy_world.geo.coords.items() if k != "lb"})
    with pytest.raises(CoverageError, match="'lb'.*geography"):
        factor_matrices(list(toy_world.languages), toy_world.tree, geo, toy_world.climate)
