"""OLS regression, Pearson and partial correlation, matrix vectorization.

Two-sided t-test p-values come from the regularized incomplete beta
function: for ``dof`` degrees of freedom, ``p = I_x(dof/2, 1/2)`` with
``x = dof / (dof + t^2)``.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from semaff.affinity import DistanceMatrix
from semaff.errors import StatsError

SIGNIFICANCE = 0.05


def t_two_sided_p(t, dof: float):
    """Two-sided p-value of Student's t with ``dof`` degrees of freedom."""
    if dof <= 0:
        raise StatsError(f"degrees of freedom must be positive, got {dof}")
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        x = dof / (dof + t * t)
    p = np.where(np.isinf(t), 0.0, betainc(0.5 * dof, 0.5, np.where(np.isinf(t), 0.0, x)))
    p = np.clip(p, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


@dataclass(frozen=True)
class RegressionResult:
    names: tuple[str, ...]  # "intercept" first
    coef: np.ndarray
    std_err: np.ndarray
    t: np.ndarray
    p: np.ndarray
    r2: float
    adj_r2: float
    n: int
    dof: int
    standardized: bool
    residuals: np.ndarray

    def rows(self) -> list[dict]:
        return [
            {
                "predictor": name,
                "coef": float(b),
                "coef_x10": float(b) * 10.0,
                "std_err": float(se),
                "t_stat": float(t),
                "p_value": float(p),
            }
            for name, b, se, t, p in zip(self.names, self.coef, self.std_err, self.t, self.p)
        ]

    def coefficient(self, name: str) -> float:
        return float(self.coef[self.names.index(name)])


def _zscore(col: np.ndarray) -> np.ndarray:
    sd = col.std(ddof=1)
    if sd == 0:
        raise StatsError("cannot standardize a constant predictor")
    return (col - col.mean()) / sd


def ols_fit(x, y, *, names: Sequence[str] | None = None, standardize: bool = False) -> RegressionResult:
    """Multiple regression of ``y`` on the columns of ``x`` plus an intercept.

    With ``standardize`` each predictor is z-scored (sample SD) before fitting.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n, k = x.shape
    if y.shape != (n,):
        raise StatsError(f"y has shape {y.shape}, expected ({n},)")
    if n <= k + 1:
        raise StatsError(f"need more than {k + 1} observations for {k} predictors, got {n}")
    if names is None:
        names = [f"x{i + 1}" for i in range(k)]
    if len(names) != k:
        raise StatsError("one name per predictor column required")
    if standardize:
        x = np.column_stack([_zscore(x[:, j]) for j in range(k)]) if k else x
    design = np.column_stack([np.ones(n), x])
    if np.linalg.matrix_rank(design) < k + 1:
        raise StatsError("design matrix (with intercept) is rank deficient")
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ beta
    dof = n - k - 1
    ssr = float(resid @ resid)
    centred = y - y.mean()
    sst = float(centred @ centred)
    sigma2 = ssr / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, beta / se, np.where(beta == 0, 0.0, np.copysign(np.inf, beta)))
    p = t_two_sided_p(t, dof)
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    adj = 1.0 - (1.0 - r2) * (n - 1) / dof
    return RegressionResult(
        ("intercept", *names), beta, se, t, np.atleast_1d(p), r2, adj, n, dof, standardize, resid
    )


def _check_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise StatsError(f"length mismatch: {x.size} vs {y.size}")
    return x, y


def _corr(x: np.ndarray, y: np.ndarray) -> float:
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = float(xc @ xc), float(yc @ yc)
    if sxx == 0.0 or syy == 0.0:
        raise StatsError("zero variance")
    r = float(xc @ yc) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))


def _r_p(r: float, dof: int) -> float:
    if abs(r) >= 1.0:
        return 0.0
    return t_two_sided_p(r * np.sqrt(dof / (1.0 - r * r)), dof)


def pearson(x, y) -> tuple[float, float]:
    """Product-moment correlation and its two-sided p-value (``n - 2`` dof)."""
    x, y = _check_pair(x, y)
    if x.size < 3:
        raise StatsError(f"need at least 3 observations, got {x.size}")
    r = _corr(x, y)
    return r, _r_p(r, x.size - 2)


@dataclass(frozen=True)
class PartialCorrResult:
    r: float
    p: float
    n: int
    controls: tuple[str, ...] = ()

    @property
    def significant(self) -> bool:
        return self.p <= SIGNIFICANCE


def _residualize(v: np.ndarray, design: np.ndarray) -> np.ndarray:
    beta, *_ = np.linalg.lstsq(design, v, rcond=None)
    return v - design @ beta


def partial_correlation(x, y, controls: Sequence = (), *, names: Sequence[str] | None = None) -> PartialCorrResult:
    """Correlation of ``x`` and ``y`` after regressing both on ``controls``.

    The p-value uses ``n - 2 - g`` degrees of freedom for ``g`` controls.
    """
    x, y = _check_pair(x, y)
    n = x.size
    g = len(controls)
    names = tuple(names) if names is not None else tuple(f"z{i + 1}" for i in range(g))
    if g == 0:
        r, p = pearson(x, y)
        return PartialCorrResult(r, p, n, ())
    if n < g + 3:
        raise StatsError(f"need at least {g + 3} observations for {g} controls, got {n}")
    z = np.column_stack([np.asarray(c, dtype=np.float64).ravel() for c in controls])
    if z.shape[0] != n:
        raise StatsError("controls must have the same length as x and y")
    design = np.column_stack([np.ones(n), z])
    if np.linalg.matrix_rank(design) < g + 1:
        raise StatsError("controls are rank deficient")
    rx, ry = _residualize(x, design), _residualize(y, design)
    for name, raw, res in (("x", x, rx), ("y", y, ry)):
        spread = np.linalg.norm(raw - raw.mean())
        if spread == 0.0 or np.linalg.norm(res) <= 1e-10 * spread:
            raise StatsError(f"partial correlation undefined: {name} is explained by the controls")
    r = _corr(rx, ry)
    return PartialCorrResult(r, _r_p(r, n - 2 - g), n, names)


def vectorize_matrix(m: DistanceMatrix | np.ndarray) -> tuple[np.ndarray, list[tuple[str, str]]]:
    """Upper triangle (no diagonal) in row-major pair order, with pair labels."""
    if isinstance(m, DistanceMatrix):
        values, langs = m.values, m.languages
    else:
        values = np.asarray(m, dtype=np.float64)
        langs = tuple(str(i) for i in range(values.shape[0]))
    iu = np.triu_indices(values.shape[0], k=1)
    return values[iu], [(langs[i], langs[j]) for i, j in zip(*iu)]


def mantel_test(a: DistanceMatrix, b: DistanceMatrix, *, permutations: int = 9999, seed: int = 0) -> tuple[float, float]:
    """Pearson r between two distance matrices with a permutation p-value.

    Permutation ``i`` draws from its own stream spawned from ``seed``, so the
    result does not depend on how the permutations are scheduled.
    """
    if a.languages != b.languages:
        b = b.reorder(a.languages)
    va, _ = vectorize_matrix(a)
    vb, _ = vectorize_matrix(b)
    r_obs = _corr(va, vb)
    iu = np.triu_indices(len(a.languages), k=1)
    root = np.random.SeedSequence(seed)
    hits = 0
    for i in range(permutations):
        rng = np.random.default_rng(np.random.SeedSequence(root.entropy, spawn_key=(i,)))
        perm = rng.permutation(len(a.languages))
        r = _corr(va, b.values[np.ix_(perm, perm)][iu])
        if abs(r) >= abs(r_obs) - 1e-12:
            hits += 1
    return r_obs, (hits + 1) / (permutations + 1)
