"""Log-price dummy regressions: the standard time/country-product baseline.

Fits ln p_it = a_t + b_i + u on present cells with the base unit's effect
pinned to zero.  The optional weighting uses within-unit expenditure shares.
Identification needs the bipartite item/unit presence graph connected;
otherwise relative levels across components are arbitrary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InvalidPrice, SingularSystem, UnidentifiedModel
from .panel import Panel, implied_prices


@dataclass(frozen=True)
class DummyFit:
    """Two-way dummy regression result on the log-price scale.

    log_unit_effects and se have length T with zeros at the base unit;
    indexes = exp(log_unit_effects).  item_effects are the N item dummies.
    """

    units: tuple[str, ...]
    items: tuple[str, ...]
    base_unit: int
    log_unit_effects: np.ndarray
    indexes: np.ndarray
    item_effects: np.ndarray
    se: np.ndarray
    weighted: bool
    sigma2: float | None
    dof: int

    @property
    def index_se(self) -> np.ndarray:
        """Delta-method standard errors on the index scale."""
        return self.indexes * self.se


def presence_components(panel: Panel) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    """Connected components of the bipartite presence graph.

    Nodes are the N items followed by the T units; each present cell is an
    edge.  Returns (unit labels, item labels) per component.
    """
    n, t = panel.n_items, panel.n_units
    ii, tt = np.nonzero(panel.present)
    rows = np.concatenate([ii, tt + n])
    cols = np.concatenate([tt + n, ii])
    data = np.ones(rows.size)
    graph = coo_matrix((data, (rows, cols)), shape=(n + t, n + t))
    n_comp, labels = connected_components(graph, directed=False)
    out = []
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        units = tuple(panel.units[m - n] for m in members if m >= n)
        items = tuple(panel.items[m] for m in members if m < n)
        out.append((units, items))
    return out


def fit_dummy_index(panel: Panel, weighted: bool = False) -> DummyFit:
    """Fit the two-way log-price dummy model and return per-unit indexes.

    With weighted=True each present cell is weighted by its within-unit
    expenditure share v_it / sum_i v_it.  Standard errors come from the
    weighted-least-squares covariance with the noise scale estimated on
    (number of present cells) - (N + T - 1) degrees of freedom.
    """
    n, t = panel.n_items, panel.n_units
    comps = presence_components(panel)
    if len(comps) > 1:
        desc = "; ".join(
            f"units {{{', '.join(u)}}} with items {{{', '.join(i)}}}"
            for u, i in comps
        )
        raise UnidentifiedModel(
            f"presence graph splits into {len(comps)} components: {desc}",
            components=tuple(comps),
        )

    prices = implied_prices(panel).prices
    ii, tt = np.nonzero(panel.present)
    p_obs = prices[ii, tt]
    if (p_obs <= 0).any() or not np.isfinite(p_obs).all():
        k = int(np.flatnonzero((p_obs <= 0) | ~np.isfinite(p_obs))[0])
        raise InvalidPrice(
            f"nonpositive or non-finite price for item {panel.items[ii[k]]!r} "
            f"in unit {panel.units[tt[k]]!r}"
        )
    logp = np.log(p_obs)

    # columns: T-1 unit dummies (base omitted), then N item dummies
    nonbase = [u for u in range(t) if u != panel.base_unit]
    col_of_unit = np.full(t, -1)
    col_of_unit[nonbase] = np.arange(t - 1)
    n_obs = ii.size
    k = (t - 1) + n
    X = np.zeros((n_obs, k))
    rows = np.arange(n_obs)
    has_dummy = tt != panel.base_unit
    X[rows[has_dummy], col_of_unit[tt[has_dummy]]] = 1.0
    X[rows, (t - 1) + ii] = 1.0

    if weighted:
        unit_totals = panel.values.sum(axis=0)
        w = panel.values[ii, tt] / unit_totals[tt]
    else:
        w = np.ones(n_obs)
    sw = np.sqrt(w)

    xtwx = (X * w[:, None]).T @ X
    xtwy = (X * w[:, None]).T @ logp
    try:
        factor = cho_factor(xtwx, lower=True)
    except np.linalg.LinAlgError:
        raise SingularSystem("weighted dummy design is rank deficient") from None
    beta = cho_solve(factor, xtwy)
    resid = logp - X @ beta
    ssr = float((sw * resid) @ (sw * resid))
    dof = n_obs - k
    sigma2 = ssr / dof if dof > 0 else None

    cov_diag = np.diag(cho_solve(factor, np.eye(k)))
    log_effects = np.zeros(t)
    se = np.zeros(t)
    for u in nonbase:
        j = col_of_unit[u]
        log_effects[u] = beta[j]
        se[u] = np.sqrt(sigma2 * cov_diag[j]) if sigma2 is not None else np.nan
    return DummyFit(
        units=panel.units, items=panel.items, base_unit=panel.base_unit,
        log_unit_effects=log_effects, indexes=np.exp(log_effects),
        item_effects=beta[t - 1:], se=se, weighted=weighted,
        sigma2=sigma2, dof=dof,
    )
