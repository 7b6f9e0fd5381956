import io
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from mplindex import (
    InvalidPrice,
    Panel,
    UnidentifiedModel,
    fit_dummy_index,
    load_panel,
    presence_components,
)
from helpers import random_panel


def price_panel(p_by_unit, q_by_unit=None, base=0):
    """Panel whose implied prices are exactly the given per-unit price columns."""
    p = np.column_stack(p_by_unit).astype(float)
    q = np.ones_like(p) if q_by_unit is None else np.column_stack(q_by_unit).astype(float)
    items = tuple(f"i{k}" for k in range(p.shape[0]))
    units = tuple(f"t{k}" for k in range(p.shape[1]))
    return Panel.from_arrays(items, units, p * q, q, base_unit=base)


def geometric_mean_relatives(panel):
    prices = panel.values / panel.quantities
    rel = prices / prices[:, [panel.base_unit]]
    return np.exp(np.log(rel).mean(axis=0))


def test_balanced_fixture_equals_geometric_mean():
    panel = price_panel([np.array([1.0, 2.0]), np.array([3.0, 4.0])])
    fit = fit_dummy_index(panel)
    assert fit.indexes[0] == 1.0
    assert fit.indexes[1] == pytest.approx(math.sqrt(6.0), abs=1e-12)


def test_balanced_random_panels_equal_geometric_means():
    rng = np.random.default_rng(61)
    for _ in range(20):
        panel = random_panel(rng, int(rng.integers(2, 10)), int(rng.integers(2, 7)))
        fit = fit_dummy_index(panel)
        expected = geometric_mean_relatives(panel)
        assert np.abs(fit.indexes - expected).max() <= 1e-12 * expected.max()


def test_uniform_price_doubling():
    p1 = np.array([1.0, 2.0, 5.0])
    panel = price_panel([p1, 2.0 * p1], [np.array([2.0, 1.0, 3.0])] * 2)
    fit = fit_dummy_index(panel)
    assert fit.indexes[1] == pytest.approx(2.0, rel=1e-14)
    assert fit.sigma2 == pytest.approx(0.0, abs=1e-28)


def test_weighted_equals_unweighted_under_constant_shares():
    # equal values in every cell make the within-unit shares constant
    rng = np.random.default_rng(67)
    q = rng.uniform(0.5, 4.0, (4, 3))
    v = np.ones((4, 3))
    panel = Panel.from_arrays(("a", "b", "c", "d"), ("t0", "t1", "t2"), v, q)
    plain = fit_dummy_index(panel, weighted=False)
    weighted = fit_dummy_index(panel, weighted=True)
    assert_allclose(weighted.log_unit_effects, plain.log_unit_effects,
                    rtol=0, atol=1e-12)
    assert_allclose(weighted.se, plain.se, rtol=1e-10, atol=1e-15)
    assert weighted.weighted and not plain.weighted


def test_weighted_fit_runs_on_sparse_panel():
    rng = np.random.default_rng(73)
    panel = random_panel(rng, 8, 5, missing=0.25)
    fit = fit_dummy_index(panel, weighted=True)
    assert (fit.indexes > 0).all()
    assert fit.indexes[panel.base_unit] == 1.0
    assert fit.se[panel.base_unit] == 0.0
    assert (fit.se >= 0).all()
    assert fit.dof == int(panel.present.sum()) - (8 + 5 - 1)
    assert_allclose(fit.index_se, fit.indexes * fit.se, rtol=0, atol=0)


def test_item_order_does_not_matter():
    rng = np.random.default_rng(79)
    panel = random_panel(rng, 6, 4, missing=0.2)
    perm = rng.permutation(6)
    shuffled = Panel.from_arrays(tuple(panel.items[i] for i in perm), panel.units,
                                 panel.values[perm], panel.quantities[perm])
    a = fit_dummy_index(panel)
    b = fit_dummy_index(shuffled)
    assert_allclose(a.indexes, b.indexes, rtol=1e-12)
    assert_allclose(a.se, b.se, rtol=1e-10)


def test_explicit_zero_rows_change_nothing():
    from mplindex import build_reference_basket

    header = "item_id,unit_id,value,quantity\n"
    body = "a,t0,2,1\nb,t0,3,1\na,t1,4,1\nb,t1,5,1\nc,t0,1,1\nc,t1,2,1\n"
    with_zero = load_panel(io.StringIO(header + body + "d,t0,0,0\n"))
    without = load_panel(io.StringIO(header + body))
    # the loader keeps the label; the basket rule is what removes it
    assert "d" in with_zero.items
    kept, report = build_reference_basket(with_zero)
    assert report.dropped_items == ("d",)
    a = fit_dummy_index(kept)
    b = fit_dummy_index(without)
    assert_array_equal(a.indexes, b.indexes)
    assert_array_equal(a.se, b.se)


def test_disconnected_presence_graph():
    values = np.array([
        [1.0, 2.0, 0.0, 0.0],
        [0.0, 0.0, 3.0, 4.0],
    ])
    panel = Panel.from_arrays(("a", "b"), ("u0", "u1", "u2", "u3"),
                              values, np.where(values > 0, 1.0, 0.0))
    comps = presence_components(panel)
    assert len(comps) == 2
    assert ({u for u, _ in comps} == {("u0", "u1"), ("u2", "u3")})
    with pytest.raises(UnidentifiedModel) as exc:
        fit_dummy_index(panel)
    assert len(exc.value.components) == 2
    assert "u2" in str(exc.value)


def test_connected_panel_has_single_component():
    panel = random_panel(np.random.default_rng(83), 7, 5, missing=0.3)
    assert len(presence_components(panel)) == 1


def test_overflowing_price_rejected():
    panel = Panel.from_arrays(("a", "b"), ("t0", "t1"),
                              np.array([[1e308, 1.0], [1.0, 1.0]]),
                              np.array([[1e-308, 1.0], [1.0, 1.0]]))
    with pytest.raises(InvalidPrice):
        fit_dummy_index(panel)


def test_zero_dof_leaves_sigma2_undefined():
    panel = price_panel([np.array([2.0]), np.array([3.0])])
    fit = fit_dummy_index(panel)
    assert fit.sigma2 is None
    assert fit.dof == 0
    assert np.isnan(fit.se[1])
    assert fit.se[0] == 0.0


def test_nonzero_base_unit():
    panel = price_panel([np.array([1.0, 2.0]), np.array([3.0, 4.0])], base=1)
    fit = fit_dummy_index(panel)
    assert fit.indexes[1] == 1.0
    assert fit.indexes[0] == pytest.approx(1.0 / math.sqrt(6.0), rel=1e-12)
