"""Value/quantity panel container, CSV ingestion and the reference-basket rule.

A panel holds two aligned nonnegative matrices (values and quantities) over
N items and T units, where a unit is a time period (mode "time") or an area
(mode "space").  A cell is present when both entries are strictly positive;
absent cells carry exact zeros in both matrices.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DuplicateObservation,
    EmptyBasket,
    FormatError,
    InconsistentCell,
    ValidationError,
)

CSV_HEADER = ("item_id", "unit_id", "value", "quantity")
MODES = ("time", "space")


def _as_readonly(arr: np.ndarray, dtype) -> np.ndarray:
    out = np.array(arr, dtype=dtype, order="C", copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Panel:
    """Immutable N x T value/quantity panel.

    Rows are items, columns are units (periods or areas).  Absent cells are
    exact zeros in both matrices and False in ``present``.  The arrays are
    marked read-only so a constructed panel can be shared freely.

    T = 1 panels are accepted only as the starting point of the period-update
    bootstrap; every estimator requires T >= 2.
    """

    items: tuple[str, ...]
    units: tuple[str, ...]
    values: np.ndarray
    quantities: np.ndarray
    present: np.ndarray
    base_unit: int = 0
    mode: str = "time"

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(str(i) for i in self.items))
        object.__setattr__(self, "units", tuple(str(u) for u in self.units))
        object.__setattr__(self, "values", _as_readonly(self.values, np.float64))
        object.__setattr__(self, "quantities", _as_readonly(self.quantities, np.float64))
        object.__setattr__(self, "present", _as_readonly(self.present, np.bool_))

        n, t = len(self.items), len(self.units)
        if n < 1 or t < 1:
            raise ValidationError("panel needs at least one item and one unit")
        if len(set(self.items)) != n:
            raise ValidationError("item labels must be unique")
        if len(set(self.units)) != t:
            raise ValidationError("unit labels must be unique")
        shape = (n, t)
        for name in ("values", "quantities", "present"):
            if getattr(self, name).shape != shape:
                raise ValidationError(f"{name} must have shape {shape}")
        if not (np.isfinite(self.values).all() and np.isfinite(self.quantities).all()):
            raise ValidationError("values and quantities must be finite")
        if (self.values < 0).any() or (self.quantities < 0).any():
            raise ValidationError("values and quantities must be nonnegative")

        vpos = self.values > 0
        qpos = self.quantities > 0
        if not (vpos == self.present).all() or not (qpos == self.present).all():
            bad = np.argwhere((vpos != self.present) | (qpos != self.present))
            i, t_ = bad[0]
            raise InconsistentCell(
                f"cell ({self.items[i]}, {self.units[t_]}) mixes positive and "
                "zero entries; present cells need value > 0 and quantity > 0, "
                "absent cells need exact zeros in both"
            )
        empty_units = np.flatnonzero(~self.present.any(axis=0))
        if empty_units.size:
            raise ValidationError(
                f"unit {self.units[empty_units[0]]!r} has no present items"
            )
        if not 0 <= self.base_unit < t:
            raise ValidationError(f"base_unit {self.base_unit} out of range for T={t}")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")

    @classmethod
    def from_arrays(cls, items, units, values, quantities, base_unit=0, mode="time"):
        """Build a panel deriving the presence mask from positivity."""
        values = np.asarray(values, dtype=np.float64)
        quantities = np.asarray(quantities, dtype=np.float64)
        present = (values > 0) & (quantities > 0)
        return cls(tuple(items), tuple(units), values, quantities, present,
                   base_unit=base_unit, mode=mode)

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def n_units(self) -> int:
        return len(self.units)

    def presences_per_item(self) -> np.ndarray:
        return self.present.sum(axis=1)

    def with_unit(self, label: str, values, quantities) -> "Panel":
        """Return a new panel with one extra unit column appended."""
        label = str(label)
        if label in self.units:
            raise ValidationError(f"unit {label!r} already in panel")
        v = np.asarray(values, dtype=np.float64).reshape(-1)
        q = np.asarray(quantities, dtype=np.float64).reshape(-1)
        if v.shape != (self.n_items,) or q.shape != (self.n_items,):
            raise ValidationError(
                f"new unit arrays must have length {self.n_items}"
            )
        return Panel.from_arrays(
            self.items,
            self.units + (label,),
            np.column_stack([self.values, v]),
            np.column_stack([self.quantities, q]),
            base_unit=self.base_unit,
            mode=self.mode,
        )


@dataclass(frozen=True)
class PriceMatrix:
    """Implied unit values v/q on present cells, exact zeros elsewhere."""

    prices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "prices", _as_readonly(self.prices, np.float64))


@dataclass(frozen=True)
class BasketReport:
    """What build_reference_basket did and what it noticed."""

    dropped_items: tuple[str, ...]
    pair_intersections: dict = field(default_factory=dict)
    base_absent_items: tuple[str, ...] = ()


def _resolve_base(units: tuple[str, ...], base_unit) -> int:
    if base_unit is None:
        return 0
    if isinstance(base_unit, (int, np.integer)) and not isinstance(base_unit, bool):
        return int(base_unit)
    label = str(base_unit)
    if label in units:
        return units.index(label)
    if label.lstrip("+-").isdigit():
        return int(label)
    raise ValidationError(f"base unit {base_unit!r} not found among units")


def load_panel(source, mode: str = "time", base_unit=None, units=None) -> Panel:
    """Read a long-format CSV (item_id,unit_id,value,quantity) into a Panel.

    ``source`` is a path or an open text stream.  Rows with value = 0 and
    quantity = 0 mark explicit absence; any other mix of signs is rejected.
    ``units`` optionally fixes the unit ordering (default: first appearance).
    ``base_unit`` is a unit label or positional index (default: first unit).
    """
    if hasattr(source, "read"):
        return _parse_panel(source, mode, base_unit, units)
    with open(os.fspath(source), "r", encoding="utf-8", newline="") as fh:
        return _parse_panel(fh, mode, base_unit, units)


def _parse_panel(stream, mode, base_unit, units) -> Panel:
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("empty input", line=1) from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise FormatError(
            f"expected header {','.join(CSV_HEADER)}, got {','.join(header)}", line=1
        )

    cells: dict[tuple[str, str], tuple[float, float]] = {}
    item_order: list[str] = []
    unit_order: list[str] = []
    seen_items = set()
    seen_units = set()
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise FormatError(f"expected 4 fields, got {len(row)}", line=lineno)
        item, unit = row[0].strip(), row[1].strip()
        if not item or not unit:
            raise FormatError("empty item_id or unit_id", line=lineno)
        try:
            value = float(row[2])
            quantity = float(row[3])
        except ValueError:
            raise FormatError(f"unparseable numeric field in {row!r}", line=lineno) from None
        if not (math.isfinite(value) and math.isfinite(quantity)):
            raise FormatError("value and quantity must be finite", line=lineno)
        if not ((value > 0 and quantity > 0) or (value == 0 and quantity == 0)):
            raise InconsistentCell(
                f"line {lineno}: cell ({item}, {unit}) has value={row[2]}, "
                f"quantity={row[3]}; need both positive or both exactly zero"
            )
        key = (item, unit)
        if key in cells:
            raise DuplicateObservation(
                f"line {lineno}: duplicate observation for item {item!r}, unit {unit!r}"
            )
        cells[key] = (value, quantity)
        if item not in seen_items:
            seen_items.add(item)
            item_order.append(item)
        if unit not in seen_units:
            seen_units.add(unit)
            unit_order.append(unit)

    if not cells:
        raise FormatError("input contains no data rows", line=2)

    if units is not None:
        units = [str(u) for u in units]
        missing = [u for u in unit_order if u not in units]
        if missing:
            raise ValidationError(f"unit {missing[0]!r} not covered by the units argument")
        extra = [u for u in units if u not in seen_units]
        if extra:
            raise ValidationError(f"unit {extra[0]!r} in the units argument never appears")
        unit_order = units

    n, t = len(item_order), len(unit_order)
    values = np.zeros((n, t))
    quantities = np.zeros((n, t))
    item_idx = {lab: i for i, lab in enumerate(item_order)}
    unit_idx = {lab: j for j, lab in enumerate(unit_order)}
    for (item, unit), (value, quantity) in cells.items():
        values[item_idx[item], unit_idx[unit]] = value
        quantities[item_idx[item], unit_idx[unit]] = quantity

    base = _resolve_base(tuple(unit_order), base_unit)
    if not 0 <= base < t:
        raise ValidationError(f"base unit index {base} out of range for T={t}")
    return Panel.from_arrays(item_order, unit_order, values, quantities,
                             base_unit=base, mode=mode)


def emit_panel(panel: Panel) -> str:
    """Serialize present cells back to long CSV with 17 significant digits."""
    buf = io.StringIO()
    buf.write(",".join(CSV_HEADER) + "\n")
    for i, item in enumerate(panel.items):
        for t, unit in enumerate(panel.units):
            if panel.present[i, t]:
                buf.write(
                    f"{item},{unit},{panel.values[i, t]:.17g},{panel.quantities[i, t]:.17g}\n"
                )
    return buf.getvalue()


def build_reference_basket(panel: Panel) -> tuple[Panel, BasketReport]:
    """Drop items present in fewer than two units; report what happened.

    Returns the restricted panel and a report with the dropped item labels,
    per-pair presence intersection sizes, and items that survive the rule but
    are absent in the base unit (they stay in the basket, zero-filled).
    Raises EmptyBasket when nothing survives.  Idempotent on conforming panels.
    """
    presences = panel.presences_per_item()
    keep = presences >= 2
    dropped = tuple(lab for lab, k in zip(panel.items, keep) if not k)
    if not keep.any():
        raise EmptyBasket("no item is present in two or more units")

    if dropped:
        restricted = Panel(
            tuple(lab for lab, k in zip(panel.items, keep) if k),
            panel.units,
            panel.values[keep],
            panel.quantities[keep],
            panel.present[keep],
            base_unit=panel.base_unit,
            mode=panel.mode,
        )
    else:
        restricted = panel

    pres = restricted.present
    pairs = {}
    for a in range(restricted.n_units):
        for b in range(a + 1, restricted.n_units):
            pairs[(restricted.units[a], restricted.units[b])] = int(
                (pres[:, a] & pres[:, b]).sum()
            )
    base_absent = tuple(
        lab for i, lab in enumerate(restricted.items) if not pres[i, restricted.base_unit]
    )
    return restricted, BasketReport(dropped, pairs, base_absent)


def implied_prices(panel: Panel) -> PriceMatrix:
    """Unit values v/q on present cells, exact zeros on absent cells.

    Overflow to inf is tolerated here; consumers that need finite prices
    check and raise with a pointer to the offending cell.
    """
    prices = np.zeros_like(panel.values)
    with np.errstate(over="ignore"):
        np.divide(panel.values, panel.quantities, out=prices, where=panel.present)
    return PriceMatrix(prices)
