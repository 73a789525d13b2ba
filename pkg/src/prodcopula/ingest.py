"""Firm data loading, validation and synthetic stand-in datasets.

Canonical CSV header: ``id,year,labor,capital,value_added`` (UTF-8, '.'
decimal, amounts in million yen).  A JSON array of objects with the same
field names is accepted as well.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

FIELDS = ("id", "year", "labor", "capital", "value_added")
FINANCIALS = ("labor", "capital", "value_added")


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True)
class FirmRecord:
    id: str
    labor: float
    capital: float
    value_added: float
    year: int = 0

    def __post_init__(self):
        for name in FINANCIALS:
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive, got {val}")


@dataclass
class FirmData:
    """Column store of firm records; ``matrix`` gives the (L, K, Y) columns."""

    ids: np.ndarray
    years: np.ndarray
    labor: np.ndarray
    capital: np.ndarray
    value_added: np.ndarray
    synthetic: bool = False

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=str)
        self.years = np.asarray(self.years, dtype=int)
        for name in FINANCIALS:
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != self.ids.shape:
                raise ValueError("all columns must have the same length")
            if np.any(~(arr > 0)):
                raise ValueError(f"{name} must be strictly positive")
            setattr(self, name, arr)

    def __len__(self):
        return self.ids.size

    @property
    def matrix(self) -> np.ndarray:
        return np.column_stack([self.labor, self.capital, self.value_added])

    @classmethod
    def from_matrix(cls, lky, ids=None, years=None, synthetic=False) -> "FirmData":
        lky = np.asarray(lky, dtype=float)
        n = lky.shape[0]
        ids = np.array([f"F{i:06d}" for i in range(n)]) if ids is None else ids
        years = np.zeros(n, dtype=int) if years is None else years
        return cls(ids, years, lky[:, 0], lky[:, 1], lky[:, 2], synthetic=synthetic)

    @classmethod
    def from_records(cls, records) -> "FirmData":
        records = list(records)
        return cls(
            [r.id for r in records],
            [r.year for r in records],
            [r.labor for r in records],
            [r.capital for r in records],
            [r.value_added for r in records],
        )

    def records(self) -> list[FirmRecord]:
        return [
            FirmRecord(str(i), float(l), float(k), float(y), int(t))
            for i, t, l, k, y in zip(self.ids, self.years, self.labor, self.capital, self.value_added)
        ]


@dataclass
class Rejection:
    row: int
    id: str
    reason: str


@dataclass
class LoadResult:
    data: FirmData
    rejected: list[Rejection] = field(default_factory=list)
    rows_read: int = 0


def _parse_rows(rows, source):
    accepted, rejected = [], []
    count = 0
    for i, row in enumerate(rows):
        count += 1
        fid = str(row.get("id", "") or f"row{i}")
        reasons = []
        values = {}
        for name in FINANCIALS:
            raw = row.get(name)
            if raw is None or (isinstance(raw, str) and raw.strip() == ""):
                reasons.append(f"missing {name}")
                continue
            try:
                val = float(raw)
            except (TypeError, ValueError):
                reasons.append(f"unparseable {name}={raw!r}")
                continue
            if not math.isfinite(val) or val <= 0:
                reasons.append(f"nonpositive {name}={val}")
            values[name] = val
        try:
            year = int(float(row.get("year") or 0))
        except (TypeError, ValueError):
            reasons.append(f"unparseable year={row.get('year')!r}")
            year = 0
        if reasons:
            rejected.append(Rejection(i, fid, "; ".join(reasons)))
        else:
            accepted.append(FirmRecord(fid, values["labor"], values["capital"], values["value_added"], year))
    if not accepted:
        raise DataFormatError(f"{source}: no valid firm records")
    for rej in rejected:
        logger.info("rejected row %d (%s): %s", rej.row, rej.id, rej.reason)
    return FirmData.from_records(accepted), rejected, count


def load_firms(path, format: Optional[str] = None) -> LoadResult:
    """Read firm records, moving rows with missing or nonpositive
    financials into the rejection log instead of dropping them silently."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".") or "csv").lower()
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    if not text.strip():
        raise DataFormatError(f"{path}: empty file")
    if fmt == "json":
        try:
            rows = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: malformed JSON: {exc}") from exc
        if not isinstance(rows, list) or not all(isinstance(r, dict) for r in rows):
            raise DataFormatError(f"{path}: expected a JSON array of objects")
        keys = set().union(*(r.keys() for r in rows)) if rows else set()
    elif fmt == "csv":
        reader = csv.DictReader(text.splitlines())
        if reader.fieldnames is None:
            raise DataFormatError(f"{path}: missing header")
        keys = set(reader.fieldnames)
        rows = list(reader)
        if any(None in r for r in rows):
            raise DataFormatError(f"{path}: row with more fields than the header")
    else:
        raise DataFormatError(f"unknown format {fmt!r}")
    unknown = keys - set(FIELDS)
    if unknown:
        raise DataFormatError(f"{path}: unknown columns {sorted(unknown)}")
    missing = set(FINANCIALS) - keys
    if missing:
        raise DataFormatError(f"{path}: missing columns {sorted(missing)}")
    data, rejected, count = _parse_rows(rows, path)
    return LoadResult(data=data, rejected=rejected, rows_read=count)


def save_firms(data: FirmData, path, format: Optional[str] = None) -> None:
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".") or "csv").lower()
    rows = [
        {"id": str(i), "year": int(t), "labor": repr(float(l)), "capital": repr(float(k)), "value_added": repr(float(y))}
        for i, t, l, k, y in zip(data.ids, data.years, data.labor, data.capital, data.value_added)
    ]
    if fmt == "json":
        for r in rows:
            for name in FINANCIALS:
                r[name] = float(r[name])
        path.write_text(json.dumps(rows, indent=1), encoding="utf-8")
        return
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=FIELDS)
        writer.writeheader()
        writer.writerows(rows)


def default_marginals():
    """GB2 margins used for synthetic datasets (million yen).

    Chosen to mimic listed-firm scales: power-law upper tails with exponents
    a little above one and a few-thousand million yen characteristic scale.
    """
    from .marginals import GB2Params, MarginalTriple

    return MarginalTriple(
        labor=GB2Params(mu=1.3, nu=1.8, q=1.6, x0=4000.0),
        capital=GB2Params(mu=1.1, nu=1.5, q=1.4, x0=9000.0),
        value_added=GB2Params(mu=1.25, nu=1.7, q=1.6, x0=7000.0),
    )


def default_copula():
    """Nested Gumbel with the outer/inner parameters 2.89 and 5.26."""
    from .copulas import CopulaModel

    return CopulaModel("nested_gumbel", 3, (2.89, 5.26))


def synth_dataset(n: int = 1360, marginals=None, copula=None, seed: int = 0, sampler: str = "rejection") -> FirmData:
    from .sampling import SimulationSpec, simulate_firms

    spec = SimulationSpec(
        n=n,
        copula=copula or default_copula(),
        marginals=marginals or default_marginals(),
        seed=seed,
        sampler=sampler,
    )
    data = simulate_firms(spec)
    data.synthetic = True
    return data
