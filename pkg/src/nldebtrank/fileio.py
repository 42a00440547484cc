"""Balance-sheet and edge-list files, delimited tables and run configuration."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np
import yaml

from .balance import BalanceSheet, BankingSystem, ExposureNetwork
from .errors import ConfigError, DataError

BALANCE_HEADER = ("bank_id", "total_assets", "total_liabilities",
                  "interbank_assets", "interbank_liabilities")
EDGE_HEADER = ("lender", "borrower", "weight")


def _parse_amount(text: str, row: int, name: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise DataError(f"row {row}, field {name}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value) or value < 0:
        raise DataError(f"row {row}, field {name}: expected a non-negative amount, got {text!r}")
    return value


def load_balance_sheets(path, delimiter: str = ",", year_label: Optional[str] = None) -> BankingSystem:
    """Read and validate a balance-sheet table.

    Row numbers in error messages count the header as row 1.
    """
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file (need a header and at least 2 banks)")
        header = [h.strip() for h in header]
        missing = [h for h in BALANCE_HEADER if h not in header]
        if missing:
            raise DataError(f"{path}: header is missing column(s) {', '.join(missing)}")
        col = {name: header.index(name) for name in BALANCE_HEADER}
        banks, seen = [], {}
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {rownum}: expected {len(header)} fields, got {len(row)}")
            bank_id = row[col["bank_id"]].strip()
            if not bank_id:
                raise DataError(f"{path}: row {rownum}, field bank_id: empty identifier")
            if bank_id in seen:
                raise DataError(
                    f"{path}: row {rownum}, field bank_id: duplicate id {bank_id!r} "
                    f"(first seen in row {seen[bank_id]})"
                )
            seen[bank_id] = rownum
            values = [_parse_amount(row[col[n]].strip(), rownum, n) for n in BALANCE_HEADER[1:]]
            sheet = BalanceSheet(bank_id, *values)
            issues = sheet.problems()
            if issues:
                raise DataError(f"{path}: row {rownum} (bank {bank_id!r}): " + "; ".join(issues))
            banks.append(sheet)
    if len(banks) < 2:
        raise DataError(f"{path}: need at least 2 banks, found {len(banks)}")
    return BankingSystem(tuple(banks), year_label)


def write_balance_sheets(system: BankingSystem, path, delimiter: str = ",") -> None:
    rows = [
        (b.bank_id, b.total_assets, b.total_liabilities, b.interbank_assets, b.interbank_liabilities)
        for b in system.banks
    ]
    write_table(path, BALANCE_HEADER, rows, delimiter)


def _cell(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, header: Sequence[str], rows: Iterable[Sequence[Any]], delimiter: str = ",") -> None:
    """Write a delimited table; floats use the shortest round-tripping repr."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def read_table(path, delimiter: str = ",") -> list[dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh, delimiter=delimiter))


def edge_rows(network: ExposureNetwork, bank_ids: Sequence, prefix: Sequence = ()):
    for i, j, w in network.edges():
        yield (*prefix, bank_ids[i], bank_ids[j], w)


def write_network(network: ExposureNetwork, bank_ids: Sequence, path, delimiter: str = ",") -> None:
    write_table(path, EDGE_HEADER, edge_rows(network, bank_ids), delimiter)


def load_network(path, system: BankingSystem, delimiter: str = ",") -> ExposureNetwork:
    """Read an edge list (lender, borrower, weight) keyed by bank_id."""
    index = {str(b): k for k, b in enumerate(system.bank_ids)}
    w = np.zeros((system.n, system.n))
    try:
        records = read_table(path, delimiter)
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    for rownum, rec in enumerate(records, start=2):
        try:
            i, j = index[rec["lender"].strip()], index[rec["borrower"].strip()]
        except KeyError as exc:
            raise DataError(f"{path}: row {rownum}: unknown bank or missing column {exc}") from None
        if i == j:
            raise DataError(f"{path}: row {rownum}: self-loan for bank {rec['lender']!r}")
        w[i, j] += _parse_amount(rec["weight"], rownum, "weight")
    return ExposureNetwork(w)


@dataclass
class RunConfig:
    """Flat key-value run configuration (YAML or JSON); keys are listed in the README."""

    balance_sheets: Optional[str] = None
    network: Optional[str] = None
    out_dir: str = "out"
    seed: int = 0
    # synthetic system, used when no balance_sheets file is given
    n_banks: int = 183
    size_dispersion: float = 1.0
    interbank_share: float = 0.135
    equity_ratio: float = 0.05
    noise: float = 0.1
    # scenario
    p: float = 0.05
    n_networks: int = 100
    n_shock_realizations: int = 10
    p_shock: float = 0.05
    x_shock: float = 0.005
    rule: str = "nonlinear"
    alpha: float = 0.0
    tol: float = 1e-10
    t_max: int = 10000
    # sweep
    alpha_grid: list = field(default_factory=lambda: [0.0, 1.0, 2.0])
    x_shock_grid: list = field(default_factory=lambda: [0.005])
    reference_p_shock: Optional[float] = None
    # reconstruct
    write_weights: bool = False

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a key-value mapping")
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
        cfg = cls(**data)
        cfg._coerce()
        return cfg

    def _coerce(self) -> None:
        try:
            for name in ("seed", "n_banks", "n_networks", "n_shock_realizations", "t_max"):
                v = getattr(self, name)
                if isinstance(v, bool) or int(v) != v:
                    raise ConfigError(f"{name} must be an integer, got {v!r}")
                setattr(self, name, int(v))
            for name in ("size_dispersion", "interbank_share", "equity_ratio", "noise",
                         "p", "p_shock", "x_shock", "alpha", "tol"):
                setattr(self, name, float(getattr(self, name)))
            self.alpha_grid = [float(a) for a in _as_list(self.alpha_grid, "alpha_grid")]
            self.x_shock_grid = [float(x) for x in _as_list(self.x_shock_grid, "x_shock_grid")]
            if self.reference_p_shock is not None:
                self.reference_p_shock = float(self.reference_p_shock)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad configuration value: {exc}") from None
        if self.rule not in ("linear", "furfine", "nonlinear"):
            raise ConfigError(f"rule must be linear, furfine or nonlinear, got {self.rule!r}")
        if not isinstance(self.write_weights, bool):
            raise ConfigError("write_weights must be true or false")

    def as_dict(self) -> dict:
        return asdict(self)


def _as_list(v, name):
    if isinstance(v, (list, tuple)):
        return list(v)
    raise ConfigError(f"{name} must be a list")


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from None
    return RunConfig.from_mapping(data or {})


def write_summary(path, summary: dict) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n",
                          encoding="utf-8")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
