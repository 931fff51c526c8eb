import csv
import logging
import sqlite3
import sys
import uuid
from abc import ABC, abstractmethod
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Union

from .metric import format_fraction

logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s"
)

CSV_COLUMNS = ["run_id", "algorithm", "seed", "k", "l", "n", "m", "cost", "opt", "ratio", "phases", "faults"]
RUN_NAMESPACE = uuid.uuid5(uuid.NAMESPACE_URL, "mssms/runs")

Number = Union[Fraction, float, int]


def format_number(value: Optional[Number]) -> str:
    """Exact p/q for rationals, repr for Monte Carlo floats, empty for absent values."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return format_fraction(value)


@dataclass
class RunReport:
    algorithm: str
    instance_id: str
    seed: Optional[int]
    k: int
    l: int
    n: int
    m: int
    cost: Number
    opt: Optional[Fraction] = None
    phases: Optional[Number] = None
    faults: Optional[Number] = None
    trials: int = 1
    cost_stddev: Optional[float] = None
    phase_breakdown: Dict[int, int] = field(default_factory=dict)
    reference_costs: Dict[str, Fraction] = field(default_factory=dict)

    @property
    def ratio(self) -> Optional[Number]:
        if self.opt is None or self.opt == 0:
            return None
        if isinstance(self.cost, float):
            return self.cost / float(self.opt)
        return Fraction(self.cost) / self.opt

    @property
    def run_id(self) -> str:
        key = f"{self.instance_id}|{self.algorithm}|{self.seed}|{self.trials}"
        return str(uuid.uuid5(RUN_NAMESPACE, key))

    def row(self) -> Dict[str, str]:
        return {
            "run_id": self.run_id,
            "algorithm": self.algorithm,
            "seed": "" if self.seed is None else str(self.seed),
            "k": str(self.k),
            "l": str(self.l),
            "n": str(self.n),
            "m": str(self.m),
            "cost": format_number(self.cost),
            "opt": format_number(self.opt),
            "ratio": format_number(self.ratio),
            "phases": format_number(self.phases),
            "faults": format_number(self.faults),
        }


class ReportSink(ABC):
    """
    Abstract Base Class for run report storage.
    """

    @abstractmethod
    def write(self, reports: List[RunReport]):
        """Stores a batch of run reports."""
        pass

    @abstractmethod
    def read(self) -> List[Dict[str, Any]]:
        """Returns the stored rows as dictionaries keyed by CSV column."""
        pass


class CsvReportSink(ReportSink):
    """Writes the fixed CSV columns to a file, or to stdout when no path is set."""

    def __init__(self, path: Optional[str] = None):
        self.path = path

    def write(self, reports: List[RunReport]):
        if self.path is None:
            self._write_rows(sys.stdout, reports)
            return
        with open(self.path, "w", newline="", encoding="utf-8") as f:
            self._write_rows(f, reports)
        logging.info(f"Wrote {len(reports)} report row(s) to {self.path}")

    @staticmethod
    def _write_rows(stream, reports: List[RunReport]):
        writer = csv.DictWriter(stream, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for report in reports:
            writer.writerow(report.row())

    def read(self) -> List[Dict[str, Any]]:
        if self.path is None:
            return []
        with open(self.path, "r", newline="", encoding="utf-8") as f:
            return list(csv.DictReader(f))


class SQLiteReportSink(ReportSink):
    """Keeps every report in a SQLite table, one row per run id."""

    def __init__(self, db_file: str = "mssms_runs.db"):
        self.db_file = db_file
        self._connection = None
        if self.db_file == ":memory:":
            self._connection = sqlite3.connect(":memory:")
        self.init_db()

    @contextmanager
    def _managed_connection(self):
        conn = self._connection if self._connection else sqlite3.connect(self.db_file)
        try:
            yield conn
        finally:
            if not self._connection:
                conn.close()

    def init_db(self):
        columns = ", ".join(f"{c} TEXT" for c in CSV_COLUMNS[1:])
        with self._managed_connection() as conn:
            conn.execute(f"CREATE TABLE IF NOT EXISTS run_reports (run_id TEXT PRIMARY KEY, {columns})")
            conn.commit()

    def write(self, reports: List[RunReport]):
        placeholders = ", ".join(f":{c}" for c in CSV_COLUMNS)
        with self._managed_connection() as conn:
            conn.executemany(
                f"INSERT OR REPLACE INTO run_reports ({', '.join(CSV_COLUMNS)}) VALUES ({placeholders})",
                [report.row() for report in reports],
            )
            conn.commit()
        logging.info(f"Stored {len(reports)} report row(s) in {self.db_file}")

    def read(self) -> List[Dict[str, Any]]:
        with self._managed_connection() as conn:
            conn.row_factory = sqlite3.Row
            rows = conn.execute(f"SELECT {', '.join(CSV_COLUMNS)} FROM run_reports ORDER BY run_id").fetchall()
            return [dict(row) for row in rows]


def get_report_sink(config: Dict[str, Any], path: Optional[str] = None) -> ReportSink:
    """
    Factory function for the configured report sink. An explicit `path`
    selects a CSV file regardless of the configuration.
    """
    reports = config.get("reports", {})
    if path is not None:
        return CsvReportSink(path)
    sink_type = reports.get("active_sink", "csv")
    if sink_type == "csv":
        return CsvReportSink(reports.get("csv", {}).get("path"))
    if sink_type == "sqlite":
        return SQLiteReportSink(reports.get("sqlite", {}).get("db_file", "mssms_runs.db"))
    raise ValueError(f"Unknown report sink type: {sink_type}")
