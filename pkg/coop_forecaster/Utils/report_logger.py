import csv
import os
from typing import Any

import pandas as pd


class ReportLogger:
    """Evaluation records, one CSV row per evaluated setting (plain eval, latency k, drop ratio, ...)."""

    fieldnames = [
        'setting', 'value', 'forecaster', 'scenarios', 'agents', 'min_ade', 'min_fde', 'miss_rate',
        'assoc_precision', 'assoc_recall', 'assoc_f1',
    ]

    def __init__(self, filename: str) -> None:
        self.filename = filename
        self.records: list[dict[str, Any]] = []
        folder = os.path.dirname(filename)
        if folder:
            os.makedirs(folder, exist_ok=True)
        self.file = open(self.filename, mode="w", newline="")
        self.writer = csv.DictWriter(self.file, fieldnames=self.fieldnames)
        self.writer.writeheader()

    def log_report(self, record: dict[str, Any]) -> None:
        row = {name: record.get(name, "") for name in self.fieldnames}
        self.records.append(row)
        self.writer.writerow({name: repr(v) if isinstance(v, float) else v for name, v in row.items()})
        self.file.flush()

    def table(self) -> pd.DataFrame:
        return pd.DataFrame(self.records, columns=self.fieldnames)

    def close(self) -> None:
        self.file.close()


def format_table(frame: pd.DataFrame) -> str:
    """Aligned text table for stdout."""
    return frame.to_string(index=False, float_format=lambda v: f"{v:.4f}")
