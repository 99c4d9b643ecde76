import csv
import os
from typing import Any

import pandas as pd


class HistoryLogger:
    """One CSV row per training epoch. The file is rewritten per run so reruns are byte-identical."""

    fieldnames = [
        'epoch', 'steps', 'lr', 'train_scenarios', 'loss_dis', 'loss_reg', 'loss_cls', 'loss_total',
        'val_min_ade', 'val_min_fde', 'val_miss_rate', 'assoc_precision', 'assoc_recall', 'assoc_f1',
    ]

    def __init__(self, filename: str) -> None:
        self.filename = filename
        folder = os.path.dirname(filename)
        if folder:
            os.makedirs(folder, exist_ok=True)
        self.file = open(self.filename, mode="w", newline="")
        self.writer = csv.DictWriter(self.file, fieldnames=self.fieldnames)
        self.writer.writeheader()

    def log_epoch(self, record: dict[str, Any]) -> None:
        self.writer.writerow({name: _format(record.get(name, "")) for name in self.fieldnames})
        self.file.flush()

    def close(self) -> None:
        self.file.close()


def _format(value: Any) -> Any:
    return repr(float(value)) if isinstance(value, float) else value


def read_history(filename: str) -> pd.DataFrame:
    return pd.read_csv(filename)
