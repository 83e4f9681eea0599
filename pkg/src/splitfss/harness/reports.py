"""Run reports mirroring the benchmark table columns: accuracy, wall
time, and per-phase communication (bytes internally, MB = 10^6 bytes in
emitted tables)."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

MB = 1_000_000.0

CSV_COLUMNS = [
    "mode", "network", "dataset", "epochs", "batch_size",
    "testing_accuracy_pct", "training_time_s",
    "client_comm_mb", "server_comm_mb", "training_comm_mb",
    "testing_comm_mb", "preprocessing_comm_mb",
]


@dataclass
class RunReport:
    mode: str
    network: str
    dataset: str
    epochs: int
    batch_size: int
    testing_accuracy_pct: float | None
    training_time_s: float
    bytes: dict = field(default_factory=dict)

    @classmethod
    def from_result(cls, result, dataset_name: str) -> "RunReport":
        return cls(
            mode=result.session.mode.value,
            network=result.session.network.name,
            dataset=dataset_name,
            epochs=result.session.train.epochs,
            batch_size=result.session.train.batch_size,
            testing_accuracy_pct=result.accuracy,
            training_time_s=round(result.elapsed_s, 3),
            bytes=result.comm_bytes(),
        )

    def row(self) -> dict:
        return {
            "mode": self.mode,
            "network": self.network,
            "dataset": self.dataset,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "testing_accuracy_pct": (
                None if self.testing_accuracy_pct is None
                else round(self.testing_accuracy_pct, 2)
            ),
            "training_time_s": self.training_time_s,
            "client_comm_mb": round(self.bytes.get("client_comm", 0) / MB, 6),
            "server_comm_mb": round(self.bytes.get("server_comm", 0) / MB, 6),
            "training_comm_mb": round(self.bytes.get("training_comm", 0) / MB, 6),
            "testing_comm_mb": round(self.bytes.get("testing_comm", 0) / MB, 6),
            "preprocessing_comm_mb": round(self.bytes.get("preprocessing_comm", 0) / MB, 6),
        }

    def to_json(self) -> str:
        doc = asdict(self)
        doc["table_row"] = self.row()
        return json.dumps(doc, indent=2)


def reports_to_csv(reports: list) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS)
    writer.writeheader()
    for rep in reports:
        writer.writerow(rep.row())
    return buf.getvalue()


def reports_to_json(reports: list) -> str:
    return json.dumps([json.loads(r.to_json()) for r in reports], indent=2)


def write_report(path: str, reports: list, fmt: str):
    text = reports_to_csv(reports) if fmt == "csv" else reports_to_json(reports)
    with open(path, "w") as fh:
        fh.write(text)
