import csv
from pathlib import Path
from typing import Iterable

from app.schemas import AblationRow, EpochRecord, EvalReport


__all__ = ["ReportRepository"]


class ReportRepository:
    """Metric outputs. Files hold no timestamps, so identical runs give identical bytes."""

    @classmethod
    def __write_rows(cls, path: Path, header: list[str], rows: Iterable[list]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)

    @classmethod
    def write_metrics(cls, path: Path, records: list[EpochRecord]) -> None:
        header = ["epoch", "phase", "loss_global", "loss_local", "loss_total"]
        cls.__write_rows(path, header, (
            [r.epoch, r.phase, repr(float(r.loss_global)), repr(float(r.loss_local)), repr(float(r.loss_total))]
            for r in records
        ))

    @classmethod
    def read_metrics(cls, path: Path) -> list[EpochRecord]:
        with Path(path).open(newline="", encoding="utf-8") as handle:
            return [EpochRecord.model_validate(row) for row in csv.DictReader(handle)]

    @classmethod
    def write_report(cls, path: Path, report: EvalReport) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report.model_dump_json(by_alias=True, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def read_report(cls, path: Path) -> EvalReport:
        return EvalReport.model_validate_json(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def write_ablation(cls, path: Path, rows: list[AblationRow]) -> None:
        cls.__write_rows(path, ["setting", "seeds", "mAP", "rank1"], (
            [row.setting, row.seeds, repr(float(row.map_score)), repr(float(row.rank1))] for row in rows
        ))
