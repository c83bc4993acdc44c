"""CSV and JSON artifact writing."""

import csv
import json
import logging
from numbers import Integral, Real
from pathlib import Path
from typing import Any, Iterable, List, Sequence


def format_value(value: Any) -> str:
    """Shortest round-trip text for numbers, str() for everything else."""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, Integral):
        return str(int(value))
    if isinstance(value, Real):
        return repr(float(value))
    return str(value)


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "tolist"):
        return _plain(value.tolist())
    if isinstance(value, bool):
        return value
    if isinstance(value, Integral):
        return int(value)
    if isinstance(value, Real):
        return float(value)
    return value


def read_column(path: Path) -> List[float]:
    """First column of a CSV file as floats; a non-numeric first row is taken as a header."""
    values = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        for line_number, row in enumerate(csv.reader(f), start=1):
            if not row or not row[0].strip():
                continue
            try:
                values.append(float(row[0]))
            except ValueError:
                if line_number == 1:
                    continue
                raise ValueError(f"{path}:{line_number}: not a number: {row[0]!r}")
    return values


class ArtifactWriter:
    """Writes result files into one output directory, in call order."""

    def __init__(self, out_dir: Path, logger: logging.Logger):
        self.out_dir = Path(out_dir)
        self.logger = logger

    def _target(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir / name

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        path = self._target(name)
        count = 0
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(v) for v in row])
                count += 1
        self.logger.info(f"💾 Wrote {path} ({count} rows)")
        return path

    def write_json(self, name: str, payload: Any) -> Path:
        path = self._target(name)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(_plain(payload), f, indent=2)
            f.write("\n")
        self.logger.info(f"💾 Wrote {path}")
        return path
