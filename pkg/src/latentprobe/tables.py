"""Small labeled-matrix container shared by the analysis tables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LatentProbeError


@dataclass
class NamedTable:
    """A 2-D value grid with row and column labels.

    CSV export keeps full precision (repr round-trip); markdown export
    rounds to two decimals for readability.
    """

    row_labels: list[str]
    col_labels: list[str]
    values: np.ndarray
    corner: str = ""

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.row_labels), len(self.col_labels)):
            raise LatentProbeError(
                f"table shape {self.values.shape} does not match labels "
                f"({len(self.row_labels)} x {len(self.col_labels)})"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def cell(self, row: str, col: str) -> float:
        return float(self.values[self.row_labels.index(row), self.col_labels.index(col)])

    def to_csv(self, path: str) -> None:
        import csv

        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([self.corner, *self.col_labels])
            for i, label in enumerate(self.row_labels):
                row: list[str] = [label]
                for v in self.values[i]:
                    row.append("" if not np.isfinite(v) else repr(float(v)))
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path: str) -> "NamedTable":
        import csv

        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header:
                raise LatentProbeError(f"{path}: empty table file")
            corner, col_labels = header[0], header[1:]
            row_labels, data = [], []
            for row in reader:
                if not row:
                    continue
                if len(row) != len(header):
                    raise LatentProbeError(f"{path}: ragged row {row[0]!r}")
                row_labels.append(row[0])
                data.append([float(c) if c != "" else float("nan") for c in row[1:]])
        values = np.array(data) if data else np.empty((0, len(col_labels)))
        return cls(row_labels=row_labels, col_labels=col_labels, values=values,
                   corner=corner)

    def to_markdown(self, decimals: int = 2) -> str:
        head = [self.corner, *self.col_labels]
        lines = ["| " + " | ".join(head) + " |",
                 "|" + "|".join("---" for _ in head) + "|"]
        for i, label in enumerate(self.row_labels):
            cells = [label]
            for v in self.values[i]:
                cells.append("" if not np.isfinite(v) else f"{v:.{decimals}f}")
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines)
