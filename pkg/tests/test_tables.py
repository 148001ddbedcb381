"""Labeled numeric tables and their CSV/markdown serializations."""

import numpy as np
import pytest

from latentprobe import LatentProbeError, NamedTable


def sample_table():
    return NamedTable(
        row_labels=["alpha", "beta"],
        col_labels=["one", "two", "three"],
        values=np.array([[1.25, -2.5, 0.0], [3.125, np.nan, 7.0]]),
        corner="feature",
    )


class TestNamedTable:
    def test_shape_mismatch_rejected(self):
        with pytest.raises(LatentProbeError):
            NamedTable(row_labels=["a"], col_labels=["x", "y"],
                       values=np.zeros((2, 2)))

    def test_cell_lookup(self):
        t = sample_table()
        assert t.cell("beta", "three") == 7.0
        assert t.cell("alpha", "two") == -2.5

    def test_unknown_label_raises(self):
        t = sample_table()
        with pytest.raises(Exception):
            t.cell("gamma", "one")

    def test_csv_round_trip(self, tmp_path):
        t = sample_table()
        p = tmp_path / "t.csv"
        t.to_csv(str(p))
        back = NamedTable.from_csv(str(p))
        assert back.row_labels == t.row_labels
        assert back.col_labels == t.col_labels
        assert back.corner == "feature"
        assert np.array_equal(back.values, t.values, equal_nan=True)

    def test_csv_missing_cell_empty(self, tmp_path):
        t = sample_table()
        p = tmp_path / "t.csv"
        t.to_csv(str(p))
        lines = p.read_text().strip().split("\n")
        assert lines[0] == "feature,one,two,three"
        beta = lines[2].split(",")
        assert beta[2] == ""

    def test_markdown_matches_csv_rounding(self, tmp_path):
        t = sample_table()
        md = t.to_markdown(decimals=2)
        for row in t.row_labels:
            for col in t.col_labels:
                v = t.cell(row, col)
                if np.isfinite(v):
                    assert f"{v:.2f}" in md

    def test_markdown_structure(self):
        md = sample_table().to_markdown(decimals=3)
        lines = md.strip().split("\n")
        assert lines[0].startswith("| feature |")
        assert set(lines[1].replace("|", "").strip()) <= set("-: ")
        assert len(lines) == 2 + 2
