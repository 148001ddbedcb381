"""Command-line pipeline: synth, extract, analyze, and the standalone stages.

A small on-disk corpus (8 styles x 10 utterances, short clips) is built once
per module through the CLI itself, then every subcommand is exercised against
it in-process via main(argv).
"""

import csv
import json
import os
import re

import numpy as np
import pytest

from latentprobe.cli import main
from latentprobe.features import CANONICAL_FEATURES
from latentprobe.tables import NamedTable

N_STYLES = 8
N_PER = 10
N_UTTS = N_STYLES * N_PER
TASKS = ["style", "speaker", "vae-tts"]


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def file_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    spec_path = root / "spec.json"
    spec_path.write_text(json.dumps({
        "n_styles": N_STYLES,
        "n_per_style": N_PER,
        "latent_dim": 8,
        "seed": 11,
        "duration_range": [0.35, 0.45],
    }))
    out = root / "data"
    rc = main(["synth", "--out-dir", str(out), "--spec", str(spec_path)])
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def extracted(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("extract")
    rc = main(["extract", "--manifest", str(corpus / "manifest.csv"),
               "--out-dir", str(out)])
    assert rc == 0
    return out


def analyze_args(extracted, corpus, out, tasks=TASKS, reducers="pca,tsne,umap"):
    args = ["analyze", "--features", str(extracted / "features.csv")]
    for task in tasks:
        args += ["--embeddings", f"{task}={corpus / f'embeddings_{task}.csv'}"]
    args += ["--summary", str(extracted / "corpus_summary.csv"),
             "--reducers", reducers, "--perplexity", "10",
             "--n-neighbors", "10", "--seed", "0", "--out-dir", str(out)]
    return args


@pytest.fixture(scope="module")
def analyzed(corpus, extracted, tmp_path_factory):
    out = tmp_path_factory.mktemp("analyze")
    rc = main(analyze_args(extracted, corpus, out))
    assert rc == 0
    return out


class TestSynth:

    def test_corpus_files_on_disk(self, corpus):
        header, rows = read_rows(corpus / "manifest.csv")
        assert header == ["utterance_id", "style", "path"]
        assert len(rows) == N_UTTS
        for task in TASKS:
            assert (corpus / f"embeddings_{task}.csv").is_file()
        wavs = [r[2] for r in rows]
        assert len(set(wavs)) == N_UTTS
        for rel in wavs:
            assert (corpus / rel).is_file()

    def test_eight_styles_ten_each(self, corpus):
        _, rows = read_rows(corpus / "manifest.csv")
        by_style = {}
        for _, style, _ in rows:
            by_style[style] = by_style.get(style, 0) + 1
        assert len(by_style) == N_STYLES
        assert set(by_style.values()) == {N_PER}


class TestExtract:

    def test_80_feature_rows_8_summary_rows(self, extracted):
        header, rows = read_rows(extracted / "features.csv")
        assert header == ["utterance_id", "style"] + list(CANONICAL_FEATURES)
        assert len(rows) == N_UTTS
        sheader, srows = read_rows(extracted / "corpus_summary.csv")
        assert sheader == ["style", "duration_min", "trimmed_min", "utterances"]
        assert len(srows) == N_STYLES

    def test_trimmed_at_most_duration(self, extracted):
        _, srows = read_rows(extracted / "corpus_summary.csv")
        for style, duration, trimmed, count in srows:
            assert 0.0 < float(trimmed) <= float(duration)
            assert float(count) == N_PER

    def test_rerun_byte_identical(self, corpus, extracted, tmp_path):
        rc = main(["extract", "--manifest", str(corpus / "manifest.csv"),
                   "--out-dir", str(tmp_path)])
        assert rc == 0
        assert file_bytes(tmp_path / "features.csv") == \
            file_bytes(extracted / "features.csv")
        assert file_bytes(tmp_path / "corpus_summary.csv") == \
            file_bytes(extracted / "corpus_summary.csv")

    def broken_manifest(self, corpus, tmp_path, n_bad):
        """Copy of the corpus manifest with the first n_bad paths dangling."""
        _, rows = read_rows(corpus / "manifest.csv")
        path = tmp_path / "manifest.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["utterance_id", "style", "path"])
            for i, (utt, style, rel) in enumerate(rows):
                wav = f"gone_{i}.wav" if i < n_bad else str(corpus / rel)
                writer.writerow([utt, style, wav])
        return path

    def test_exit_2_when_over_ten_percent_unreadable(self, corpus, tmp_path,
                                                     capsys):
        manifest = self.broken_manifest(corpus, tmp_path, n_bad=9)
        rc = main(["extract", "--manifest", str(manifest),
                   "--out-dir", str(tmp_path / "out")])
        assert rc == 2
        err = capsys.readouterr().err
        assert err.count("unreadable:") >= 9

    def test_few_unreadable_still_succeeds(self, corpus, tmp_path):
        manifest = self.broken_manifest(corpus, tmp_path, n_bad=1)
        rc = main(["extract", "--manifest", str(manifest),
                   "--out-dir", str(tmp_path / "out")])
        assert rc == 0
        _, rows = read_rows(tmp_path / "out" / "features.csv")
        assert len(rows) == N_UTTS - 1

    def test_chunk_mode_splits_ids(self, corpus, tmp_path):
        _, rows = read_rows(corpus / "manifest.csv")
        manifest = tmp_path / "two.csv"
        with open(manifest, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["utterance_id", "style", "path"])
            for utt, style, rel in rows[:2]:
                writer.writerow([utt, style, str(corpus / rel)])
        rc = main(["extract", "--manifest", str(manifest),
                   "--out-dir", str(tmp_path / "out"), "--chunk", "0.2"])
        assert rc == 0
        _, frows = read_rows(tmp_path / "out" / "features.csv")
        assert len(frows) >= 2
        assert all("#" in r[0] for r in frows)


class TestEnvOverrides:

    def synth_embeddings(self, out_dir, *flags):
        rc = main(["synth", "--out-dir", str(out_dir), "--no-wavs",
                   "--n-styles", "4", "--n-per-style", "5", *flags])
        assert rc == 0
        return file_bytes(out_dir / "embeddings_style.csv")

    def test_env_fills_default_and_flag_wins(self, tmp_path, monkeypatch):
        flagged = self.synth_embeddings(tmp_path / "a", "--seed", "11")
        monkeypatch.setenv("LATENTPROBE_SEED", "11")
        assert self.synth_embeddings(tmp_path / "b") == flagged
        monkeypatch.setenv("LATENTPROBE_SEED", "1")
        assert self.synth_embeddings(tmp_path / "c") != flagged
        # explicit flag beats the environment value
        assert self.synth_embeddings(tmp_path / "d", "--seed", "11") == flagged

    def test_unparseable_env_value_exits_1(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("LATENTPROBE_MI_K", "three")
        rc = main(["synth", "--out-dir", str(tmp_path / "x")])
        assert rc == 1
        assert "LATENTPROBE_MI_K" in capsys.readouterr().err


class TestAnalyze:

    def test_all_named_outputs_exist(self, analyzed):
        names = {"mi_table.csv", "apcc_table.csv", "apcc_avg.csv",
                 "gradients.csv", "fig_gradients_all.svg", "report.md",
                 "provenance.json"}
        for task in TASKS:
            for reducer in ("pca", "tsne", "umap"):
                names.add(f"reduced_{task}_{reducer}.csv")
                names.add(f"reduced_{task}_{reducer}.json")
                names.add(f"fig_gradients_{task}_{reducer}.svg")
        on_disk = set(os.listdir(analyzed))
        assert names <= on_disk

    def test_table_shapes(self, analyzed):
        mi = NamedTable.from_csv(analyzed / "mi_table.csv")
        assert mi.values.shape == (8, 3)
        assert mi.row_labels == [str(d) for d in range(8)]
        assert mi.col_labels == TASKS
        apcc = NamedTable.from_csv(analyzed / "apcc_table.csv")
        assert apcc.values.shape == (len(CANONICAL_FEATURES), 3)
        assert apcc.row_labels == list(CANONICAL_FEATURES)
        avg = NamedTable.from_csv(analyzed / "apcc_avg.csv")
        assert avg.values.shape == (3, 3)
        assert avg.row_labels == TASKS
        assert avg.col_labels == ["pca", "tsne", "umap"]
        finite = avg.values[np.isfinite(avg.values)]
        assert len(finite) > 0
        assert np.all((finite >= 0.0) & (finite <= 1.0))

    def test_report_md_embeds_summary_and_csv_numbers(self, analyzed):
        md = (analyzed / "report.md").read_text()
        assert "## Corpus summary" in md
        assert "## Mutual information with style (bits)" in md
        mi = NamedTable.from_csv(analyzed / "mi_table.csv")
        for v in mi.values.ravel():
            if np.isfinite(v):
                assert f"{v:.2f}" in md

    def test_provenance_records_inputs_and_sizes(self, analyzed):
        prov = json.loads((analyzed / "provenance.json").read_text())
        assert prov["seed"] == 0
        assert prov["reducers"] == ["pca", "tsne", "umap"]
        assert prov["tasks"] == {task: N_UTTS for task in TASKS}
        assert prov["inputs"]["features"].endswith("features.csv")
        assert set(prov["inputs"]["embeddings"]) == set(TASKS)
        assert prov["selected_features"]

    def test_gradients_csv_layout(self, analyzed):
        prov = json.loads((analyzed / "provenance.json").read_text())
        selected = set(prov["selected_features"])
        header, rows = read_rows(analyzed / "gradients.csv")
        assert header == ["task", "reducer", "feature",
                          "gx", "gy", "dir_x", "dir_y", "apcc"]
        groups = {(r[0], r[1]) for r in rows}
        assert groups == {(t, r) for t in TASKS
                          for r in ("pca", "tsne", "umap")}
        assert {r[2] for r in rows} <= selected
        for r in rows:
            assert 0.0 <= float(r[7]) <= 1.0
            norm = np.hypot(float(r[5]), float(r[6]))
            assert norm == pytest.approx(1.0, abs=1e-9)

    def test_reduced_sidecar_provenance(self, analyzed):
        meta = json.loads((analyzed / "reduced_style_tsne.json").read_text())
        assert meta["reducer"] == "tsne"
        assert meta["seed"] == 0
        assert meta["params"]["perplexity"] == 10.0
        header, rows = read_rows(analyzed / "reduced_style_tsne.csv")
        assert header == ["utterance_id", "style", "x", "y"]
        assert len(rows) == N_UTTS

    def test_single_reducer_gives_one_column(self, corpus, extracted, tmp_path):
        rc = main(analyze_args(extracted, corpus, tmp_path,
                               tasks=["style"], reducers="pca"))
        assert rc == 0
        avg = NamedTable.from_csv(tmp_path / "apcc_avg.csv")
        assert avg.col_labels == ["pca"]
        assert avg.row_labels == ["style"]
        on_disk = os.listdir(tmp_path)
        assert not any("tsne" in f or "umap" in f for f in on_disk)

    def test_rerun_bytes_identical(self, corpus, extracted, tmp_path):
        args = lambda out: analyze_args(extracted, corpus, out, tasks=["style"])
        assert main(args(tmp_path / "r1")) == 0
        assert main(args(tmp_path / "r2")) == 0
        names = sorted(os.listdir(tmp_path / "r1"))
        assert names == sorted(os.listdir(tmp_path / "r2"))
        for name in names:
            assert file_bytes(tmp_path / "r1" / name) == \
                file_bytes(tmp_path / "r2" / name), name


class TestStandaloneStages:

    def test_reduce_gradients_render_chain(self, corpus, extracted, tmp_path):
        rc = main(["reduce",
                   "--embeddings", f"style={corpus / 'embeddings_style.csv'}",
                   "--reducers", "pca", "--out-dir", str(tmp_path)])
        assert rc == 0
        reduced = tmp_path / "reduced_style_pca.csv"
        assert reduced.is_file() and reduced.with_suffix(".json").is_file()
        _, rows = read_rows(reduced)
        assert len(rows) == N_UTTS

        gradients = tmp_path / "gradients.csv"
        rc = main(["gradients", "--reduced", str(reduced),
                   "--features", str(extracted / "features.csv"),
                   "--select", "F0semitone_mean,alphaRatioV_mean",
                   "--task", "style", "--out", str(gradients)])
        assert rc == 0
        header, grows = read_rows(gradients)
        assert [r[2] for r in grows] == ["F0semitone_mean", "alphaRatioV_mean"]
        assert all(r[1] == "pca" for r in grows)

        fig = tmp_path / "fig.svg"
        rc = main(["render", "--reduced", str(reduced),
                   "--gradients", str(gradients), "--task", "style",
                   "--title", "chain figure", "--out", str(fig)])
        assert rc == 0
        doc = fig.read_text()
        assert doc.count("<circle") == N_UTTS + N_STYLES
        assert ">F0semitone_mean</text>" in doc
        assert "reducer=pca" in doc
        assert "chain figure" in doc

    def test_render_without_gradients_is_scatter_only(self, corpus, tmp_path):
        rc = main(["reduce",
                   "--embeddings", f"style={corpus / 'embeddings_style.csv'}",
                   "--reducers", "pca", "--out-dir", str(tmp_path)])
        assert rc == 0
        fig = tmp_path / "plain.svg"
        rc = main(["render",
                   "--reduced", str(tmp_path / "reduced_style_pca.csv"),
                   "--out", str(fig)])
        assert rc == 0
        doc = fig.read_text()
        assert doc.count("<circle") == N_UTTS + N_STYLES
        assert re.search(r'<path d="M', doc) is None


class TestExitCodes:

    def test_unknown_reducer_is_validation_error(self, corpus, extracted,
                                                 tmp_path, capsys):
        rc = main(["analyze", "--features", str(extracted / "features.csv"),
                   "--embeddings",
                   f"style={corpus / 'embeddings_style.csv'}",
                   "--reducers", "sammon", "--out-dir", str(tmp_path)])
        assert rc == 1
        assert "sammon" in capsys.readouterr().err

    def test_missing_manifest_is_io_error(self, tmp_path, capsys):
        rc = main(["extract", "--manifest", str(tmp_path / "none.csv"),
                   "--out-dir", str(tmp_path)])
        assert rc == 2
        capsys.readouterr()

    def test_missing_features_is_io_error(self, corpus, tmp_path, capsys):
        rc = main(["analyze", "--features", str(tmp_path / "none.csv"),
                   "--embeddings",
                   f"style={corpus / 'embeddings_style.csv'}",
                   "--out-dir", str(tmp_path)])
        assert rc == 2
        capsys.readouterr()

    def test_unknown_selected_feature_is_validation_error(
            self, corpus, extracted, tmp_path, capsys):
        rc = main(["reduce",
                   "--embeddings", f"style={corpus / 'embeddings_style.csv'}",
                   "--reducers", "pca", "--out-dir", str(tmp_path)])
        assert rc == 0
        rc = main(["gradients",
                   "--reduced", str(tmp_path / "reduced_style_pca.csv"),
                   "--features", str(extracted / "features.csv"),
                   "--select", "loudness_mean", "--out",
                   str(tmp_path / "g.csv")])
        assert rc == 1
        capsys.readouterr()

    def test_bad_embeddings_pair_is_validation_error(self, extracted,
                                                     tmp_path, capsys):
        rc = main(["analyze", "--features", str(extracted / "features.csv"),
                   "--embeddings", "style", "--out-dir", str(tmp_path)])
        assert rc == 1
        assert "task=path" in capsys.readouterr().err

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert capsys.readouterr().out.strip()
