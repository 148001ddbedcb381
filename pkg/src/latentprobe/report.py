"""Pipeline orchestration and report writing.

Runs feature/embedding joins through the MI, probe, reduction, and gradient
stages, then writes every artifact (CSV tables, markdown report, SVG
figures, provenance) under one output directory with fixed names.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .dimred import REDUCERS, Reduced2D, run_reducer
from .embeddings import EmbeddingSet, JoinedDataset, join
from .errors import ParameterError
from .features import FeatureTable
from .gradients import GradientField, apcc_average_table, gradient_field
from .stats import (
    DEFAULT_APCC_THRESHOLD,
    DEFAULT_MI_K,
    apcc_table,
    mi_table,
    select_features,
)
from .svg import contact_sheet, render_svg
from .tables import NamedTable

log = logging.getLogger(__name__)


@dataclass
class AnalysisReport:
    """All analysis products plus the provenance needed to regenerate them."""

    mi: NamedTable
    apcc: NamedTable
    selected: list[str]
    apcc_avg: NamedTable | None
    fields: dict[tuple[str, str], GradientField]
    reduced: dict[tuple[str, str], Reduced2D]
    datasets: dict[str, JoinedDataset]
    summary: NamedTable | None = None
    provenance: dict = field(default_factory=dict)


def run_analysis(feats: FeatureTable, embs: dict[str, EmbeddingSet],
                 mi_k: int = DEFAULT_MI_K,
                 apcc_threshold: float = DEFAULT_APCC_THRESHOLD,
                 reducers: tuple[str, ...] = REDUCERS,
                 perplexity: float = 30.0, n_neighbors: int = 15,
                 min_dist: float = 0.1, seed: int = 0) -> AnalysisReport:
    """Full analysis pass over one feature table and one or more tasks.

    Stages: join, MI table, APCC probe table, threshold selection, 2-D
    reduction per (task, reducer), per-feature gradients, and the mean-APCC
    summary table. With an empty selection the gradient stage is skipped.
    """
    if not embs:
        raise ParameterError("need at least one embedding set")
    for r in reducers:
        if r not in REDUCERS:
            raise ParameterError(f"unknown reducer {r!r}; choose from {REDUCERS}")
    datasets = {task: join(emb, feats) for task, emb in embs.items()}

    mi = mi_table(datasets, k=mi_k)
    probes = apcc_table(datasets)
    selected = select_features(probes, threshold=apcc_threshold)

    reduced: dict[tuple[str, str], Reduced2D] = {}
    for task, ds in datasets.items():
        for reducer in reducers:
            log.info("reducing task=%s with %s (N=%d)", task, reducer, len(ds))
            reduced[(task, reducer)] = run_reducer(
                reducer, ds.embeddings, seed=seed, perplexity=perplexity,
                n_neighbors=n_neighbors, min_dist=min_dist,
                ids=list(ds.utterance_ids),
            )

    fields: dict[tuple[str, str], GradientField] = {}
    apcc_avg: NamedTable | None = None
    if selected:
        for (task, reducer), red in reduced.items():
            ds = datasets[task]
            ftab = FeatureTable(
                ids=list(ds.utterance_ids), styles=list(ds.styles),
                names=list(ds.feature_names), values=ds.features,
            )
            fields[(task, reducer)] = gradient_field(red, ftab, selected, task=task)
        apcc_avg = apcc_average_table(
            datasets, list(reducers), selected, reduced_cache=reduced,
            seed=seed, perplexity=perplexity, n_neighbors=n_neighbors,
            min_dist=min_dist,
        )
    else:
        log.warning("no features were selected; skipping the gradient stage")

    provenance = {
        "version": __version__,
        "seed": seed,
        "mi_k": mi_k,
        "apcc_threshold": apcc_threshold,
        "reducers": list(reducers),
        "perplexity": perplexity,
        "n_neighbors": n_neighbors,
        "min_dist": min_dist,
        "tasks": {task: len(ds) for task, ds in datasets.items()},
        "selected_features": selected,
    }
    return AnalysisReport(
        mi=mi, apcc=probes, selected=selected, apcc_avg=apcc_avg,
        fields=fields, reduced=reduced, datasets=datasets,
        provenance=provenance,
    )


def write_reduced_csv(red: Reduced2D, styles: list[str], path: str) -> None:
    """Coordinates as utterance_id,style,x,y plus a JSON provenance sidecar."""
    ids = red.ids if red.ids is not None else [str(i) for i in range(len(red.coords))]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["utterance_id", "style", "x", "y"])
        for i, u in enumerate(ids):
            writer.writerow([
                u, styles[i],
                repr(float(red.coords[i, 0])), repr(float(red.coords[i, 1])),
            ])
    sidecar = {
        "reducer": red.reducer,
        "seed": red.seed,
        "params": red.params,
    }
    with open(os.path.splitext(path)[0] + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_reduced_csv(path: str) -> tuple[Reduced2D, list[str]]:
    """Loads coordinates and the sidecar back into a Reduced2D + styles."""
    ids, styles, xs, ys = [], [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["utterance_id", "style", "x", "y"]:
            raise ParameterError(f"{path}: not a reduced-coordinates file")
        for row in reader:
            if not row:
                continue
            ids.append(row[0])
            styles.append(row[1])
            xs.append(float(row[2]))
            ys.append(float(row[3]))
    meta_path = os.path.splitext(path)[0] + ".json"
    reducer, seed, params = "unknown", 0, {}
    if os.path.exists(meta_path):
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
        reducer = meta.get("reducer", reducer)
        seed = int(meta.get("seed", 0))
        params = meta.get("params", {})
    red = Reduced2D(
        coords=np.column_stack([xs, ys]), reducer=reducer, seed=seed,
        params=params, ids=ids,
    )
    return red, styles


def write_gradients_csv(fields: dict[tuple[str, str], GradientField], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["task", "reducer", "feature",
                         "gx", "gy", "dir_x", "dir_y", "apcc"])
        for (task, reducer) in sorted(fields):
            for a in fields[(task, reducer)].arrows:
                writer.writerow([
                    task, reducer, a.feature,
                    repr(float(a.gradient[0])), repr(float(a.gradient[1])),
                    repr(float(a.direction[0])), repr(float(a.direction[1])),
                    repr(float(a.apcc)),
                ])


def write_report(report: AnalysisReport, out_dir: str) -> list[str]:
    """Writes every analysis artifact under out_dir; returns written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []

    def out(name: str) -> str:
        p = os.path.join(out_dir, name)
        written.append(p)
        return p

    report.mi.to_csv(out("mi_table.csv"))
    report.apcc.to_csv(out("apcc_table.csv"))
    if report.apcc_avg is not None:
        report.apcc_avg.to_csv(out("apcc_avg.csv"))

    panels = []
    for (task, reducer), red in sorted(report.reduced.items()):
        ds = report.datasets[task]
        write_reduced_csv(red, list(ds.styles), out(f"reduced_{task}_{reducer}.csv"))
        fld = report.fields.get((task, reducer))
        doc = render_svg(red, fld, list(ds.styles), title=f"{task} / {reducer}")
        with open(out(f"fig_gradients_{task}_{reducer}.svg"), "w",
                  encoding="utf-8") as fh:
            fh.write(doc)
        panels.append(doc)
    if panels:
        with open(out("fig_gradients_all.svg"), "w", encoding="utf-8") as fh:
            fh.write(contact_sheet(panels))

    if report.fields:
        write_gradients_csv(report.fields, out("gradients.csv"))

    md = ["# Latent-space analysis report", ""]
    if report.summary is not None:
        md += ["## Corpus summary", "", report.summary.to_markdown(), ""]
    md += ["## Mutual information with style (bits)", "",
           report.mi.to_markdown(), ""]
    md += ["## Hyperplane probe APCC per feature", "",
           report.apcc.to_markdown(), ""]
    thr = report.provenance.get("apcc_threshold", DEFAULT_APCC_THRESHOLD)
    md += [f"## Features with APCC > {thr:g} in every task", ""]
    if report.selected:
        md += [f"- {name}" for name in report.selected] + [""]
    else:
        md += ["(none)", ""]
    if report.apcc_avg is not None:
        md += ["## Mean 2-D probe APCC per (task, reducer)", "",
               report.apcc_avg.to_markdown(), ""]
    md += ["## Provenance", "", "```json",
           json.dumps(report.provenance, sort_keys=True, indent=2), "```", ""]
    with open(out("report.md"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(md))

    with open(out("provenance.json"), "w", encoding="utf-8") as fh:
        json.dump(report.provenance, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return written
