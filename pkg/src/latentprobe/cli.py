"""Command-line interface.

Subcommands mirror the pipeline stages (synth, extract, analyze, reduce,
gradients, render) so every stage can also run standalone on intermediate
files. Each flag can be preset through an environment variable named
LATENTPROBE_<FLAG> (dashes as underscores); explicit flags win over the
environment, which wins over built-in defaults.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .audio import AudioClip, chunk_nonsilent, load_wav, trim_silence
from .dimred import REDUCERS, run_reducer
from .embeddings import load_embeddings
from .errors import FormatError, LatentProbeError, NumericalError, ParameterError
from .features import CANONICAL_FEATURES, FeatureTable, extract_features
from .gradients import GradientArrow, GradientField
from .report import (
    read_reduced_csv,
    run_analysis,
    write_gradients_csv,
    write_reduced_csv,
    write_report,
)
from .stats import apcc_null_quantile
from .svg import render_svg
from .synthgen import SynthSpec, synth_corpus
from .tables import NamedTable

log = logging.getLogger(__name__)

ENV_PREFIX = "LATENTPROBE_"


def _env_name(flag: str) -> str:
    return ENV_PREFIX + flag.lstrip("-").upper().replace("-", "_")


def _add(parser: argparse.ArgumentParser, flag: str, *, required: bool = False,
         default=None, type=str, action=None, help: str = "") -> None:
    """add_argument with an environment-variable fallback for the default."""
    env = _env_name(flag)
    raw = os.environ.get(env)
    if raw is not None:
        if action == "append":
            default = [v for v in raw.split(",") if v]
        elif action == "store_true":
            default = raw.strip().lower() in ("1", "true", "yes", "on")
        else:
            try:
                default = type(raw)
            except ValueError as exc:
                raise ParameterError(f"bad value for {env}: {raw!r}") from exc
        required = False
    kwargs: dict = {"default": default, "required": required, "help": help or flag}
    if action:
        kwargs["action"] = action
    else:
        kwargs["type"] = type
    parser.add_argument(flag, **kwargs)


def _parse_embedding_args(pairs: list[str] | None) -> dict[str, str]:
    if not pairs:
        raise ParameterError(
            "at least one --embeddings task=path argument is required"
        )
    out: dict[str, str] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ParameterError(
                f"--embeddings expects task=path, got {pair!r}"
            )
        task, path = pair.split("=", 1)
        if not task or not path:
            raise ParameterError(f"--embeddings expects task=path, got {pair!r}")
        if task in out:
            raise ParameterError(f"duplicate task name {task!r}")
        out[task] = path
    return out


def _parse_reducers(value: str) -> tuple[str, ...]:
    names = tuple(v.strip() for v in value.split(",") if v.strip())
    for name in names:
        if name not in REDUCERS:
            raise ParameterError(
                f"unknown reducer {name!r}; choose from {','.join(REDUCERS)}"
            )
    if not names:
        raise ParameterError("--reducers must name at least one reducer")
    return names


def _read_manifest(path: str) -> list[tuple[str, str, str]]:
    """Rows of (utterance_id, style, absolute wav path)."""
    base = os.path.dirname(os.path.abspath(path))
    rows: list[tuple[str, str, str]] = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot open manifest {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["utterance_id", "style", "path"]:
            raise FormatError(f"{path}: expected header utterance_id,style,path")
        for ln, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 3:
                raise FormatError(f"{path}:{ln}: expected 3 cells")
            wav = row[2]
            if not os.path.isabs(wav):
                wav = os.path.join(base, wav)
            rows.append((row[0], row[1], wav))
    if not rows:
        raise FormatError(f"{path}: manifest has no rows")
    return rows


def cmd_synth(args: argparse.Namespace) -> int:
    spec_kwargs: dict = {}
    if args.spec:
        spec_kwargs = _load_spec_file(args.spec)
    for key, val in (
        ("n_styles", args.n_styles), ("n_per_style", args.n_per_style),
        ("latent_dim", args.latent_dim), ("seed", args.seed),
    ):
        if val is not None:
            spec_kwargs[key] = val
    spec = SynthSpec(**spec_kwargs)
    paths = synth_corpus(spec, args.out_dir, write_wavs=not args.no_wavs)
    for name in sorted(paths):
        print(f"{name}: {paths[name]}")
    return 0


def _load_spec_file(path: str) -> dict:
    if path.endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    if not isinstance(data, dict):
        raise FormatError(f"{path}: spec file must hold a table of fields")
    for key in ("signal_dims", "tasks", "style_names", "duration_range"):
        if key in data and isinstance(data[key], list):
            data[key] = tuple(data[key])
    return data


def cmd_extract(args: argparse.Namespace) -> int:
    rows = _read_manifest(args.manifest)
    os.makedirs(args.out_dir, exist_ok=True)
    feature_rows: list[tuple[str, str, object]] = []
    failures: list[tuple[str, str]] = []
    per_style: dict[str, dict[str, float]] = {}
    for utt_id, style, wav_path in rows:
        acc = per_style.setdefault(
            style, {"duration": 0.0, "trimmed": 0.0, "utterances": 0.0}
        )
        try:
            clip = load_wav(wav_path)
            clip = AudioClip(samples=clip.samples, sample_rate=clip.sample_rate,
                             id=utt_id)
        except (LatentProbeError, OSError) as exc:
            failures.append((wav_path, str(exc)))
            continue
        acc["duration"] += clip.duration
        acc["utterances"] += 1
        try:
            trimmed = trim_silence(clip, threshold_db=args.trim_db)
            acc["trimmed"] += trimmed.duration
        except LatentProbeError:
            pass  # silent clip: trimmed duration contributes zero
        if args.chunk is not None:
            for piece in chunk_nonsilent(clip, chunk_length=args.chunk,
                                         threshold_db=args.trim_db):
                feature_rows.append(
                    (piece.id, style, extract_features(piece, trim_db=args.trim_db))
                )
        else:
            feature_rows.append(
                (utt_id, style, extract_features(clip, trim_db=args.trim_db))
            )
    for path, why in failures:
        print(f"unreadable: {path}: {why}", file=sys.stderr)

    table = FeatureTable.from_rows(feature_rows, names=CANONICAL_FEATURES)
    features_path = os.path.join(args.out_dir, "features.csv")
    table.to_csv(features_path)

    styles = sorted(per_style)
    summary = NamedTable(
        row_labels=styles,
        col_labels=["duration_min", "trimmed_min", "utterances"],
        values=np.array([
            [per_style[s]["duration"] / 60.0, per_style[s]["trimmed"] / 60.0,
             per_style[s]["utterances"]] for s in styles
        ]) if styles else np.empty((0, 3)),
        corner="style",
    )
    summary_path = os.path.join(args.out_dir, "corpus_summary.csv")
    summary.to_csv(summary_path)
    print(summary.to_markdown())
    print(f"features: {features_path}")
    print(f"summary: {summary_path}")

    if failures and len(failures) > 0.10 * len(rows):
        print(
            f"{len(failures)} of {len(rows)} wav files unreadable",
            file=sys.stderr,
        )
        return 2
    return 0


def _load_feature_table(path: str) -> FeatureTable:
    try:
        return FeatureTable.from_csv(path)
    except OSError as exc:
        raise FormatError(f"cannot open features {path}: {exc}") from exc


def cmd_analyze(args: argparse.Namespace) -> int:
    feats = _load_feature_table(args.features)
    emb_paths = _parse_embedding_args(args.embeddings)
    embs = {task: load_embeddings(path, task) for task, path in emb_paths.items()}
    reducers = _parse_reducers(args.reducers)
    report = run_analysis(
        feats, embs, mi_k=args.mi_k, apcc_threshold=args.apcc_threshold,
        reducers=reducers, perplexity=args.perplexity,
        n_neighbors=args.n_neighbors, min_dist=args.min_dist, seed=args.seed,
    )
    if args.summary:
        report.summary = NamedTable.from_csv(args.summary)
    report.provenance["inputs"] = {
        "features": os.path.abspath(args.features),
        "embeddings": {t: os.path.abspath(p) for t, p in emb_paths.items()},
    }
    report.provenance["threads"] = args.threads
    written = write_report(report, args.out_dir)
    for path in written:
        print(path)
    return 0


def cmd_reduce(args: argparse.Namespace) -> int:
    emb_paths = _parse_embedding_args(args.embeddings)
    reducers = _parse_reducers(args.reducers)
    os.makedirs(args.out_dir, exist_ok=True)
    for task, path in emb_paths.items():
        emb = load_embeddings(path, task)
        ids = emb.ids()
        X = emb.matrix(ids)
        styles = [emb.labels[u] for u in ids]
        for reducer in reducers:
            red = run_reducer(
                reducer, X, seed=args.seed, perplexity=args.perplexity,
                n_neighbors=args.n_neighbors, min_dist=args.min_dist, ids=ids,
            )
            out = os.path.join(args.out_dir, f"reduced_{task}_{reducer}.csv")
            write_reduced_csv(red, styles, out)
            print(out)
    return 0


def cmd_gradients(args: argparse.Namespace) -> int:
    from .gradients import gradient_field

    red, _styles = read_reduced_csv(args.reduced)
    feats = _load_feature_table(args.features)
    if args.select:
        selected = [s.strip() for s in args.select.split(",") if s.strip()]
    else:
        selected = list(feats.names)
    fld = gradient_field(red, feats, selected, task=args.task)
    write_gradients_csv({(args.task, red.reducer): fld}, args.out)
    print(args.out)
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    red, styles = read_reduced_csv(args.reduced)
    fld: GradientField | None = None
    if args.gradients:
        arrows = []
        null_q = apcc_null_quantile(len(red.coords), 2, 0.99)
        with open(args.gradients, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                if row.get("reducer") != red.reducer:
                    continue
                if args.task and row.get("task") != args.task:
                    continue
                a = float(row["apcc"])
                arrows.append(GradientArrow(
                    feature=row["feature"],
                    gradient=np.array([float(row["gx"]), float(row["gy"])]),
                    direction=np.array([float(row["dir_x"]), float(row["dir_y"])]),
                    apcc=a,
                    low_confidence=a < null_q,
                ))
        fld = GradientField(task=args.task, reducer=red.reducer, arrows=arrows)
    doc = render_svg(red, fld, styles, title=args.title)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(doc)
    print(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentprobe",
        description="Quantify and visualize how latent speech embeddings "
                    "relate to interpretable acoustic features.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    _add(p, "--out-dir", required=True, help="corpus output directory")
    _add(p, "--spec", help="SynthSpec overrides as TOML or JSON")
    _add(p, "--seed", type=int, default=None)
    _add(p, "--n-styles", type=int, default=None)
    _add(p, "--n-per-style", type=int, default=None)
    _add(p, "--latent-dim", type=int, default=None)
    _add(p, "--no-wavs", action="store_true", default=False,
         help="skip waveform rendering")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="extract acoustic features from wavs")
    _add(p, "--manifest", required=True, help="utterance_id,style,path CSV")
    _add(p, "--out-dir", required=True)
    _add(p, "--trim-db", type=float, default=40.0,
         help="silence gate below peak, dB")
    _add(p, "--chunk", type=float, default=None,
         help="also split non-silent audio into chunks of this many seconds")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("analyze", help="run the full analysis pipeline")
    _add(p, "--features", required=True, help="features.csv from extract")
    _add(p, "--embeddings", action="append", default=None,
         help="task=path, repeatable")
    _add(p, "--summary", help="corpus_summary.csv to embed in the report")
    _add(p, "--mi-k", type=int, default=3)
    _add(p, "--apcc-threshold", type=float, default=0.5)
    _add(p, "--reducers", default="pca,tsne,umap")
    _add(p, "--perplexity", type=float, default=30.0)
    _add(p, "--n-neighbors", type=int, default=15)
    _add(p, "--min-dist", type=float, default=0.1)
    _add(p, "--seed", type=int, default=0)
    _add(p, "--threads", type=int, default=None)
    _add(p, "--out-dir", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("reduce", help="reduce embeddings to 2-D")
    _add(p, "--embeddings", action="append", default=None,
         help="task=path, repeatable")
    _add(p, "--reducers", default="pca,tsne,umap")
    _add(p, "--perplexity", type=float, default=30.0)
    _add(p, "--n-neighbors", type=int, default=15)
    _add(p, "--min-dist", type=float, default=0.1)
    _add(p, "--seed", type=int, default=0)
    _add(p, "--threads", type=int, default=None)
    _add(p, "--out-dir", required=True)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("gradients", help="fit feature gradients on 2-D coords")
    _add(p, "--reduced", required=True, help="reduced_*.csv file")
    _add(p, "--features", required=True)
    _add(p, "--select", help="comma-separated feature names (default: all)")
    _add(p, "--task", default="")
    _add(p, "--out", default="gradients.csv")
    p.set_defaults(func=cmd_gradients)

    p = sub.add_parser("render", help="draw the scatter + gradients SVG")
    _add(p, "--reduced", required=True)
    _add(p, "--gradients", help="gradients.csv to overlay")
    _add(p, "--task", default="")
    _add(p, "--title", default=None)
    _add(p, "--out", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get(ENV_PREFIX + "LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        threads = getattr(args, "threads", None)
        if threads is not None:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=threads):
                return args.func(args)
        return args.func(args)
    except LatentProbeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except np.linalg.LinAlgError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return NumericalError.exit_code


if __name__ == "__main__":
    sys.exit(main())
