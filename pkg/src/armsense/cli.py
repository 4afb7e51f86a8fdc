"""Single entry point: serve | simulate | stats | select | train | evaluate | predict | export | run-all."""

from __future__ import annotations

import os

# Pin the BLAS pool before numpy loads so repeated CLI runs reduce in the
# same order; the matrices here are too small for threading to help anyway.
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from armsense import __version__
from armsense.dataset import (
    DatasetError,
    recommended_window,
    save_windows,
    split_holdout,
    stats_by_side,
    window_sessions,
)
from armsense.features import (
    DEFAULT_ANCHOR,
    DEFAULT_THRESHOLD,
    FeatureSelectError,
    format_report_table,
    select_features,
    selection_from_json,
    selection_to_json,
    union_features,
)
from armsense.frames import (
    CHANNEL_NAMES,
    CsvFormatError,
    HandSide,
    MotionType,
    frame_to_json_dict,
    frames_to_csv,
    group_frames_into_sessions,
    parse_csv,
)
from armsense.lstm import (
    LstmConfig,
    ModelFormatError,
    TrainingError,
    evaluate,
    load_model,
    predict,
    save_model,
    train,
)
from armsense.simulate import synth_corpus

log = logging.getLogger("armsense")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_SCHEMA = 4

DEFAULT_PORT = int(os.environ.get("ARMSENSE_PORT", "8080"))
DEFAULT_DATA_DIR = os.environ.get("ARMSENSE_DATA_DIR", "./armsense-data")


class CliError(Exception):
    def __init__(self, message: str, exit_code: int = EXIT_RUNTIME):
        super().__init__(message)
        self.exit_code = exit_code


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out_dir: Path, command: str, flags: dict, inputs: list[Path], outputs: list[Path]) -> None:
    manifest = {
        "tool": "armsense",
        "version": __version__,
        "command": command,
        "flags": {k: flags[k] for k in sorted(flags)},
        "inputs": {p.name: _sha256(p) for p in sorted(inputs)},
        "outputs": {p.name: _sha256(p) for p in sorted(outputs)},
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load_frames(path: str):
    csv_path = Path(path)
    if not csv_path.exists():
        raise CliError(f"input file not found: {path}", EXIT_MISSING_FILE)
    try:
        return parse_csv(csv_path.read_text(encoding="utf-8"))
    except CsvFormatError as exc:
        raise CliError(f"bad frame CSV {path}: {exc}", EXIT_SCHEMA) from exc


def _parse_sides(value: str) -> tuple[HandSide, ...]:
    if value == "both":
        return (HandSide.LEFT, HandSide.RIGHT)
    return (HandSide.from_label(value),)


def _resolve_features(source: str) -> tuple[str, ...]:
    """A selection report path or an explicit comma-separated channel list."""
    path = Path(source)
    if path.exists():
        try:
            _, union = selection_from_json(path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise CliError(f"bad feature report {source}: {exc}", EXIT_SCHEMA) from exc
        return union
    names = tuple(name.strip() for name in source.split(",") if name.strip())
    if not names:
        raise CliError("empty feature list", EXIT_USAGE)
    unknown = [n for n in names if n not in CHANNEL_NAMES]
    if unknown:
        raise CliError(f"unknown channels: {', '.join(unknown)}", EXIT_SCHEMA)
    return names


# -- subcommand bodies --------------------------------------------------------


def cmd_serve(args) -> int:
    from armsense.server import serve

    serve(args.data_dir, port=args.port, host=args.host)
    return EXIT_OK


def _post_corpus(server: str, sessions) -> tuple[int, int]:
    import httpx

    posted_sessions = 0
    posted_frames = 0
    with httpx.Client(base_url=server, timeout=30.0) as client:
        for session in sessions:
            resp = client.post(
                "/api/v1/sessions",
                json={
                    "respondent": session.respondent,
                    "motion_type": session.motion_type.label,
                    "side": session.side.value,
                },
            )
            if resp.status_code != 201:
                raise CliError(f"session create failed: {resp.status_code} {resp.text}")
            session_id = resp.json()["session_id"]
            for seq, start in enumerate(range(0, len(session.frames), 7)):
                batch = session.frames[start : start + 7]
                resp = client.post(
                    f"/api/v1/sessions/{session_id}/frames",
                    json={"batch_seq": seq, "frames": [frame_to_json_dict(f) for f in batch]},
                )
                if resp.status_code != 202:
                    raise CliError(f"frame sync failed: {resp.status_code} {resp.text}")
                posted_frames += resp.json()["accepted"]
            resp = client.post(f"/api/v1/sessions/{session_id}/finish")
            if resp.status_code != 200:
                raise CliError(f"finish failed: {resp.status_code} {resp.text}")
            posted_sessions += 1
    return posted_sessions, posted_frames


def cmd_simulate(args) -> int:
    sessions = synth_corpus(args.respondents, _parse_sides(args.sides), args.seed)
    total_frames = sum(len(s.frames) for s in sessions)
    if args.server:
        posted_sessions, posted_frames = _post_corpus(args.server, sessions)
        print(f"posted {posted_sessions} sessions ({posted_frames} frames) to {args.server}")
        return EXIT_OK
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        for chunk in frames_to_csv(f for s in sessions for f in s.frames):
            fh.write(chunk)
    print(f"wrote {len(sessions)} sessions ({total_frames} frames) to {out}")
    if args.out_dir:
        _write_manifest(Path(args.out_dir), "simulate", vars_of(args), [], [out])
    return EXIT_OK


def _print_stats(per_side: dict) -> None:
    for side, s in per_side.items():
        rows = [
            ("number of total rows", float(s.total_rows)),
            (f"avg rows per student ({s.students} students)", s.rows_per_student),
            (f"avg rows per student per motion ({s.motions} motions)", s.rows_per_student_per_motion),
            (f"avg seconds per student per motion (~{s.rows_per_second:.0f} rows/s)", s.seconds_per_student_per_motion),
            (f"avg seconds per repetition ({s.reps_per_motion:.0f} reps/motion)", s.seconds_per_repetition),
        ]
        print(f"side={side.value}")
        for label, value in rows:
            print(f"  {label:52s} {value:>10.2f}  (rounded {round(value)})")
    window = recommended_window(per_side)
    print(f"recommended window length: {window} (training default rounds to 150)")


def cmd_stats(args) -> int:
    frames = _load_frames(args.csv)
    per_side = stats_by_side(frames, students=args.students, motions=args.motions)
    _print_stats(per_side)
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        doc = {
            side.value: {
                "total_rows": s.total_rows,
                "students": s.students,
                "motions": s.motions,
                "rows_per_student": s.rows_per_student,
                "rows_per_student_per_motion": s.rows_per_student_per_motion,
                "seconds_per_student_per_motion": s.seconds_per_student_per_motion,
                "seconds_per_repetition": s.seconds_per_repetition,
            }
            for side, s in per_side.items()
        }
        doc["recommended_window"] = recommended_window(per_side)
        stats_path = out_dir / "stats.json"
        stats_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        _write_manifest(out_dir, "stats", vars_of(args), [Path(args.csv)], [stats_path])
    return EXIT_OK


def _select_all_sides(frames, anchor: str, threshold: float):
    sides_present = sorted({f.side for f in frames}, key=lambda s: s.value)
    if not sides_present:
        raise CliError("no frames in input", EXIT_SCHEMA)
    reports = {side: select_features(frames, side, anchor, threshold) for side in sides_present}
    if len(reports) == 2:
        union = union_features(reports[HandSide.LEFT], reports[HandSide.RIGHT])
    else:
        union = next(iter(reports.values())).selected
    return reports, union


def cmd_select(args) -> int:
    frames = _load_frames(args.csv)
    reports, union = _select_all_sides(frames, args.anchor, args.threshold)
    for report in reports.values():
        print(format_report_table(report))
    print(f"union ({len(union)}): {', '.join(union)}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(selection_to_json(reports, union))
    if args.out_dir:
        _write_manifest(Path(args.out_dir), "select", vars_of(args), [Path(args.csv)], [out])
    return EXIT_OK


def _train_one_side(frames, side: HandSide, features, args):
    sessions = [s for s in group_frames_into_sessions(frames) if s.side is side]
    if not sessions:
        raise CliError(f"no sessions for side {side.value}", EXIT_SCHEMA)
    windows = window_sessions(sessions, features, length=args.window, stride=args.stride or args.window)
    if not windows:
        raise CliError(
            f"no windows of length {args.window}; sessions are too short", EXIT_SCHEMA
        )
    split = split_holdout(windows, args.ratio, args.seed, feature_names=features)
    config = LstmConfig(
        features=len(features),
        window=args.window,
        layers=args.layers,
        hidden=args.hidden,
        classes=9,
        epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.learning_rate,
        clip_norm=args.clip_norm,
        seed=args.seed,
    )
    model, history = train(split, config)
    return model, history, split


def cmd_train(args) -> int:
    frames = _load_frames(args.csv)
    features = _resolve_features(args.features)
    side = HandSide.from_label(args.side)
    model, history, split = _train_one_side(frames, side, features, args)

    model_path = Path(args.model_out)
    model_path.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, model_path)
    history_path = Path(args.history_out)
    history_path.write_text(history.to_csv())
    if args.dump_dataset:
        save_windows(args.dump_dataset, split.train + split.test, features, args.seed)
    final = history.final
    print(
        f"side={side.value} train={len(split.train)} test={len(split.test)} "
        f"epochs={args.epochs} final_test_acc={final.test_acc:.4f}"
    )
    print(f"model -> {model_path}")
    print(f"history -> {history_path}")
    if args.out_dir:
        _write_manifest(
            Path(args.out_dir), "train", vars_of(args), [Path(args.csv)], [model_path, history_path]
        )
    return EXIT_OK


def _print_eval(result) -> None:
    print(f"accuracy: {result.accuracy:.4f}")
    print("class                        precision  recall  support")
    for motion in MotionType:
        k = motion.index
        print(
            f"  {motion.label:26s} {result.precision[k]:.3f}      {result.recall[k]:.3f}   {result.support[k]}"
        )
    print("confusion matrix (rows = true, columns = predicted):")
    for row in result.confusion:
        print("  " + " ".join(f"{v:4d}" for v in row))


def cmd_evaluate(args) -> int:
    model = _load_model_checked(args.model)
    frames = _load_frames(args.csv)
    sessions = group_frames_into_sessions(frames)
    if args.side:
        side = HandSide.from_label(args.side)
        sessions = [s for s in sessions if s.side is side]
    windows = window_sessions(sessions, model.feature_names, length=model.config.window)
    if not windows:
        raise CliError("no windows to evaluate", EXIT_SCHEMA)
    result = evaluate(model, windows)
    _print_eval(result)
    return EXIT_OK


def _load_model_checked(path: str):
    model_path = Path(path)
    if not model_path.exists():
        raise CliError(f"model file not found: {path}", EXIT_MISSING_FILE)
    try:
        return load_model(model_path)
    except ModelFormatError as exc:
        raise CliError(f"bad model file {path}: {exc}", EXIT_SCHEMA) from exc


def cmd_predict(args) -> int:
    model = _load_model_checked(args.model)
    frames = _load_frames(args.window_csv)
    if len(frames) < model.config.window:
        raise CliError(
            f"need at least {model.config.window} frames, got {len(frames)}", EXIT_SCHEMA
        )
    columns = [CHANNEL_NAMES.index(name) for name in model.feature_names]
    matrix = np.array([f.channels() for f in frames[: model.config.window]], dtype=np.float64)[:, columns]
    motion, probability = predict(model, matrix)
    print(json.dumps({"motion_type": motion.label, "probability": probability}))
    return EXIT_OK


def cmd_export(args) -> int:
    import httpx

    params = {}
    if args.side:
        params["side"] = args.side
    if args.motion:
        params["motion"] = args.motion
    if args.respondent:
        params["respondent"] = args.respondent
    with httpx.Client(base_url=args.server, timeout=60.0) as client:
        resp = client.get("/api/v1/export.csv", params=params)
        if resp.status_code != 200:
            raise CliError(f"export failed: {resp.status_code} {resp.text}")
        Path(args.out).write_text(resp.text, encoding="utf-8")
    print(f"exported to {args.out}")
    return EXIT_OK


def cmd_run_all(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs: list[Path] = []

    sessions = synth_corpus(args.respondents, (HandSide.LEFT, HandSide.RIGHT), args.seed)
    corpus_path = out_dir / "corpus.csv"
    with open(corpus_path, "w", encoding="utf-8", newline="") as fh:
        for chunk in frames_to_csv(f for s in sessions for f in s.frames):
            fh.write(chunk)
    outputs.append(corpus_path)
    frames = [f for s in sessions for f in s.frames]
    print(f"[1/5] simulated {len(sessions)} sessions, {len(frames)} frames")

    per_side = stats_by_side(frames)
    _print_stats(per_side)
    stats_path = out_dir / "stats.json"
    stats_doc = {
        side.value: {
            "total_rows": s.total_rows,
            "rows_per_student": s.rows_per_student,
            "rows_per_student_per_motion": s.rows_per_student_per_motion,
            "seconds_per_student_per_motion": s.seconds_per_student_per_motion,
            "seconds_per_repetition": s.seconds_per_repetition,
        }
        for side, s in per_side.items()
    }
    stats_doc["recommended_window"] = recommended_window(per_side)
    stats_path.write_text(json.dumps(stats_doc, indent=2, sort_keys=True) + "\n")
    outputs.append(stats_path)
    print("[2/5] stats written")

    reports, union = _select_all_sides(frames, args.anchor, args.threshold)
    features_path = out_dir / "features.json"
    features_path.write_text(selection_to_json(reports, union))
    outputs.append(features_path)
    print(f"[3/5] selected features: union of {len(union)} channels")

    for side in (HandSide.LEFT, HandSide.RIGHT):
        model, history, split = _train_one_side(frames, side, union, args)
        model_path = out_dir / f"model_{side.value}.json"
        save_model(model, model_path)
        history_path = out_dir / f"history_{side.value}.csv"
        history_path.write_text(history.to_csv())
        outputs.extend([model_path, history_path])
        result = evaluate(model, split.test)
        metrics_path = out_dir / f"metrics_{side.value}.json"
        metrics_path.write_text(
            json.dumps(
                {
                    "side": side.value,
                    "train_windows": len(split.train),
                    "test_windows": len(split.test),
                    "final_train_acc": history.final.train_acc,
                    "final_test_acc": history.final.test_acc,
                    "eval_accuracy": result.accuracy,
                    "confusion": result.confusion.tolist(),
                },
                indent=2,
                sort_keys=True,
            )
            + "\n"
        )
        outputs.append(metrics_path)
        print(
            f"[4/5] {side.value}: train={len(split.train)} test={len(split.test)} "
            f"test_acc={history.final.test_acc:.4f}"
        )

    _write_manifest(out_dir, "run-all", vars_of(args), [], outputs)
    print(f"[5/5] manifest -> {out_dir / 'manifest.json'}")
    return EXIT_OK


def vars_of(args) -> dict:
    flags = {k: v for k, v in vars(args).items() if k not in ("func",)}
    return flags


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="armsense",
        description="Strength-training motion capture, feature selection, and LSTM classification.",
    )
    parser.add_argument("--version", action="version", version=f"armsense {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the ingest HTTP service")
    p.add_argument("--port", type=int, default=DEFAULT_PORT, help="listen port (env ARMSENSE_PORT)")
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--data-dir", default=DEFAULT_DATA_DIR, help="storage root (env ARMSENSE_DATA_DIR)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("simulate", help="generate a synthetic corpus (CSV file or live POST)")
    p.add_argument("--respondents", type=int, default=25)
    p.add_argument("--sides", choices=["both", "left", "right"], default="both")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="corpus.csv", help="output CSV path")
    p.add_argument("--server", default=None, help="POST to a running ingest service instead")
    p.add_argument("--out-dir", default=None, help="where to write the run manifest")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stats", help="corpus statistics and window-length recommendation")
    p.add_argument("--csv", required=True)
    p.add_argument("--students", type=int, default=None, help="override inferred student count")
    p.add_argument("--motions", type=int, default=None, help="override inferred motion count")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("select", help="Pearson feature filter per side plus the union")
    p.add_argument("--csv", required=True)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--anchor", default=DEFAULT_ANCHOR)
    p.add_argument("--out", default="features.json")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="train the classifier for one hand side")
    p.add_argument("--csv", required=True)
    p.add_argument("--features", required=True, help="selection report path or comma-separated channels")
    p.add_argument("--side", choices=["left", "right"], required=True)
    p.add_argument("--window", type=int, default=150)
    p.add_argument("--stride", type=int, default=None, help="window stride (default: window length)")
    p.add_argument("--ratio", type=float, default=0.8)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--clip-norm", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model-out", default="model.json")
    p.add_argument("--history-out", default="history.csv")
    p.add_argument("--dump-dataset", default=None, help="also write the windowed dataset file")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="accuracy and confusion matrix of a model on a CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--csv", required=True)
    p.add_argument("--side", choices=["left", "right"], default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="classify one window CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--window-csv", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("export", help="download the service's CSV export")
    p.add_argument("--server", required=True)
    p.add_argument("--out", default="export.csv")
    p.add_argument("--side", default=None)
    p.add_argument("--motion", default=None)
    p.add_argument("--respondent", default=None)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("run-all", help="simulate -> stats -> select -> train -> evaluate, one seed")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--respondents", type=int, default=25)
    p.add_argument("--out-dir", default="runall-out")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--anchor", default=DEFAULT_ANCHOR)
    p.add_argument("--window", type=int, default=150)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--ratio", type=float, default=0.8)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--clip-norm", type=float, default=5.0)
    p.set_defaults(func=cmd_run_all)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc.exit_code}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {EXIT_MISSING_FILE}: {exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except (ModelFormatError, CsvFormatError) as exc:
        print(f"error: {EXIT_SCHEMA}: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (DatasetError, FeatureSelectError, TrainingError, ValueError) as exc:
        print(f"error: {EXIT_RUNTIME}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
