"""Command-line interface: annotate, eval, synth, serve, train.

Exit codes: 0 success, 1 processing error, 2 usage or I/O error. Failures
emit a machine-readable JSON object on stderr. All commands are
deterministic given their inputs, configuration, and seeds; annotate
records a manifest (config hash, versions, timings) next to its outputs.
"""

from __future__ import annotations

import json
import hashlib
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import click

from . import __version__
from .audio import AudioIOError, load_wav, write_wav
from .classify import ClassifyError, train_spectral
from .evalstats import (
    EvalError,
    agreement,
    distribution,
    distribution_csv,
    duration_histogram_csv,
    report_json,
)
from .features import FeatureError, analyze_clip, track_to_csv
from .labels import LabelTrackError, parse_label_track, write_label_track, TrackSource
from .pipeline import AnnotateResult, PipelineConfig, PipelineError, annotate_recording
from .postproc import PostprocError
from .synth import SynthError, SynthScript, render

PROCESSING_ERRORS = (
    ClassifyError,
    EvalError,
    FeatureError,
    LabelTrackError,
    PipelineError,
    PostprocError,
    SynthError,
)


def _fail(kind: str, message: str, code: int, **extra) -> None:
    doc = {"v": 1, "error": {"kind": kind, "message": message, **extra}}
    click.echo(json.dumps(doc), err=True)
    sys.exit(code)


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        _fail("io", f"{what} not found: {p}", 2, path=str(p))
    return p


def _load_config(config_path: Optional[str]) -> PipelineConfig:
    if config_path is None:
        return PipelineConfig()
    p = _require_file(config_path, "config file")
    try:
        return PipelineConfig.from_dict(json.loads(p.read_text()))
    except (json.JSONDecodeError, PipelineError, ValueError) as exc:
        _fail("config", f"bad config {p}: {exc}", 2, path=str(p))


@click.group()
@click.version_option(__version__, prog_name="bowelsound")
def main() -> None:
    """Bowel-sound annotation, evaluation, synthesis, and review tools."""


@main.command()
@click.option("--in", "input_path", required=True, help="input WAV recording")
@click.option("--out", "out_dir", required=True, help="output directory")
@click.option("--config", "config_path", default=None, help="pipeline config JSON")
@click.option("--cohort", type=click.Choice(["healthy", "patient", "unknown"]), default=None)
@click.option("--backend", type=click.Choice(["rule", "spectral", "external"]), default=None)
@click.option("--adapter", default=None, help="external adapter host:port or cmd:<command>")
@click.option("--jobs", type=int, default=1, show_default=True, help="parallel channels")
@click.option("--keep-going", is_flag=True, help="exit 0 even if some channels fail")
@click.option("--dump-frames", is_flag=True, help="also write per-frame feature CSVs")
def annotate(input_path, out_dir, config_path, cohort, backend, adapter, jobs, keep_going, dump_frames):
    """Detect, classify, and refine events; write label files plus a manifest."""
    wav_path = _require_file(input_path, "input recording")
    cfg = _load_config(config_path)
    overrides = {}
    if cohort is not None:
        overrides["cohort"] = cohort
    if backend is not None:
        overrides["backend"] = backend
    if adapter is not None:
        overrides["adapter"] = adapter
    if overrides:
        doc = cfg.to_dict()
        doc.update(overrides)
        cfg = PipelineConfig.from_dict(doc)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = wav_path.stem

    t_start = time.perf_counter()
    try:
        rec = load_wav(wav_path)
    except AudioIOError as exc:
        _fail("audio", str(exc), 1, path=str(wav_path))
    try:
        result: AnnotateResult = annotate_recording(rec, cfg, jobs=max(1, jobs))
    except PROCESSING_ERRORS as exc:
        _fail("processing", str(exc), 1)
    elapsed = time.perf_counter() - t_start

    channels_doc = {}
    for name, track in sorted(result.tracks.items()):
        label_file = f"{stem}.{name}.labels.txt"
        (out / label_file).write_text(write_label_track(track))
        channels_doc[name] = {
            "labels_file": label_file,
            "detected_events": result.event_counts.get(name, 0),
            "segments": len(track),
        }
        if name in result.classify_errors:
            channels_doc[name]["classify_errors"] = result.classify_errors[name]
        if dump_frames:
            frames_file = f"{stem}.{name}.frames.csv"
            track_feats = analyze_clip(rec.channels[name], cfg.profile)
            (out / frames_file).write_text(track_to_csv(track_feats))
            channels_doc[name]["frames_file"] = frames_file

            from .detect import detect_events
            from .features import thresholds
            from .plots import frame_profile_figure

            thr = thresholds(track_feats)
            events = detect_events(track_feats, thr, cfg.detector)
            figure_file = f"{stem}.{name}.frames.png"
            frame_profile_figure(
                track_feats.times_s(),
                track_feats.rms_norm,
                track_feats.energy_delta,
                track_feats.energy_norm,
                thr.thr_rms,
                thr.thr_energy_delta,
                thr.thr_energy_rel,
                [(e.start_s, e.end_s) for e in events],
                out / figure_file,
            )
            channels_doc[name]["frames_figure"] = figure_file
    for name, message in sorted(result.failures.items()):
        channels_doc[name] = {"failure": message}

    manifest = {
        "v": 1,
        "tool": {"name": "bowelsound", "version": __version__},
        "input": {
            "path": str(wav_path),
            "sha256": hashlib.sha256(wav_path.read_bytes()).hexdigest(),
            "sample_rate": rec.sample_rate,
            "channels": len(rec.channels),
        },
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "channels": channels_doc,
        "timings": {"wall_s": round(elapsed, 3)},
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    (out / f"{stem}.manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    if result.failures and not keep_going:
        _fail(
            "processing",
            "channel failures: " + "; ".join(sorted(result.failures.values())),
            1,
            manifest=str(out / f"{stem}.manifest.json"),
        )
    click.echo(json.dumps({"v": 1, "ok": True, "out": str(out), "channels": sorted(result.tracks)}))


@main.command(name="eval")
@click.option("--ref", "ref_path", required=True, help="reference label file")
@click.option("--cand", "cand_path", required=True, help="candidate label file")
@click.option("--out", "out_dir", required=True, help="report output directory")
@click.option("--ref-group", default="Original", show_default=True)
@click.option("--cand-group", default="Predicted", show_default=True)
@click.option("--iou-min", type=float, default=0.3, show_default=True)
def eval_cmd(ref_path, cand_path, out_dir, ref_group, cand_group, iou_min):
    """Agreement and distribution reports (JSON + CSV + figures)."""
    ref_file = _require_file(ref_path, "reference labels")
    cand_file = _require_file(cand_path, "candidate labels")
    try:
        ref = parse_label_track(ref_file.read_text(), source=TrackSource.MANUAL)
    except LabelTrackError as exc:
        _fail("parse", f"{ref_file}: {exc}", 1, path=str(ref_file))
    try:
        cand = parse_label_track(cand_file.read_text(), source=TrackSource.PREDICTED)
    except LabelTrackError as exc:
        _fail("parse", f"{cand_file}: {exc}", 1, path=str(cand_file))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        agree = agreement(ref, cand, iou_min=iou_min)
    except EvalError as exc:
        _fail("processing", str(exc), 1)
    dist_ref = distribution(ref, group=ref_group)
    dist_cand = distribution(cand, group=cand_group)

    (out / "agreement.json").write_text(report_json(agree))
    (out / "distribution_ref.json").write_text(report_json(dist_ref))
    (out / "distribution_cand.json").write_text(report_json(dist_cand))
    (out / "distribution_ref.csv").write_text(distribution_csv(dist_ref))
    (out / "distribution_cand.csv").write_text(distribution_csv(dist_cand))
    (out / "durations_ref.csv").write_text(duration_histogram_csv(ref))
    (out / "durations_cand.csv").write_text(duration_histogram_csv(cand))

    from .plots import distribution_figure, duration_box_figure

    distribution_figure([dist_ref, dist_cand], out / "distribution.png")
    duration_box_figure({ref_group: ref, cand_group: cand}, out / "durations.png")

    click.echo(json.dumps({"v": 1, "ok": True, "out": str(out), "matched": agree.matched_events}))


@main.command()
@click.option("--script", "script_path", required=True, help="synthesis script JSON")
@click.option("--out", "out_dir", required=True, help="output directory")
def synth(script_path, out_dir):
    """Render a synthetic recording plus its ground-truth labels."""
    script_file = _require_file(script_path, "script")
    try:
        script = SynthScript.from_json(script_file.read_text())
        recording, truth = render(script)
    except SynthError as exc:
        _fail("synth", str(exc), 1, path=str(script_file))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = script_file.stem
    write_wav(out / f"{stem}.wav", recording, encoding="float32")
    (out / f"{stem}.labels.txt").write_text(write_label_track(truth))
    (out / f"{stem}.script.json").write_text(script.to_json() + "\n")
    click.echo(
        json.dumps(
            {"v": 1, "ok": True, "wav": str(out / f"{stem}.wav"), "events": len(truth)}
        )
    )


@main.command()
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--data", "data_dir", required=True, help="directory of WAV recordings")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--ui", "ui_dir", default=None, help="built frontend (frontend/dist) to mount at /ui")
def serve(port, data_dir, host, ui_dir):
    """Run the expert review service (HTTP JSON API)."""
    data = Path(data_dir)
    if not data.is_dir():
        _fail("io", f"data directory not found: {data}", 2, path=str(data))
    import uvicorn

    from .service import create_app

    app = create_app(data, ui_dir=ui_dir)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except SystemExit as exc:  # uvicorn exits 1 on bind failure
        if exc.code not in (0, None):
            _fail("serve", f"server failed to start on {host}:{port}", 1)


@main.command()
@click.option("--corpus", "corpus_dir", required=True, help="directory of <stem>.wav + <stem>.labels.txt pairs")
@click.option("--cohort", type=click.Choice(["healthy", "patient", "unknown"]), default="unknown")
@click.option("--models-dir", "models_dir", required=True, help="where to store the model file")
@click.option("--seed", type=int, default=0, show_default=True)
def train(corpus_dir, cohort, models_dir, seed):
    """Train the lightweight spectral classifier on labeled recordings."""
    corpus_path = Path(corpus_dir)
    if not corpus_path.is_dir():
        _fail("io", f"corpus directory not found: {corpus_path}", 2, path=str(corpus_path))
    corpus = []
    for wav in sorted(corpus_path.glob("*.wav")):
        labels = wav.parent / (wav.stem + ".labels.txt")
        if not labels.exists():
            continue
        try:
            rec = load_wav(wav)
            track = parse_label_track(labels.read_text())
        except (AudioIOError, LabelTrackError) as exc:
            _fail("parse", f"{wav.name}: {exc}", 1)
        for clip in rec.channels.values():
            corpus.append((clip, track))
    if not corpus:
        _fail("io", f"no wav+labels pairs under {corpus_path}", 2)
    try:
        model, summary = train_spectral(corpus, cohort=cohort, seed=seed)
    except ClassifyError as exc:
        _fail("processing", str(exc), 1)
    out = Path(models_dir)
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / f"{model.model_id}.json")
    click.echo(json.dumps({"v": 1, "ok": True, **summary}))


if __name__ == "__main__":
    main()
