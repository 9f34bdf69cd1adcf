"""Command-line entry point.

Every file written by a subcommand gets a JSON sidecar. Rerunning the same
command on unchanged inputs within the retention period reuses the cached
outputs instead of recomputing them.

Exit codes: 0 success, 2 invalid input or arguments, 3 backend failure,
4 cache or sidecar corruption.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shlex
import sys
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from ._fsutil import atomic_write_text
from .errors import BehaviometryError, SidecarError, ValidationError
from .expressions import (
    DIVERSITY_ESTIMATOR,
    DYADIC_BASE_S,
    asymmetry,
    diversity,
    expressivity,
    multiscale_decompose,
)
from .io import read_track, to_expressions, to_landmarks, to_pose, to_rects, write_track
from .kinematics import (
    LDLJ_FORMULA,
    Trajectory,
    TrajectorySource,
    motion_kinematics,
    relative_motion,
    report_columns,
    report_row,
    trajectories_from_landmarks,
    trajectory_from_pose,
    trajectory_from_rects,
)
from .plotting import emit_plot
from .provenance import (
    Cache,
    CitationConfig,
    SidecarMetadata,
    citation_block,
    hash_inputs,
    load_templates,
    output_lock,
    parse_retention,
    read_sidecar,
    run_backend,
    run_pipeline,
    should_reuse,
    write_sidecar,
)
from .signal import Modality, Signal
from .social import XcorrConfig, LagMode, windowed_lagged_xcorr

log = logging.getLogger("behaviometry")

RETENTION_ENV = "BEHAVIOMETRY_RETENTION"
_EMPTY_SHA256 = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"

# incremented once per output set actually computed (not reused)
COUNTERS = Counter()
_counter_lock = threading.Lock()


def _bump(key):
    with _counter_lock:
        COUNTERS[key] += 1


# ---------------------------------------------------------------- helpers

def _stem(path) -> str:
    return Path(path).name.split(".")[0]


def _load(path) -> Signal:
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"input file not found: {p}")
    if p.is_dir():
        raise ValidationError(f"input is a directory: {p}")
    return read_track(p)


def _table(columns, rows, source, fps=1.0) -> Signal:
    data = np.asarray(rows, dtype=float).reshape(len(rows), len(columns))
    return Signal(data, fps, columns, Modality.GENERIC, source_backend=source)


def _retention(args):
    if getattr(args, "retention", None):
        return parse_retention(args.retention)
    if os.environ.get(RETENTION_ENV):
        return parse_retention(os.environ[RETENTION_ENV])
    return Cache(args.out).retention


class _Job:
    """One measurement invocation: inputs, planned outputs, provenance."""

    def __init__(self, args, name, inputs, outputs):
        self.args = args
        self.name = name
        self.inputs = [Path(p) for p in inputs]
        self.outputs = [Path(args.out) / o for o in outputs]
        self.cmd = "behaviometry " + shlex.join(args.argv)
        for p in self.inputs:
            if not p.exists():
                raise ValidationError(f"input file not found: {p}")
        self.digest = hash_inputs(self.inputs)

    def cached(self) -> bool:
        if self.args.force:
            return False
        retention = _retention(self.args)
        return all(should_reuse(p, retention, self.digest, current_cmd=self.cmd)
                   for p in self.outputs)

    def finish(self, **extra):
        out_dir = Path(self.args.out)
        meta_extra = dict(extra)
        if len(self.inputs) > 1:
            meta_extra["inputs"] = [str(p.resolve()) for p in self.inputs]
        with output_lock(out_dir):
            for p in self.outputs:
                meta = SidecarMetadata.create(f"behaviometry.{self.name}", self.cmd,
                                              self.inputs[0] if self.inputs else "",
                                              self.digest, out_dir, **meta_extra)
                write_sidecar(meta, p)
        for p in self.outputs:
            print(p)


def _run_job(args, name, inputs, outputs, compute):
    Path(args.out).mkdir(parents=True, exist_ok=True)
    job = _Job(args, name, inputs, outputs)
    if job.cached():
        for p in job.outputs:
            print(f"{p} (cached)")
        return
    _bump(name)
    extra = compute(job.outputs) or {}
    job.finish(**extra)


def _batch(args, fn):
    inputs = args.input
    if args.jobs > 1 and len(inputs) > 1:
        with ThreadPoolExecutor(args.jobs) as pool:
            list(pool.map(fn, inputs))
    else:
        for p in inputs:
            fn(p)


def _parse_scales(text):
    if text is None or str(text).lower() in ("none", ""):
        return None
    if isinstance(text, (int, list)):
        return text
    if "," not in text and text.strip().isdigit():
        return int(text)
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"cannot parse scales {text!r}; use an integer or a comma list "
                              "of seconds") from None


# ------------------------------------------------------------ subcommands

def _trajectories(s: Signal, angular: bool):
    m = s.modality
    if m is Modality.RECTS:
        return [trajectory_from_rects(to_rects(s))]
    if m is Modality.POSE:
        return [trajectory_from_pose(to_pose(s), angular=angular)]
    if m in (Modality.LANDMARKS2D, Modality.LANDMARKS3D):
        return trajectories_from_landmarks(to_landmarks(s))
    if s.n_channels in (2, 3):
        return [Trajectory(s.data, s.fps, TrajectorySource.LANDMARK_POINT,
                           labels=s.channel_labels)]
    raise ValidationError(f"cannot build trajectories from a {m.value} track with "
                          f"{s.n_channels} channels")


def cmd_convert(args):
    out = Path(args.output)
    args.out = str(out.parent)

    def compute(outputs):
        s = _load(args.input)
        write_track(s, outputs[0], args.format)
        return {"format": args.format}

    _run_job(args, "convert", [args.input], [out.name], compute)


def cmd_kinematics(args):
    def one(path):
        stem = _stem(path)
        outputs = [f"{stem}_kinematics.csv"] + ([f"{stem}_kinematics_compat.csv"]
                                                if args.compat else [])

        def compute(outs):
            s = _load(path)
            trajs = _trajectories(s, args.angular)
            reports = [motion_kinematics(t) for t in trajs]
            dim = trajs[0].dim
            rows = [report_row(r) for r in reports]
            src = "behaviometry.kinematics"
            write_track(_table(report_columns(dim), rows, src, s.fps), outs[0])
            if args.compat:
                compat = [[max(r.range_of_motion), r.total_path_length, r.avg_speed,
                           r.avg_acceleration] for r in reports]
                write_track(_table(["range", "path_length", "avg_speed", "avg_acc"], compat,
                                   src, s.fps), outs[1])
            return {"trajectory_source": trajs[0].source.value, "angular": args.angular,
                    "ldlj_formula": LDLJ_FORMULA,
                    "caution_2d": any(r.caution_2d for r in reports)}

        _run_job(args, "kinematics", [path], outputs, compute)

    _batch(args, one)


def cmd_relative_motion(args):
    if not args.reference and not args.first_frame:
        raise ValidationError("relative-motion needs --reference or --first-frame")
    inputs = [args.input] + ([args.reference] if args.reference else [])

    def compute(outs):
        s = _load(args.input)
        trajs = _trajectories(s, args.angular)
        if args.first_frame:
            rel = [relative_motion(t, first_frame=True) for t in trajs]
        else:
            refs = _trajectories(_load(args.reference), args.angular)
            if len(refs) != len(trajs):
                raise ValidationError(f"{len(trajs)} trajectories vs {len(refs)} in reference")
            rel = [relative_motion(t, r) for t, r in zip(trajs, refs)]
        data = np.hstack([r.positions for r in rel])
        labels = [lab for r in rel for lab in r.labels]
        write_track(Signal(data, s.fps, labels, Modality.GENERIC,
                           source_backend="behaviometry.relative-motion"), outs[0])
        return {"mode": "first_frame" if args.first_frame else "reference"}

    _run_job(args, "relative-motion", inputs, [f"{_stem(args.input)}_relative.csv"], compute)


def cmd_asymmetry(args):
    def one(path):
        def compute(outs):
            s = _load(path)
            if s.modality not in (Modality.LANDMARKS2D, Modality.LANDMARKS3D):
                raise ValidationError(f"asymmetry needs a landmark track, got {s.modality.value}")
            if args.template:
                s = s.with_data(s.data, template_id=args.template)
            score = asymmetry(to_landmarks(s))
            write_track(score.with_data(score.data, source_backend="behaviometry.asymmetry"),
                        outs[0])
            return {"template": score.template_id,
                    "caution_2d": "caution_2d" in score.warnings,
                    "plane": "total least squares through midline and pair midpoints"
                    if s.modality is Modality.LANDMARKS3D else "interocular bisector"}

        _run_job(args, "asymmetry", [path], [f"{_stem(path)}_asymmetry.csv"], compute)

    _batch(args, one)


def cmd_expressivity(args):
    scales = _parse_scales(args.scales)

    def one(path):
        def compute(outs):
            e = to_expressions(_load(path))
            st = expressivity(e, scales, z=args.z)
            rows = [list(r) for r in st.rows()]
            for i, sc in enumerate(st.scales_s):
                rows.append([sc, -1, st.pooled_intensity[i], st.pooled_variability[i],
                             st.pooled_peak_rate[i]])
            cols = ["scale_s", "coefficient", "intensity", "variability", "peak_rate"]
            write_track(_table(cols, rows, "behaviometry.expressivity"), outs[0])
            return {"scales": args.scales, "peak_z": args.z,
                    "peak_min_separation": "scale window",
                    "decomposition": "moving-average pyramid",
                    "dyadic_base_s": DYADIC_BASE_S, "pooled_rows": "coefficient = -1",
                    "coefficient_labels": list(st.labels)}

        _run_job(args, "expressivity", [path], [f"{_stem(path)}_expressivity.csv"], compute)

    _batch(args, one)


def cmd_diversity(args):
    scales = _parse_scales(args.scales)

    def one(path):
        def compute(outs):
            e = to_expressions(_load(path))
            d = diversity(e, scales)
            rows = [[s, h, c, u] for s, h, c, u in zip(d.scales_s, d.entropy,
                                                       d.distinct_dominant_count,
                                                       d.windows_used)]
            cols = ["scale_s", "entropy", "distinct_dominant_count", "windows_used"]
            write_track(_table(cols, rows, "behaviometry.diversity"), outs[0])
            return {"scales": args.scales, "estimator": DIVERSITY_ESTIMATOR}

        _run_job(args, "diversity", [path], [f"{_stem(path)}_diversity.csv"], compute)

    _batch(args, one)


def _social(args, name, mode):
    prefix = f"{_stem(args.a)}_vs_{_stem(args.b)}_{name}"
    outputs = [f"{prefix}.csv", f"{prefix}_windows.csv"]

    def compute(outs):
        a, b = _load(args.a), _load(args.b)
        fps = args.fps if args.fps is not None else a.fps
        cfg = XcorrConfig(args.width, args.step, fps, args.max_lag, mode, args.pairing,
                          args.lag_objective, args.lag_aggregate)
        res = windowed_lagged_xcorr(a, b, cfg)
        agg = []
        for p, (i, j) in enumerate(res.pairs):
            m, s, l, n = res.pair_summary(p)
            agg.append([i, j, m, s, l, n, len(res.window_starts) - n])
        agg.append([-1, -1, res.corr_mean, res.corr_std, res.corr_lag, res.n_retained,
                    res.n_skipped])
        write_track(_table(["pair_a", "pair_b", "corr_mean", "corr_std", "corr_lag",
                            "n_windows", "n_skipped"], agg, f"behaviometry.{name}"), outs[0])
        win = [[i, j, res.window_starts_s[k], res.best_corr[p, k], res.best_lag_s[p, k]]
               for p, (i, j) in enumerate(res.pairs) for k in range(len(res.window_starts))]
        write_track(_table(["pair_a", "pair_b", "window_start_s", "corr", "lag_s"], win,
                           f"behaviometry.{name}"), outs[1])
        print(f"corr_mean={res.corr_mean:.6g} corr_std={res.corr_std:.6g} "
              f"corr_lag={res.corr_lag:.6g}")
        return {**cfg.as_metadata(),
                "pair_labels": [list(pl) for pl in res.pair_labels],
                "aggregate_row": "pair_a = pair_b = -1"}

    _run_job(args, name, [args.a, args.b], outputs, compute)


def cmd_imitation(args):
    _social(args, "imitation", LagMode.BIDIRECTIONAL if args.no_causality
            else LagMode.DIRECTIONAL)


def cmd_coordination(args):
    _social(args, "coordination", LagMode.BIDIRECTIONAL)


def _parse_bindings(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ValidationError(f"--bind expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k] = v
    return out


def cmd_run_backend(args):
    bindings = _parse_bindings(args.bind)
    if args.input:
        bindings["input"] = str(Path(args.input).resolve())
    if args.output_dir:
        bindings["output_dir"] = str(Path(args.output_dir).resolve())
    retention = parse_retention(args.retention) if args.retention else (
        Cache(args.output_dir).retention if args.output_dir else parse_retention("6 months"))
    kw = dict(retention=retention, dry_run=args.dry_run, force=args.force)

    if args.config:
        cfg = load_templates(args.config)
        if args.pipeline:
            stages = cfg.get("pipelines", {}).get(args.pipeline)
            if stages is None:
                raise ValidationError(f"no pipeline {args.pipeline!r} in {args.config}")
        elif args.stage:
            if args.stage not in cfg["templates"]:
                raise ValidationError(f"no template {args.stage!r} in {args.config}")
            stages = [args.stage]
        else:
            raise ValidationError("--config needs --stage or --pipeline")
        records = run_pipeline(cfg, stages, bindings, **kw)
    elif args.template:
        records = [run_backend(args.template, bindings, args.output or [],
                               backend=args.backend, **kw)]
    else:
        raise ValidationError("run-backend needs --template or --config")

    for r in records:
        if r.dry_run:
            print(r.cmd)
        elif r.reused:
            print(f"reused: {r.cmd}")
        else:
            print(f"ran: {r.cmd}")
            for p in r.outputs:
                print(p)


def cmd_cache(args):
    cache = Cache(args.out)
    if args.cache_cmd == "set-retention":
        r = cache.change_retention_period(args.period)
        print(f"retention for {args.out}: {r.seconds} s")
        return
    print(f"retention: {cache.retention.seconds} s")
    bad = []
    for p in cache.outputs():
        try:
            m = read_sidecar(p)
        except SidecarError as exc:
            bad.append(str(exc))
            print(f"{p}\tINVALID SIDECAR")
            continue
        print(f"{p}\t{m.backend}\t{m.time}\t{m.input_hash[:12]}")
    if bad:
        raise SidecarError("; ".join(bad))


def cmd_citation(args):
    cfg = CitationConfig(backend=args.backend, toolkit_version=args.toolkit_version,
                         morphable_model=args.model, camera_fov_deg=args.camera,
                         landmark_template=args.landmarks,
                         used_local_coefficients=args.local)
    text = citation_block(cfg)
    if not args.output:
        sys.stdout.write(text)
        return
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)

    atomic_write_text(out, text)
    cmd = "behaviometry " + shlex.join(args.argv)
    meta = SidecarMetadata.create("behaviometry.citation", cmd, "", _EMPTY_SHA256, out.parent)
    write_sidecar(meta, out)
    print(out)


def cmd_plot(args):
    scales = _parse_scales(args.scales)

    def one(path):
        ext = "svg" if args.format == "svg" else "html"

        def compute(outs):
            s = _load(path)
            overlays = [_load(o) for o in args.overlay or []]
            peaks = None
            if s.modality in (Modality.EXPRESSIONS, Modality.GENERIC) and s.n_frames >= 3:
                dec = multiscale_decompose(s, scales, z=args.z)
                peaks = {c: [pk.frame for pk in dec.peaks[0][c]] for c in range(s.n_channels)}
            emit_plot(s, outs[0], overlays=overlays, peaks=peaks, fmt=ext)
            n = sum(len(v) for v in (peaks or {}).values())
            return {"format": ext, "peak_markers": n, "peak_scale": "finest"}

        _run_job(args, "plot", [path] + list(args.overlay or []), [f"{_stem(path)}_plot.{ext}"],
                 compute)

    _batch(args, one)


# ----------------------------------------------------------------- parser

def _add_common(p, batch=False):
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--retention", help="cache retention, e.g. '1 year'")
    p.add_argument("--force", action="store_true", help="recompute even if cached")
    if batch:
        p.add_argument("--input", nargs="+", required=True)
        p.add_argument("--jobs", type=int, default=1, help="parallel inputs")


def _add_social(p):
    p.add_argument("--a", required=True, help="first signal (participant)")
    p.add_argument("--b", required=True, help="second signal (reference)")
    p.add_argument("--width", type=float, default=1.1, help="window width, seconds")
    p.add_argument("--step", type=float, default=0.5, help="window step, seconds")
    p.add_argument("--fps", type=float, help="sampling rate (must match the tracks)")
    p.add_argument("--max-lag", type=float, help="seconds; default width/2")
    p.add_argument("--pairing", choices=["matched", "all_pairs"])
    p.add_argument("--lag-objective", choices=["max_signed", "max_abs"], default="max_signed")
    p.add_argument("--lag-aggregate", choices=["mean", "median"], default="mean")
    _add_common(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="behaviometry", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--params", help="JSON file of per-subcommand flag defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="re-encode a track (csv <-> json)")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--retention")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("kinematics", help="range, path, speed, acceleration, jerk, LDLJ")
    _add_common(p, batch=True)
    p.add_argument("--angular", action="store_true", help="pose: use rotation channels")
    p.add_argument("--compat", action="store_true", help="also write the four-column view")
    p.set_defaults(func=cmd_kinematics)

    p = sub.add_parser("relative-motion", help="displacement relative to a reference")
    p.add_argument("--input", required=True)
    p.add_argument("--reference")
    p.add_argument("--first-frame", action="store_true")
    p.add_argument("--angular", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_relative_motion)

    p = sub.add_parser("asymmetry", help="per-frame facial asymmetry")
    _add_common(p, batch=True)
    p.add_argument("--template", help="landmark template id (default: from the track)")
    p.set_defaults(func=cmd_asymmetry)

    for name, func, helptext in (("expressivity", cmd_expressivity, "multiscale intensity"),
                                 ("diversity", cmd_diversity, "expression-type entropy")):
        p = sub.add_parser(name, help=helptext)
        _add_common(p, batch=True)
        p.add_argument("--scales", default=None,
                       help="integer (dyadic count), comma list of seconds, or 'none'")
        if name == "expressivity":
            p.add_argument("--z", type=float, default=1.0, help="peak threshold in stds")
        p.set_defaults(func=func)

    p = sub.add_parser("imitation", help="directional windowed lagged correlation")
    _add_social(p)
    p.add_argument("--no-causality", action="store_true", help="allow negative lags")
    p.set_defaults(func=cmd_imitation)

    p = sub.add_parser("coordination", help="bidirectional windowed lagged correlation")
    _add_social(p)
    p.set_defaults(func=cmd_coordination)

    p = sub.add_parser("run-backend", help="run an external processor from a template")
    p.add_argument("--template", help="command template with {placeholders}")
    p.add_argument("--config", help="JSON template config")
    p.add_argument("--stage", help="template name in --config")
    p.add_argument("--pipeline", help="pipeline name in --config")
    p.add_argument("--bind", action="append", help="placeholder binding key=value")
    p.add_argument("--input", help="binds {input}")
    p.add_argument("--output-dir", help="binds {output_dir}")
    p.add_argument("--output", action="append", help="declared output file (repeatable)")
    p.add_argument("--backend", default="external", help="backend name for the sidecar")
    p.add_argument("--dry-run", action="store_true", help="print the command only")
    p.add_argument("--retention")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_run_backend)

    p = sub.add_parser("cache", help="inspect outputs or set the retention period")
    csub = p.add_subparsers(dest="cache_cmd", required=True)
    c = csub.add_parser("show")
    c.add_argument("--out", required=True)
    c = csub.add_parser("set-retention")
    c.add_argument("period", help="e.g. '1 year', '3 minutes'")
    c.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cache)

    p = sub.add_parser("citation", help="methods text and references")
    p.add_argument("--backend", default="3DI")
    p.add_argument("--model")
    p.add_argument("--camera", type=float, help="camera field of view, degrees")
    p.add_argument("--landmarks", help="landmark template, e.g. ibug51")
    p.add_argument("--local", action="store_true", help="local expression coefficients used")
    p.add_argument("--toolkit-version")
    p.add_argument("--output", help="write to this file (plus sidecar) instead of stdout")
    p.set_defaults(func=cmd_citation)

    p = sub.add_parser("plot", help="self-contained HTML or SVG plot")
    _add_common(p, batch=True)
    p.add_argument("--overlay", action="append", help="extra track to overlay")
    p.add_argument("--format", choices=["html", "svg"], default="html")
    p.add_argument("--scales", default=None, help="peak scale spec (finest scale is marked)")
    p.add_argument("--z", type=float, default=1.0)
    p.set_defaults(func=cmd_plot)

    return parser


def _apply_params(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--params")
    known, _ = pre.parse_known_args(argv)
    if not known.params:
        return
    try:
        cfg = json.loads(Path(known.params).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read params file {known.params}: {exc}") from None
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for name, defaults in cfg.items():
        if name in subparsers.choices:
            subparsers.choices[name].set_defaults(**{k.replace("-", "_"): v
                                                     for k, v in defaults.items()})


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_params(parser, argv)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        args.argv = argv
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        args.func(args)
        return 0
    except BehaviometryError as exc:
        print(f"behaviometry: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"behaviometry: error: {exc.filename or ''}: {exc.strerror}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"behaviometry: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
