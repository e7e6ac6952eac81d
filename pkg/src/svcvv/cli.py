"""Command-line entry point.

Subcommands::

    svcvv vv       --frames DIR --out FILE [--crop WxH]
    svcvv predict  --imu FILE [--frames DIR | --vv FILE] [--params FILE ...]
                   --variant {svc,svc-vv} --out DIR [--jobs N] [--plot]
    svcvv synth    --spec FILE --out DIR [--seed N]
    svcvv eval     --summaries FILE --measure {mean,max} --out DIR

A ``--config FILE`` (YAML mapping of option names) overrides command-line
flags. Every run writes ``run_config.json`` next to its outputs.
Exit codes: 0 success, 1 internal error, 2 user-input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .core import SvcError

log = logging.getLogger("svcvv")

EXIT_OK, EXIT_INTERNAL, EXIT_USER = 0, 1, 2


class UsageError(SvcError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _dims(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="svcvv", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", type=Path, help="YAML file whose keys override flags")
        sp.add_argument("--lenient", action="store_true", help="warn instead of failing on irregular input")

    sp = sub.add_parser("vv", help="estimate the visual vertical from a frame directory")
    common(sp)
    sp.add_argument("--frames", type=Path, required=True)
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--crop", type=_dims, help="centre crop WxH, e.g. 1000x480")
    sp.add_argument("--theta0", type=float, default=90.0)

    sp = sub.add_parser("predict", help="simulate MSI for one trial")
    common(sp)
    sp.add_argument("--imu", type=Path, required=True)
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--frames", type=Path)
    src.add_argument("--vv", type=Path, help="precomputed visual vertical series")
    sp.add_argument("--params", type=Path, nargs="+", action="extend", help="parameter file(s); several run a sweep")
    sp.add_argument("--variant", choices=("svc", "svc-vv"), default="svc-vv")
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--crop", type=_dims)
    sp.add_argument("--dt", type=float, default=0.01, help="nominal IMU sample period (s)")
    sp.add_argument("--ghat-init", choices=("measured", "zero"), default="measured")
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--plot", action="store_true")

    sp = sub.add_parser("synth", help="generate synthetic IMU tracks and scenes")
    common(sp)
    sp.add_argument("--spec", type=Path, help="YAML with 'slalom' and optional 'scene' sections")
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--seed", type=int)

    sp = sub.add_parser("eval", help="confusion matrix and scores from cohort summaries")
    common(sp)
    sp.add_argument("--summaries", type=Path, required=True)
    sp.add_argument("--measure", choices=("mean", "max"), default="mean")
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--exclude-zero-misc", action="store_true", help="drop participants with MISC 0 throughout")
    sp.add_argument("--no-plots", action="store_true")
    return p


# --------------------------------------------------------------------------
# config handling
# --------------------------------------------------------------------------

_PATH_KEYS = {"frames", "out", "imu", "vv", "spec", "summaries"}


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    if not getattr(args, "config", None):
        return args
    try:
        doc = yaml.safe_load(Path(args.config).read_text()) or {}
    except FileNotFoundError:
        raise UsageError(f"config file not found: {args.config}") from None
    except yaml.YAMLError as exc:
        raise UsageError(f"cannot parse config file {args.config}: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("config file must be a mapping of option names")
    for key, value in doc.items():
        dest = key.replace("-", "_")
        if dest in ("command", "config") or not hasattr(args, dest):
            raise UsageError(f"config key {key!r} is not an option of '{args.command}'")
        if dest in _PATH_KEYS and value is not None:
            value = Path(value)
        elif dest == "params" and value is not None:
            value = [Path(v) for v in (value if isinstance(value, list) else [value])]
        elif dest == "crop" and isinstance(value, str):
            value = _dims(value)
        setattr(args, dest, value)
    return args


def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, np.generic):
        return v.item()
    return v


def write_run_config(directory: Path, args: argparse.Namespace, extra: dict | None = None) -> None:
    doc = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in ("verbose",)}
    doc["version"] = __version__
    if extra:
        doc.update(_jsonable(extra))
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "run_config.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def _estimate_vv(frames_dir: Path, crop, strict: bool, theta0: float = 90.0):
    from .ingest import iter_frames, load_frames
    from .vvp import estimate_sequence

    refs = load_frames(frames_dir, expected_dims=crop, strict=strict and crop is None)
    if not refs:
        raise SvcError(f"{frames_dir}: the frame index is empty")
    return estimate_sequence(iter_frames(refs, crop), [r.t for r in refs], theta0)


def cmd_vv(args) -> int:
    from .ingest import write_vv_series

    series = _estimate_vv(args.frames, args.crop, not args.lenient, args.theta0)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_vv_series(series, args.out)
    write_run_config(args.out.parent, args, {"n_frames": len(series)})
    log.info("wrote %d estimates to %s", len(series), args.out)
    return EXIT_OK


def _predict_one(job: dict) -> dict:
    """Run one parameter set; kept top-level so worker processes can import it."""
    from .ingest import synchronize
    from .params import load_params, preset
    from .svc_model import ModelConfig, run_trial

    imu, vv, variant, out = job["imu"], job["vv"], job["variant"], Path(job["out"])
    params = load_params(job["params"], default=variant) if job["params"] else preset(variant)
    if variant == "svc-vv":
        aligned = synchronize(imu, vv)
        imu, vv_on_grid = aligned.imu, aligned.vv
    else:
        vv_on_grid = None
    result = run_trial(imu, vv_on_grid, params, variant, ModelConfig(ghat_init=job["ghat_init"]))
    out.mkdir(parents=True, exist_ok=True)
    result.to_csv(out / "trial.csv")
    summary = result.summary()
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if job["plot"]:
        from .plots import angle_timeseries, msi_timeseries

        msi_timeseries({variant: result}, out / "msi.png")
        if variant == "svc-vv":
            angle_timeseries(result.t, result.theta_vv, result.theta_g, out / "angles.png")
    return summary


def cmd_predict(args) -> int:
    from .ingest import load_imu, load_vv_series

    strict = not args.lenient
    if args.dt <= 0:
        raise UsageError("--dt must be positive")
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    if args.variant == "svc-vv" and args.frames is None and args.vv is None:
        raise UsageError("variant svc-vv needs visual input: pass --frames DIR or --vv FILE")
    imu = load_imu(args.imu, rate=1.0 / args.dt, strict=strict)
    vv = None
    if args.variant == "svc-vv":
        vv = load_vv_series(args.vv) if args.vv else _estimate_vv(args.frames, args.crop, strict)
    elif args.frames or args.vv:
        log.warning("variant svc ignores the visual input")

    param_files = args.params or [None]
    multi = len(param_files) > 1
    jobs = []
    for i, pf in enumerate(param_files):
        out = args.out / f"{i:03d}_{Path(pf).stem}" if multi else args.out
        jobs.append(
            dict(imu=imu, vv=vv, variant=args.variant, out=str(out), params=pf, ghat_init=args.ghat_init, plot=args.plot)
        )
    if args.jobs > 1 and multi:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            summaries = list(pool.map(_predict_one, jobs))
    else:
        summaries = [_predict_one(j) for j in jobs]
    extra = {"summaries": summaries} if multi else {"summary": summaries[0]}
    write_run_config(args.out, args, extra)
    for pf, s in zip(param_files, summaries):
        print(f"{pf or args.variant}: mean MSI {s['mean_msi']:.4f} %, max MSI {s['max_msi']:.4f} %")
    return EXIT_OK


def _load_spec(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        doc = yaml.safe_load(Path(path).read_text()) or {}
    except FileNotFoundError:
        raise UsageError(f"spec file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise UsageError(f"cannot parse spec file {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("spec file must be a mapping")
    unknown = set(doc) - {"slalom", "scene"}
    if unknown:
        raise UsageError(f"unknown spec section(s): {', '.join(sorted(unknown))} (expected 'slalom', 'scene')")
    return doc


def cmd_synth(args) -> int:
    from .ingest import write_frames, write_imu
    from .synth import SceneSpec, SlalomSpec, gen_scene_sequence, gen_slalom_track

    doc = _load_spec(args.spec)
    slalom_doc = dict(doc.get("slalom") or {})
    if args.seed is not None:
        slalom_doc["seed"] = args.seed
    spec = SlalomSpec.from_dict(slalom_doc)
    track = gen_slalom_track(spec)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    write_imu(track.imu, out / "imu.csv")
    with open(out / "truth.csv", "w") as fh:
        fh.write("t,gx,gy,gz,ax,ay,az,roll_rad\n")
        cols = np.column_stack([track.imu.t, track.gravity, track.accel, track.roll]).reshape(-1, 8)
        np.savetxt(fh, cols, delimiter=",", fmt="%.17g")
    extra = {"slalom": asdict(spec), "meta": {k: v for k, v in track.meta.items() if k != "spec"}}
    if doc.get("scene") is not None:
        scene_doc = dict(doc["scene"])
        if args.seed is not None:
            scene_doc["seed"] = args.seed
        scene_spec = SceneSpec.from_dict(scene_doc)
        scene = gen_scene_sequence(scene_spec)
        write_frames(out / "frames", scene, scene.t)
        with open(out / "scene_truth.csv", "w") as fh:
            fh.write("t,theta_vv_deg\n")
            np.savetxt(fh, np.column_stack([scene.t, scene.theta_true]).reshape(-1, 2), delimiter=",", fmt="%.17g")
        extra["scene"] = asdict(scene_spec)
    write_run_config(out, args, extra)
    print(f"wrote {len(track.imu)} IMU samples to {out / 'imu.csv'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .eval import format_report, load_cohort, metrics, write_report_csv

    cohort = load_cohort(args.summaries)
    if args.exclude_zero_misc:
        cohort = cohort.without_zero_misc()
    if len(cohort) == 0:
        raise UsageError("no participants to evaluate")
    cm = cohort.confusion(args.measure)
    report = metrics(cm)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    text = format_report(cm, report, args.measure)
    (out / "report.txt").write_text(text)
    write_report_csv(out / "report.csv", cm, report, args.measure)
    if not args.no_plots:
        from .plots import cohort_bars, confusion_figure

        confusion_figure(cm, out / "confusion.png", f"{args.measure} MISC vs MSI")
        cohort_bars(cohort, args.measure, out / "summary_bars.png")
    write_run_config(out, args, {"n_participants": len(cohort), "confusion": asdict(cm), "metrics": report.as_dict()})
    print(text, end="")
    return EXIT_OK


COMMANDS = {"vv": cmd_vv, "predict": cmd_predict, "synth": cmd_synth, "eval": cmd_eval}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"svcvv: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args = _apply_config(args)
        return COMMANDS[args.command](args)
    except (SvcError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"svcvv {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        print(f"svcvv {args.command}: internal error", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
