"""``driftfuse`` command line: simulate, fuse, evaluate."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, config_from_dict, load_config, save_config
from .logio import LogFormatError, StateEstimate, VerdictRecord, parse_log, write_log
from .measurements import Measurement
from .metrics import MetricsError, attitude_errors_deg, evaluate, histogram, match_nearest
from .presets import PRESETS, simulate
from .replay import ReplayError, replay
from .sim import DriftSample, GroundTruthSample, TruthSeries
from .state import ImuSample

log = logging.getLogger("driftfuse")


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> None:
    scenario = PRESETS[args.preset](**({"duration": args.duration} if args.duration else {}))
    run = simulate(scenario, args.seed)
    out = _outdir(args.out)
    write_log(out / "log.jsonl", run.records)
    write_log(out / "truth.jsonl", [*run.truth, *run.drift_truth])
    save_config(config_from_dict(run.config), out / "config.yaml")
    n_meas = sum(isinstance(r, Measurement) for r in run.records)
    print(f"wrote {len(run.imu)} IMU samples and {n_meas} measurements to {out}")


def write_estimates_csv(path: Path, estimates: list[StateEstimate]) -> None:
    drift_ids = list(estimates[0].drift) if estimates else []
    header = ["t"]
    for name, axes in (("p", "xyz"), ("v", "xyz"), ("q", "wxyz"), ("a_b", "xyz"), ("w_b", "xyz"), ("g", "xyz")):
        header += [f"{name}_{a}" for a in axes]
    for sid in drift_ids:
        header += [f"{sid}_p_{a}" for a in "xyz"] + [f"{sid}_q_{a}" for a in "wxyz"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for e in estimates:
            parts = [[e.t], e.p, e.v, e.q, e.a_b, e.w_b, e.g]
            for sid in drift_ids:
                parts += [e.drift[sid].p, e.drift[sid].q]
            w.writerow(np.concatenate(parts).tolist())


def cmd_fuse(args) -> None:
    cfg = load_config(args.config)
    if args.start is not None:
        cfg.start = args.start
    if args.end is not None:
        cfg.end = args.end
    parsed = parse_log(args.log)
    result = replay(cfg, parsed.records)
    out = _outdir(args.out)
    write_log(out / "estimates.jsonl", result.estimates)
    write_log(out / "verdicts.jsonl", result.verdicts)
    write_estimates_csv(out / "estimates.csv", result.estimates)
    rejected = sum(not v.verdict.accepted for v in result.verdicts)
    print(f"{len(result.estimates)} estimates, {len(result.verdicts)} verdicts ({rejected} rejected) -> {out}")


def _truth_series(samples: list[GroundTruthSample]) -> TruthSeries:
    if not samples:
        raise MetricsError("truth file holds no truth records")
    samples = sorted(samples, key=lambda s: s.t)
    return TruthSeries(*(np.array([getattr(s, k) for s in samples]) for k in ("t", "p", "v", "a", "q", "w")))


def cmd_evaluate(args) -> None:
    estimates = [r for r in parse_log(args.estimates).records if isinstance(r, StateEstimate)]
    truth_records = parse_log(args.truth).records
    truth = _truth_series([r for r in truth_records if isinstance(r, GroundTruthSample)])
    drift_truth = [r for r in truth_records if isinstance(r, DriftSample)]
    measurements = []
    if args.log:
        measurements = [r for r in parse_log(args.log).records if isinstance(r, Measurement)]
    if not estimates:
        raise MetricsError("estimate file holds no estimates")
    report = evaluate(estimates, truth, measurements, drift_truth, unaligned=args.unaligned)
    out = _outdir(args.out)
    report.write_csv(out / "rmse.csv")
    text = report.to_text()
    (out / "summary.txt").write_text(text, encoding="utf-8")

    i, j = match_nearest([e.t for e in estimates], truth.t)
    dp = np.array([estimates[k].p for k in i]) - truth.p[j]
    try:
        histogram(dp, bins=args.bins).write_csv(out / "hist_position.csv")
        att = attitude_errors_deg([estimates[k].q for k in i], truth.q[j])
        histogram(att, bins=args.bins).write_csv(out / "hist_attitude.csv", ("roll", "pitch", "yaw"))
    except MetricsError as exc:
        log.warning("histograms skipped: %s", exc)
    sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="driftfuse", description="Multi-sensor error-state Kalman filter with drift estimation.")
    p.add_argument("-v", "--verbose", action="store_true", help="log debug messages")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic flight log")
    s.add_argument("--preset", choices=sorted(PRESETS), default="lab")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--duration", type=float, help="flight length in seconds")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fuse", help="run the filter over a log")
    f.add_argument("--config", required=True)
    f.add_argument("--log", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--start", type=float, help="ignore records before this time [s]")
    f.add_argument("--end", type=float, help="ignore records after this time [s]")
    f.set_defaults(func=cmd_fuse)

    e = sub.add_parser("evaluate", help="compare estimates and sensors with ground truth")
    e.add_argument("--estimates", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--log", help="measurement log, for per-sensor rows")
    e.add_argument("--out", required=True)
    e.add_argument("--bins", type=int, default=40)
    e.add_argument("--unaligned", action="store_true", help="also report drift sensors without alignment")
    e.set_defaults(func=cmd_evaluate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigError, LogFormatError, ReplayError, MetricsError, ValueError, OSError) as exc:
        print(f"driftfuse {args.command}: error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
