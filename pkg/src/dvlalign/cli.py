"""Command line: ``dvlalign simulate | align | compare``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(missing, malformed or inconsistent files), 3 acceptance failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .exceptions import AlignmentError, ConfigError, StreamError
from .pipeline import SCHEME_OUTLIERS, run
from .simulator import gen_truth, synthesize_dvl, synthesize_imu

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ACCEPTANCE = 0, 1, 2, 3

log = logging.getLogger("dvlalign")

FILES = {"imu": "imu.csv", "dvl": "dvl.csv", "dvl_clean": "dvl_clean.csv",
         "truth": "truth.csv", "spikes": "spikes.csv"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dvlalign", description="DVL-aided robust in-motion alignment")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="write synthetic IMU, DVL and truth logs")
    s.add_argument("--config", type=Path)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", type=Path, required=True)

    a = sub.add_parser("align", help="run the alignment on a log directory")
    a.add_argument("--logs", type=Path, required=True)
    a.add_argument("--scheme", type=int, choices=(1, 2, 3, 4), required=True)
    a.add_argument("--config", type=Path,
                   help="defaults to the configuration echoed in the IMU log")
    a.add_argument("--dvl", type=Path, help="DVL log (default: dvl.csv, or dvl_clean.csv "
                                            "for schemes 3 and 4 when present)")
    a.add_argument("--out", type=Path, required=True)

    c = sub.add_parser("compare", help="tabulate reports and check acceptance rules")
    c.add_argument("reports", type=Path, nargs="+")
    c.add_argument("--criteria", type=Path)
    return p


def _header(cfg: dict, kind: str, rate_hz: float, start: float, seed: int) -> dict:
    # spike rows are sparse, so their log carries the source rate under another key
    meta = {"dvl_rate_hz" if kind == "spikes" else "rate_hz": rate_hz, "start_s": start,
            "seed": seed,
            "units": {"imu": "s, rad/s, m/s^2", "dvl": "s, m/s", "truth": "s, rad, m/s",
                      "spikes": "epoch, s, m/s"}[kind]}
    if kind == "imu":
        meta["imu_errors"] = cfg["imu_errors"]
        meta["config"] = cfg
    if kind in ("dvl", "spikes"):
        meta["dvl_errors"] = cfg["dvl_errors"]
    return meta


def cmd_simulate(args) -> int:
    cfg = io.load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    seed = cfg["seed"]
    geo = io.geo_from_config(cfg)
    profile = io.profile_from_config(cfg)
    dt_s, dt_d, T = 1.0 / cfg["imu_rate_hz"], 1.0 / cfg["dvl_rate_hz"], cfg["duration_s"]
    imu = synthesize_imu(profile, io.imu_errors_from_config(cfg), geo, dt_s, T)
    dvl_err = io.dvl_errors_from_config(cfg)
    dvl = synthesize_dvl(profile, dvl_err, dt_d, T)
    clean_cfg = {**cfg, "dvl_errors": {**cfg["dvl_errors"], "outlier_prob": 0.0}}
    clean = synthesize_dvl(profile, io.dvl_errors_from_config(clean_cfg), dt_d, T)
    truth = gen_truth(profile, dt_d, T)
    n = len(dvl.t)

    args.out.mkdir(parents=True, exist_ok=True)
    out = {k: args.out / v for k, v in FILES.items()}
    io.write_log(io.SensorLog("imu", np.column_stack([imu.t, imu.gyro, imu.accel]),
                              _header(cfg, "imu", cfg["imu_rate_hz"], float(imu.t[0]), seed)),
                 out["imu"])
    for key, d, c in (("dvl", dvl, cfg), ("dvl_clean", clean, clean_cfg)):
        io.write_log(io.SensorLog("dvl", np.column_stack([d.t, d.v_b]),
                                  _header(c, "dvl", cfg["dvl_rate_hz"], 0.0, seed)), out[key])
    io.write_log(io.SensorLog("truth", np.column_stack([truth.t[:n], truth.euler[:n],
                                                        truth.v_n[:n]]),
                              _header(cfg, "truth", cfg["dvl_rate_hz"], 0.0, seed)),
                 out["truth"])
    idx = np.flatnonzero(dvl.spike)
    spikes = np.column_stack([idx, dvl.t[idx], dvl.error[idx]])
    io.write_log(io.SensorLog("spikes", spikes, _header(cfg, "spikes", cfg["dvl_rate_hz"],
                                                        0.0, seed)), out["spikes"])
    log.info("wrote %d IMU rows, %d DVL rows, %d spikes to %s", len(imu.t), n, len(idx),
             args.out)
    return EXIT_OK


def _check_rate(slog: io.SensorLog, rate_hz: float, name: str) -> None:
    declared = slog.meta.get("rate_hz")
    if declared is not None and abs(declared - rate_hz) > 1e-9 * rate_hz:
        raise StreamError(f"{name} log rate {declared} Hz differs from configured {rate_hz} Hz")


def cmd_align(args) -> int:
    imu_path = args.logs / FILES["imu"]
    imu = io.read_log(imu_path, "imu")
    if args.config is not None:
        cfg = io.load_config(args.config)
    else:
        cfg = io.load_config(imu.meta.get("config"))
    dvl_path = args.dvl
    if dvl_path is None:
        clean = args.logs / FILES["dvl_clean"]
        use_clean = not SCHEME_OUTLIERS[args.scheme] and clean.exists()
        dvl_path = clean if use_clean else args.logs / FILES["dvl"]
    dvl = io.read_log(dvl_path, "dvl")
    _check_rate(imu, cfg["imu_rate_hz"], "IMU")
    _check_rate(dvl, cfg["dvl_rate_hz"], "DVL")

    p = dvl.meta.get("dvl_errors", {}).get("outlier_prob")
    if p is not None and (p > 0) != SCHEME_OUTLIERS[args.scheme]:
        warnings.warn(f"scheme {args.scheme} is meant for DVL data "
                      f"{'with' if SCHEME_OUTLIERS[args.scheme] else 'without'} outliers, "
                      f"but {dvl_path.name} has outlier probability {p}", stacklevel=2)

    truth_path = args.logs / FILES["truth"]
    truth = None
    if truth_path.exists():
        tl = io.read_log(truth_path, "truth")
        truth = (tl.t, tl.data[:, 1:4])

    config = io.aligner_config_from_config(cfg, args.scheme)
    trace = run(config, imu.data, dvl.data, truth)
    echo = {**cfg, "alignment": {**cfg["alignment"], "scheme": args.scheme},
            "inputs": {"imu": str(imu_path), "dvl": str(dvl_path)}}
    report = io.build_report(trace, args.scheme, echo)

    args.out.mkdir(parents=True, exist_ok=True)
    io.write_report(report, args.out / "report.json")
    io.write_observation_vectors(trace, args.out / "observation_vectors.csv")
    io.write_attitude_errors(report, args.out / "attitude_errors.csv")
    for c in report.checkpoints:
        s = report.summary[c]
        log.info("t=%s s pitch %s roll %s yaw %s deg", c, s["pitch_err_deg"],
                 s["roll_err_deg"], s["yaw_err_deg"])
    return EXIT_OK


def cmd_compare(args) -> int:
    if len(args.reports) < 2:
        raise UsageError("compare needs at least two reports")
    reports = [io.read_report(p) for p in args.reports]
    print(io.comparison_table(reports))
    if args.criteria is None:
        return EXIT_OK
    results = io.evaluate_criteria(reports, io.load_criteria(args.criteria))
    for desc, ok in results:
        print(f"{'PASS' if ok else 'FAIL'} {desc}")
    return EXIT_OK if all(ok for _, ok in results) else EXIT_ACCEPTANCE


COMMANDS = {"simulate": cmd_simulate, "align": cmd_align, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"dvlalign: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as e:
        print(f"dvlalign: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (StreamError, AlignmentError, OSError, ValueError) as e:
        print(f"dvlalign: data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
