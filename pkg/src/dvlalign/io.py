"""Configuration, sensor-log CSV files and run reports.

Sensor logs
-----------
Headered CSV. Metadata lines come first, each ``# key: <json value>``, then
one line of column names, then data rows. Floats are written with ``repr``,
the shortest text that parses back to the same double, so
write -> read -> write is byte-identical.

======  ===========================================================
kind    columns
======  ===========================================================
imu     ``t_s, wx, wy, wz`` (rad/s), ``fx, fy, fz`` (m/s^2)
dvl     ``t_s, vx, vy, vz`` (m/s, body frame)
truth   ``t_s, pitch, roll, yaw`` (rad), ``ve, vn, vu`` (m/s)
spikes  ``epoch, t_s, dvx, dvy, dvz`` (m/s, injected DVL error)
======  ===========================================================

IMU rows are interval averages over ``(t - dt, t]``.

Configuration
-------------
YAML mapping; every key is optional and unknown keys are rejected::

    seed: 0
    duration_s: 600.0
    imu_rate_hz: 200.0
    dvl_rate_hz: 1.0
    site: {latitude_deg, longitude_deg, gravity (null = normal gravity), earth_rate}
    trajectory: {half_period_s, yaw_rate_deg_s, speed_m_s, initial_yaw_deg,
                 pitch_amplitude_deg, pitch_period_s, roll_amplitude_deg, roll_period_s}
    imu_errors: {gyro_bias_deg_h, gyro_arw_deg_rth, accel_bias_ug, accel_noise_ug_rthz}
    dvl_errors: {noise_std_m_s, outlier_std_m_s, outlier_prob, corrupt_first}
    alignment: {scheme, huber_threshold, meas_var, process_var, initial_var,
                innovation_scale, burn_in, max_reweight_iter, v0_guard, v0_guard_n}

See ``DEFAULT_CONFIG`` for the default of every key.

Run report
----------
JSON with ``schema_version`` ``"MAJOR.MINOR"``; readers accept major
version 1 only.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .exceptions import ConfigError, StreamError
from .kinematics import EARTH_RATE, GeoParams
from .pipeline import AlignerConfig, AlignmentTrace
from .simulator import (
    DEG,
    DEG_PER_HOUR,
    MICRO_G,
    DvlErrorModel,
    ImuErrorModel,
    TrajectoryProfile,
)

SCHEMA_VERSION = "1.0"
CHECKPOINTS_S = (100.0, 200.0, 300.0)
RATE_TOL_S = 1e-9

COLUMNS = {
    "imu": ("t_s", "wx", "wy", "wz", "fx", "fy", "fz"),
    "dvl": ("t_s", "vx", "vy", "vz"),
    "truth": ("t_s", "pitch", "roll", "yaw", "ve", "vn", "vu"),
    "spikes": ("epoch", "t_s", "dvx", "dvy", "dvz"),
}
INT_COLUMNS = frozenset({"epoch"})

DEFAULT_CONFIG = {
    "seed": 0,
    "duration_s": 600.0,
    "imu_rate_hz": 200.0,
    "dvl_rate_hz": 1.0,
    "site": {
        "latitude_deg": 32.057313,
        "longitude_deg": 118.786365,
        "gravity": None,
        "earth_rate": EARTH_RATE,
    },
    "trajectory": {
        "half_period_s": 50.0,
        "yaw_rate_deg_s": 3.0,
        "speed_m_s": 5.0,
        "initial_yaw_deg": 30.0,
        "pitch_amplitude_deg": 2.0,
        "pitch_period_s": 8.0,
        "roll_amplitude_deg": 2.0,
        "roll_period_s": 10.0,
    },
    "imu_errors": {
        "gyro_bias_deg_h": 0.02,
        "gyro_arw_deg_rth": 0.005,
        "accel_bias_ug": 50.0,
        "accel_noise_ug_rthz": 50.0,
    },
    "dvl_errors": {
        "noise_std_m_s": 0.1,
        "outlier_std_m_s": 30.0,
        "outlier_prob": 0.02,
        "corrupt_first": False,
    },
    "alignment": {
        "scheme": 2,
        "huber_threshold": 1.345,
        "meas_var": 0.01,
        "process_var": 1e-6,
        "initial_var": 1e10,
        "innovation_scale": "innovation",
        "burn_in": 0,
        "max_reweight_iter": 1,
        "v0_guard": False,
        "v0_guard_n": 5,
    },
}


class LogFormatError(StreamError):
    """A sensor log or report does not follow its schema."""


# ---------------------------------------------------------------- config


def _merge(defaults: dict, user: dict, path: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in user.items():
        where = f"{path}{key}"
        if key not in defaults:
            raise ConfigError(f"unknown config key {where!r}")
        ref = defaults[key]
        if isinstance(ref, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where!r} must be a mapping")
            out[key] = _merge(ref, value, where + ".")
        elif isinstance(ref, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{where!r} must be true or false")
            out[key] = value
        elif isinstance(ref, str):
            if not isinstance(value, str):
                raise ConfigError(f"{where!r} must be a string")
            out[key] = value
        elif key == "scheme":
            out[key] = value
        elif ref is None and value is None:
            out[key] = None
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{where!r} must be a number")
            if isinstance(ref, int):
                if not float(value).is_integer():
                    raise ConfigError(f"{where!r} must be an integer")
                out[key] = int(value)
            else:
                out[key] = float(value)
    return out


def load_config(source=None) -> dict:
    """Read a YAML config (path, mapping or ``None``) merged over the defaults.

    Raises
    ------
    ConfigError
        Unknown keys, wrong value types or unparsable YAML.
    """
    if source is None:
        user = {}
    elif isinstance(source, dict):
        user = source
    else:
        try:
            user = yaml.safe_load(Path(source).read_text()) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse {source}: {e}") from None
    if not isinstance(user, dict):
        raise ConfigError("config must be a mapping")
    cfg = _merge(DEFAULT_CONFIG, user, "")
    if not cfg["duration_s"] > 0 or not cfg["imu_rate_hz"] > 0 or not cfg["dvl_rate_hz"] > 0:
        raise ConfigError("duration and rates must be positive")
    return cfg


def geo_from_config(cfg: dict) -> GeoParams:
    s = cfg["site"]
    return GeoParams(s["latitude_deg"] * DEG, s["gravity"], s["earth_rate"])


def profile_from_config(cfg: dict) -> TrajectoryProfile:
    tr, s = cfg["trajectory"], cfg["site"]
    return TrajectoryProfile.s_turn(
        duration=cfg["duration_s"], half_period=tr["half_period_s"],
        yaw_rate=tr["yaw_rate_deg_s"] * DEG, speed=tr["speed_m_s"],
        initial_yaw=tr["initial_yaw_deg"] * DEG,
        pitch_amplitude=tr["pitch_amplitude_deg"] * DEG, pitch_period=tr["pitch_period_s"],
        roll_amplitude=tr["roll_amplitude_deg"] * DEG, roll_period=tr["roll_period_s"],
        latitude=s["latitude_deg"] * DEG, longitude=s["longitude_deg"] * DEG)


def imu_errors_from_config(cfg: dict, seed: int | None = None) -> ImuErrorModel:
    e = cfg["imu_errors"]
    return ImuErrorModel(
        gyro_bias=e["gyro_bias_deg_h"] * DEG_PER_HOUR,
        gyro_arw=e["gyro_arw_deg_rth"] * DEG / 60.0,
        accel_bias=e["accel_bias_ug"] * MICRO_G,
        accel_noise=e["accel_noise_ug_rthz"] * MICRO_G,
        seed=cfg["seed"] if seed is None else seed)


def dvl_errors_from_config(cfg: dict, seed: int | None = None) -> DvlErrorModel:
    e = cfg["dvl_errors"]
    return DvlErrorModel(e["noise_std_m_s"], e["outlier_std_m_s"], e["outlier_prob"],
                         cfg["seed"] if seed is None else seed, e["corrupt_first"])


def aligner_config_from_config(cfg: dict, scheme=None) -> AlignerConfig:
    a = dict(cfg["alignment"])
    if scheme is not None:
        a["scheme"] = scheme
    return AlignerConfig(geo=geo_from_config(cfg), dt_s=1.0 / cfg["imu_rate_hz"],
                         dt_d=1.0 / cfg["dvl_rate_hz"], **a)


# ---------------------------------------------------------------- sensor logs


@dataclass
class SensorLog:
    """Timestamped rows of one stream plus header metadata.

    ``meta["rate_hz"]``, when present, must match the row spacing.
    """

    kind: str
    data: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in COLUMNS:
            raise LogFormatError(f"unknown log kind {self.kind!r}")
        self.data = np.asarray(self.data, dtype=float).reshape(-1, len(self.columns))
        self.validate()

    @property
    def columns(self) -> tuple:
        return COLUMNS[self.kind]

    @property
    def t(self) -> np.ndarray:
        return self.data[:, self.columns.index("t_s")]

    def validate(self) -> None:
        t = self.t
        if not np.all(np.isfinite(self.data)):
            raise LogFormatError(f"{self.kind} log contains non-finite values")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise LogFormatError(f"{self.kind} timestamps are not strictly increasing")
        rate = self.meta.get("rate_hz")
        if rate is not None and len(t) > 1:
            if np.max(np.abs(np.diff(t) - 1.0 / rate)) > RATE_TOL_S:
                raise LogFormatError(f"{self.kind} row spacing does not match rate {rate} Hz")


def _fmt(col: str):
    if col in INT_COLUMNS:
        return lambda v: str(int(v))
    return repr


def write_log(log: SensorLog, path) -> Path:
    path = Path(path)
    fmts = [_fmt(c) for c in log.columns]
    lines = [f"# kind: {json.dumps(log.kind)}"]
    lines += [f"# {k}: {json.dumps(v)}" for k, v in log.meta.items()]
    lines.append(",".join(log.columns))
    for row in log.data.tolist():
        lines.append(",".join(f(v) for f, v in zip(fmts, row)))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_log(path, kind: str | None = None) -> SensorLog:
    """Parse a sensor log; ``kind`` additionally checks the declared kind."""
    path = Path(path)
    lines = path.read_text().splitlines()
    meta = {}
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        key, sep, value = lines[i][1:].partition(":")
        if not sep:
            raise LogFormatError(f"{path}:{i + 1}: malformed header line")
        try:
            meta[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            raise LogFormatError(f"{path}:{i + 1}: header value is not JSON") from None
        i += 1
    declared = meta.pop("kind", None)
    if declared not in COLUMNS:
        raise LogFormatError(f"{path}: missing or unknown log kind {declared!r}")
    if kind is not None and declared != kind:
        raise LogFormatError(f"{path}: expected a {kind} log, found {declared}")
    if i >= len(lines) or tuple(lines[i].split(",")) != COLUMNS[declared]:
        raise LogFormatError(f"{path}: column header does not match the {declared} schema")
    body = lines[i + 1:]
    ncol = len(COLUMNS[declared])
    if body:
        try:
            data = np.loadtxt(body, delimiter=",", ndmin=2)
        except ValueError as e:
            raise LogFormatError(f"{path}: {e}") from None
    else:
        data = np.empty((0, ncol))
    if data.shape[1] != ncol:
        raise LogFormatError(f"{path}: expected {ncol} columns, got {data.shape[1]}")
    return SensorLog(declared, data, meta)


# ---------------------------------------------------------------- run report


@dataclass
class RunReport:
    """Per-epoch attitude errors and filter weights with checkpoint summary.

    ``epochs`` maps column names to equal-length lists: ``t_s``, estimated
    ``pitch_deg``/``roll_deg``/``yaw_deg``, errors ``*_err_deg`` (``None``
    without truth) and Huber weights ``weight_x``/``weight_y``/``weight_z``.
    ``summary`` maps checkpoint time strings to the errors there.
    """

    scheme: object
    epochs: dict
    summary: dict
    config: dict
    schema_version: str = SCHEMA_VERSION

    @property
    def checkpoints(self) -> tuple:
        return tuple(sorted(self.summary, key=float))

    def error_at(self, t: float, angle: str) -> float:
        return self.summary[_ckey(t)][f"{angle}_err_deg"]

    def to_dict(self) -> dict:
        return {"schema_version": self.schema_version, "scheme": self.scheme,
                "config": self.config, "summary": self.summary, "epochs": self.epochs}


def _ckey(t: float) -> str:
    return repr(float(t))


def _none_if_nan(a):
    return [None if not np.isfinite(v) else float(v) for v in np.asarray(a, dtype=float)]


def build_report(trace: AlignmentTrace, scheme, config: dict,
                 checkpoints=CHECKPOINTS_S) -> RunReport:
    t = trace.t
    eul = np.degrees(trace.euler)
    err = trace.errors
    err = np.full_like(eul, np.nan) if err is None else np.degrees(err)
    w = trace.column("weights")
    epochs = {"t_s": t.tolist()}
    for j, name in enumerate(("pitch", "roll", "yaw")):
        epochs[f"{name}_deg"] = eul[:, j].tolist()
        epochs[f"{name}_err_deg"] = _none_if_nan(err[:, j])
    for j, axis in enumerate("xyz"):
        epochs[f"weight_{axis}"] = w[:, j].tolist()
    summary = {}
    for c in checkpoints:
        hit = np.flatnonzero(np.abs(t - c) < 1e-6)
        if hit.size:
            i = hit[0]
            summary[_ckey(c)] = {f"{n}_err_deg": epochs[f"{n}_err_deg"][i]
                                 for n in ("pitch", "roll", "yaw")}
    return RunReport(scheme, epochs, summary, config)


def write_report(report: RunReport, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), indent=1) + "\n")
    return path


def read_report(path) -> RunReport:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise LogFormatError(f"{path}: not a JSON report ({e})") from None
    version = str(d.get("schema_version", ""))
    if version.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
        raise LogFormatError(f"{path}: unsupported report schema version {version!r}")
    try:
        return RunReport(d["scheme"], d["epochs"], d["summary"], d["config"], version)
    except KeyError as e:
        raise LogFormatError(f"{path}: report lacks field {e}") from None


# ---------------------------------------------------------------- plot data


def write_observation_vectors(trace: AlignmentTrace, path) -> Path:
    """Tidy CSV ``t_s,series,axis,value`` of raw, reconstructed and reference vectors."""
    lines = ["t_s,series,axis,value"]
    series = (("raw", trace.column("beta_raw")), ("reconstructed", trace.column("beta_rec")),
              ("reference", trace.column("alpha")))
    t = trace.t.tolist()
    for name, arr in series:
        for j, axis in enumerate("xyz"):
            lines += [f"{ti!r},{name},{axis},{v!r}" for ti, v in zip(t, arr[:, j].tolist())]
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def write_attitude_errors(report: RunReport, path) -> Path:
    """Tidy CSV ``t_s,angle,error_deg``; empty when the run had no truth."""
    lines = ["t_s,angle,error_deg"]
    ep = report.epochs
    for name in ("pitch", "roll", "yaw"):
        lines += [f"{t!r},{name},{e!r}" for t, e in zip(ep["t_s"], ep[f"{name}_err_deg"])
                  if e is not None]
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


# ---------------------------------------------------------------- criteria


def load_criteria(path) -> list[dict]:
    """Acceptance rules for :func:`evaluate_criteria`.

    The YAML file holds ``rules:``, a list of either::

        {checkpoint_s: 200, schemes: [2, 3, 4],
         max_abs_error_deg: {pitch: 0.01, roll: 0.01, yaw: 1.0}}

    or::

        {checkpoint_s: 200, angle: yaw, worse: 1, better: 2}
    """
    try:
        d = yaml.safe_load(Path(path).read_text()) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None
    rules = d.get("rules") if isinstance(d, dict) else None
    if not isinstance(rules, list) or not rules:
        raise ConfigError("criteria file needs a non-empty 'rules' list")
    for r in rules:
        if not isinstance(r, dict) or "checkpoint_s" not in r:
            raise ConfigError("every rule needs a checkpoint_s")
        if not (("max_abs_error_deg" in r) ^ ({"worse", "better"} <= set(r))):
            raise ConfigError("a rule has either max_abs_error_deg or worse/better")
    return rules


def evaluate_criteria(reports: list[RunReport], rules: list[dict]) -> list[tuple[str, bool]]:
    """Check each rule; returns ``(description, passed)`` pairs."""
    by_scheme = {str(r.scheme): r for r in reports}
    out = []

    def err(scheme, t, angle):
        rep = by_scheme.get(str(scheme))
        if rep is None or _ckey(t) not in rep.summary:
            return None
        return rep.error_at(t, angle)

    for r in rules:
        t = float(r["checkpoint_s"])
        if "max_abs_error_deg" in r:
            for s in r.get("schemes", list(by_scheme)):
                for angle, bound in r["max_abs_error_deg"].items():
                    e = err(s, t, angle)
                    ok = e is not None and abs(e) < bound
                    out.append((f"scheme {s} |{angle}| at {t:g} s < {bound:g} deg "
                                f"(got {e if e is None else f'{abs(e):.4g}'})", ok))
        else:
            angle = r.get("angle", "yaw")
            ew, eb = err(r["worse"], t, angle), err(r["better"], t, angle)
            ok = ew is not None and eb is not None and abs(ew) > abs(eb)
            out.append((f"scheme {r['worse']} |{angle}| at {t:g} s exceeds scheme "
                        f"{r['better']}'s", ok))
    return out


def comparison_table(reports: list[RunReport], labels=None) -> str:
    """Side-by-side checkpoint errors, one column per report."""
    if len(reports) < 2:
        raise ValueError("need at least two reports to compare")
    cps = reports[0].checkpoints
    for r in reports[1:]:
        if r.checkpoints != cps:
            raise LogFormatError("reports have different checkpoints")
    labels = labels or [f"scheme {r.scheme}" for r in reports]
    head = f"{'t_s':>7} {'angle':>6} " + " ".join(f"{lab:>12}" for lab in labels)
    rows = [head]
    for c in cps:
        for angle in ("pitch", "roll", "yaw"):
            vals = [r.summary[c][f"{angle}_err_deg"] for r in reports]
            cells = " ".join(f"{'n/a':>12}" if v is None else f"{v:12.5f}" for v in vals)
            rows.append(f"{float(c):7g} {angle:>6} {cells}")
    return "\n".join(rows)
