"""Command-line front end: simulate, quadsweep, analyze, constants."""

import argparse
import csv
import datetime
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, atom_model, constants, propagate, sweep, trace_analysis

OUT_DIR_ENV = "PSRSQUEEZE_OUT_DIR"
CONFIG_DIR = Path(__file__).parent / "configs"
CSV_COLUMNS = ("detuning_MHz", "omega_MHz", "C", "gamma_over_Gamma", "power_mW",
               "v_min_dB", "v_max_dB", "theta_min_rad", "contrast_dB", "error")

_SCHEMA = {
    "sweep": {"detunings_mhz", "detuning_start_mhz", "detuning_stop_mhz",
              "detuning_step_mhz", "cooperativities", "gammas_over_Gamma",
              "analysis_freq_mhz", "zeeman_shift_over_Gamma", "n_slices"},
    "drive": {"rabi_over_Gamma", "power_mw", "cross_section_cm2"},
    "model": {"hyperfine_loss"},
}


class ConfigError(ValueError):
    def __init__(self, path, msg):
        super().__init__(f"{path}: {msg}")
        self.path = path


@dataclass
class RunManifest:
    config_hash: str
    tool_version: str
    timestamp: str
    outputs: List[str] = field(default_factory=list)
    command: str = ""
    config_path: str = ""

    def write(self, path):
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n")


def config_hash(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def resolve_config(name):
    """A file path, or the stem of a shipped config (``fig2``, ``fig4d``)."""
    p = Path(name)
    if p.is_file():
        return p
    shipped = CONFIG_DIR / (name if str(name).endswith(".toml") else f"{name}.toml")
    if shipped.is_file():
        return shipped
    raise ConfigError("config", f"no such file or shipped config: {name}")


def _number_list(tbl, key, path):
    val = tbl[key]
    if not isinstance(val, list):
        val = [val]
    if not val:
        raise ConfigError(f"{path}.{key}", "must be a non-empty list")
    for i, x in enumerate(val):
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ConfigError(f"{path}.{key}[{i}]", f"expected a number, got {x!r}")
    return [float(x) for x in val]


def _number(tbl, key, path, default=None):
    if key not in tbl:
        if default is None:
            raise ConfigError(f"{path}.{key}", "required")
        return default
    x = tbl[key]
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {x!r}")
    return x


def _detunings(tbl):
    explicit = "detunings_mhz" in tbl
    ranged = [k for k in ("detuning_start_mhz", "detuning_stop_mhz", "detuning_step_mhz")
              if k in tbl]
    if explicit and ranged:
        raise ConfigError("sweep.detunings_mhz", "give either a list or a start/stop/step range")
    if explicit:
        return _number_list(tbl, "detunings_mhz", "sweep")
    if not ranged:
        raise ConfigError("sweep.detunings_mhz", "required (or detuning_start/stop/step_mhz)")
    start = _number(tbl, "detuning_start_mhz", "sweep")
    stop = _number(tbl, "detuning_stop_mhz", "sweep")
    step = _number(tbl, "detuning_step_mhz", "sweep")
    if not step > 0:
        raise ConfigError("sweep.detuning_step_mhz", "must be > 0")
    if stop < start:
        raise ConfigError("sweep.detuning_stop_mhz", "must be >= detuning_start_mhz")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + step * k for k in range(count)]


def parse_config(data, slices=None):
    """Validate a parsed TOML document and build a :class:`SweepConfig`."""
    for section, tbl in data.items():
        if section not in _SCHEMA:
            raise ConfigError(section, "unknown section")
        if not isinstance(tbl, dict):
            raise ConfigError(section, "must be a table")
        for key in tbl:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
    sw = data.get("sweep")
    if sw is None:
        raise ConfigError("sweep", "section required")
    drv = data.get("drive")
    if drv is None:
        raise ConfigError("drive", "section required")
    model = data.get("model", {})

    dets = _detunings(sw)
    if "cooperativities" not in sw:
        raise ConfigError("sweep.cooperativities", "required")
    coops = _number_list(sw, "cooperativities", "sweep")
    if "gammas_over_Gamma" not in sw:
        raise ConfigError("sweep.gammas_over_Gamma", "required")
    gammas = _number_list(sw, "gammas_over_Gamma", "sweep")
    if ("rabi_over_Gamma" in drv) == ("power_mw" in drv):
        raise ConfigError("drive", "give exactly one of rabi_over_Gamma or power_mw")
    if "power_mw" in drv:
        drives = _number_list(drv, "power_mw", "drive")
        mode = "power"
        if "cross_section_cm2" not in drv:
            raise ConfigError("drive.cross_section_cm2", "required with power_mw")
        area = _number(drv, "cross_section_cm2", "drive")
    else:
        drives = _number_list(drv, "rabi_over_Gamma", "drive")
        mode, area = "rabi", None
    n_slices = int(_number(sw, "n_slices", "sweep", 32)) if slices is None else slices
    loss = model.get("hyperfine_loss", True)
    if not isinstance(loss, bool):
        raise ConfigError("model.hyperfine_loss", "expected true or false")
    kwargs = dict(
        detunings=dets, drives=drives, cooperativities=coops, gammas=gammas,
        omega_analysis=_number(sw, "analysis_freq_mhz", "sweep", constants.ANALYSIS_FREQ_MHZ),
        b_field=_number(sw, "zeeman_shift_over_Gamma", "sweep", 0.0),
        n_slices=n_slices, drive_mode=mode, cross_section_cm2=area, hyperfine_loss=loss,
    )
    try:
        return sweep.SweepConfig(**kwargs)
    except ValueError as exc:
        # SweepConfig messages start with the offending field name
        name, _, msg = str(exc).partition(": ")
        section = "drive" if name in ("drives", "cross_section_cm2", "drive_mode") else "sweep"
        raise ConfigError(f"{section}.{name}", msg or str(exc)) from None


def load_config(path, slices=None):
    path = resolve_config(path)
    try:
        data = tomllib.loads(Path(path).read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"not valid TOML ({exc})") from None
    return parse_config(data, slices), path


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def format_rows(rows):
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(v) for v in (
            r.detuning_mhz, r.omega_mhz, r.cooperativity, r.gamma, r.power_mw,
            r.v_min_db, r.v_max_db, r.theta_min, r.contrast_db, r.error,
        )])
    return out.getvalue()


def read_rows(path):
    """Parse a noise_vs_detuning table back into dicts of floats."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (v if k == "error" else float(v)) for k, v in r.items()} for r in rows]


def _out_dir(args):
    d = Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or "psr_output")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _manifest(args, cfg_path, outputs, out_dir):
    m = RunManifest(
        config_hash=config_hash(cfg_path) if cfg_path else "",
        tool_version=__version__,
        timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        outputs=[str(p) for p in outputs],
        command=args.command,
        config_path=str(cfg_path or ""),
    )
    m.write(out_dir / "run_manifest.json")
    return m


def cmd_simulate(args):
    cfg, path = load_config(args.config, args.slices)
    rows = sweep.run_sweep(cfg, threads=args.threads)
    out_dir = _out_dir(args)
    out = out_dir / "noise_vs_detuning.csv"
    out.write_text(format_rows(rows))
    _manifest(args, path, [out], out_dir)
    failed = sum(bool(r.error) for r in rows)
    print(f"{len(rows)} points ({failed} failed) -> {out}")
    return 0


def quadsweep_table(cfg, detuning=None, points=181):
    """(theta, V(theta) in dB) for a single-point config."""
    for name in ("drives", "cooperativities", "gammas"):
        if len(getattr(cfg, name)) != 1:
            raise ConfigError(f"sweep.{name}", "quadsweep needs a single value")
    if detuning is None:
        if len(cfg.detunings) != 1:
            raise ConfigError("sweep.detunings_mhz", "several values; pass --detuning")
        detuning = cfg.detunings[0]
    drive = atom_model.DriveParams(
        rabi=cfg.rabi_for(cfg.drives[0]), detuning=constants.mhz_to_gamma(detuning),
        zeeman_shift=cfg.b_field, analysis_freq=constants.mhz_to_gamma(cfg.omega_analysis),
    )
    medium = propagate.MediumParams(cfg.cooperativities[0], cfg.gammas[0], cfg.n_slices,
                                    cfg.hyperfine_loss)
    res = sweep.converged_propagation(drive, medium)
    theta = np.linspace(0.0, math.pi, points)
    v = propagate.to_db(propagate.quadrature_noise(res.covariance, theta))
    return theta, v, res


def cmd_quadsweep(args):
    cfg, path = load_config(args.config, args.slices)
    theta, v, _ = quadsweep_table(cfg, args.detuning, args.points)
    out_dir = _out_dir(args)
    out = out_dir / "noise_vs_quadrature.csv"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta_rad", "v_dB"])
    for t, x in zip(theta, v):
        w.writerow([repr(float(t)), repr(float(x))])
    out.write_text(buf.getvalue())
    _manifest(args, path, [out], out_dir)
    print(f"{len(theta)} angles -> {out}")
    return 0


def cmd_analyze(args):
    shot_trace = trace_analysis.read_trace(args.shot)
    shot = trace_analysis.ShotReference.from_trace(shot_trace, args.shot_uncertainty_db)
    shot_path = Path(args.shot).resolve()
    files = sorted(p for p in Path(args.trace_dir).iterdir()
                   if p.is_file() and p.suffix in (".csv", ".tsv", ".txt")
                   and p.resolve() != shot_path)
    rows = trace_analysis.summarize(files, shot)
    out_dir = _out_dir(args)
    out = out_dir / "trace_summary.csv"
    out.write_text(trace_analysis.format_summary(rows))
    _manifest(args, None, [out], out_dir)
    print(f"{len(rows)} traces ({sum(bool(r['error']) for r in rows)} flagged) -> {out}")
    return 0


def cmd_constants(args):
    print(json.dumps(constants.as_dict(), indent=2))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="psrsqueeze", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True,
                            help="TOML config file or shipped name (fig2, fig4d)")
            sp.add_argument("--slices", type=int, default=None,
                            help="initial slice count (doubled until converged)")
        sp.add_argument("--out-dir", default=None,
                        help=f"output directory (default ${OUT_DIR_ENV} or ./psr_output)")

    sp = sub.add_parser("simulate", help="noise vs detuning over a parameter grid")
    common(sp)
    sp.add_argument("--threads", type=int, default=1, help="worker processes")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("quadsweep", help="noise vs quadrature angle at one point")
    common(sp)
    sp.add_argument("--detuning", type=float, default=None, help="MHz")
    sp.add_argument("--points", type=int, default=181)
    sp.add_argument("--threads", type=int, default=1, help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_quadsweep)

    sp = sub.add_parser("analyze", help="reduce measured homodyne traces")
    sp.add_argument("trace_dir")
    sp.add_argument("--shot", required=True, help="blocked-channel (shot noise) trace")
    sp.add_argument("--shot-uncertainty-db", type=float,
                    default=constants.SHOT_NOISE_STABILITY_DB)
    common(sp, config=False)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("constants", help="print physical defaults")
    sp.set_defaults(func=cmd_constants)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "slices", None) is not None and args.slices < 1:
        print("error: --slices must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
