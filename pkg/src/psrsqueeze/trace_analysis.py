"""Reduction of homodyne noise traces (spectrum-analyser power at a fixed
sideband versus a local-oscillator phase sweep) to min/max noise in dB
relative to shot noise.

Trace files are comma- or tab-separated text. Metadata lines start with
``#`` and hold ``key = value`` pairs (rbw_hz, center_freq_hz, averages and
optionally detuning_mhz); the first non-comment line names the columns.
"""

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.optimize

from .constants import SHOT_NOISE_STABILITY_DB

MIN_SAMPLES = 16
SUMMARY_COLUMNS = ("detuning_MHz", "min_dB", "max_dB", "contrast_dB", "fit_rms",
                   "raw_min_dB", "raw_max_dB", "fit_ok", "error", "file")


class MetadataMismatch(ValueError):
    pass


class PhysicalConsistencyWarning(UserWarning):
    """Extrema imply a quadrature product below the uncertainty bound."""


@dataclass(frozen=True)
class HomodyneTrace:
    sweep: np.ndarray  # arbitrary sweep coordinate (PZT voltage, time ...)
    power_dbm: np.ndarray
    rbw: float  # Hz
    center_freq: float  # Hz
    n_averages: int = 1
    meta: Dict[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        x = np.asarray(self.sweep, dtype=float)
        y = np.asarray(self.power_dbm, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("sweep and power_dbm must be 1-d arrays of equal length")
        if len(x) < MIN_SAMPLES:
            raise ValueError(f"trace needs at least {MIN_SAMPLES} samples, got {len(x)}")
        if not self.rbw > 0:
            raise ValueError("rbw must be > 0")
        if self.n_averages < 1:
            raise ValueError("n_averages must be >= 1")
        object.__setattr__(self, "sweep", x)
        object.__setattr__(self, "power_dbm", y)


@dataclass(frozen=True)
class ShotReference:
    mean_dbm: float
    uncertainty_db: float = SHOT_NOISE_STABILITY_DB
    rbw: Optional[float] = None
    center_freq: Optional[float] = None

    def __post_init__(self):
        if self.uncertainty_db < 0:
            raise ValueError("uncertainty_db must be >= 0")

    @classmethod
    def from_trace(cls, trace, uncertainty_db=SHOT_NOISE_STABILITY_DB):
        """Shot level as the mean of a blocked-channel trace (averaged in linear power)."""
        mean = 10 * np.log10(np.mean(10 ** (trace.power_dbm / 10)))
        return cls(float(mean), uncertainty_db, trace.rbw, trace.center_freq)


@dataclass(frozen=True)
class CalibratedTrace:
    sweep: np.ndarray
    noise_db: np.ndarray  # relative to shot noise
    uncertainty_db: float
    meta: Dict[str, str] = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class Extrema:
    min_db: float
    max_db: float
    fit_params: Optional[Dict[str, float]]  # a, b, s, c in linear units
    fit_rms: float
    raw_min_db: float
    raw_max_db: float
    fit_ok: bool

    @property
    def contrast_db(self):
        return self.max_db - self.min_db


def calibrate(trace, shot):
    """Noise in dB relative to the shot level; metadata must match."""
    for key in ("rbw", "center_freq"):
        ref = getattr(shot, key)
        if ref is not None and not math.isclose(ref, getattr(trace, key), rel_tol=1e-9):
            raise MetadataMismatch(
                f"{key}: trace has {getattr(trace, key)!r}, shot reference {ref!r}"
            )
    return CalibratedTrace(trace.sweep, trace.power_dbm - shot.mean_dbm,
                           shot.uncertainty_db, dict(trace.meta))


def sinusoid(x, a, b, s, c):
    return a + b * np.cos(2 * s * x + c)


def _initial_guess(x, y):
    """Starting point from the strongest FFT component of a uniform resample."""
    order = np.argsort(x)
    x, y = x[order], y[order]
    grid = np.linspace(x[0], x[-1], len(x))
    yg = np.interp(grid, x, y)
    spec = np.fft.rfft(yg - yg.mean())
    k = int(np.argmax(np.abs(spec[1:]))) + 1
    span = grid[1] - grid[0]
    freq = k / (len(grid) * span)  # cycles per unit x
    s = math.pi * freq
    a = float(y.mean())
    # project on cos/sin at that frequency for amplitude and phase
    cs, sn = np.cos(2 * s * x), np.sin(2 * s * x)
    basis = np.column_stack([np.ones_like(x), cs, sn])
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    b = math.hypot(coef[1], coef[2])
    c = math.atan2(-coef[2], coef[1])
    return [coef[0] if np.isfinite(coef[0]) else a, b, s, c]


def fit_sinusoid(x, lin):
    """Least-squares fit of a + b cos(2 s x + c); returns (params, rms) or raises."""
    p0 = _initial_guess(x, lin)
    if p0[1] == 0:
        return np.array([p0[0], 0.0, p0[2], 0.0]), float(np.sqrt(np.mean((lin - p0[0]) ** 2)))
    with warnings.catch_warnings():
        # an exact fit leaves the covariance undefined, which is harmless here
        warnings.simplefilter("ignore", scipy.optimize.OptimizeWarning)
        popt, _ = scipy.optimize.curve_fit(sinusoid, x, lin, p0=p0, maxfev=20000,
                                           xtol=1e-14, ftol=1e-14, gtol=1e-14)
    if not np.all(np.isfinite(popt)):
        raise RuntimeError("fit produced non-finite parameters")
    rms = float(np.sqrt(np.mean((sinusoid(x, *popt) - lin) ** 2)))
    return popt, rms


def extract_extrema(cal):
    """Min and max noise (dB) from a fit in linear power units.

    The sweep coordinate is taken as affine in the LO phase with unknown
    rate s. If the fit fails, raw sample extrema are returned with
    ``fit_ok=False``.
    """
    x = np.asarray(cal.sweep, dtype=float)
    lin = 10 ** (np.asarray(cal.noise_db) / 10)
    raw_min, raw_max = float(np.min(cal.noise_db)), float(np.max(cal.noise_db))
    try:
        popt, rms = fit_sinusoid(x, lin)
        a, b = popt[0], abs(popt[1])
        if a - b <= 0:
            raise RuntimeError("fitted minimum is not a positive power")
        lo, hi = 10 * math.log10(a - b), 10 * math.log10(a + b)
        params = dict(zip("absc", map(float, popt)))
        ok = True
    except (RuntimeError, ValueError, np.linalg.LinAlgError):
        lo, hi, params, rms, ok = raw_min, raw_max, None, math.nan, False
    if 10 ** (lo / 10) * 10 ** (hi / 10) < 1 - 1e-9:
        warnings.warn(
            f"min {lo:.3f} dB with max {hi:.3f} dB is below the uncertainty bound",
            PhysicalConsistencyWarning, stacklevel=2,
        )
    return Extrema(lo, hi, params, rms, raw_min, raw_max, ok)


def _sniff_delimiter(line):
    return "\t" if "\t" in line else ","


def parse_trace(text, name="<trace>"):
    meta = {}
    body = []
    for line in text.splitlines():
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            if "=" in s:
                k, v = s[1:].split("=", 1)
                meta[k.strip().lower()] = v.strip()
            continue
        body.append(s)
    if not body:
        raise ValueError(f"{name}: no header line")
    delim = _sniff_delimiter(body[0])
    rows = list(csv.reader(body, delimiter=delim))
    header = [h.strip().lower() for h in rows[0]]
    if len(header) < 2:
        raise ValueError(f"{name}: need a sweep column and a power column")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    if data.ndim != 2 or data.shape[1] < 2:
        raise ValueError(f"{name}: no data rows")
    power_col = next((i for i, h in enumerate(header) if "dbm" in h or "power" in h), 1)
    sweep_col = 0 if power_col != 0 else 1
    for key in ("rbw_hz", "center_freq_hz"):
        if key not in meta:
            raise ValueError(f"{name}: missing metadata '{key}'")
    return HomodyneTrace(
        data[:, sweep_col], data[:, power_col],
        rbw=float(meta["rbw_hz"]), center_freq=float(meta["center_freq_hz"]),
        n_averages=int(float(meta.get("averages", 1))), meta=meta,
    )


def read_trace(path):
    path = Path(path)
    return parse_trace(path.read_text(), name=str(path))


def format_trace(trace, delimiter=","):
    out = io.StringIO()
    out.write(f"# rbw_hz = {trace.rbw!r}\n")
    out.write(f"# center_freq_hz = {trace.center_freq!r}\n")
    out.write(f"# averages = {trace.n_averages}\n")
    for k, v in trace.meta.items():
        if k not in ("rbw_hz", "center_freq_hz", "averages"):
            out.write(f"# {k} = {v}\n")
    w = csv.writer(out, delimiter=delimiter, lineterminator="\n")
    w.writerow(["sweep", "power_dBm"])
    for x, y in zip(trace.sweep, trace.power_dbm):
        w.writerow([repr(float(x)), repr(float(y))])
    return out.getvalue()


def write_trace(path, trace, delimiter=","):
    Path(path).write_text(format_trace(trace, delimiter))


def summarize(paths: Sequence, shot) -> List[Dict]:
    """One summary row per trace file; failures are flagged, not raised."""
    rows = []
    for p in paths:
        row = dict.fromkeys(SUMMARY_COLUMNS, math.nan)
        row.update(file=Path(p).name, error="", fit_ok=False)
        try:
            tr = read_trace(p)
            row["detuning_MHz"] = float(tr.meta.get("detuning_mhz", math.nan))
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", PhysicalConsistencyWarning)
                ex = extract_extrema(calibrate(tr, shot))
            row.update(min_dB=ex.min_db, max_dB=ex.max_db, contrast_dB=ex.contrast_db,
                       fit_rms=ex.fit_rms, raw_min_dB=ex.raw_min_db,
                       raw_max_dB=ex.raw_max_db, fit_ok=ex.fit_ok)
            if caught:
                row["error"] = "warning: below uncertainty bound"
        except Exception as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    rows.sort(key=lambda r: (math.isnan(r["detuning_MHz"]), r["detuning_MHz"], r["file"]))
    return rows


def format_summary(rows, delimiter=","):
    out = io.StringIO()
    w = csv.writer(out, delimiter=delimiter, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        w.writerow([repr(r[k]) if isinstance(r[k], float) else r[k] for k in SUMMARY_COLUMNS])
    return out.getvalue()
