"""Parameter sweeps over detuning, drive, cooperativity and gamma.

Rows come out nested as gamma > C > drive > detuning (detuning fastest),
so each (gamma, C, drive) curve is a contiguous block.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import atom_model, propagate
from .constants import ANALYSIS_FREQ_MHZ, mhz_to_gamma

# relative change of v_min / v_max allowed between n/2 and n slices
CONVERGENCE_RTOL = 1e-4
MAX_SLICES = 4096


@dataclass(frozen=True)
class SweepConfig:
    """Sweep grid. Detunings and analysis frequency in MHz, gammas and the
    Zeeman shift in units of Gamma.

    ``drives`` are Rabi frequencies in units of Gamma when ``drive_mode`` is
    ``"rabi"``, or beam powers in mW over ``cross_section_cm2`` when it is
    ``"power"``.
    """

    detunings: Sequence[float]
    drives: Sequence[float]
    cooperativities: Sequence[float]
    gammas: Sequence[float]
    omega_analysis: float = ANALYSIS_FREQ_MHZ
    b_field: float = 0.0
    n_slices: int = 32
    drive_mode: str = "rabi"
    cross_section_cm2: Optional[float] = None
    hyperfine_loss: bool = True

    def __post_init__(self):
        for name in ("detunings", "drives", "cooperativities", "gammas"):
            vals = tuple(float(x) for x in getattr(self, name))
            if not vals:
                raise ValueError(f"{name}: must be a non-empty list")
            if not all(math.isfinite(x) for x in vals):
                raise ValueError(f"{name}: values must be finite")
            object.__setattr__(self, name, vals)
        if any(b <= a for a, b in zip(self.detunings, self.detunings[1:])):
            raise ValueError("detunings: must be strictly increasing")
        if any(g <= 0 for g in self.gammas):
            raise ValueError("gammas: values must be > 0")
        if any(c < 0 for c in self.cooperativities):
            raise ValueError("cooperativities: values must be >= 0")
        if self.omega_analysis < 0:
            raise ValueError("omega_analysis: must be >= 0")
        if self.n_slices < 1:
            raise ValueError("n_slices: must be >= 1")
        if self.drive_mode not in ("rabi", "power"):
            raise ValueError("drive_mode: must be 'rabi' or 'power'")
        if self.drive_mode == "power":
            if self.cross_section_cm2 is None or not self.cross_section_cm2 > 0:
                raise ValueError("cross_section_cm2: required and > 0 in power mode")
            if any(p < 0 for p in self.drives):
                raise ValueError("drives: powers must be >= 0")

    def rabi_for(self, drive):
        if self.drive_mode == "power":
            return propagate.rabi_from_power(drive, self.cross_section_cm2)
        return drive

    def points(self):
        """(gamma, C, drive, detuning) tuples in emission order."""
        return [(g, c, p, d) for g in self.gammas for c in self.cooperativities
                for p in self.drives for d in self.detunings]


@dataclass(frozen=True)
class SweepRow:
    detuning_mhz: float
    omega_mhz: float
    cooperativity: float
    gamma: float
    power_mw: float  # nan when the drive is given as a Rabi frequency
    rabi: float
    v_min_db: float
    v_max_db: float
    theta_min: float
    n_slices: int = 0
    error: str = ""

    @property
    def point(self):
        return propagate.NoiseSpectrumPoint(
            self.detuning_mhz, self.omega_mhz, self.v_min_db, self.v_max_db, self.theta_min
        )

    @property
    def contrast_db(self):
        return self.v_max_db - self.v_min_db


def contrast(point):
    """v_max - v_min in dB."""
    return point.v_max_db - point.v_min_db


def converged_propagation(drive, medium, rtol=CONVERGENCE_RTOL, max_slices=MAX_SLICES):
    """Propagate with slice doubling until thin and converged.

    A slice count n is accepted when every slice passes the thinness check
    and v_min, v_max differ from an n/2 run by less than ``rtol`` relative.
    """
    n = medium.n_slices
    prev = None  # last thin run, reused as the coarse reference after doubling
    while n <= max_slices:
        med = propagate.MediumParams(medium.cooperativity, medium.gamma, n, medium.hyperfine_loss)
        try:
            res = propagate.propagate_covariance(drive, med)
        except propagate.SliceThicknessError:
            n *= 2
            continue
        if medium.cooperativity == 0 or n == 1:
            return res
        if prev is not None and prev.n_slices == n // 2:
            ref = prev
        else:
            coarse = propagate.MediumParams(medium.cooperativity, medium.gamma, n // 2,
                                            medium.hyperfine_loss)
            ref = propagate.propagate_covariance(drive, coarse, max_step=math.inf)
        prev = res
        fine_mm = np.array(propagate.min_max_noise(res.covariance)[:2])
        ref_mm = np.array(propagate.min_max_noise(ref.covariance)[:2])
        if np.all(np.abs(fine_mm - ref_mm) <= rtol * np.abs(fine_mm)):
            return res
        n *= 2
    raise propagate.SliceThicknessError(f"no converged slicing up to {max_slices} slices")


def _solve(args):
    config, (gamma, coop, drv, det) = args
    power = drv if config.drive_mode == "power" else math.nan
    rabi = config.rabi_for(drv)
    base = dict(detuning_mhz=det, omega_mhz=config.omega_analysis, cooperativity=coop,
                gamma=gamma, power_mw=power, rabi=rabi)
    drive = atom_model.DriveParams(
        rabi=rabi, detuning=mhz_to_gamma(det), zeeman_shift=config.b_field,
        analysis_freq=mhz_to_gamma(config.omega_analysis),
    )
    medium = propagate.MediumParams(coop, gamma, config.n_slices, config.hyperfine_loss)
    try:
        res = converged_propagation(drive, medium)
        vmin, vmax, theta = propagate.min_max_noise(res.covariance)
        return SweepRow(**base, v_min_db=float(propagate.to_db(vmin)),
                        v_max_db=float(propagate.to_db(vmax)), theta_min=theta,
                        n_slices=res.n_slices)
    except Exception as exc:  # recorded per point, the sweep goes on
        return SweepRow(**base, v_min_db=math.nan, v_max_db=math.nan, theta_min=math.nan,
                        error=f"{type(exc).__name__}: {exc}")


def run_sweep(config, threads=1) -> List[SweepRow]:
    """Evaluate every grid point; output order never depends on ``threads``."""
    jobs = [(config, p) for p in config.points()]
    if threads <= 1 or len(jobs) == 1:
        return [_solve(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_solve, jobs, chunksize=1))
