"""Physical defaults. Internal units are multiples of the natural linewidth;
MHz values appear only at the I/O boundary."""

import math

# natural linewidth of 87Rb 5P_1/2, Gamma = 2 pi x 6 MHz
GAMMA_MHZ = 6.0
GAMMA_NATURAL = 2 * math.pi * GAMMA_MHZ * 1e6  # rad/s

# 5P_1/2 F'=1 <-> F'=2 separation
HYPERFINE_SPLIT_MHZ = 815.0
HYPERFINE_SPLIT_GAMMA = HYPERFINE_SPLIT_MHZ / GAMMA_MHZ

# D1 wavelength
WAVELENGTH_NM = 795.0

# spectrum-analyser sideband frequency of the homodyne measurement
ANALYSIS_FREQ_MHZ = 1.4

# measured shot-noise level stability
SHOT_NOISE_STABILITY_DB = 0.2

HBAR = 1.054571817e-34
EPS0 = 8.8541878128e-12
C_LIGHT = 299792458.0


def mhz_to_gamma(x):
    return x / GAMMA_MHZ


def gamma_to_mhz(x):
    return x * GAMMA_MHZ


def as_dict():
    return {
        "gamma_mhz": GAMMA_MHZ,
        "gamma_natural_rad_s": GAMMA_NATURAL,
        "hyperfine_split_mhz": HYPERFINE_SPLIT_MHZ,
        "hyperfine_split_gamma": HYPERFINE_SPLIT_GAMMA,
        "wavelength_nm": WAVELENGTH_NM,
        "analysis_freq_mhz": ANALYSIS_FREQ_MHZ,
        "shot_noise_stability_db": SHOT_NOISE_STABILITY_DB,
    }
