"""Unit conventions and shared default values.

All frequencies are stored in GHz, polarizabilities in MHz/(MV/m)^2 and
electric fields in MV/m.  Coordinates in the electrostatic solver are in
micrometers, which makes potentials-per-micrometer come out directly in
MV/m (1 V/um = 1 MV/m).  Every conversion between these units goes through
the factors below.
"""

MHZ_PER_GHZ = 1.0e3
GHZ_PER_THZ = 1.0e3
NM_PER_UM = 1.0e3

# FWHM of a normal distribution = FWHM_SIGMA_RATIO * sigma
FWHM_SIGMA_RATIO = 2.354820045030949  # 2*sqrt(2*ln 2)

# Polarizability below this value makes the parabola vertex unidentifiable.
# Six orders of magnitude below the smallest observed polarizability (1.4).
ALPHA_EPSILON_MHZ = 1.0e-6

# Smallest field span (MV/m) for which a quadratic Stark fit is accepted.
MIN_FIELD_SPAN_MVPM = 5.0

# Relative permittivity of diamond.
EPSILON_DIAMOND = 5.7

# SiV- level structure defaults (zero strain, bulk): zero-phonon line near
# 737 nm, ground doublet split ~50 GHz, excited doublet split ~250 GHz.
ZPL_CENTER_THZ = 406.7
GS_SPLIT_GHZ = 50.0
ES_SPLIT_GHZ = 250.0

# Lifetime-limited linewidth of the optical transition.
TRANSFORM_LIMIT_MHZ = 90.0

# Zero-field linewidth and its growth per unit of induced-dipole field.
GAMMA0_MHZ = 400.0
GAMMA_SLOPE_MHZ_PER_MVPM = 5.0

# APD dark count rate.
DARK_RATE_CPS = 700.0

# Voltage-to-local-field conversion at the quarter-gap probe of the default
# electrode geometry (10 V -> 2.10 MV/m).
KAPPA_MVPM_PER_V = 0.21
