"""Shared constants for kernels, thresholds and output schemas."""

import math

EULER_GAMMA = 0.5772156649015329

# s^2 coefficient of the near-origin expansion of m(s), next to -ln(s)/4.
M_NEAR_ORIGIN_COEFF = 0.07726

# Location and height of the maximum of m(s).
M_PEAK_LOCATION = 0.812
M_PEAK_VALUE = 1.075

# Maximum of p(x) = x K1(x) + x^2 K0(x) and its proven bracket.
P_MAX_LOCATION = 0.5950
P_MAX_VALUE = 1.061
P_MAX_BRACKET = (0.5, (1.0 + math.sqrt(17.0)) / 8.0)

# Superadditivity constant for the standard kernel.
SUPERADD_CONSTANT = 1.07

# Region where r / tau* is small enough for the plain lens estimate.
LENS_THRESHOLD = 0.2
LENS_COMPLEMENT_BOUND = 0.75

# Accepted slack on the Euclid's-hat lower bound.
BOUND_SLACK = 1e-9

# Argument above which K0, K1 underflow to zero in double precision.
BESSEL_UNDERFLOW = 745.0

# Mixture table layout: log grid in s, zero beyond the upper edge.
MIXTURE_S_MIN = 1e-6
MIXTURE_S_MAX = 60.0
MIXTURE_POINTS_PER_DECADE = 60

# Standard kernel table layout: log grid in w, zero beyond the upper edge.
KERNEL_W_MIN = 1e-8
KERNEL_W_MAX = 700.0
KERNEL_POINTS_PER_DECADE = 80

MAX_URSELL_PARTICLES = 6
CONNECTED_GRAPH_COUNTS = (1, 1, 4, 38, 728, 26704)

DEFAULT_TRUNCATION_ORDER = 12
DEFAULT_OPTIMIZER_STARTS = 32

FLOAT_SIGNIFICANT_DIGITS = 12

SUBCOMMANDS = (
    "specfun-table",
    "kernel-table",
    "ebar3",
    "superadd",
    "energy-bound-scan",
    "ursell-compare",
    "majorant-radius",
    "cn-flow",
    "threshold-scan",
    "dipole-scan",
)

OUTPUT_FORMATS = ("csv", "json")

SPECFUN_COLUMNS = ("x", "K0", "K1", "p", "K0_lower", "K0_upper", "W", "W_residual")
KERNEL_COLUMNS = (
    "x",
    "h",
    "h_tilde",
    "m",
    "g",
    "m_lower",
    "m_upper",
    "m_near_origin",
    "m_mh",
)
URSELL_COLUMNS = ("config", "n", "subset", "flow", "graph", "discrepancy")
RADIUS_COLUMNS = ("beta", "k", "t0", "tau_k", "radius", "literature_radius")
THRESHOLD_COLUMNS = ("beta", "r", "fitted_exponent", "predicted_exponent", "exact_exponent")
DIPOLE_COLUMNS = (
    "beta",
    "t0",
    "bound",
    "mc_estimate",
    "stderr",
    "outside_lens_exponent",
    "inside_lens_exponent",
)
