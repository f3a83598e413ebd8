from ctls import config

RANK_TOL = config.RANK_TOL

# A square matrix is near singular when s_min <= NEAR_SINGULAR_RTOL * s_max
NEAR_SINGULAR_RTOL = 1e-12
# Eigen gap below EIG_GAP_RTOL * ||S||_F makes the solution subspace ambiguous
EIG_GAP_RTOL = 1e-10
# Entries at or below this magnitude are skipped when fixing eigenvector signs
SIGN_TOL = 1e-12
ASYMMETRY_RTOL = 1e-12

FLOAT_FORMAT = "{:.17g}"
FORMAT_VERSION = 1

# A sweep cell with a larger share of failed trials fails the sweep
MAX_FAILURE_RATE = 0.05
