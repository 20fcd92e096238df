"""Shared limits and statistical thresholds.

The coding theorems are asymptotic, so every finite-sample threshold used by
the tests and experiment scripts lives here and can be tuned in one place.
"""

# symbol used in integer sequences for the null output / separator
NULL = -1

# dense tables larger than this are refused
MAX_CELLS = 2**24
NORM_TOL = 1e-12

# sliding-block channel limits at the default table size
MAX_MEMORY = 4
MAX_BLOCK = 8

# random coding
ROW_CAP = 2**20
EXHAUSTIVE_AUTO_ROWS = 2**12
DEFAULT_EPSILON = 0.05
EPSILON_SWEEP = (0.02, 0.05, 0.1, 0.2)

# capacity solvers
GRID_RESOLUTION = 1 / 64
MULTISTARTS = 16
BA_TOL = 1e-9

# processes: statistical surrogates for the ergodic limits
INTERLEAVE_TV_TOL = 0.02
NAIVE_TV_FLOOR = 0.4
LLN_FREQ_TOL = 0.01
LLN_PATH_LENGTH = 10**5
JOINT_ERGODIC_LADDER = (50, 200, 800)

# typicality
LEMMA8_SLACK = 0.1
LEMMA8_TRIALS = 10**5
