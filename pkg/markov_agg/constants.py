"""All numeric knobs and tolerances for markov_agg.

Every tolerance, default and experiment grid lives here.
Never hardcode these numbers elsewhere.
"""

# ── Chain validation ─────────────────────────────────────────────────

ROW_SUM_TOL = 1e-8           # accepted deviation of a row sum from 1 on input
STATIONARY_RESIDUAL_TOL = 1e-9
MIN_STATIONARY_MASS = 1e-14  # anything at or below counts as zero mass

# ── Stationary solver ────────────────────────────────────────────────

DIRECT_SOLVE_MAX_ORDER = 2000
POWER_ITERATION_TOL = 1e-13
POWER_ITERATION_MAX_ITER = 10**6

# ── Information measures ─────────────────────────────────────────────

PMF_TOL = 1e-9
MARGINAL_TOL = 1e-12
COST_FORMULA_TOL = 1e-10     # direct vs. three-MI evaluation of C_beta
MARKOV_GAP_MAX_WORDS = 200_000

# ── Sequential optimizer ─────────────────────────────────────────────

DEFAULT_MAX_ITER = 100       # sweeps per beta
MOVE_ACCEPT_TOL = 1e-12      # a move is accepted only if it lowers cost by more
REFRESH_INTERVAL = 1000      # accepted moves between full table rebuilds
SCORE_BLOCK_MAX = 64         # states scored together in one vectorized pass
SCORE_BLOCK_ELEMENTS = 1 << 20  # cap on the temporaries of one pass
RANDOM_INIT_MAX_TRIES = 100

# ── Annealing ────────────────────────────────────────────────────────

DEFAULT_ANNEAL_DELTA = 0.1
DEFAULT_BETA_TARGET = 0.0
BETA_DECIMALS = 12           # grid points are rounded to this many decimals

# ── Evaluation ───────────────────────────────────────────────────────

LUMPABILITY_TOL = 1e-10
REVERSIBILITY_TOL = 1e-10
BISIM_EXHAUSTIVE_MAX = 20
BISIM_SUBSET_CHUNK = 4096
BISIM_TOL = 1e-12
MARKOV_GAP_TOL = 1e-10
MARKOV_GAP_DEFAULT_ORDER = 3

# ── Synthetic block chains ───────────────────────────────────────────

BLOCK_SIZES = (25, 25, 50)
SWEEP_ALPHAS = (0.0, 0.5, 0.95)
SWEEP_NOISE_LEVELS = (0.0, 0.4, 0.8)
SWEEP_BETAS = tuple(round(0.1 * i, 1) for i in range(11))
SWEEP_K = 3
SWEEP_REPETITIONS = 10
SWEEP_RESTARTS = 1

# ── Similarity chains (clustering) ───────────────────────────────────

CLUSTER_K_NEAREST = 15
CLUSTER_RESTARTS = 50

GAUSSIAN_CLUSTER_SIZES = (40, 20, 40)
GAUSSIAN_CLUSTER_STDS = (2.5, 0.5, 1.5)
GAUSSIAN_CLUSTER_CENTERS = (-10.0, 0.0, 10.0)

CIRCLE_POINTS = 40
CIRCLE_RADII = (0.1, 7.0, 15.0)
CIRCLE_NOISE_STD = 0.3

# ── Bigram chains ────────────────────────────────────────────────────

BIGRAM_RESTARTS = 20
BIGRAM_K = 4
BIGRAM_BETA = 0.8
# Chapter headings: a bare roman numeral or "Chapter <word>" on its own line
HEADING_PATTERN = r"^\s*(?:(?i:chapter)\s+\S+|[IVXLCDM]+\.?)\s*$"

# ── Complexity measurement ───────────────────────────────────────────

SCALING_SIZES = (50, 100, 200, 400)
SCALING_K = 4
SCALING_SWEEPS = 5

# ── CLI ──────────────────────────────────────────────────────────────

DEFAULT_SEED = 42
THREADS_ENV_VAR = "MARKOV_AGG_THREADS"
SWEEP_CSV_COLUMNS = (
    "alpha", "eps", "beta", "run", "cost", "ari", "sweeps", "wall_ms", "error",
)
EXIT_OK = 0
EXIT_MALFORMED = 1
EXIT_NUMERIC = 2

# ── Worked example: a non-reversible three-state chain ───────────────

EXAMPLE_TRANSITION = (
    (0.4, 0.3, 0.3),
    (0.25, 0.3, 0.45),
    (0.15, 0.425, 0.425),
)
EXAMPLE_PARTITION = (0, 1, 1)
