import os
from dotenv import load_dotenv

basedir = os.path.abspath(os.path.dirname(__file__))
load_dotenv(os.path.join(basedir, '.env'), override=False)
load_dotenv(os.path.join(basedir, 'weylmoyal', '.env'), override=False)


def _env_bool(name: str, default: bool = False) -> bool:
    val = os.environ.get(name)
    if val is None:
        return default
    val = val.strip().lower()
    if val in ('1', 'true', 't', 'yes', 'y', 'on'):
        return True
    if val in ('0', 'false', 'f', 'no', 'n', 'off', ''):
        return False
    return default


def _env_int(name: str, default: int) -> int:
    val = (os.environ.get(name) or '').strip()
    return int(val) if val else default


def _env_float(name: str, default: float) -> float:
    val = (os.environ.get(name) or '').strip()
    return float(val) if val else default


class Config:
    # Desk-scale grid defaults
    GRID_DIM = _env_int('WM_GRID_DIM', 2)
    GRID_HALF_WIDTH = _env_float('WM_GRID_HALF_WIDTH', 12.0)
    GRID_POINTS = _env_int('WM_GRID_POINTS', 64)
    MAX_GRID_SAMPLES = _env_int('WM_MAX_GRID_SAMPLES', 1 << 18)
    MAX_CARRIER_DIM = _env_int('WM_MAX_CARRIER_DIM', 4096)

    # Numerical thresholds
    FREQ_DEDUP_TOL = _env_float('WM_FREQ_DEDUP_TOL', 1e-9)
    RANK_RTOL = _env_float('WM_RANK_RTOL', 1e-10)
    SPECTRAL_FLOOR = _env_float('WM_SPECTRAL_FLOOR', 1e-14)
    COMMENSURABILITY_TOL = _env_float('WM_COMMENSURABILITY_TOL', 1e-9)
    UNITARITY_TOL = _env_float('WM_UNITARITY_TOL', 1e-10)
    POWER_ITER_MAX = _env_int('WM_POWER_ITER_MAX', 20000)
    POWER_ITER_TOL = _env_float('WM_POWER_ITER_TOL', 1e-10)
    APPROX_ID_SHELL_WIDTH = _env_float('WM_APPROX_ID_SHELL_WIDTH', 1.0)
    USC_JUMP_THRESHOLD = _env_float('WM_USC_JUMP_THRESHOLD', 1e-3)
    USC_SPREAD_FACTOR = _env_float('WM_USC_SPREAD_FACTOR', 2.0)
    LORENTZ_TOL = _env_float('WM_LORENTZ_TOL', 1e-10)

    # Chunk size (frequencies per vectorized batch) for star-product accumulation
    STAR_BATCH_ELEMENTS = _env_int('WM_STAR_BATCH_ELEMENTS', 1 << 20)

    # Experiment runner
    DEFAULT_SEED = _env_int('WM_DEFAULT_SEED', 0)
    OUTPUT_DIR = (os.environ.get('WM_OUTPUT_DIR') or '').strip() or os.path.join(basedir, 'results')
    FIXTURES_DIR = (os.environ.get('WM_FIXTURES_DIR') or '').strip() or os.path.join(basedir, 'fixtures')
    FLOAT_DIGITS = 17
    VERBOSE = _env_bool('WM_VERBOSE', default=False)

    # Named acceptance tolerances; overridable with --tol-override KEY=VAL
    TOLERANCES = {
        'ccr': 1e-10,
        'homomorphism': 1e-7,
        'exact_algebra': 1e-12,
        'grid_identity': 1e-7,
        'pointwise': 1e-8,
        'twisted_convolution': 1e-10,
        'conjugation': 1e-9,
        'norm_chain': 1e-9,
        'approx_identity': 1e-3,
        'equivariance': 1e-10,
        'invariants': 1e-9,
        'flip': 1e-10,
        'associativity': 1e-8,
        'inequality': 1e-12,
    }
