import math
import os

from dotenv import load_dotenv

# Configuration for the bistatic bound and tracking experiments

load_dotenv()

SPEED_OF_LIGHT = 299792458.0

# ATSC digital TV illuminator (root-raised-cosine pulse train)
ATSC_SETTINGS = {
    'alpha': 0.05762,       # roll-off factor
    'T_sym': 93e-9,         # symbol period [s]
    'N': 1076000,           # symbols per coherent interval
    'f_c': 63.1e6,          # carrier [Hz]
}

SIGNAL_DEFAULTS = {
    'sigma_theta0': math.radians(3.0),   # DOA std at unit SNR [rad]
    'vartheta0': 5000.0,                 # bistatic range constant [m]
    'P_FA': 0.001,
}

CLUTTER_DEFAULTS = {
    'density': 4e-5,                     # expected false alarms per unit (m * m/s * rad)
    'V': 20000.0 * 400.0 * 2 * math.pi,  # surveillance volume: range x Doppler speed x DOA
    'g': 4.0,                            # gate half-width in standard deviations
}

MOTION_DEFAULTS = {
    'T': 1.0,
    'q': 0.1,
}

BOUND_DEFAULTS = {
    'n_samples': 20000,
    'm_max': 3,
    'g': 4.0,
    'seed': 2024,
    'prior_pos_std': 100.0,
    'prior_vel_std': 10.0,
    'state_samples': 0,
}

CONTROL_DEFAULTS = {
    'v_min': 1.0,
    'v_max': 100.0,
    'w_max': math.pi,
    'a_v_max': 5.0,
    'a_w_max': math.radians(30.0),
    'N_v': 40,
    'N_w': 20,
    'n_samples': 2000,
    'cost': 'full',
    'policies': ['min-tr-ipcrlb', 'min-tr-pcrlb', 'min-pdst', 'fixed', 'random'],
}

SIM_DEFAULTS = {
    'runs': 200,
    'horizon': 40,
    'seed': 2024,
}

# Numerical guards
COLLINEAR_TOL = 1e-6          # beta within this of pi counts as collinear
COND_LIMIT = 1e12             # condition number beyond which a 2x2 FIM is singular
RIDGE_SCALE = 1e-12           # Tikhonov ridge relative to mean diagonal
DIVERGENCE_FACTOR = 10.0      # position error beyond this many prior stds marks a run diverged
PDA_ITERATIONS = 3            # measurement re-linearizations in the tracker update
PDA_STEP_TOL = 1e-3           # metres; stop re-linearizing below this position step

# Runtime settings (env overrides, .env honoured)
THREADS = int(os.getenv('IPCRLB_THREADS', '0')) or (os.cpu_count() or 1)
LOG_LEVEL = os.getenv('IPCRLB_LOG_LEVEL', 'INFO')
SHOW_PROGRESS = os.getenv('IPCRLB_PROGRESS', '0').lower() in ('1', 'true', 'yes')

# Directories
OUTPUT_DIR = os.getenv('IPCRLB_OUTPUT_DIR', 'results')
LOG_DIR = os.getenv('IPCRLB_LOG_DIR', 'logs')

CSV_SIGNIFICANT_DIGITS = 12
