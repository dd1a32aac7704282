import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Quadrature defaults
ABS_TOL = float(os.getenv("REVZETA_ABS_TOL", "1e-6"))
REL_TOL = float(os.getenv("REVZETA_REL_TOL", "1e-8"))
MAX_SUBDIVISIONS = int(os.getenv("REVZETA_MAX_SUBDIVISIONS", "400"))

# Mode series
K_CAP = int(os.getenv("REVZETA_K_CAP", "200"))
# Fraction of the absolute tolerance the k-series tail may use
TAIL_FRACTION = float(os.getenv("REVZETA_TAIL_FRACTION", "0.1"))

# Radial integrator
ODE_RTOL = float(os.getenv("REVZETA_ODE_RTOL", "1e-10"))
ODE_ATOL = float(os.getenv("REVZETA_ODE_ATOL", "1e-14"))
ODE_MAX_STEPS = int(os.getenv("REVZETA_ODE_MAX_STEPS", "200000"))
RENORMALIZATION_EXPONENT = 300.0

# Exponent of the neglected exponentially small term above which a radial
# solve is replaced by the extended WKB remainder
ASYMPTOTIC_SWITCH = float(os.getenv("REVZETA_ASYMPTOTIC_SWITCH", "40"))
# Largest size of the last remainder order, relative to the absolute tolerance
SWITCH_FRACTION = float(os.getenv("REVZETA_SWITCH_FRACTION", "1e-3"))

# Profile validation
VALIDATION_POINTS = int(os.getenv("REVZETA_VALIDATION_POINTS", "2048"))
DERIVATIVE_RTOL = float(os.getenv("REVZETA_DERIVATIVE_RTOL", "1e-6"))

# Truncation orders for the two evaluation points
DETERMINANT_ORDER = 3
ENERGY_ORDER = 4

# Sweep execution
JOBS = int(os.getenv("REVZETA_JOBS", "1"))
OUTPUT_DIR = os.getenv("REVZETA_OUTPUT_DIR", "./data/output")
LOG_LEVEL = os.getenv("REVZETA_LOG_LEVEL", "WARNING")

# Ensure directories exist
Path(OUTPUT_DIR).mkdir(parents=True, exist_ok=True)
