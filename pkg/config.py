from dotenv import load_dotenv
import logging
import os
from logging.handlers import TimedRotatingFileHandler

# Load environment variables from .env file
load_dotenv()

# Application Settings
LOG_LEVEL = os.getenv('GRW_LOG_LEVEL', 'INFO')
LOG_DIR = os.getenv('GRW_LOG_DIR', 'logs')
LOG_RETENTION_DAYS = int(os.getenv('GRW_LOG_RETENTION_DAYS', '7'))
LOG_TO_FILE = os.getenv('GRW_LOG_TO_FILE', 'true').strip().lower() in ('1', 'true', 'yes', 'on')
N_JOBS = int(os.getenv('GRW_N_JOBS', '1'))

# Run defaults; every key here can be overridden by GRW_<KEY>, a config file or a CLI flag
DEFAULTS = {
    'train': None,
    'test': None,
    'labels': None,
    'scaling': 'standard',
    'bins': 5,
    'sigma': 'median',
    'alpha': 0.5,
    'beta': 0.5,
    'gamma': 0.5,
    'delta': 0.5,
    'epsilon': 0.5,
    'k': None,
    'max_iter': 300,
    'tol': 1e-5,
    'abs_tol': None,
    'd_smoothing': 1e-8,
    'n_walks': 1000,
    'walk_length': 20,
    'jump_prob': 0.5,
    'decay_factor': 0.5,
    'seed': 0,
    'classifier': 'knn3',
    'disable_rw': False,
    'disable_fla': False,
    'all_steps_below': 100,
    'out': 'out',
    'dump_graph': False,
    'n_jobs': N_JOBS,
}

# Published search ranges; a grid file value of 'published' expands to these
PUBLISHED_WEIGHT_RANGE = (0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0)
PUBLISHED_GRID = {
    'alpha': PUBLISHED_WEIGHT_RANGE,
    'beta': PUBLISHED_WEIGHT_RANGE,
    'gamma': PUBLISHED_WEIGHT_RANGE,
    'delta': PUBLISHED_WEIGHT_RANGE,
    'epsilon': PUBLISHED_WEIGHT_RANGE,
    'n_walks': (100, 1000, 10000),
    'walk_length': (10, 20, 30),
    'jump_prob': (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9),
    'decay_factor': (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9),
}


def env_overrides():
    """Collect GRW_<KEY> environment values for run-config keys.

    Returns:
        dict: Raw string values keyed by lowercase run-config key.
    """
    overrides = {}
    for key in DEFAULTS:
        value = os.getenv(f'GRW_{key.upper()}')
        if value is not None and value != '':
            overrides[key] = value
    return overrides


# Configure logging
def setup_logging():
    logger = logging.getLogger('grw_scmf')
    logger.setLevel(getattr(logging, LOG_LEVEL.upper(), logging.INFO))

    # Formatter
    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    # Remove any existing handlers to prevent duplicates
    logger.handlers = []

    # Console handler
    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if LOG_TO_FILE:
        # Create logs directory if it doesn't exist
        os.makedirs(LOG_DIR, exist_ok=True)

        # File handler with rotation
        file_handler = TimedRotatingFileHandler(
            os.path.join(LOG_DIR, 'grw_scmf.log'),
            when='midnight',
            interval=1,
            backupCount=LOG_RETENTION_DAYS
        )
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger

# Initialize logger
logger = setup_logging()
