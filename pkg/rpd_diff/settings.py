from pathlib import Path
import os

BASE_DIR = Path(__file__).resolve().parent.parent

# ============= CORE SETTINGS =============
SECRET_KEY = os.environ.get('SECRET_KEY', 'rpd-diff-local-key-not-used-for-signing')
DEBUG = os.environ.get('DEBUG', 'False') == 'True'

ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'core',
]

# No persistence: runs write their artifacts to the output directory.
DATABASES = {}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# ============= DEHAZING RUNS =============
DEHAZE_OUTPUT_ROOT = Path(os.environ.get('DEHAZE_OUTPUT_ROOT', BASE_DIR / 'out'))
DEHAZE_CONFIG = os.environ.get('DEHAZE_CONFIG', '')  # optional JSON config file
DEHAZE_WORKERS = int(os.environ.get('DEHAZE_WORKERS', '1'))
DEHAZE_SLOW_TESTS = os.environ.get('DEHAZE_SLOW_TESTS', '0') == '1'

# ============= LOGGING =============
DEHAZE_LOG_LEVEL = os.environ.get('DEHAZE_LOG_LEVEL', 'INFO').upper()

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'core': {
            'handlers': ['console'],
            'level': DEHAZE_LOG_LEVEL,
            'propagate': False,
        },
    },
}
