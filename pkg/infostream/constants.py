"""
Application constants, logging setup, and configuration loading.
"""
import json
import logging
import logging.handlers
from pathlib import Path
from typing import Any, Dict, Optional

from version import __version__

# --- Configuration Constants ---
APP_NAME = "infostream"
APP_VERSION = __version__
APP_DATA_DIR = Path.home() / ".infostream"
LOG_DIR = APP_DATA_DIR / ".logs"
BUNDLED_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config.json"

# Estimator defaults used when no config file is supplied. The bundled
# config.json carries the same values; these keep the library usable
# without it.
DEFAULT_CONFIG: Dict[str, Any] = {
    "logging": {
        "level": "INFO",
        "log_to_file": False,
        "log_file_name": "infostream.log",
    },
    "estimators": {
        "c1": 8,
        "query_constant": 48,
        "track_constant": 4.0,
        "l2_sample_constant": 2.0,
        "delta_sample_constant": 1.0,
        "kmv_constant": 4.0,
        "chunk_size": 65536,
    },
    "harness": {
        "workers": 0,
        "trials": 1,
    },
}

# --- Logging Setup ---
LOG_LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
    "CRITICAL": logging.CRITICAL,
    "NONE": None,  # Disables logging entirely
}

LOG_FORMAT = '%(asctime)s [%(levelname)s] %(name)s: %(message)s'

# Package root logger; every module logger is a child of it
logger = logging.getLogger("infostream")
logger.addHandler(logging.NullHandler())

# Track current log file path (set by setup_logging)
current_log_file_path: Optional[Path] = None


def setup_logging(config: Optional[Dict] = None, level_override: Optional[str] = None):
    """Configure logging based on config file settings."""
    global current_log_file_path

    log_cfg = config.get("logging", {}) if config else {}
    log_level_str = (level_override or log_cfg.get("level", "INFO")).upper()
    log_level = LOG_LEVELS.get(log_level_str, logging.INFO)
    log_to_file = log_cfg.get("log_to_file", False)
    log_file_name = log_cfg.get("log_file_name", "infostream.log")

    # Clear existing handlers
    logger.handlers.clear()

    # If logging is disabled (NONE), set to highest level and skip handlers
    if log_level is None:
        logger.addHandler(logging.NullHandler())
        logger.setLevel(logging.CRITICAL + 10)
        current_log_file_path = None
        return

    formatter = logging.Formatter(LOG_FORMAT)

    # Console handler (stderr, so JSON reports on stdout stay clean)
    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    # File handler (rotating: 2 MB max, keep 3 backups)
    if log_to_file:
        try:
            LOG_DIR.mkdir(parents=True, exist_ok=True)
            current_log_file_path = LOG_DIR / log_file_name
            file_handler = logging.handlers.RotatingFileHandler(
                current_log_file_path,
                maxBytes=2 * 1024 * 1024,  # 2 MB
                backupCount=3,
                encoding='utf-8'
            )
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)
        except OSError as e:
            logger.warning(f"Failed to create log file: {e}")
            current_log_file_path = None
    else:
        current_log_file_path = None

    logger.setLevel(log_level)
    logger.propagate = False


# --- Configuration Loading ---

def layer_config(base: Dict[str, Dict[str, Any]],
                 overlay: Dict[str, Any]) -> Dict[str, Dict[str, Any]]:
    """Lay *overlay* over *base* one section at a time.

    Sections are flat; keys missing from an overlay section keep the base
    value. Neither input is modified.
    """
    layered = {name: dict(body) for name, body in base.items()}
    for name, body in overlay.items():
        if not isinstance(body, dict):
            raise ValueError(f"Config section '{name}' must be an object, got {type(body).__name__}")
        layered.setdefault(name, {}).update(body)
    return layered


def _coerce_scalar(text: str) -> Any:
    """Interpret a flat-config value as int, float, bool or string."""
    lowered = text.lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def parse_flat_config(text: str) -> Dict[str, Any]:
    """Parse ``key = value`` lines into the sectioned config layout.

    Keys may be written as ``section.key``; bare keys are placed in the
    section whose defaults already define them (``estimators`` otherwise).
    """
    config: Dict[str, Dict[str, Any]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ValueError(f"Config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split('=', 1))
        if '.' in key:
            section, key = key.split('.', 1)
        else:
            section = next(
                (name for name, body in DEFAULT_CONFIG.items() if key in body),
                "estimators",
            )
        config.setdefault(section, {})[key] = _coerce_scalar(value)
    return config


def load_config(path: Optional[Path] = None) -> Dict[str, Any]:
    """Load configuration, layering user values over the bundled defaults.

    JSON files are layered section by section; any other extension is read as a flat
    ``key = value`` file.
    """
    defaults = layer_config(DEFAULT_CONFIG, {})
    if BUNDLED_CONFIG_PATH.exists():
        with open(BUNDLED_CONFIG_PATH, 'r', encoding='utf-8') as f:
            defaults = layer_config(DEFAULT_CONFIG, json.load(f))

    if path is None:
        return defaults

    path = Path(path).expanduser()
    text = path.read_text(encoding='utf-8')
    if path.suffix.lower() == ".json":
        user = json.loads(text)
    else:
        user = parse_flat_config(text)
    merged = layer_config(defaults, user)
    logger.debug(f"Config: loaded from {path} (sections={sorted(merged)})")
    return merged


def estimator_setting(config: Optional[Dict[str, Any]], key: str) -> Any:
    """Look up an estimator constant, falling back to the built-in default."""
    section = (config or {}).get("estimators", {})
    return section.get(key, DEFAULT_CONFIG["estimators"][key])
