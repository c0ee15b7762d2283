"""
Utility-Funktionen für den Air-Writing Translater
"""
import logging
from logging.handlers import RotatingFileHandler
import os

from config import settings


def setup_logging(verbose: bool = False, log_file: str = None):
    """Konfiguriert das Logging-System"""
    log_file = log_file or os.environ.get("AIRWRITING_LOG_FILE", settings.LOG_FILE)
    log_dir = os.path.dirname(log_file)
    if log_dir and not os.path.exists(log_dir):
        os.makedirs(log_dir)

    formatter = logging.Formatter(settings.LOG_FORMAT)

    # File Handler mit Rotation
    file_handler = RotatingFileHandler(
        log_file,
        maxBytes=5*1024*1024,  # 5MB
        backupCount=5
    )
    file_handler.setFormatter(formatter)

    # Console Handler
    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)

    # Root Logger Setup; wiederholte Aufrufe ersetzen die Handler
    logger = logging.getLogger()
    for handler in list(logger.handlers):
        if getattr(handler, "_airwriting", False):
            logger.removeHandler(handler)
            handler.close()
    file_handler._airwriting = True
    console_handler._airwriting = True
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    logger.addHandler(file_handler)
    logger.addHandler(console_handler)
    return log_file


def resolve_path(path: str, base_dir: str = None) -> str:
    """Relativer Pfad bezogen auf ``base_dir`` (z. B. das Verzeichnis der Konfigurationsdatei)."""
    path = os.path.expanduser(path)
    if not os.path.isabs(path) and base_dir:
        path = os.path.join(base_dir, path)
    return os.path.abspath(path)
