"""Fehlerklassen des Air-Writing Translaters."""

from config.settings import EXIT_NUMERIC, EXIT_USAGE, EXIT_VALIDATION


class AirWritingError(Exception):
    """Basisklasse aller Fehler dieses Pakets."""

    exit_code = EXIT_VALIDATION


class ConfigError(AirWritingError):
    """Ungültige oder unbekannte Konfiguration."""

    exit_code = EXIT_USAGE


class DatasetError(AirWritingError):
    """Datensatz kann nicht gelesen werden oder verletzt eine Invariante."""

    exit_code = EXIT_VALIDATION


class ShapeError(AirWritingError):
    """Form eines Arrays passt nicht zur Operation."""

    exit_code = EXIT_VALIDATION


class NumericalError(AirWritingError):
    """NaN/Inf in einem Loss oder einer Aktivierung."""

    exit_code = EXIT_NUMERIC
