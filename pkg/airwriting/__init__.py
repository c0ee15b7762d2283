"""Air-Writing Translater: ungepaarte Übersetzung zwischen Inertialsignalen und Trajektorien."""

__version__ = "0.1.0"
