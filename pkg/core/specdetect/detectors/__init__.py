"""Detector registry: built-in detectors and entry-point plugins."""

from specdetect.detectors.loader import find_detector_by_name, list_detector_entry_points, load_detector

__all__ = ["find_detector_by_name", "list_detector_entry_points", "load_detector"]
