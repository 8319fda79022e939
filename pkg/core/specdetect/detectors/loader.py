from __future__ import annotations

import importlib
import logging
from collections.abc import Iterable
from dataclasses import dataclass
from importlib.metadata import EntryPoint, entry_points
from typing import Any

from specdetect.exceptions import ConfigError

logger = logging.getLogger(__name__)

PRIMARY_GROUP = "specdetect.detectors"

# Used when the package runs from a source checkout without installed metadata.
BUILTIN_DETECTORS = {
    "label_free": "specdetect.detectors.builtin:label_free",
    "pca_oracle": "specdetect.detectors.builtin:pca_oracle",
}


@dataclass(frozen=True)
class ResolvedDetector:
    name: str
    obj: Any
    entry_point: str


def _iter_entry_points(groups: Iterable[str]) -> Iterable[EntryPoint]:
    eps = entry_points()
    for g in groups:
        yield from eps.select(group=g)


def _load_reference(reference: str) -> Any:
    module_name, _, attr = reference.partition(":")
    obj = importlib.import_module(module_name)
    for part in attr.split("."):
        obj = getattr(obj, part)
    return obj


def list_detector_entry_points() -> list[dict[str, str]]:
    out: list[dict[str, str]] = []
    seen: set[str] = set()
    for ep in _iter_entry_points([PRIMARY_GROUP]):
        out.append({"group": ep.group, "name": ep.name, "value": ep.value})
        seen.add(ep.name)
    for name, value in BUILTIN_DETECTORS.items():
        if name not in seen:
            out.append({"group": "builtin", "name": name, "value": value})
    return sorted(out, key=lambda i: (i["name"], i["group"]))


def find_detector_by_name(detector_name: str) -> ResolvedDetector | None:
    for ep in _iter_entry_points([PRIMARY_GROUP]):
        if ep.name != detector_name:
            continue
        try:
            obj = ep.load()
        except Exception as exc:  # pylint: disable=broad-exception-caught
            logger.warning("cannot load detector entry point %s: %s", ep.value, exc)
            continue
        return ResolvedDetector(name=ep.name, obj=obj, entry_point=f"{ep.group}:{ep.name}={ep.value}")

    reference = BUILTIN_DETECTORS.get(detector_name)
    if reference is None:
        return None
    return ResolvedDetector(name=detector_name, obj=_load_reference(reference), entry_point=f"builtin:{reference}")


def load_detector(detector_name: str) -> Any:
    """Returns the detector callable registered under ``detector_name``.

    Raises:
        ConfigError: If no detector of that name exists.
    """
    resolved = find_detector_by_name(detector_name)
    if resolved is None:
        known = ", ".join(i["name"] for i in list_detector_entry_points())
        raise ConfigError(f"unknown detector {detector_name!r} (available: {known})")
    return resolved.obj
