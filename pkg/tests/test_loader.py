import pytest

from specdetect.detectors import loader
from specdetect.detectors.builtin import label_free, pca_oracle
from specdetect.exceptions import ConfigError


class DummyEP:
    def __init__(self, name, value, group=loader.PRIMARY_GROUP, obj="dummy_detector_obj"):
        self.name = name
        self.value = value
        self.group = group
        self._obj = obj

    def load(self):
        if isinstance(self._obj, Exception):
            raise self._obj
        return self._obj


def _patch(monkeypatch, eps):
    class EPs:
        def select(self, group=None):
            return list(eps) if group == loader.PRIMARY_GROUP else []

    monkeypatch.setattr("specdetect.detectors.loader.entry_points", lambda: EPs())


def test_loader_list_and_find(monkeypatch):
    _patch(monkeypatch, [DummyEP("nmf", "lab_detectors.nmf:detect")])

    items = loader.list_detector_entry_points()
    names = [i["name"] for i in items]
    assert names == sorted(names)
    assert {"nmf", "label_free", "pca_oracle"} <= set(names)
    assert next(i for i in items if i["name"] == "label_free")["group"] == "builtin"

    resolved = loader.find_detector_by_name("nmf")
    assert resolved is not None
    assert resolved.obj == "dummy_detector_obj"
    assert resolved.entry_point == "specdetect.detectors:nmf=lab_detectors.nmf:detect"


def test_builtins_resolve_without_installed_metadata(monkeypatch):
    _patch(monkeypatch, [])
    assert loader.load_detector("label_free") is label_free
    assert loader.load_detector("pca_oracle") is pca_oracle
    assert loader.find_detector_by_name("nope") is None
    with pytest.raises(ConfigError, match="label_free"):
        loader.load_detector("nope")


def test_broken_entry_point_falls_back_to_builtin(monkeypatch, caplog):
    _patch(monkeypatch, [DummyEP("label_free", "broken:thing", obj=ImportError("boom"))])
    assert loader.load_detector("label_free") is label_free
    assert "cannot load detector" in caplog.text
