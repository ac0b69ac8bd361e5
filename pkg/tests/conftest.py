import json
from pathlib import Path

import pytest

from ringsim.experiments import load_preset, run_scenario

GOLDEN_DIR = Path(__file__).parent / "golden"


class PresetCache:
    """Run each preset at most once per session; A13 re-runs for determinism."""

    def __init__(self, tmp_root: Path):
        self.tmp_root = tmp_root
        self._reports = {}

    def run(self, name: str, tag: str = "first"):
        key = (name, tag)
        if key not in self._reports:
            out = self.tmp_root / f"{name}_{tag}"
            report = run_scenario(load_preset(name), out)
            self._reports[key] = report
        return self._reports[key]

    def csv_bytes(self, name: str, tag: str = "first") -> bytes:
        return self.run(name, tag).csv_path.read_bytes()

    def rows(self, name: str):
        import csv as _csv

        report = self.run(name)
        with open(report.csv_path, newline="") as fh:
            return list(_csv.DictReader(fh))


@pytest.fixture(scope="session")
def presets(tmp_path_factory) -> PresetCache:
    return PresetCache(tmp_path_factory.mktemp("presets"))


def require_golden(name: str, value: float, rel_tol: float = 0.25) -> str:
    """Compare against recorded golden data, creating the record on first run."""
    GOLDEN_DIR.mkdir(exist_ok=True)
    path = GOLDEN_DIR / f"{name}.json"
    if not path.exists():
        path.write_text(json.dumps({"value": value}, indent=2) + "\n")
        return f"recorded new golden value {value:.6g}"
    stored = json.loads(path.read_text())["value"]
    if abs(stored) < 1e-9:
        assert abs(value) < 1e-9, f"golden {name}: stored noise-level {stored}, measured {value}"
    else:
        assert abs(value - stored) <= rel_tol * abs(stored), \
            f"golden {name}: stored {stored:.6g}, measured {value:.6g}"
    return f"golden {stored:.6g}, measured {value:.6g}"
