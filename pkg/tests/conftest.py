"""Shared fixtures: shipped-scenario documents and a session-wide run cache.

Scenario evolutions are the expensive part of the suite, so every test that
needs one goes through :class:`RunCache`, which executes each shipped scenario
or sweep at most once per session and hands the same result to all takers.
"""

from __future__ import annotations

import copy
import json

import pytest

from cosim.cli import SCENARIO_DIR
from cosim.experiments import (load_scenario, load_sweep, run_scenario,
                               run_sweep)

SWEEP_NAMES = ("fig6", "fig7", "appC_fig9")


def shipped_doc(name: str) -> dict:
    return json.loads((SCENARIO_DIR / (name + ".json")).read_text())


class RunCache:
    def __init__(self, out_root):
        self.out_root = out_root
        self._scenarios = {}
        self._sweeps = {}

    def scenario(self, name: str):
        if name not in self._scenarios:
            sc = load_scenario(shipped_doc(name))
            self._scenarios[name] = run_scenario(sc, self.out_root / "single")
        return self._scenarios[name]

    def sweep(self, name: str, doc: dict | None = None):
        if name not in self._sweeps:
            sw = load_sweep(copy.deepcopy(doc) if doc else shipped_doc(name))
            self._sweeps[name] = run_sweep(sw, self.out_root / name)
        return self._sweeps[name]

    def all_results(self):
        results = list(self._scenarios.values())
        for report in self._sweeps.values():
            results.extend(report["results"])
        return results


@pytest.fixture(scope="session")
def run_cache(tmp_path_factory):
    return RunCache(tmp_path_factory.mktemp("runs"))
