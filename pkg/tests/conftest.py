import time

import pytest

from fogbench import orchestrator
from fogbench.model import validate_run_config
from fogbench.presets import default_run_config
from fogbench.workloads import REGISTRY

# Every record produced by run_cell anywhere in the suite, audited at the end.
EMITTED_RECORDS = []
# criterion number -> (passed, detail), filled by the acceptance tests.
ACCEPTANCE = {}

_real_run_cell = orchestrator.run_cell


def _recording_run_cell(*args, **kwargs):
    recs = _real_run_cell(*args, **kwargs)
    EMITTED_RECORDS.extend(recs)
    return recs


orchestrator.run_cell = _recording_run_cell


@pytest.fixture(autouse=True)
def _clean_registry():
    REGISTRY.clear()
    yield
    REGISTRY.clear()


def validated(**kw):
    return validate_run_config(default_run_config(**kw))


@pytest.fixture
def default_config():
    return validated


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
