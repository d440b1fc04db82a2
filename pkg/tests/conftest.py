import functools
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from robust_pooling.bench import MethodConfig, SetConfig, resolve_instance, run_method, shipped_instances

settings.register_profile("repo", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

SHIPPED = tuple(shipped_instances())


@functools.lru_cache(maxsize=None)
def load(name):
    return resolve_instance(name)


@functools.lru_cache(maxsize=None)
def solved(name, geometry, r, method):
    """Cached method run on a shipped instance (ellipsoid-corr uses the medium preset)."""
    inst = load(name)
    uset = SetConfig(geometry, preset="medium").build(inst, r)
    return run_method(inst, uset, MethodConfig(method=method))


@pytest.fixture
def haverly1():
    return load("haverly1")


@pytest.fixture(params=SHIPPED)
def shipped(request):
    return load(request.param)


# one verdict line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def record(number: int, title: str, ok: bool | None, detail: str) -> None:
    verdict = "N/A" if ok is None else ("PASS" if ok else "FAIL")
    line = f"criterion {number:>2} {verdict:<4} {title}: {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
