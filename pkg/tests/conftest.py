import numpy as np
import pytest

from amli.hierarchy import build_level_stack
from amli.mesh import MeshHierarchy, coefficient_field

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record(criterion: str, ok: bool, detail: str = "") -> None:
    ACCEPTANCE[criterion] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_stack(dim=2, n0=4, levels=2, alpha=1.0, beta=1.0, pattern="constant", kappa=1.0, **kw):
    hier = MeshHierarchy(dim, n0, levels)
    coeff = coefficient_field(hier, pattern, kappa, alpha, beta)
    return hier, coeff, build_level_stack(hier, coeff, **kw)


@pytest.fixture(scope="session")
def stack2d():
    return make_stack(2, 4, 2)


@pytest.fixture(scope="session")
def stack3d():
    return make_stack(3, 2, 2)
