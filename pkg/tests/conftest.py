import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pswdisparity.data import Dataset  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixture_config():
    return FIXTURES / "fixture.json"


def make_dataset(z, y, x=None, names=None, roles=None):
    z = np.asarray(z)
    if x is None:
        x = np.zeros((len(z), 0))
    x = np.asarray(x, float).reshape(len(z), -1)
    names = names or tuple(f"x{j + 1}" for j in range(x.shape[1]))
    roles = roles or {c: "health_status" for c in names}
    return Dataset(z, y, x, names, roles)


def random_dataset(rng, n, p, scale=0.6):
    """Random logistic data with mild effects (separation is rare)."""
    for _ in range(100):
        x = rng.standard_normal((n, p))
        beta = rng.normal(0.0, scale / np.sqrt(p), p)
        e = 1.0 / (1.0 + np.exp(-(rng.normal(0, 0.3) + x @ beta)))
        z = (rng.random(n) < e).astype(int)
        if 2 <= z.sum() <= n - 2:
            y = x @ rng.normal(size=p) + 2.0 * z + rng.standard_normal(n)
            return make_dataset(z, y, x)
    raise RuntimeError("could not draw two non-empty groups")


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num}. {title}: {detail}")
