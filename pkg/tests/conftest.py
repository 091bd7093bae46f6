import re

import numpy as np
import pytest

from ddcm_vms.formulation import BoundaryData, DataFields
from ddcm_vms.mms import MmsFields

_ACCEPTANCE = []


def record(criterion, passed, detail):
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
    _ACCEPTANCE.append(line)
    print(line)
    return passed


@pytest.fixture
def acceptance():
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        key = lambda s: (int(re.match(r"criterion (\d+)", s).group(1)), s)
        for line in sorted(_ACCEPTANCE, key=key):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def mms():
    return MmsFields()


def mms_problem(kappa=1.0, zeta=1.0):
    m = MmsFields(kappa, zeta)
    data = DataFields(e_tilde=m.e_tilde, s_tilde=m.s_tilde, q=m.q, f=m.f)
    bc = BoundaryData(u=m.u, lam=m.lam, s=m.s, mu=m.mu)
    return m, data, bc


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)
