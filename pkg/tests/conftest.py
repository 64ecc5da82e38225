import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

TESTS = Path(__file__).parent
FIXTURES = TESTS / "fixtures"
sys.path.insert(0, str(TESTS))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def resnet():
    from relattr.nn import load_model
    return load_model(FIXTURES / "resnet_mini.json")


@pytest.fixture(scope="session")
def resnet_folded(resnet):
    from relattr.nn import fold_batchnorm
    return fold_batchnorm(resnet)


@pytest.fixture(scope="session")
def tiny():
    from relattr.nn import load_model
    return load_model(FIXTURES / "tiny_linear.json")


#: One "criterion N: PASS|FAIL ..." line per acceptance test, printed at the end.
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
