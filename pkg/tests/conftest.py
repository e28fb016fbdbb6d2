import pytest

from fraccev.model import ContractSpec, ModelParams

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE = []


def desk(beta=1.0, H=0.75, **kw):
    base = dict(sigma=0.2, beta=beta, H=H, r=0.05, delta=0.02, x0=100.0)
    base.update(kw)
    return ModelParams(**base)


@pytest.fixture
def atm():
    return ContractSpec(strike=100.0, maturity=1.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
