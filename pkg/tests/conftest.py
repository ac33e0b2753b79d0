import pytest

from fractal_lq.config import PAPER_GERM, PAPER_KNOTS, PAPER_MULTIPLIER
from fractal_lq.funcstore import BaseOperator, discretize
from fractal_lq.net import build_net
from fractal_lq.rb import make_config


@pytest.fixture(scope="session")
def paper_net():
    return build_net([PAPER_KNOTS, PAPER_KNOTS])


@pytest.fixture(scope="session")
def paper_base(paper_net):
    return BaseOperator.multiply(PAPER_MULTIPLIER, paper_net)


@pytest.fixture(scope="session")
def germ(paper_net):
    return discretize(PAPER_GERM, paper_net, 16)


@pytest.fixture(scope="session")
def paper_cfg(paper_net, paper_base, germ):
    """Worked example at alpha = 0.3."""
    return make_config(paper_net, 0.3, base=paper_base, germ=germ, s=16)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
