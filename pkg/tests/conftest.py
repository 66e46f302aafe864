import pytest

from open_dgd import _accel
from open_dgd.functions import FunctionClassParams, QuadraticFunction, random_quadratics
from open_dgd.network import complete, erdos_renyi
from open_dgd.objective import ProblemInstance


@pytest.fixture(params=_accel.available_backends())
def backend(request):
    return request.param


def scalar_quadratic(h, c):
    return QuadraticFunction([[float(h)]], [float(c)])


@pytest.fixture
def two_agent():
    """f1 = (x+1)^2/2, f2 = (x-1)^2/2 on a unit edge with rho = 2."""
    funcs = (scalar_quadratic(1, -1), scalar_quadratic(1, 1))
    return ProblemInstance(funcs, complete(2), 2.0, params=FunctionClassParams(1.0, 1.0, 1))


def random_instance(rng, n=None, d=None, kappa=None, rho=None, graph=None):
    n = n or int(rng.integers(2, 9))
    d = d or int(rng.choice([1, 2, 3]))
    kappa = kappa or float(10 ** rng.uniform(0, 2))
    rho = float(10 ** rng.uniform(-1, 1)) if rho is None else rho
    params = FunctionClassParams(1.0, kappa, d)
    funcs = tuple(random_quadratics(rng, n, params))
    if graph is None:
        graph = complete(n) if rng.random() < 0.5 else erdos_renyi(n, 0.5, seed=int(rng.integers(2**31)))
    return ProblemInstance(funcs, graph, rho, params=params)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[num])
