import math
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from qbl import fixtures
from qbl.model import ModelParams

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def fx():
    return fixtures.load()


@pytest.fixture(scope="session")
def regime(fx):
    def get(name, **changes):
        return fixtures.params(name, fx, **changes)

    return get


@pytest.fixture(scope="session")
def triple_fx(fx):
    from qbl.equilibria import first_quadrant_triple

    p = fixtures.params("nested_pair", fx)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return tuple(first_quadrant_triple(p))


def _pos(lo, hi):
    return st.floats(lo, hi, allow_subnormal=False)


def _nonneg(hi):
    return st.one_of(st.just(0.0), _pos(1e-6, hi))


@st.composite
def model_params(draw, gamma=True, stage=None):
    if stage == "quadratic":
        alpha = beta = 0.0
    elif stage == "cubic":
        alpha = 0.0
        beta = draw(_pos(0.01, 3.0)) * draw(st.sampled_from([-1.0, 1.0]))
    else:
        alpha = draw(_nonneg(4.0)) if stage is None else draw(_pos(0.01, 4.0))
        lo = -2.0 * math.sqrt(alpha)
        beta = lo + draw(_nonneg(6.0))
    return ModelParams(
        alpha,
        beta,
        draw(_pos(0.01, 2.0)),
        draw(_pos(0.05, 3.0)),
        draw(_nonneg(3.0)),
        draw(st.floats(-2.0, 2.0, allow_subnormal=False)) if gamma else 0.0,
        strict=stage != "cubic",
    )


points = st.tuples(st.floats(-5.0, 5.0), st.floats(-5.0, 5.0))


def random_params(rng: np.random.Generator, stage: str) -> ModelParams:
    d = 10 ** rng.uniform(-1.5, 0.3)
    lam = 10 ** rng.uniform(-1, 0.5)
    mu = 10 ** rng.uniform(-1.5, 0.5)
    if stage == "quadratic":
        return ModelParams(0.0, 0.0, d, lam, mu)
    if stage == "cubic":
        return ModelParams(0.0, -(10 ** rng.uniform(-2, 0.5)), d, lam, mu, strict=False)
    a = 10 ** rng.uniform(-2, 1)
    b = -2 * math.sqrt(a) * rng.uniform(-1.0, 0.99)
    return ModelParams(a, b, d, lam, mu)


# one summary line per acceptance criterion, from the real test outcome
_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    number, title = mark.args
    detail = "; ".join(str(v) for k, v in rep.user_properties if k == "detail")
    verdict = "PASS" if rep.passed else "FAIL"
    if rep.failed and not detail and call.excinfo is not None:
        detail = call.excinfo.exconly().splitlines()[0][:160]
    _CRITERIA[number] = (verdict, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        verdict, title, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {verdict}  {title}" + (f"  [{detail}]" if detail else ""))
