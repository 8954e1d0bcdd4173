import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@st.composite
def positive_stochastic(draw, n=None, min_n=2, max_n=8):
    n = n or draw(st.integers(min_n, max_n))
    raw = draw(arrays(np.float64, (n, n), elements=st.floats(0.01, 1.0)))
    return raw / raw.sum(axis=1, keepdims=True)


@st.composite
def stochastic_chain(draw, max_len=10, max_n=8):
    n = draw(st.integers(2, max_n))
    length = draw(st.integers(1, max_len))
    return [draw(positive_stochastic(n=n)) for _ in range(length)]


@st.composite
def softmax_preds(draw, n_agents=None, n_samples=None, n_classes=None):
    n = n_agents or draw(st.integers(2, 5))
    s = n_samples or draw(st.integers(1, 12))
    c = n_classes or draw(st.integers(2, 5))
    logits = draw(arrays(np.float64, (n, s, c), elements=st.floats(-4.0, 4.0)))
    e = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_criteria: dict[int, list[tuple[bool, list[str]]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): test belongs to numbered acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    details = [str(v) for k, v in item.user_properties if k == "detail"]
    _criteria.setdefault(mark.args[0], []).append((rep.passed, details))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        ok = all(passed for passed, _ in _criteria[n])
        details = "; ".join(d for _, ds in _criteria[n] for d in ds)
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {details}")
