import numpy as np
import pytest
from hypothesis import settings

from hdrvqa.video_io import write_y4m

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def y4m_factory(tmp_path):
    """Write a short Y4M from full-resolution (Y', Cb, Cr) float frames."""

    def make(frames, name="clip.y4m", **kw):
        path = tmp_path / name
        write_y4m(path, frames, **kw)
        return path

    return make


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """6 contents x 4 distortion levels of 64x48, 10-frame clips plus a score file."""
    from hdrvqa.synthetic import make_corpus, write_scores

    root = tmp_path_factory.mktemp("corpus")
    videos = make_corpus(root / "videos", n_contents=6, height=48, width=64, frames=10, seed=3)
    write_scores(root / "scores.csv", videos)
    return root, videos


_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        if hasattr(rep, "wasxfail"):
            status = "FAIL (expected, see notes)" if rep.skipped else "PASS (unexpectedly)"
        elif rep.skipped:
            status = "SKIP"
        else:
            status = "PASS" if rep.passed else "FAIL"
        _CRITERIA[n] = f"criterion {n:>2} {status:<26} {title}"


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
