import numpy as np
import pytest

from mvbayes.returns_model import ArModel, VarModel

# weekly AR(1) fitted to an equity index: mean, lag coefficient, innovation variance
MU0, PHI0, SIGMA2_0 = 0.00207, -0.13366, 0.00085
R0 = 1.0057


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def index_model():
    return ArModel(MU0, (PHI0,), SIGMA2_0)


@pytest.fixture
def var2_model():
    Phi1 = np.array([[0.3, 0.1], [-0.2, 0.25]])
    Phi2 = np.array([[-0.1, 0.0], [0.05, 0.1]])
    Sigma = np.array([[1.0, 0.3], [0.3, 0.5]]) * 1e-3
    return VarModel(np.array([0.002, -0.001]), (Phi1, Phi2), Sigma)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call":
        return
    number, title = marker.args
    notes = list(item.funcargs.get("notes", []))
    if report.failed:
        notes.append(str(call.excinfo.value).splitlines()[0] if call.excinfo else "failed")
    notes.append(f"{report.duration:.1f}s")
    status = "PASS" if report.passed else "FAIL"
    ACCEPTANCE[number] = f"criterion {number:2d}: {status}  {title}  [{'; '.join(notes)}]"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
