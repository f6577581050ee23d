import numpy as np
import pytest

from valleyforge.dataio import RecordTable


def make_table(X, Y, names=None, labels=None, schema_id="generic"):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    names = names or [f"f{j}" for j in range(X.shape[1])]
    labels = labels or [f"y{k}" for k in range(Y.shape[1])]
    return RecordTable(X, Y, names, labels, schema_id)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[str, str] = {}


def record(criterion: str, ok: bool, detail: str, status: str | None = None) -> bool:
    status = status or ("PASS" if ok else "FAIL")
    line = f"[{status}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
