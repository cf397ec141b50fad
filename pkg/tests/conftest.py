import numpy as np
import pytest

from bpvarx.model import ModelSpec
from bpvarx.panel import build_design
from bpvarx.simgen import DgpSpec, ExogGenerator, simulate_panel

B_VAR2 = np.array([[[0.5, 0.1], [0.0, 0.3]],
                   [[0.1, 0.0], [0.05, 0.1]]])


def simulate_varx(lag_matrices=B_VAR2, sigma=None, n_exog=1, n_firms=300, n_years=10,
                  seed=0, intercept=None, exog_coef=None, **kw):
    """Simulate a pooled VARX panel and return (dataset, truth, model, design)."""
    B = np.asarray(lag_matrices, float)
    B = B[None] if B.ndim == 2 else B
    L, m, _ = B.shape
    sigma = np.eye(m) if sigma is None else sigma
    intercept = np.linspace(1.0, 0.5, m) if intercept is None else intercept
    exog = tuple(ExogGenerator(f"x{i + 1}") for i in range(n_exog))
    if exog_coef is None:
        exog_coef = np.linspace(0.5, -0.3, m * n_exog).reshape(m, n_exog)
    spec = DgpSpec(B, sigma, intercept, exog_coef if n_exog else None, exog,
                   n_firms=n_firms, n_years=n_years, seed=seed, **kw)
    ds, truth = simulate_panel(spec)
    model = ModelSpec(endogenous=spec.endog_names, exogenous=spec.exog_names, lags=L)
    return ds, truth, model, build_design(ds, model)


@pytest.fixture
def varx_panel():
    return simulate_varx()


# one PASS/FAIL line per acceptance criterion, printed after the test run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
