from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from reweighted_pca import Family, GeneratorConfig, pair_samples, sample_ngca

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def planted_pairs(family, n, d, count, seed=0, rotation_seed=None, **kw):
    """Paired sample of ``count`` rows from a generator family, plus truth."""
    config = GeneratorConfig(
        ambient_dim=n,
        nongauss_dim=d,
        family=Family.parse(family),
        rotation_seed=seed if rotation_seed is None else rotation_seed,
        sample_seed=seed,
        **kw,
    )
    X, truth = sample_ngca(config, count)
    return pair_samples(X), truth


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> str:
    """Print and remember one PASS/FAIL line for the acceptance summary."""
    line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2} {title}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[2])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
