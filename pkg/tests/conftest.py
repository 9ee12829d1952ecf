from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from tracekit.oracle.corpus import SCENARIOS

settings.register_profile(
    "repo",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def ground_truths():
    """Every named oracle scenario, executed once per session."""
    return {sc.name: sc.run() for sc in SCENARIOS}
