import dataclasses

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from activeevent.config import RunConfig

settings.register_profile("default", max_examples=500, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def small_config(out_dir, **overrides) -> RunConfig:
    """A config small enough for unit tests (a few seconds of training)."""
    cfg = RunConfig()
    cfg = dataclasses.replace(
        cfg,
        total_steps=300,
        phase1_steps=100,
        episode_horizon=120,
        checkpoint_every=200,
        log_every=50,
        out_dir=str(out_dir),
        dqn=dataclasses.replace(cfg.dqn, eps_decay_steps=150, batch_size=8, agg_dim=16, target_sync_every=50),
    )
    return dataclasses.replace(cfg, **overrides)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
