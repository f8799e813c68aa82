"""Shared helpers: hand-built and scenario-drawn slot contexts."""

import numpy as np

from jcorm.config import ScenarioConfig
from jcorm.model import SlotContext
from jcorm.scenario import build_slot_context, generate_scenario

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_ctx(**overrides) -> SlotContext:
    """Hand-built two-UAV context with controlled numbers."""
    base = dict(
        slot_seconds=10.0,
        omega=10.0,
        sum_d=np.array([6e6, 4e6]),
        l_off=np.array([0.5, 0.4]),
        dt_dev_rate_sum=np.array([2e7, 1.5e7]),
        r_tol_leo=np.array([5e7, 5e7]),
        sat_gain=np.array([3.3339e-9, 3.3339e-9]),
        l_prop=0.00577,
        leo_bandwidth_hz=40e6,
        noise_w=1e-11,
        pmax_w=1.0,
        dt_uplink_power_w=1.0,
        cycles_per_bit=400.0,
        uav_cpu_hz=2e9,
        leo_cpu_hz=10e9,
        switch_cap=1e-28,
        storage_free=np.array([8e9, 8e9]),
        storage_capacity=1.2e10,
    )
    base.update(overrides)
    return SlotContext(**base)


def scenario_ctx(seed=0, slot=0, storage_frac=1.0, **cfg_overrides):
    """Slot context drawn from a full scenario. Returns (ctx, cfg)."""
    cfg = ScenarioConfig(seed=seed, **cfg_overrides)
    state = generate_scenario(cfg, seed)
    free = np.full(cfg.num_uavs, cfg.storage_initial_free_bits * storage_frac)
    return build_slot_context(cfg, state, slot, free), cfg


def random_fixed_decision(ctx, rng, gamma_hi=0.9):
    """Random decision with enough deadline headroom that the coordinate
    searches usually have feasible cells."""
    from jcorm.model import SlotDecision
    n = ctx.num_uavs
    dt = rng.uniform(float(np.max(ctx.l_off)) + 0.2 * ctx.slot_seconds,
                     ctx.slot_seconds, size=n)
    return SlotDecision(
        power=rng.uniform(0.1, 1.0, size=n) * ctx.pmax_w,
        f_leo=rng.uniform(0.3, 1.0, size=n) * ctx.leo_cpu_hz / n,
        delta_tol=dt,
        gamma=rng.uniform(0.0, gamma_hi, size=n),
    )
