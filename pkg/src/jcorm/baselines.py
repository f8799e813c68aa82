"""Comparison schemes run through the same model and metering pipeline:

  * ATSM: the forwarding start is pinned to half the slot; power, compute
    share, and offload ratio are still optimized by the same block passes.
  * GA: a genetic algorithm over the raw (p, f, start, ratio) boxes with
    penalized constraint violations, solving each slot directly.
  * No-Offloading: everything is computed on board; only the forwarding
    start is optimized against the on-board completion bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import model
from .config import ScenarioConfig
from .model import SlotContext, SlotDecision
from .solver import (SlotSolveTrace, _guarded, _objective_terms, _branch_need,
                     solve_sp1_power, solve_sp2_compute, solve_sp3_start_time,
                     solve_sp4_ratio)

_NOISE = 1e-9


# ---------------------------------------------------------------------------
# ATSM
# ---------------------------------------------------------------------------

def solve_slot_atsm(ctx: SlotContext, cfg: ScenarioConfig):
    """Half-slot split baseline: forwarding starts at slot/2 for every UAV;
    the remaining blocks run the same guarded rotation as the main solver.
    Returns (SlotDecision, SlotSolveTrace). An instance whose DS load cannot
    finish by slot/2 is flagged, and the decision degrades to no-offload
    with the start kept at slot/2 (the delay violation stays visible in the
    metrics)."""
    tol = cfg.tol
    n = ctx.num_uavs
    dt = np.full(n, ctx.slot_seconds / 2.0)
    p = np.full(n, ctx.pmax_w / 2.0)
    f = np.full(n, ctx.leo_cpu_hz / n)
    gm = np.full(n, 0.5)
    gm[ctx.sum_d <= 0.0] = 0.0

    trace = SlotSolveTrace()
    prev_obj = None
    for i in range(1, tol.i_max + 1):
        trace.iterations = i
        p_cand, p_info = solve_sp1_power(ctx, f, dt, gm, tol)
        trace.sp1_infeasible += int(np.sum(p_info.infeasible))
        p_cand = np.where(p_info.infeasible, p, p_cand)
        inc_ok = (_branch_need(ctx, p, f, gm) <= dt + 1e-9) & (p <= ctx.pmax_w + 1e-12)
        base = _objective_terms(ctx, p, f, dt, gm)
        cand = _objective_terms(ctx, p_cand, f, dt, gm)
        p, _ = _guarded(base, inc_ok, cand, p, p_cand)

        f_cand, f_bad, scaled = solve_sp2_compute(ctx, p, dt, gm)
        trace.sp2_infeasible += int(np.sum(f_bad))
        trace.budget_scaled += int(scaled)
        inc_ok = (_branch_need(ctx, p, f, gm) <= dt + 1e-9) & (f <= ctx.leo_cpu_hz + 1e-6)
        base = _objective_terms(ctx, p, f, dt, gm)
        cand = _objective_terms(ctx, p, f_cand, dt, gm)
        f_new, _ = _guarded(base, inc_ok, cand, f, f_cand)
        if np.sum(f_new) > ctx.leo_cpu_hz * (1.0 + 1e-9):
            f_new = f_cand
        f = f_new

        gm_cand, gm_empty = solve_sp4_ratio(ctx, p, f, dt)
        trace.sp4_empty += int(np.sum(gm_empty))
        inc_ok = (_branch_need(ctx, p, f, gm) <= dt + 1e-9)
        base = _objective_terms(ctx, p, f, dt, gm)
        cand = _objective_terms(ctx, p, f, dt, gm_cand)
        gm, _ = _guarded(base, inc_ok, cand, gm, gm_cand)

        obj = float(np.sum(_objective_terms(ctx, p, f, dt, gm))) / 1e6
        trace.objective_mbit.append(obj)
        if prev_obj is not None:
            if obj < prev_obj - _NOISE:
                trace.monotone_ok = False
            if abs(obj - prev_obj) <= tol.tau_outer:
                trace.converged = True
                break
        prev_obj = obj

    decision = SlotDecision(p, f, dt, gm)
    if not model.check_feasible(ctx, decision).ok:
        decision = SlotDecision(np.zeros(n), np.zeros(n), dt.copy(), np.zeros(n))
        trace.fallback = True
    return decision, trace


# ---------------------------------------------------------------------------
# genetic algorithm
# ---------------------------------------------------------------------------

@dataclass
class GaTrace:
    generations: int = 0
    best_fitness: list = field(default_factory=list)
    fallback: bool = False
    sanitized: bool = False


def _ga_fitness(ctx: SlotContext, p, f, dt, gm, penalty_weight: float) -> np.ndarray:
    """Penalized fitness of a population, arrays shaped (pop, U).

    Fitness is the slot objective on the Mbit scale minus penalty_weight
    times the summed constraint violations, each measured on a unit scale
    (seconds for deadlines, Mbit for storage terms, GHz for the pool)."""
    dec = SlotDecision(p, f, dt, gm)
    obj = np.sum(model.objective_terms(ctx, dec), axis=-1) / 1e6

    local, sat = model.deadline_lower_bounds(ctx, p, f, gm)
    need = np.maximum(local, sat)
    v_deadline = np.sum(np.minimum(np.maximum(need - dt, 0.0), 1e6), axis=-1)

    collected = ctx.dt_dev_rate_sum * dt
    v_storage = np.sum(np.maximum(collected - ctx.storage_free, 0.0), axis=-1) / 1e6
    window = np.clip(ctx.slot_seconds - dt, 0.0, None)
    available = collected + (ctx.storage_capacity - ctx.storage_free)
    v_backlog = np.sum(np.maximum(ctx.r_tol_leo * window - available, 0.0), axis=-1) / 1e6

    v_budget = np.maximum(np.sum(f, axis=-1) - ctx.leo_cpu_hz, 0.0) / 1e9

    return obj - penalty_weight * (v_deadline + v_storage + v_backlog + v_budget)


def _split_genes(g, n):
    """View a (..., 4n) genome block as (power, compute, start, ratio)."""
    return g[..., :n], g[..., n:2 * n], g[..., 2 * n:3 * n], g[..., 3 * n:]


def _evolve(rng, ga, hi, fitness_fn, trace: GaTrace) -> np.ndarray:
    """Generic real-coded GA over box [0, hi]: tournament selection, uniform
    crossover, Gaussian mutation clipped to the boxes, elitism. Returns the
    best genome ever evaluated."""
    pop = ga.population
    dim = len(hi)
    genomes = rng.uniform(0.0, 1.0, size=(pop, dim)) * hi
    fitness = fitness_fn(genomes)
    for gen in range(ga.generations):
        trace.generations = gen + 1
        order = np.argsort(fitness)[::-1]
        elite = genomes[order[:ga.elitism]].copy()

        contenders = rng.integers(0, pop, size=(2 * pop, ga.tournament))
        winners = contenders[np.arange(2 * pop), np.argmax(fitness[contenders], axis=1)]
        parents = genomes[winners].reshape(2, pop, dim)

        cross = rng.random((pop, dim)) < 0.5
        children = np.where(cross, parents[0], parents[1])
        no_cross = rng.random(pop) >= ga.crossover_rate
        children[no_cross] = parents[0][no_cross]

        mutate = rng.random((pop, dim)) < ga.mutation_rate
        noise = rng.normal(0.0, ga.mutation_sigma_frac, size=(pop, dim)) * hi
        children = np.clip(children + np.where(mutate, noise, 0.0), 0.0, hi)

        children[:ga.elitism] = elite
        genomes = children
        fitness = fitness_fn(genomes)
        trace.best_fitness.append(float(np.max(fitness)))
    return genomes[int(np.argmax(fitness))]


def _sanitize_slot(ctx, p, f, dt, gm, trace):
    """Offloading with no link or no compute share cannot execute; switch
    those UAVs to on-board processing."""
    rate = ctx.ds_rate(p)
    dead = (gm > 0.0) & ((p <= 0.0) | (f <= 0.0) | (rate <= 0.0))
    if np.any(dead):
        trace.sanitized = True
        gm[dead] = 0.0
        p[dead] = 0.0
        f[dead] = 0.0
    gm[ctx.sum_d <= 0.0] = 0.0
    return SlotDecision(p, f, dt, gm)


def solve_slot_ga(ctx: SlotContext, cfg: ScenarioConfig):
    """Direct per-slot search with the genetic algorithm. Returns
    (SlotDecision, GaTrace); always returns the best individual found,
    sanitized so that offloading without power or compute is turned off."""
    ga = cfg.ga
    n = ctx.num_uavs
    rng = np.random.default_rng(ga.seed if ga.seed is not None else cfg.seed)
    hi = np.concatenate([np.full(n, ctx.pmax_w), np.full(n, ctx.leo_cpu_hz),
                         np.full(n, ctx.slot_seconds), np.ones(n)])
    trace = GaTrace()

    def fitness(genomes):
        return _ga_fitness(ctx, *_split_genes(genomes, n), ga.penalty_weight)

    best = _evolve(rng, ga, hi, fitness, trace)
    p, f, dt, gm = (np.array(a, dtype=float) for a in _split_genes(best, n))
    return _sanitize_slot(ctx, p, f, dt, gm, trace), trace


def run_horizon_ga(cfg: ScenarioConfig, state):
    """Genetic algorithm over the whole horizon at once: one genome carries
    (power, compute, start, ratio) for every UAV of every slot, and fitness
    threads the storage state through the slots exactly as the metering
    does. This matches reading the heuristic as solving the full problem
    directly rather than slot by slot.

    Returns a solver.HorizonResult; the single GaTrace is shared by all
    slots."""
    import time as _time

    from .scenario import build_slot_context
    from .solver import HorizonResult

    ga = cfg.ga
    n = cfg.num_uavs
    t_slots = cfg.num_slots
    rng = np.random.default_rng(ga.seed if ga.seed is not None else cfg.seed)
    t_start = _time.perf_counter()

    base_free = np.full(n, cfg.storage_initial_free_bits, dtype=float)
    ctxs = [build_slot_context(cfg, state, t, base_free) for t in range(t_slots)]
    hi_slot = np.concatenate([np.full(n, cfg.pmax_w), np.full(n, cfg.leo_cpu_hz),
                              np.full(n, cfg.slot_seconds), np.ones(n)])
    hi = np.tile(hi_slot, max(t_slots, 1))
    trace = GaTrace()

    def fitness(genomes):
        pop = genomes.shape[0]
        free = np.broadcast_to(base_free, (pop, n)).copy()
        fit = np.zeros(pop)
        for t, ctx in enumerate(ctxs):
            p, f, dt, gm = _split_genes(genomes[:, t * 4 * n:(t + 1) * 4 * n], n)
            dec = SlotDecision(p, f, dt, gm)
            obj = np.sum(model.objective_terms(ctx, dec), axis=-1) / 1e6
            local, sat = model.deadline_lower_bounds(ctx, p, f, gm)
            v_deadline = np.sum(np.minimum(np.maximum(np.maximum(local, sat) - dt, 0.0), 1e6), axis=-1)
            collected_nom = ctx.dt_dev_rate_sum * dt
            v_storage = np.sum(np.maximum(collected_nom - free, 0.0), axis=-1) / 1e6
            window = np.clip(ctx.slot_seconds - dt, 0.0, None)
            available = collected_nom + (ctx.storage_capacity - free)
            v_backlog = np.sum(np.maximum(ctx.r_tol_leo * window - available, 0.0), axis=-1) / 1e6
            v_budget = np.maximum(np.sum(f, axis=-1) - ctx.leo_cpu_hz, 0.0) / 1e9
            fit += obj - ga.penalty_weight * (v_deadline + v_storage + v_backlog + v_budget)
            # physical storage threading for the next slot's bounds
            collected = np.minimum(collected_nom, free)
            uplink = np.minimum(ctx.r_tol_leo * window, collected + (ctx.storage_capacity - free))
            free = np.clip(free - collected + uplink, 0.0, ctx.storage_capacity)
        return fit

    if t_slots == 0:
        return HorizonResult([], [], [], [], 0.0, _time.perf_counter() - t_start)

    best = _evolve(rng, ga, hi, fitness, trace)

    free = base_free.copy()
    metrics_list, decisions, traces = [], [], []
    utility = 0.0
    for t in range(t_slots):
        ctx = build_slot_context(cfg, state, t, free)
        p, f, dt, gm = (np.array(a, dtype=float)
                        for a in _split_genes(best[t * 4 * n:(t + 1) * 4 * n], n))
        decision = _sanitize_slot(ctx, p, f, dt, gm, trace)
        metrics = model.meter_slot(ctx, decision)
        free = metrics.next_free
        utility += metrics.utility_bits
        metrics_list.append(metrics)
        decisions.append(decision)
        traces.append(trace)
    wall = _time.perf_counter() - t_start
    return HorizonResult(metrics_list, decisions, traces, [], utility, wall)


# ---------------------------------------------------------------------------
# no offloading
# ---------------------------------------------------------------------------

def solve_slot_no_offload(ctx: SlotContext, cfg: ScenarioConfig):
    """Everything computed on board: zero power, zero compute share, zero
    ratio; the forwarding start solves the start-time block against the
    on-board completion bound. Returns (SlotDecision, SlotSolveTrace)."""
    n = ctx.num_uavs
    zeros = np.zeros(n)
    dt, empty = solve_sp3_start_time(ctx, zeros, zeros, zeros, local_only=True)
    trace = SlotSolveTrace()
    trace.iterations = 1
    trace.converged = True
    trace.sp3_empty = int(np.sum(empty))
    decision = SlotDecision(zeros, zeros.copy(), dt, zeros.copy())
    obj = model.slot_objective_mbit(ctx, decision)
    trace.objective_mbit.append(obj)
    if np.any(empty) or not model.check_feasible(ctx, decision).ok:
        trace.fallback = True
    return decision, trace
