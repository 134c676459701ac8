"""Exact modulo scheduling via integer linear programming.

For a candidate period P the model decides one start time per task plus,
for every pair of tasks that shares an interconnect and every pair of
actors that shares a core, an integer wrap count choosing how many
periods apart the two run. Dependencies tie reads to the producing write
(shifted by one period per initial token), reads precede their actor,
writes follow it, and each actor's read-to-write span fits in one period.
Tasks wrapped into [0, P) then never overlap on any core or interconnect.

The exact minimum period is found by solving the feasibility model for
increasing P starting at the resource-load lower bound; the first
feasible candidate is optimal because the lower bound is sound and every
smaller candidate was proven infeasible. Models solve in process through
scipy's HiGHS backend by default; setting DFDSE_MILP_SOLVER runs an
external solver on the emitted LP file instead.

A brute-force search over integer start times (``exact_min_period``)
provides an independent oracle for tiny instances; it shares nothing with
the model builder except the problem statement.
"""

from __future__ import annotations

import math
import os
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .binding import (
    ChannelBinding,
    ChannelDecision,
    Task,
    TaskSet,
    binding_fits,
    determine_channel_bindings,
    reads_of,
    required_capacity,
    task_durations,
    writes_of,
)
from .caps_hms import (
    DecodeResult,
    Schedule,
    f_wrap,
    period_lower_bound,
    topological_priorities,
)
from .model import ApplicationGraph, ArchitectureGraph

SOLVER_ENV_VAR = "DFDSE_MILP_SOLVER"
DEFAULT_TIMEOUT = 3.0


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible-incumbent"
    TIMEOUT = "timeout-no-solution"
    INFEASIBLE = "infeasible"


class SolverAdapterError(RuntimeError):
    """The external solver was missing, crashed, or produced unusable output."""


class InstanceTooLarge(RuntimeError):
    """The brute-force oracle refuses instances beyond its guard."""


@dataclass
class Row:
    coeffs: dict[str, float]
    upper: float


@dataclass
class MilpModel:
    """Feasibility model for one candidate period.

    Variables are integers: ``s_*`` start times in [0, horizon] and pair
    wrap counts in [-wrap_bound, wrap_bound]. All rows are <= rows.
    """

    period: int
    horizon: int
    task_vars: dict[Task, str]
    wrap_vars: list[str]
    rows: list[Row]
    wrap_bound: int
    trivially_infeasible: bool = False
    notes: list[str] = field(default_factory=list)

    def variables(self) -> list[str]:
        return [self.task_vars[t] for t in sorted(self.task_vars, key=str)] + self.wrap_vars


@dataclass
class SolveOutcome:
    status: SolveStatus
    period: int
    starts: dict[Task, int] | None

    @property
    def has_values(self) -> bool:
        return self.starts is not None


def _var_name(task: Task) -> str:
    if isinstance(task, str):
        return f"s_x_{task}"
    return f"s_{task[0]}__{task[1]}"


def _out_group(app: ApplicationGraph, actor: str) -> list[Task]:
    writes: list[Task] = list(writes_of(app, actor))
    return writes if writes else [actor]


def _in_group(app: ApplicationGraph, actor: str) -> list[Task]:
    reads: list[Task] = list(reads_of(app, actor))
    return reads if reads else [actor]


def build_ilp(app: ApplicationGraph, tasks: TaskSet, period: int) -> MilpModel:
    """Emit the fixed-period feasibility model.

    Pair constraints for two tasks t, t' sharing an interconnect use one
    wrap integer m: end(t) <= start(t') + m*P and end(t') <= start(t) +
    (1-m)*P, which is exactly disjointness of their wrapped intervals.
    Actor pairs sharing a core get the same treatment on their whole
    read-to-write groups, so groups of different actors never interleave.
    """
    durations = tasks.durations
    horizon = tasks.serial_bound() + period * (
        len(app.actors) + sum(c.delay for c in app.channels.values()) + 2
    )
    wrap_bound = horizon // period + 2
    model = MilpModel(
        period=period,
        horizon=horizon,
        task_vars={t: _var_name(t) for t in tasks.tasks()},
        wrap_vars=[],
        rows=[],
        wrap_bound=wrap_bound,
    )
    if any(d > period for d in durations.values()):
        model.trivially_infeasible = True
        model.notes.append("a task is longer than the candidate period")
        return model

    def leq(coeffs: dict[str, float], upper: float) -> None:
        model.rows.append(Row(coeffs, upper))

    sv = model.task_vars

    # Data dependencies: the write of a channel lands delay periods before
    # the read of the same iteration needs it.
    for cid in app.channel_ids():
        chan = app.channels[cid]
        write = (app.producer_of(cid), cid)
        for consumer in app.consumers_of(cid):
            read = (cid, consumer)
            leq(
                {sv[write]: 1.0, sv[read]: -1.0},
                period * chan.delay - durations[write],
            )
    for aid in app.actor_ids():
        for read in reads_of(app, aid):
            leq({sv[read]: 1.0, sv[aid]: -1.0}, -durations[read])
        for write in writes_of(app, aid):
            leq({sv[aid]: 1.0, sv[write]: -1.0}, -durations[aid])
        # Read-to-write span of one actor fits in a single period.
        for write in _out_group(app, aid):
            for read in _in_group(app, aid):
                if write == read:
                    continue
                leq({sv[write]: 1.0, sv[read]: -1.0}, period - durations[write])

    wrap_index = 0

    def new_wrap() -> str:
        nonlocal wrap_index
        name = f"m_{wrap_index}"
        wrap_index += 1
        model.wrap_vars.append(name)
        return name

    seen_pairs: set[tuple[str, str]] = set()
    for resource in sorted(tasks.by_resource):
        assigned = tasks.by_resource[resource]
        if _is_interconnect(resource, tasks):
            for i, t1 in enumerate(assigned):
                for t2 in assigned[i + 1 :]:
                    if durations[t1] == 0 and durations[t2] == 0:
                        continue
                    key = (sv[t1], sv[t2])
                    if key in seen_pairs:
                        continue
                    seen_pairs.add(key)
                    m = new_wrap()
                    leq({sv[t1]: 1.0, sv[t2]: -1.0, m: -float(period)}, -durations[t1])
                    leq({sv[t2]: 1.0, sv[t1]: -1.0, m: float(period)}, period - durations[t2])

    actors_by_core: dict[str, list[str]] = {}
    for aid in app.actor_ids():
        actors_by_core.setdefault(_core_of(aid, tasks), []).append(aid)
    for core in sorted(actors_by_core):
        members = sorted(actors_by_core[core])
        for i, a1 in enumerate(members):
            for a2 in members[i + 1 :]:
                g = new_wrap()
                for write in _out_group(app, a1):
                    for read in _in_group(app, a2):
                        leq(
                            {sv[write]: 1.0, sv[read]: -1.0, g: -float(period)},
                            -durations[write],
                        )
                for write in _out_group(app, a2):
                    for read in _in_group(app, a1):
                        leq(
                            {sv[write]: 1.0, sv[read]: -1.0, g: float(period)},
                            period - durations[write],
                        )
    return model


def _core_of(actor_id: str, tasks: TaskSet) -> str:
    for resource, assigned in tasks.by_resource.items():
        if actor_id in assigned:
            return resource
    raise KeyError(f"actor {actor_id} is not assigned to any resource")


def _is_interconnect(resource: str, tasks: TaskSet) -> bool:
    # Cores host actor tasks; interconnects only edges. Resources with no
    # tasks at all need no pair constraints either way.
    assigned = tasks.by_resource[resource]
    return bool(assigned) and all(isinstance(t, tuple) for t in assigned)


def to_lp_string(model: MilpModel) -> str:
    """Render the model in LP text format for external solvers."""
    names = model.variables()
    lines = [f"\\ dfdse feasibility model, period={model.period}"]
    lines.append("Minimize")
    lines.append(f" obj: 0 {names[0]}")
    lines.append("Subject To")
    for i, row in enumerate(model.rows):
        terms = []
        for var, coeff in sorted(row.coeffs.items()):
            sign = "+" if coeff >= 0 else "-"
            terms.append(f"{sign} {abs(coeff):g} {var}")
        expr = " ".join(terms).lstrip("+ ")
        lines.append(f" c{i}: {expr} <= {row.upper:g}")
    lines.append("Bounds")
    for task in sorted(model.task_vars, key=str):
        lines.append(f" 0 <= {model.task_vars[task]} <= {model.horizon}")
    for var in model.wrap_vars:
        lines.append(f" -{model.wrap_bound} <= {var} <= {model.wrap_bound}")
    lines.append("Generals")
    lines.append(" " + " ".join(names))
    lines.append("End")
    return "\n".join(lines) + "\n"


def _solve_scipy(model: MilpModel, timeout: float) -> SolveOutcome:
    from scipy.optimize import Bounds, LinearConstraint, milp

    names = model.variables()
    index = {name: i for i, name in enumerate(names)}
    n = len(names)
    if not model.rows:
        starts = {t: 0 for t in model.task_vars}
        return SolveOutcome(SolveStatus.OPTIMAL, model.period, starts)
    a = np.zeros((len(model.rows), n))
    upper = np.zeros(len(model.rows))
    for i, row in enumerate(model.rows):
        for var, coeff in row.coeffs.items():
            a[i, index[var]] = coeff
        upper[i] = row.upper
    lo = np.zeros(n)
    hi = np.zeros(n)
    for task, var in model.task_vars.items():
        hi[index[var]] = model.horizon
    for var in model.wrap_vars:
        lo[index[var]] = -model.wrap_bound
        hi[index[var]] = model.wrap_bound
    # Presolve stays off: the bundled HiGHS mis-declares some of these
    # wrap-count models infeasible when it is allowed to presolve them.
    res = milp(
        c=np.zeros(n),
        constraints=[LinearConstraint(a, lb=-np.inf, ub=upper)],
        integrality=np.ones(n),
        bounds=Bounds(lo, hi),
        options={"time_limit": max(timeout, 0.01), "presolve": False},
    )
    if res.status == 2:
        return SolveOutcome(SolveStatus.INFEASIBLE, model.period, None)
    if res.x is None:
        return SolveOutcome(SolveStatus.TIMEOUT, model.period, None)
    starts = {
        task: int(round(res.x[index[var]])) for task, var in model.task_vars.items()
    }
    status = SolveStatus.OPTIMAL if res.status == 0 else SolveStatus.FEASIBLE
    return SolveOutcome(status, model.period, starts)


def _solve_external(model: MilpModel, timeout: float, command: str) -> SolveOutcome:
    """Run ``command model.lp solution.out`` and parse the solution file.

    Expected file format: first non-empty line is one of the SolveStatus
    values, followed by ``<variable> <value>`` lines.
    """
    with tempfile.TemporaryDirectory(prefix="dfdse-milp-") as tmp:
        lp_path = Path(tmp) / "model.lp"
        sol_path = Path(tmp) / "solution.out"
        lp_path.write_text(to_lp_string(model), encoding="utf-8")
        try:
            proc = subprocess.run(
                [command, str(lp_path), str(sol_path)],
                capture_output=True,
                text=True,
                timeout=timeout + 10.0,
            )
        except FileNotFoundError as exc:
            raise SolverAdapterError(f"solver executable not found: {command}") from exc
        except subprocess.TimeoutExpired as exc:
            raise SolverAdapterError(f"solver did not finish: {command}") from exc
        if not sol_path.exists():
            raise SolverAdapterError(
                f"solver produced no solution file (exit {proc.returncode}): {proc.stderr[:500]}"
            )
        lines = [ln.strip() for ln in sol_path.read_text(encoding="utf-8").splitlines() if ln.strip()]
        if not lines:
            raise SolverAdapterError("solution file is empty")
        try:
            status = SolveStatus(lines[0])
        except ValueError as exc:
            raise SolverAdapterError(f"unknown solver status {lines[0]!r}") from exc
        if status in (SolveStatus.INFEASIBLE, SolveStatus.TIMEOUT):
            return SolveOutcome(status, model.period, None)
        values: dict[str, int] = {}
        for line in lines[1:]:
            parts = line.split()
            if len(parts) != 2:
                raise SolverAdapterError(f"unparsable solution line {line!r}")
            values[parts[0]] = int(round(float(parts[1])))
        try:
            starts = {task: values[var] for task, var in model.task_vars.items()}
        except KeyError as exc:
            raise SolverAdapterError(f"solution is missing variable {exc}") from exc
        return SolveOutcome(status, model.period, starts)


def solve(model: MilpModel, timeout: float = DEFAULT_TIMEOUT) -> SolveOutcome:
    """Solve one feasibility model within the timeout."""
    if model.trivially_infeasible:
        return SolveOutcome(SolveStatus.INFEASIBLE, model.period, None)
    command = os.environ.get(SOLVER_ENV_VAR)
    if command:
        return _solve_external(model, timeout, command)
    return _solve_scipy(model, timeout)


@dataclass
class MinPeriodResult:
    schedule: Schedule | None
    proven_optimal: bool


def min_period_schedule(
    app: ApplicationGraph,
    actor_binding: Mapping[str, str],
    channel_binding: ChannelBinding,
    tasks: TaskSet,
    timeout: float = DEFAULT_TIMEOUT,
) -> MinPeriodResult:
    """Smallest-period schedule by upward iteration from the lower bound.

    The result is proven optimal when every smaller candidate was proven
    infeasible; a candidate that times out leaves later successes tagged
    as unproven incumbents. A fully exhausted budget yields no schedule.
    """
    deadline = time.monotonic() + timeout
    lower = max(1, period_lower_bound(tasks))
    serial = max(1, tasks.serial_bound())
    proven = True
    for period in range(lower, serial + 1):
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            return MinPeriodResult(None, False)
        outcome = solve(build_ilp(app, tasks, period), timeout=remaining)
        if outcome.status is SolveStatus.INFEASIBLE:
            continue
        if outcome.status is SolveStatus.TIMEOUT:
            proven = False
            continue
        schedule = Schedule(
            period=period,
            start_times=dict(outcome.starts),
            actor_binding=dict(actor_binding),
            channel_binding=channel_binding,
            tasks=tasks,
            capacities={},
        )
        return MinPeriodResult(schedule, proven)
    return MinPeriodResult(None, False)


def decode_via_ilp(
    app: ApplicationGraph,
    decisions: Mapping[str, ChannelDecision],
    actor_binding: Mapping[str, str],
    arch: ArchitectureGraph,
    timeout: float = DEFAULT_TIMEOUT,
) -> DecodeResult:
    """Bind channels, solve for the minimum period, enlarge capacities to
    cover the schedule, and rebind while any memory overflows. A budget
    exhausted without any schedule marks the decode infeasible-at-budget;
    the caller assigns penalty objectives."""
    deadline = time.monotonic() + timeout
    capacities = {cid: app.channels[cid].capacity for cid in app.channel_ids()}
    channel_binding = determine_channel_bindings(decisions, capacities, actor_binding, app, arch)
    tasks = task_durations(app, actor_binding, channel_binding, arch)

    for _ in range(10 * len(app.channels) + 10):
        result = min_period_schedule(
            app,
            actor_binding,
            channel_binding,
            tasks,
            timeout=max(deadline - time.monotonic(), 0.0),
        )
        if result.schedule is None:
            return DecodeResult(
                period=max(1, tasks.serial_bound()),
                actor_binding=dict(actor_binding),
                channel_binding=channel_binding,
                capacities=dict(capacities),
                schedule=None,
                proven_optimal=False,
                feasible=False,
            )
        schedule = result.schedule
        for cid in app.channel_ids():
            needed = required_capacity(
                app, cid, schedule.start_times, tasks.durations, schedule.period
            )
            capacities[cid] = max(capacities[cid], needed)
        if binding_fits(channel_binding, capacities, app, arch):
            schedule.capacities = dict(capacities)
            return DecodeResult(
                period=schedule.period,
                actor_binding=dict(actor_binding),
                channel_binding=channel_binding,
                capacities=dict(capacities),
                schedule=schedule,
                proven_optimal=result.proven_optimal,
                feasible=True,
            )
        channel_binding = determine_channel_bindings(
            decisions, capacities, actor_binding, app, arch
        )
        tasks = task_durations(app, actor_binding, channel_binding, arch)
    raise RuntimeError("channel rebinding failed to converge; this is a bug")


def exhaustive_feasible(
    app: ApplicationGraph,
    actor_binding: Mapping[str, str],
    tasks: TaskSet,
    period: int,
    budget: list[int],
) -> dict[Task, int] | None:
    """Witness schedule with the given period, or None, by depth-first
    search over integer start times.

    Actors are tried in topological order, execution starts within two
    periods of the data lower bound, reads between the producing write and
    the execution, writes after the execution and within the actor's
    one-period span. Core occupancy is tracked as whole read-to-write
    group arcs so groups never interleave; interconnect occupancy is
    tracked per task. ``budget`` is a one-element node counter shared
    across calls.
    """
    priority = topological_priorities(app)
    order = sorted(app.actor_ids(), key=lambda a: (priority[a], a))
    durations = tasks.durations

    if any(d > period for d in durations.values()):
        return None
    starts: dict[Task, int] = {}
    icc_util: dict[str, list[tuple[int, int]]] = {
        r: []
        for r in tasks.by_resource
        if tasks.by_resource[r] and all(isinstance(t, tuple) for t in tasks.by_resource[r])
    }
    core_arcs: dict[str, list[tuple[int, int]]] = {}

    def blocked(resource_intervals: list[tuple[int, int]], wrapped) -> bool:
        for lo, hi in wrapped:
            for olo, ohi in resource_intervals:
                if lo < ohi and olo < hi:
                    return True
        return False

    def comm_ok(task: tuple[str, str], start: int) -> bool:
        wrapped = f_wrap(period, start, durations[task])
        core = actor_binding[task[1] if task[1] in app.actors else task[0]]
        if blocked(core_arcs.get(core, []), wrapped):
            return False
        for r in tasks.routes[task]:
            if r in icc_util and blocked(icc_util[r], wrapped):
                return False
        return True

    def place_actor(i: int) -> bool:
        if i == len(order):
            return True
        actor = order[i]
        core = actor_binding[actor]
        read_list = reads_of(app, actor)
        write_list = writes_of(app, actor)

        exec_lb = 0
        read_lbs: dict[Task, int] = {}
        for read in read_list:
            cid = read[0]
            chan = app.channels[cid]
            write = (app.producer_of(cid), cid)
            if write in starts:
                lb = max(0, starts[write] + durations[write] - period * chan.delay)
            else:
                lb = 0
            read_lbs[read] = lb
            exec_lb = max(exec_lb, lb + durations[read])

        for exec_start in range(exec_lb, exec_lb + 2 * period):
            budget[0] -= 1
            if budget[0] < 0:
                raise InstanceTooLarge("search node budget exhausted")
            exec_wrapped = f_wrap(period, exec_start, durations[actor])
            if blocked(core_arcs.get(core, []), exec_wrapped):
                continue
            starts[actor] = exec_start
            if place_reads(i, actor, read_list, write_list, read_lbs, 0, exec_start):
                return True
            del starts[actor]
        return False

    def place_reads(i, actor, read_list, write_list, read_lbs, j, exec_start) -> bool:
        if j == len(read_list):
            return place_writes(i, actor, read_list, write_list, 0, exec_start)
        read = read_list[j]
        hi = exec_start - durations[read]
        for s in range(read_lbs[read], hi + 1):
            budget[0] -= 1
            if budget[0] < 0:
                raise InstanceTooLarge("search node budget exhausted")
            if not comm_ok(read, s):
                continue
            starts[read] = s
            wrapped = f_wrap(period, s, durations[read])
            for r in tasks.routes[read]:
                if r in icc_util:
                    icc_util[r].extend(wrapped)
            if place_reads(i, actor, read_list, write_list, read_lbs, j + 1, exec_start):
                return True
            for r in tasks.routes[read]:
                if r in icc_util:
                    for seg in wrapped:
                        icc_util[r].remove(seg)
            del starts[read]
        return False

    def place_writes(i, actor, read_list, write_list, j, exec_start) -> bool:
        core = actor_binding[actor]
        if j == len(write_list):
            group = [*read_list, actor, *write_list]
            begin = min(starts[t] for t in group)
            end = max(starts[t] + durations[t] for t in group)
            if end - begin > period:
                return False
            arc = f_wrap(period, begin, end - begin)
            if any(
                lo < ohi and olo < hi
                for lo, hi in arc
                for olo, ohi in core_arcs.get(core, [])
            ):
                return False
            core_arcs.setdefault(core, []).extend(arc)
            if place_actor(i + 1):
                return True
            for seg in arc:
                core_arcs[core].remove(seg)
            return False

        write = write_list[j]
        cid = write[1]
        chan = app.channels[cid]
        lo = exec_start + durations[actor]
        group_begin = min(
            [starts[t] for t in read_list] + [exec_start]
        )
        hi = group_begin + period - durations[write]
        for consumer in app.consumers_of(cid):
            read = (cid, consumer)
            if read in starts:
                hi = min(hi, starts[read] + period * chan.delay - durations[write])
        hi = min(hi, lo + 2 * period)
        for s in range(lo, hi + 1):
            budget[0] -= 1
            if budget[0] < 0:
                raise InstanceTooLarge("search node budget exhausted")
            if not comm_ok(write, s):
                continue
            starts[write] = s
            wrapped = f_wrap(period, s, durations[write])
            for r in tasks.routes[write]:
                if r in icc_util:
                    icc_util[r].extend(wrapped)
            if place_writes(i, actor, read_list, write_list, j + 1, exec_start):
                return True
            for r in tasks.routes[write]:
                if r in icc_util:
                    for seg in wrapped:
                        icc_util[r].remove(seg)
            del starts[write]
        return False

    return starts if place_actor(0) else None


def exact_min_period(
    app: ApplicationGraph,
    actor_binding: Mapping[str, str],
    tasks: TaskSet,
    max_shared_tasks: int = 24,
    max_nodes: int = 4_000_000,
) -> int:
    """Provably minimal integer period by exhaustive search, for tests.

    Guarded against instances with too many resource-sharing tasks; the
    node budget spans all candidate periods.
    """
    shared = sum(
        len(assigned) for assigned in tasks.by_resource.values() if len(assigned) > 1
    )
    if shared > max_shared_tasks:
        raise InstanceTooLarge(f"{shared} resource-sharing tasks exceed the guard")
    lower = max(1, period_lower_bound(tasks))
    serial = max(1, tasks.serial_bound())
    budget = [max_nodes]
    for period in range(lower, serial + 1):
        if exhaustive_feasible(app, actor_binding, tasks, period, budget) is not None:
            return period
    raise RuntimeError("no feasible period up to the serial bound; this is a bug")
