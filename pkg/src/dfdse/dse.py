"""Evolutionary exploration of replacements, placements, and bindings.

A search point is a genotype of three segments: one replacement bit per
multi-cast actor, one placement decision per original channel, and one
core index per actor drawn from that actor's feasible cores. Decoding
applies the selected merges, projects channel decisions onto the
transformed graph (a merged buffer inherits the decision of its input
channel), and runs one of the two schedule decoders. The resulting
phenotype is scored on period, memory footprint, and core cost, all
minimized, under NSGA-II selection.

Three strategies share the machinery: Reference pins all replacement bits
to zero, MrbAlways pins them to one, and MrbExplore leaves them to the
optimizer. The archive keeps every non-dominated phenotype seen so far,
which is what the per-generation quality curves are computed from.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from . import caps_hms, ilp_sched
from .binding import ChannelDecision, allocation, core_cost, memory_footprint
from .caps_hms import DecodeResult, Schedule
from .model import SpecificationGraph, detect_multicast
from .transform import decision_source, substitute_mrbs_with_plan


class Strategy(str, Enum):
    REFERENCE = "reference"
    MRB_ALWAYS = "mrb-always"
    MRB_EXPLORE = "mrb-explore"


class Decoder(str, Enum):
    HEURISTIC = "heuristic"
    ILP = "ilp"


DECISION_ALPHABET = (
    ChannelDecision.GLOBAL,
    ChannelDecision.TILE_PROD,
    ChannelDecision.TILE_CONS,
    ChannelDecision.PROD,
    ChannelDecision.CONS,
)


@dataclass(frozen=True)
class Genotype:
    """(replacement bits, channel decisions, actor binding gene indices)."""

    xi: tuple[int, ...]
    decisions: tuple[str, ...]
    binding_genes: tuple[int, ...]


@dataclass
class Phenotype:
    period: int
    footprint: int
    cost: float
    genotype: Genotype
    schedule: Schedule | None
    proven_optimal: bool
    feasible: bool

    @property
    def objectives(self) -> tuple[float, float, float]:
        return (float(self.period), float(self.footprint), float(self.cost))


class GenotypeSpace:
    """Fixed segment layout for one specification."""

    def __init__(self, spec: SpecificationGraph):
        self.spec = spec
        self.multicast = detect_multicast(spec.app)
        self.channel_ids = spec.app.channel_ids()
        self.actor_ids = spec.app.actor_ids()
        self.feasible_cores = {a: spec.feasible_cores(a) for a in self.actor_ids}
        for actor, cores in self.feasible_cores.items():
            if not cores:
                raise ValueError(f"actor {actor} has no feasible core")

    def random(self, rng: np.random.Generator) -> Genotype:
        return Genotype(
            xi=tuple(int(rng.integers(0, 2)) for _ in self.multicast),
            decisions=tuple(
                DECISION_ALPHABET[rng.integers(0, len(DECISION_ALPHABET))].value
                for _ in self.channel_ids
            ),
            binding_genes=tuple(
                int(rng.integers(0, len(self.feasible_cores[a]))) for a in self.actor_ids
            ),
        )

    def crossover(self, a: Genotype, b: Genotype, rng: np.random.Generator) -> Genotype:
        """Uniform crossover applied independently to each segment."""

        def mix(red: Sequence, blue: Sequence) -> tuple:
            return tuple(
                red[i] if rng.integers(0, 2) == 0 else blue[i] for i in range(len(red))
            )

        return Genotype(mix(a.xi, b.xi), mix(a.decisions, b.decisions), mix(a.binding_genes, b.binding_genes))

    def mutate(self, g: Genotype, rng: np.random.Generator) -> Genotype:
        """Per-gene mutation at rate 1/segment-length."""
        xi = list(g.xi)
        for i in range(len(xi)):
            if xi and rng.random() < 1.0 / len(xi):
                xi[i] = 1 - xi[i]
        decisions = list(g.decisions)
        for i in range(len(decisions)):
            if rng.random() < 1.0 / len(decisions):
                decisions[i] = DECISION_ALPHABET[rng.integers(0, len(DECISION_ALPHABET))].value
        genes = list(g.binding_genes)
        for i, actor in enumerate(self.actor_ids):
            if rng.random() < 1.0 / len(genes):
                genes[i] = int(rng.integers(0, len(self.feasible_cores[actor])))
        return Genotype(tuple(xi), tuple(decisions), tuple(genes))

    def actor_binding(self, g: Genotype) -> dict[str, str]:
        return {
            actor: self.feasible_cores[actor][g.binding_genes[i] % len(self.feasible_cores[actor])]
            for i, actor in enumerate(self.actor_ids)
        }

    def effective_xi(self, g: Genotype, strategy: Strategy) -> dict[str, int]:
        if strategy is Strategy.REFERENCE:
            bits = [0] * len(self.multicast)
        elif strategy is Strategy.MRB_ALWAYS:
            bits = [1] * len(self.multicast)
        else:
            bits = list(g.xi)
        return dict(zip(self.multicast, bits))


def decode(
    genotype: Genotype,
    space: GenotypeSpace,
    strategy: Strategy,
    decoder: Decoder,
    ilp_timeout: float = ilp_sched.DEFAULT_TIMEOUT,
) -> Phenotype:
    """Genotype to phenotype: transform, project, bind, schedule, score."""
    spec = space.spec
    xi = space.effective_xi(genotype, strategy)
    transformed, plan = substitute_mrbs_with_plan(spec.app, xi)
    gene_decision = dict(zip(space.channel_ids, genotype.decisions))
    decisions = {
        cid: ChannelDecision(gene_decision[decision_source(plan, cid)])
        for cid in transformed.channel_ids()
    }
    binding = {
        a: core for a, core in space.actor_binding(genotype).items() if a in transformed.actors
    }
    if decoder is Decoder.HEURISTIC:
        result = caps_hms.decode_via_heuristic(transformed, decisions, binding, spec.arch)
    else:
        result = ilp_sched.decode_via_ilp(
            transformed, decisions, binding, spec.arch, timeout=ilp_timeout
        )
    if not result.feasible:
        return _penalty_phenotype(genotype, space, transformed, result)
    return Phenotype(
        period=result.period,
        footprint=memory_footprint(transformed, result.capacities),
        cost=core_cost(allocation(binding, spec.arch), spec.arch.core_type_costs),
        genotype=genotype,
        schedule=result.schedule,
        proven_optimal=result.proven_optimal,
        feasible=True,
    )


def _penalty_phenotype(
    genotype: Genotype,
    space: GenotypeSpace,
    transformed,
    result: DecodeResult,
) -> Phenotype:
    """Dominated but selectable stand-in for a decode that ran out of
    solver budget: serial-bound period, current-capacity footprint, and
    the cost of allocating every core in the platform."""
    arch = space.spec.arch
    full_cost = sum(
        arch.core_type_costs[arch.cores[p].core_type] for p in arch.core_ids()
    )
    return Phenotype(
        period=result.period,
        footprint=memory_footprint(transformed, result.capacities),
        cost=full_cost,
        genotype=genotype,
        schedule=None,
        proven_optimal=False,
        feasible=False,
    )


def dominates(p: Sequence[float], q: Sequence[float]) -> bool:
    """Weak domination: no coordinate worse, at least one strictly better."""
    return all(a <= b for a, b in zip(p, q)) and any(a < b for a, b in zip(p, q))


def pareto_filter(points: Sequence[tuple]) -> list[tuple]:
    """Distinct mutually non-dominated points, sorted."""
    unique = sorted(set(points))
    front = []
    for p in unique:
        if not any(dominates(q, p) for q in unique if q != p):
            front.append(p)
    return front


class ParetoArchive:
    """Non-dominated (period, footprint, cost) points with their genotypes.

    Points with identical objectives collapse onto the first genotype
    seen, so the archive never holds two mutually weakly-dominating
    entries.
    """

    def __init__(self) -> None:
        self._entries: dict[tuple[float, float, float], Genotype] = {}

    def add(self, phenotype: Phenotype) -> bool:
        point = phenotype.objectives
        if point in self._entries:
            return False
        for existing in self._entries:
            if dominates(existing, point) or existing == point:
                return False
        for existing in [e for e in self._entries if dominates(point, e)]:
            del self._entries[existing]
        self._entries[point] = phenotype.genotype
        return True

    def points(self) -> list[tuple[float, float, float]]:
        return sorted(self._entries)

    def entries(self) -> list[tuple[tuple[float, float, float], Genotype]]:
        return sorted(self._entries.items())

    def __len__(self) -> int:
        return len(self._entries)


def hypervolume(points: Sequence[Sequence[float]]) -> float:
    """Lebesgue measure of the region weakly dominated by ``points``
    inside the unit cube, for minimization against reference point 1.

    Exact sweep over the third coordinate with a 2-D staircase per slab;
    accepts 2-D or 3-D points with every coordinate in [0, 1].
    """
    pts = [tuple(float(x) for x in p) for p in points]
    for p in pts:
        if any(x < 0.0 or x > 1.0 for x in p):
            raise ValueError(f"point {p} outside the unit cube")
    if not pts:
        return 0.0
    dim = len(pts[0])
    if any(len(p) != dim for p in pts):
        raise ValueError("points have mixed dimensions")
    if dim == 2:
        return _hv2d(pts)
    if dim != 3:
        raise ValueError("only 2-D and 3-D fronts are supported")
    front = pareto_filter(pts)
    zs = sorted({p[2] for p in front})
    volume = 0.0
    for i, z in enumerate(zs):
        z_next = zs[i + 1] if i + 1 < len(zs) else 1.0
        if z_next <= z:
            continue
        layer = [(p[0], p[1]) for p in front if p[2] <= z]
        volume += _hv2d(layer) * (z_next - z)
    return volume


def _hv2d(points: Sequence[tuple[float, float]]) -> float:
    """Area dominated in [0,1]^2: staircase integration."""
    if not points:
        return 0.0
    best: list[tuple[float, float]] = []
    for x, y in sorted(points):
        if not best or y < best[-1][1]:
            best.append((x, y))
    area = 0.0
    for i, (x, y) in enumerate(best):
        x_next = best[i + 1][0] if i + 1 < len(best) else 1.0
        area += (x_next - x) * (1.0 - y)
    return area


def normalize(
    points: Sequence[Sequence[float]],
    bounds: Sequence[tuple[float, float]],
) -> list[tuple[float, ...]]:
    """Map each objective onto [0, 1] by the given (min, max) bounds; an
    objective constant across the bounds collapses to 0."""
    result = []
    for p in points:
        coords = []
        for x, (lo, hi) in zip(p, bounds):
            if hi <= lo:
                coords.append(0.0)
            else:
                coords.append((x - lo) / (hi - lo))
        result.append(tuple(coords))
    return result


def objective_bounds(points: Sequence[Sequence[float]]) -> list[tuple[float, float]]:
    arr = np.asarray(points, dtype=float)
    return [(float(arr[:, i].min()), float(arr[:, i].max())) for i in range(arr.shape[1])]


def relative_avg_hypervolume(
    runs: Sequence[Sequence[Sequence[tuple[float, float, float]]]],
    reference_front: Sequence[tuple[float, float, float]],
) -> list[float]:
    """Per generation, the mean over runs of hypervolume relative to the
    reference front. All fronts must already share one normalization.
    """
    ref_points = pareto_filter(list(reference_front))
    ref_hv = hypervolume(ref_points)
    if ref_hv == 0.0:
        raise ValueError("reference front has zero hypervolume; the curve is undefined")
    lengths = {len(run) for run in runs}
    if len(lengths) != 1:
        raise ValueError("runs record different generation counts")
    generations = lengths.pop()
    curve = []
    for gen in range(generations):
        ratios = [hypervolume(list(run[gen])) / ref_hv for run in runs]
        curve.append(sum(ratios) / len(ratios))
    return curve


@dataclass
class EvolveParams:
    population: int = 100
    offspring: int = 25
    crossover_rate: float = 0.95
    generations: int = 2500
    ilp_timeout: float = ilp_sched.DEFAULT_TIMEOUT

    def __post_init__(self) -> None:
        if self.population < 1 or self.offspring < 1 or self.generations < 0:
            raise ValueError("population and offspring must be >= 1, generations >= 0")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover rate must lie in [0, 1]")


@dataclass
class RunResult:
    archive: ParetoArchive
    snapshots: list[list[tuple[float, float, float]]]
    evaluations: int


def _non_dominated_sort(objectives: list[tuple[float, float, float]]) -> list[int]:
    """NSGA-II rank per individual (0 = best front)."""
    n = len(objectives)
    ranks = [0] * n
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    domination_count = [0] * n
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if dominates(objectives[i], objectives[j]):
                dominated_by[i].append(j)
            elif dominates(objectives[j], objectives[i]):
                domination_count[i] += 1
    current = [i for i in range(n) if domination_count[i] == 0]
    rank = 0
    while current:
        nxt = []
        for i in current:
            ranks[i] = rank
            for j in dominated_by[i]:
                domination_count[j] -= 1
                if domination_count[j] == 0:
                    nxt.append(j)
        current = sorted(set(nxt))
        rank += 1
    return ranks


def _crowding(objectives: list[tuple[float, float, float]], members: list[int]) -> dict[int, float]:
    distance = {i: 0.0 for i in members}
    if len(members) <= 2:
        return {i: float("inf") for i in members}
    dims = len(objectives[0])
    for d in range(dims):
        ordered = sorted(members, key=lambda i: objectives[i][d])
        lo = objectives[ordered[0]][d]
        hi = objectives[ordered[-1]][d]
        distance[ordered[0]] = float("inf")
        distance[ordered[-1]] = float("inf")
        if hi <= lo:
            continue
        for k in range(1, len(ordered) - 1):
            gap = objectives[ordered[k + 1]][d] - objectives[ordered[k - 1]][d]
            distance[ordered[k]] += gap / (hi - lo)
    return distance


def evolve(
    spec: SpecificationGraph,
    strategy: Strategy,
    decoder: Decoder,
    params: EvolveParams,
    seed: int,
    decode_fn: Callable[..., Phenotype] | None = None,
) -> RunResult:
    """One NSGA-II run; identical inputs and seed give identical results.

    Every generation evaluates ``params.offspring`` children, merges them
    with the population, and keeps the best ``params.population`` by rank
    and crowding. The archive collects all feasible non-dominated
    phenotypes found so far and is snapshotted once per generation.
    """
    rng = np.random.default_rng(seed)
    space = GenotypeSpace(spec)
    decode_one = decode_fn or decode
    cache: dict[tuple, Phenotype] = {}
    archive = ParetoArchive()
    snapshots: list[list[tuple[float, float, float]]] = []
    evaluations = 0

    def evaluate(genotype: Genotype) -> Phenotype:
        nonlocal evaluations
        key = (genotype.xi, genotype.decisions, genotype.binding_genes)
        if key not in cache:
            cache[key] = decode_one(
                genotype, space, strategy, decoder, ilp_timeout=params.ilp_timeout
            )
            evaluations += 1
        return cache[key]

    population = [space.random(rng) for _ in range(params.population)]
    phenotypes = [evaluate(g) for g in population]
    for ph in phenotypes:
        if ph.feasible:
            archive.add(ph)
    snapshots.append(archive.points())

    for _ in range(params.generations):
        objectives = [ph.objectives for ph in phenotypes]
        ranks = _non_dominated_sort(objectives)
        fronts: dict[int, list[int]] = {}
        for i, r in enumerate(ranks):
            fronts.setdefault(r, []).append(i)
        crowding: dict[int, float] = {}
        for members in fronts.values():
            crowding.update(_crowding(objectives, members))

        def better(i: int, j: int) -> int:
            if ranks[i] != ranks[j]:
                return i if ranks[i] < ranks[j] else j
            if crowding[i] != crowding[j]:
                return i if crowding[i] > crowding[j] else j
            return min(i, j)

        children = []
        for _ in range(params.offspring):
            a = better(int(rng.integers(0, len(population))), int(rng.integers(0, len(population))))
            b = better(int(rng.integers(0, len(population))), int(rng.integers(0, len(population))))
            if rng.random() < params.crossover_rate:
                child = space.crossover(population[a], population[b], rng)
            else:
                child = population[a]
            children.append(space.mutate(child, rng))

        child_phenotypes = [evaluate(g) for g in children]
        for ph in child_phenotypes:
            if ph.feasible:
                archive.add(ph)

        merged = population + children
        merged_ph = phenotypes + child_phenotypes
        merged_obj = [ph.objectives for ph in merged_ph]
        merged_ranks = _non_dominated_sort(merged_obj)
        merged_fronts: dict[int, list[int]] = {}
        for i, r in enumerate(merged_ranks):
            merged_fronts.setdefault(r, []).append(i)
        selected: list[int] = []
        for r in sorted(merged_fronts):
            members = merged_fronts[r]
            if len(selected) + len(members) <= params.population:
                selected.extend(members)
            else:
                dist = _crowding(merged_obj, members)
                remaining = params.population - len(selected)
                members_sorted = sorted(members, key=lambda i: (-dist[i], i))
                selected.extend(members_sorted[:remaining])
                break
        population = [merged[i] for i in selected]
        phenotypes = [merged_ph[i] for i in selected]
        snapshots.append(archive.points())

    return RunResult(archive=archive, snapshots=snapshots, evaluations=evaluations)
