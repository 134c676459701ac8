"""Command line front end.

Subcommands: ``validate`` checks input documents, ``transform`` applies
selected multi-cast merges and reports footprints, ``schedule`` decodes a
single explicit design point into a Gantt chart and trace, ``explore``
runs the evolutionary search, and ``report`` aggregates run directories
into reference-front tables, relative hypervolume curves, and figures.

Exit codes: 0 success, 1 validation failure, 2 runtime failure. Failures
emit a one-line JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import dse
from .binding import ChannelDecision, allocation, core_cost, memory_footprint
from .caps_hms import decode_via_heuristic, verify_schedule
from .dse import Decoder, EvolveParams, Strategy, evolve, pareto_filter
from .fileio import (
    dump_application,
    dump_json,
    load_application,
    load_architecture,
    write_trace,
)
from .gantt import render_gantt
from .ilp_sched import DEFAULT_TIMEOUT, decode_via_ilp
from .model import (
    ApplicationGraph,
    Channel,
    SpecificationGraph,
    detect_multicast,
    validate,
)
from .transform import decision_source, substitute_mrbs_with_plan


class CliError(RuntimeError):
    def __init__(self, message: str, exit_code: int = 2):
        super().__init__(message)
        self.exit_code = exit_code


def _error_record(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def _parse_assignments(values: list[str] | None, what: str) -> dict[str, str]:
    result: dict[str, str] = {}
    for chunk in values or []:
        for pair in chunk.split(","):
            if not pair:
                continue
            if "=" not in pair:
                raise CliError(f"bad {what} assignment {pair!r}, expected key=value")
            key, value = pair.split("=", 1)
            result[key.strip()] = value.strip()
    return result


def _load_spec(args) -> SpecificationGraph:
    app = load_application(args.application)
    arch = load_architecture(args.architecture, tick_us=Fraction(str(args.tick_us)))
    return SpecificationGraph(app=app, arch=arch)


def _parse_xi(bits: str | None, multicast: list[str]) -> dict[str, int]:
    if bits is None:
        bits = "0" * len(multicast)
    if len(bits) != len(multicast) or any(b not in "01" for b in bits):
        raise CliError(
            f"replacement bitstring must be {len(multicast)} characters of 0/1 "
            f"for multi-cast actors {multicast}"
        )
    return {actor: int(b) for actor, b in zip(multicast, bits)}


def _add_initial_tokens(app: ApplicationGraph) -> ApplicationGraph:
    channels = {
        cid: Channel(
            id=chan.id,
            delay=max(chan.delay, 1),
            capacity=chan.capacity,
            token_size=chan.token_size,
            is_mrb=chan.is_mrb,
        )
        for cid, chan in app.channels.items()
    }
    out = app.copy()
    out.channels = channels
    return out


def cmd_validate(args) -> int:
    spec = _load_spec(args)
    report = validate(spec)
    if report.ok:
        print("ok")
        return 0
    print(report)
    _error_record("validation", f"{len(report.violations)} violations")
    return 1


def cmd_transform(args) -> int:
    app = load_application(args.application)
    multicast = detect_multicast(app)
    xi = _parse_xi(args.xi, multicast)
    transformed, plan = substitute_mrbs_with_plan(app, xi)
    for step in plan:
        family_before = sum(
            app.channels[c].capacity * app.channels[c].token_size
            for c in (step.input_channel, *step.output_channels)
        )
        mrb = transformed.channels.get(step.mrb_id)
        if mrb is None:
            # A later chained merge absorbed this buffer.
            continue
        family_after = mrb.capacity * mrb.token_size
        print(
            f"multicast {step.actor} -> mrb {step.mrb_id}: "
            f"family footprint {family_before} -> {family_after} bytes"
        )
    print(
        f"total footprint: {memory_footprint(app)} -> {memory_footprint(transformed)} bytes"
    )
    if args.out:
        dump_application(transformed, args.out)
    return 0


def cmd_schedule(args) -> int:
    spec = _load_spec(args)
    report = validate(spec)
    if not report.ok:
        print(report)
        _error_record("validation", "input documents are invalid")
        return 1
    app = spec.app
    if args.add_initial_tokens:
        app = _add_initial_tokens(app)
    multicast = detect_multicast(app)
    xi = _parse_xi(args.xi, multicast)
    transformed, plan = substitute_mrbs_with_plan(app, xi)

    raw_decisions = _parse_assignments(args.decide, "channel decision")
    decisions = {}
    for cid in transformed.channel_ids():
        source = decision_source(plan, cid)
        decisions[cid] = ChannelDecision(raw_decisions.get(source, "PROD"))
    binding = _parse_assignments(args.bind, "actor binding")
    for actor in transformed.actor_ids():
        if actor not in binding:
            raise CliError(f"no core binding given for actor {actor}")

    if args.decoder == Decoder.HEURISTIC.value:
        result = decode_via_heuristic(transformed, decisions, binding, spec.arch)
    else:
        result = decode_via_ilp(transformed, decisions, binding, spec.arch, timeout=args.timeout)
    if not result.feasible or result.schedule is None:
        raise CliError("solver budget exhausted without a schedule; raise --timeout")

    schedule = result.schedule
    check = verify_schedule(schedule, transformed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    render_gantt(schedule, out_dir / "gantt.svg")
    write_trace(schedule, out_dir / "trace.tsv")
    (out_dir / "verify.txt").write_text(str(check) + "\n", encoding="utf-8")
    alloc = allocation(binding, spec.arch)
    summary = {
        "period": result.period,
        "proven_optimal": result.proven_optimal,
        "footprint_bytes": memory_footprint(transformed, result.capacities),
        "core_cost": core_cost(alloc, spec.arch.core_type_costs),
        "capacities": dict(sorted(result.capacities.items())),
        "channel_memories": dict(sorted(result.channel_binding.binding.items())),
        "verified": check.ok,
    }
    dump_json(summary, out_dir / "summary.json")
    print(f"period {result.period} ({'proven' if result.proven_optimal else 'not proven'})")
    print(f"verify: {'ok' if check.ok else check}")
    return 0 if check.ok else 2


def _run_dir(base: Path, seed: int) -> Path:
    return base / f"run_{seed:04d}"


def cmd_explore(args) -> int:
    spec = _load_spec(args)
    report = validate(spec)
    if not report.ok:
        print(report)
        _error_record("validation", "input documents are invalid")
        return 1
    if args.add_initial_tokens:
        spec = SpecificationGraph(app=_add_initial_tokens(spec.app), arch=spec.arch)
    params = EvolveParams(
        population=args.population,
        offspring=args.offspring,
        crossover_rate=args.crossover_rate,
        generations=args.generations,
        ilp_timeout=args.timeout,
    )
    strategy = Strategy(args.strategy)
    decoder = Decoder(args.decoder)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for run_index in range(args.runs):
        seed = args.seed + run_index
        result = evolve(spec, strategy, decoder, params, seed)
        run_dir = _run_dir(out_dir, seed)
        run_dir.mkdir(parents=True, exist_ok=True)
        with (run_dir / "fronts.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["generation", "period", "footprint", "cost"])
            for generation, front in enumerate(result.snapshots):
                for period, footprint, cost in front:
                    writer.writerow([generation, int(period), int(footprint), cost])
        archive_payload = {
            "config": {
                "strategy": strategy.value,
                "decoder": decoder.value,
                "population": params.population,
                "offspring": params.offspring,
                "crossover_rate": params.crossover_rate,
                "generations": params.generations,
                "seed": seed,
            },
            "points": [
                {
                    "period": int(point[0]),
                    "footprint": int(point[1]),
                    "cost": point[2],
                    "genotype": {
                        "xi": list(genotype.xi),
                        "decisions": list(genotype.decisions),
                        "binding_genes": list(genotype.binding_genes),
                    },
                }
                for point, genotype in result.archive.entries()
            ],
        }
        dump_json(archive_payload, run_dir / "archive.json")
        dump_json(archive_payload["config"], run_dir / "meta.json")
        print(f"run seed={seed}: {len(result.archive)} archived points, "
              f"{result.evaluations} decodes")
    return 0


def _load_run(run_dir: Path) -> tuple[dict, list[list[tuple[float, float, float]]]]:
    meta = json.loads((run_dir / "meta.json").read_text(encoding="utf-8"))
    snapshots: dict[int, list[tuple[float, float, float]]] = {}
    with (run_dir / "fronts.csv").open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            generation = int(row["generation"])
            snapshots.setdefault(generation, []).append(
                (float(row["period"]), float(row["footprint"]), float(row["cost"]))
            )
    ordered = [snapshots[g] for g in sorted(snapshots)]
    return meta, ordered


def cmd_report(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    runs = []
    for run_dir in args.run_dirs:
        path = Path(run_dir)
        if not (path / "fronts.csv").exists():
            raise CliError(f"{run_dir} has no fronts.csv")
        meta, snapshots = _load_run(path)
        label = f"{meta['strategy']}+{meta['decoder']}"
        runs.append((label, snapshots))
    if not runs:
        raise CliError("no run directories given")

    all_points = [p for _, snapshots in runs for front in snapshots for p in front]
    if not all_points:
        raise CliError("runs contain no archived points")
    final_union = [p for _, snapshots in runs for p in snapshots[-1]]
    reference_front = pareto_filter(final_union)
    bounds = dse.objective_bounds(all_points + reference_front)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "reference_front.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "footprint", "cost"])
        for p in reference_front:
            writer.writerow([int(p[0]), int(p[1]), p[2]])

    with (out_dir / "front_union.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "period", "footprint", "cost", "non_dominated"])
        for label, snapshots in runs:
            for p in sorted(set(snapshots[-1])):
                writer.writerow(
                    [label, int(p[0]), int(p[1]), p[2], int(p in reference_front)]
                )

    labels = sorted({label for label, _ in runs})
    ref_norm = dse.normalize(reference_front, bounds)
    curves: dict[str, list[float]] = {}
    for label in labels:
        group = [snapshots for lb, snapshots in runs if lb == label]
        normalized_runs = [
            [dse.normalize(front, bounds) for front in snapshots] for snapshots in group
        ]
        curves[label] = dse.relative_avg_hypervolume(normalized_runs, ref_norm)

    generations = max(len(curve) for curve in curves.values())
    with (out_dir / "hv_curves.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["generation", *labels])
        for gen in range(generations):
            row = [gen]
            for label in labels:
                curve = curves[label]
                row.append(curve[gen] if gen < len(curve) else curve[-1])
            writer.writerow(row)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label in labels:
        ax.plot(range(len(curves[label])), curves[label], label=label)
    ax.set_xlabel("generation")
    ax.set_ylabel("relative hypervolume")
    ax.set_ylim(0, 1.05)
    ax.legend()
    ax.grid(linestyle=":", linewidth=0.5)
    fig.tight_layout()
    fig.savefig(out_dir / "hv_curves.svg")
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    markers = {label: marker for label, marker in zip(labels, "osv^D*Px")}
    for label, snapshots in runs:
        points = sorted(set(snapshots[-1]))
        if not points:
            continue
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        cs = [p[2] for p in points]
        sc = ax.scatter(xs, ys, c=cs, marker=markers.get(label, "o"), label=label, alpha=0.8)
    ax.set_xlabel("period [ticks]")
    ax.set_ylabel("memory footprint [bytes]")
    ax.legend()
    fig.colorbar(sc, ax=ax, label="core cost")
    fig.tight_layout()
    fig.savefig(out_dir / "front_union.svg")
    plt.close(fig)

    print(f"report written to {out_dir} ({len(reference_front)} reference points)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dfdse",
        description="map dataflow graphs onto tiled many-cores and explore trade-offs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_inputs(p, with_arch=True):
        p.add_argument("application", help="application YAML file")
        if with_arch:
            p.add_argument("architecture", help="architecture YAML file")
            p.add_argument("--tick-us", default="1", help="tick length in microseconds")

    p = sub.add_parser("validate", help="check input documents")
    add_inputs(p)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("transform", help="apply selected multi-cast merges")
    add_inputs(p, with_arch=False)
    p.add_argument("--xi", help="replacement bit per multi-cast actor, sorted by id")
    p.add_argument("--out", help="write the transformed application here")
    p.set_defaults(fn=cmd_transform)

    p = sub.add_parser("schedule", help="decode one explicit design point")
    add_inputs(p)
    p.add_argument("--decoder", choices=[d.value for d in Decoder], default="heuristic")
    p.add_argument("--xi", help="replacement bit per multi-cast actor, sorted by id")
    p.add_argument("--bind", action="append", help="actor=core, comma separated, repeatable")
    p.add_argument("--decide", action="append",
                   help="channel=DECISION over original channels (default PROD)")
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    p.add_argument("--add-initial-tokens", action="store_true")
    p.add_argument("--out-dir", default="schedule-out")
    p.set_defaults(fn=cmd_schedule)

    p = sub.add_parser("explore", help="run the evolutionary exploration")
    add_inputs(p)
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default="mrb-explore")
    p.add_argument("--decoder", choices=[d.value for d in Decoder], default="heuristic")
    p.add_argument("--generations", type=int, default=2500)
    p.add_argument("--population", type=int, default=100)
    p.add_argument("--offspring", type=int, default=25)
    p.add_argument("--crossover-rate", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT,
                   help="solver budget per decode (ilp decoder)")
    p.add_argument("--add-initial-tokens", action="store_true",
                   help="raise every channel delay to at least one token")
    p.add_argument("--out-dir", default="explore-out")
    p.set_defaults(fn=cmd_explore)

    p = sub.add_parser("report", help="aggregate run directories")
    p.add_argument("run_dirs", nargs="+", help="directories written by explore")
    p.add_argument("--out-dir", default="report-out")
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        _error_record("cli", str(exc))
        return exc.exit_code
    except (ValueError, KeyError, OSError) as exc:
        _error_record(type(exc).__name__, str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
