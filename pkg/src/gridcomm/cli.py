"""Command line front end.

Three subcommands cover the batch workflow: `partition` writes the
community decomposition of a network, `simulate` runs a scenario against it
and writes the report directory, `sensitivity` dumps the four sensitivity
submatrices. Networks come from a JSON file (--network) or the synthetic
generator (--synth key=value,...).

Exit codes: 0 success, 2 bad input, 3 power flow failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .network import NetworkModel
from .network_io import NetworkFormatError, NetworkValidationError, load_network
from .partition import Dendrogram, Partition, PeakPolicy, partition_network
from .powerflow import PowerFlowError, SingularJacobianError, solve_power_flow
from .sensitivity import SensitivityMatrix, SensitivityMode, compute_sensitivity_matrix
from .simulation import ScenarioError, SimulationDiverged, load_scenario, run_scenario, write_report
from .synthetic import SynthesisError, SynthSpec, generate_synthetic_network

_SYNTH_KEYS = {
    "feeders": "n_feeders",
    "transformers": "n_transformers",
    "rows": "grid_rows",
    "cols": "grid_cols",
    "loads": "n_loads",
    "dgs": "n_dgs",
}


def _parse_synth(text: str, seed: int) -> SynthSpec:
    kwargs = {"seed": seed}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        key, sep, value = part.partition("=")
        if not sep:
            raise ValueError(f"synth spec entry {part!r} is not key=value")
        if key not in _SYNTH_KEYS:
            raise ValueError(f"unknown synth key {key!r}; known: {sorted(_SYNTH_KEYS)}")
        try:
            kwargs[_SYNTH_KEYS[key]] = int(value)
        except ValueError:
            raise ValueError(f"synth key {key!r} needs an integer, got {value!r}")
    return SynthSpec(**kwargs)


def _load_net(args) -> NetworkModel:
    if args.network:
        return load_network(args.network)
    return generate_synthetic_network(_parse_synth(args.synth, args.seed))


def _solved(net: NetworkModel):
    sol = solve_power_flow(net)
    if not sol.converged:
        raise PowerFlowError(
            f"power flow did not converge ({sol.iterations} iterations, max mismatch {sol.max_mismatch:.3e})"
        )
    return sol


def _write_matrix(path: Path, bus_ids: list[int], m: np.ndarray) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["bus"] + [str(b) for b in bus_ids])
        for i, bus in enumerate(bus_ids):
            w.writerow([str(bus)] + [repr(float(x)) for x in m[i]])


def _dump_sensitivity(sens: SensitivityMatrix, out: Path) -> None:
    _write_matrix(out / "a_vq.csv", sens.bus_ids, sens.a_vq)
    _write_matrix(out / "a_vp.csv", sens.bus_ids, sens.a_vp)
    _write_matrix(out / "a_theta_p.csv", sens.bus_ids, sens.a_theta_p)
    _write_matrix(out / "a_theta_q.csv", sens.bus_ids, sens.a_theta_q)


def _write_partition(partition: Partition, dendro: Dendrogram, net: NetworkModel, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    dg_comm: dict[int, list[int]] = {}
    for d in net.dgs_sorted():
        dg_comm.setdefault(partition.community_of[d.bus], []).append(d.id)
    with open(out / "community_table.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["community", "nodes", "dgs"])
        for c in range(partition.n_communities):
            nodes = partition.members(c)
            w.writerow([c, "|".join(str(n) for n in nodes), "|".join(str(g) for g in dg_comm.get(c, []))])
    with open(out / "node_assignment.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["bus", "community"])
        for bus in sorted(partition.community_of):
            w.writerow([bus, partition.community_of[bus]])
    with open(out / "dendrogram.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["step", "community_a", "community_b", "modularity"])
        w.writerow([0, "", "", repr(dendro.initial_modularity)])
        for s in dendro.steps:
            w.writerow([s.step, s.community_a, s.community_b, repr(s.modularity_after)])


def cmd_partition(args) -> int:
    net = _load_net(args)
    sol = _solved(net)
    sens = compute_sensitivity_matrix(net, sol)
    partition, dendro = partition_network(
        net, sens, mode=SensitivityMode(args.mode), peak=_peak(args.peak)
    )
    out = Path(args.out)
    _write_partition(partition, dendro, net, out)
    if args.dump_sensitivity:
        _dump_sensitivity(sens, out)
    print(f"communities:{partition.n_communities} modularity:{repr(partition.modularity)}")
    return 0


def cmd_simulate(args) -> int:
    if not args.vmin < args.vmax:
        raise ValueError(f"--vmin must be below --vmax, got {args.vmin} >= {args.vmax}")
    net = _load_net(args)
    scenario = load_scenario(args.scenario)
    sol = _solved(net)
    sens = compute_sensitivity_matrix(net, sol)
    partition, _ = partition_network(net, sens, mode=SensitivityMode(args.mode), peak=_peak(args.peak))
    report = run_scenario(
        net,
        scenario,
        partition,
        sens,
        mode=SensitivityMode(args.mode),
        v_limits=(args.vmin, args.vmax),
    )
    write_report(report, Path(args.out))
    print(report.summary())
    return 0


def cmd_sensitivity(args) -> int:
    net = _load_net(args)
    sol = _solved(net)
    sens = compute_sensitivity_matrix(net, sol)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump_sensitivity(sens, out)
    print(f"wrote sensitivity blocks for {len(sens.bus_ids)} buses to {out}")
    return 0


def _peak(text: str) -> PeakPolicy:
    return PeakPolicy.GLOBAL if text == "global" else PeakPolicy.FIRST_LOCAL


def _add_common(p: argparse.ArgumentParser, scenario: bool = False) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--network", help="network JSON file")
    src.add_argument("--synth", help="synthetic spec, e.g. feeders=2,transformers=4,rows=4,cols=4,loads=10,dgs=4")
    p.add_argument("--seed", type=int, default=0, help="seed for --synth (default 0)")
    p.add_argument("--mode", choices=["vq", "vp"], default="vq", help="sensitivity mode (default vq)")
    p.add_argument("--peak", choices=["global", "first"], default="global", help="dendrogram peak policy")
    p.add_argument("--out", default="out", help="output directory (default ./out)")
    if scenario:
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--vmin", type=float, default=0.95, help="lower voltage limit in pu")
        p.add_argument("--vmax", type=float, default=1.05, help="upper voltage limit in pu")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridcomm",
        description="DG community partitioning and self-organizing voltage control",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="partition a network into DG communities")
    _add_common(p)
    p.add_argument("--dump-sensitivity", action="store_true", help="also write the sensitivity blocks")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("simulate", help="run a scenario with distributed voltage control")
    _add_common(p, scenario=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sensitivity", help="write the sensitivity submatrices")
    _add_common(p)
    p.set_defaults(func=cmd_sensitivity)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NetworkFormatError, NetworkValidationError, ScenarioError, SynthesisError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PowerFlowError, SingularJacobianError, SimulationDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
