"""Within-community voltage control: neighboring-DG subsets and the
max-min adjustment LP.

A community's nodes are grouped into subsets by their highest-influence DG;
when a node violates its voltage band, only its subset's DGs solve for the
fix. Overvoltage maximizes the minimum adjustment (least total decrease),
undervoltage minimizes the maximum (least total increase); both are cast as
a standard LP through a slack objective variable bounded by zero in the
correction direction, so a community already inside the band solves to the
all-zero adjustment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .network import NetworkModel
from .partition import build_dg_adjacency
from .powerflow import PowerFlowError, PowerFlowOptions, PowerFlowSolution, solve_power_flow
from .simplex import LPStatus, solve_inequality_lp

LP_TOL = 1e-9


class ControlDirection(str, Enum):
    OVERVOLTAGE = "overvoltage"
    UNDERVOLTAGE = "undervoltage"


class ControlMode(str, Enum):
    REACTIVE = "reactive"
    ACTIVE = "active"


class NoAvailableDGError(RuntimeError):
    """A community has zero online, reachable DGs to control with."""


class UnboundedControlError(RuntimeError):
    """The control LP is unbounded; surplus bounds should make this impossible."""


def build_community_dg_matrix(
    sens_block: np.ndarray, node_ids: Sequence[int], dg_ids: Sequence[int]
) -> np.ndarray:
    """Row-argmax 0/1 matrix over a community's nodes and its online DGs.

    sens_block holds the voltage-sensitivity entries restricted to the
    community (rows follow node_ids, columns follow dg_ids ascending).
    """
    if len(dg_ids) == 0:
        raise NoAvailableDGError("community has no online DGs")
    m = np.asarray(sens_block, dtype=float)
    if m.shape != (len(node_ids), len(dg_ids)):
        raise ValueError(f"expected {(len(node_ids), len(dg_ids))} matrix, got {m.shape}")
    return build_dg_adjacency(m)


@dataclass(frozen=True)
class Subset:
    """One node group and the DGs allowed to fix its violations."""

    anchor_dg: int
    dg_ids: tuple[int, ...]
    nodes: tuple[int, ...]


@dataclass
class CommunitySubsets:
    community: int
    subsets: list[Subset]
    generation: int = 0

    def subset_of(self, node: int) -> Subset | None:
        for s in self.subsets:
            if node in s.nodes:
                return s
        return None

    def all_nodes(self) -> list[int]:
        return sorted(n for s in self.subsets for n in s.nodes)


def derive_subsets(
    d_com: np.ndarray,
    node_ids: Sequence[int],
    dg_ids: Sequence[int],
    dg_bus_of: dict[int, int],
    community: int = 0,
    generation: int = 0,
) -> CommunitySubsets:
    """Group nodes by their argmax DG; a subset's DG set is its anchor plus
    any of the community's online DGs sitting at member nodes."""
    d = np.asarray(d_com)
    subsets: list[Subset] = []
    for j, anchor in enumerate(dg_ids):
        rows = np.flatnonzero(d[:, j] == 1)
        if rows.size == 0:
            continue
        nodes = tuple(sorted(node_ids[r] for r in rows))
        located = {g for g in dg_ids if dg_bus_of.get(g) in nodes}
        subsets.append(Subset(anchor_dg=anchor, dg_ids=tuple(sorted({anchor} | located)), nodes=nodes))
    subsets.sort(key=lambda s: s.anchor_dg)
    return CommunitySubsets(community=community, subsets=subsets, generation=generation)


@dataclass
class TransformerAngleRows:
    """Operating-point angles and DG angle-sensitivity rows for one
    transformer's reverse-power-flow constraint."""

    label: str
    theta_p0: float
    theta_s0: float
    theta_shift: float
    p_row: np.ndarray
    s_row: np.ndarray


@dataclass
class ControlProblem:
    direction: ControlDirection
    mode: ControlMode
    dg_ids: list[int]
    node_ids: list[int]
    v0: np.ndarray
    v_sens: np.ndarray  # node x DG voltage-sensitivity rows
    x_lower: np.ndarray
    x_upper: np.ndarray
    transformers: list[TransformerAngleRows] = field(default_factory=list)
    v_min: float = 0.95
    v_max: float = 1.05

    def __post_init__(self) -> None:
        if not self.dg_ids:
            raise ValueError("control problem needs at least one DG")
        n, k = len(self.node_ids), len(self.dg_ids)
        if self.v_sens.shape != (n, k):
            raise ValueError(f"v_sens must be {n}x{k}, got {self.v_sens.shape}")
        if self.v0.shape != (n,) or self.x_lower.shape != (k,) or self.x_upper.shape != (k,):
            raise ValueError("v0/x_lower/x_upper shapes inconsistent with node/DG lists")
        if self.mode is ControlMode.ACTIVE and self.direction is ControlDirection.UNDERVOLTAGE:
            raise ValueError("active-power control is implemented for overvoltage curtailment only")


@dataclass
class LinearProgram:
    """Inequality-form instance over variables [x_0..x_{k-1}, y]."""

    c: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    row_labels: list[tuple]
    dg_ids: list[int]
    direction: ControlDirection
    mode: ControlMode


@dataclass
class ControlSolution:
    dg_ids: list[int]
    x: np.ndarray | None
    objective: float | None
    feasible: bool
    binding: list[tuple] = field(default_factory=list)
    mode: ControlMode = ControlMode.REACTIVE
    direction: ControlDirection = ControlDirection.OVERVOLTAGE

    def adjustment_of(self, dg_id: int) -> float:
        return float(self.x[self.dg_ids.index(dg_id)])


def formulate_lp(problem: ControlProblem) -> LinearProgram:
    """Transcribe the control problem into min c.z, A z <= b.

    Row order: voltage upper band per node, lower band per node, adjustment
    upper/lower bounds per DG, one reverse-flow row per transformer, the
    max-min coupling rows, and the zero cap on the objective variable.
    """
    k = len(problem.dg_ids)
    n = len(problem.node_ids)
    over = problem.direction is ControlDirection.OVERVOLTAGE

    rows: list[np.ndarray] = []
    rhs: list[float] = []
    labels: list[tuple] = []

    for i, node in enumerate(problem.node_ids):
        rows.append(np.append(problem.v_sens[i], 0.0))
        rhs.append(problem.v_max - problem.v0[i])
        labels.append(("v_upper", node))
    for i, node in enumerate(problem.node_ids):
        rows.append(np.append(-problem.v_sens[i], 0.0))
        rhs.append(problem.v0[i] - problem.v_min)
        labels.append(("v_lower", node))
    for j, dg in enumerate(problem.dg_ids):
        e = np.zeros(k + 1)
        e[j] = 1.0
        rows.append(e)
        rhs.append(problem.x_upper[j])
        labels.append(("surplus_upper", dg))
    for j, dg in enumerate(problem.dg_ids):
        e = np.zeros(k + 1)
        e[j] = -1.0
        rows.append(e)
        rhs.append(-problem.x_lower[j])
        labels.append(("surplus_lower", dg))
    for t in problem.transformers:
        rows.append(np.append(t.s_row - t.p_row, 0.0))
        rhs.append(t.theta_p0 - t.theta_s0 - t.theta_shift)
        labels.append(("reverse_flow", t.label))
    for j, dg in enumerate(problem.dg_ids):
        e = np.zeros(k + 1)
        if over:
            e[j], e[k] = -1.0, 1.0  # y <= x_j
        else:
            e[j], e[k] = 1.0, -1.0  # x_j <= y
        rows.append(e)
        rhs.append(0.0)
        labels.append(("maxmin", dg))
    cap = np.zeros(k + 1)
    cap[k] = 1.0 if over else -1.0
    rows.append(cap)
    rhs.append(0.0)
    labels.append(("objective_cap",))

    c = np.zeros(k + 1)
    c[k] = -1.0 if over else 1.0
    return LinearProgram(
        c=c,
        a_ub=np.vstack(rows),
        b_ub=np.array(rhs),
        row_labels=labels,
        dg_ids=list(problem.dg_ids),
        direction=problem.direction,
        mode=problem.mode,
    )


def solve_lp(lp: LinearProgram) -> ControlSolution:
    """Solve to an optimal basic solution, or report infeasibility.

    Unboundedness means the formulation lost its surplus bounds and is an
    error, not a result.
    """
    result = solve_inequality_lp(lp.c, lp.a_ub, lp.b_ub)
    if result.status is LPStatus.INFEASIBLE:
        return ControlSolution(
            dg_ids=lp.dg_ids, x=None, objective=None, feasible=False,
            mode=lp.mode, direction=lp.direction,
        )
    if result.status is LPStatus.UNBOUNDED:
        raise UnboundedControlError("control LP unbounded; check surplus bounds")
    z = result.x
    residual = lp.a_ub @ z - lp.b_ub
    binding = [lab for lab, r in zip(lp.row_labels, residual) if abs(r) <= LP_TOL]
    return ControlSolution(
        dg_ids=lp.dg_ids,
        x=z[:-1].copy(),
        objective=float(z[-1]),
        feasible=True,
        binding=binding,
        mode=lp.mode,
        direction=lp.direction,
    )


def predict_voltages(v0: np.ndarray, v_sens: np.ndarray, x: np.ndarray) -> np.ndarray:
    """First-order voltage prediction v0 + S x for one mode's adjustments."""
    return np.asarray(v0, dtype=float) + np.asarray(v_sens, dtype=float) @ np.asarray(x, dtype=float)


@dataclass(frozen=True)
class LimitViolation:
    bus: int
    v_mag: float
    side: str  # "low" | "high"


def scan_voltage_limits(
    sol: PowerFlowSolution, v_min: float = 0.95, v_max: float = 1.05
) -> list[LimitViolation]:
    """All buses outside the band, bus id ascending. The slack bus is pinned
    by definition and skipped."""
    out = []
    for i, bus_id in enumerate(sol.bus_ids):
        if i == sol.slack_index:
            continue
        v = float(sol.v_mag[i])
        if v < v_min:
            out.append(LimitViolation(bus=bus_id, v_mag=v, side="low"))
        elif v > v_max:
            out.append(LimitViolation(bus=bus_id, v_mag=v, side="high"))
    return sorted(out, key=lambda lv: lv.bus)


def verify_and_apply(
    net: NetworkModel,
    solution: ControlSolution,
    v_min: float = 0.95,
    v_max: float = 1.05,
    options: PowerFlowOptions | None = None,
) -> tuple[PowerFlowSolution, list[LimitViolation]]:
    """Apply the adjustments to the network's DGs, re-solve the nonlinear
    power flow and report any residual band violations.

    Mutates net. Raises PowerFlowError if the post-control flow diverges;
    the network is left with the adjustments applied for inspection.
    """
    if not solution.feasible:
        raise ValueError("cannot apply an infeasible control solution")
    for dg_id, xi in zip(solution.dg_ids, solution.x):
        dg = net.dg_by_id(dg_id)
        if solution.mode is ControlMode.REACTIVE:
            dg.q_out += float(xi)
        else:
            dg.p_out += float(xi)
    sol = solve_power_flow(net, options)
    if not sol.converged:
        raise PowerFlowError("power flow diverged after applying control adjustments")
    return sol, scan_voltage_limits(sol, v_min, v_max)
