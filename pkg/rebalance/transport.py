"""
Unbalanced transportation problem solved as a min-cost flow.

    minimise   sum C[i,j] T[i,j] + sum lam[j] S[j]
    subject to sum_j T[i,j] <= B[i]
               sum_i T[i,j] + S[j] >= D[j]
               T, S >= 0 and integer

Graph: supply node per cell, demand node per cell, a slack source that can
cover any demand at cost lam, and a sink that absorbs unused supply.
Costs are integer millimetres. Ties among optimal plans go to the
lexicographically smallest T in row-major order: after the first solve,
each (i, j) arc in turn is pinned at the least flow an optimal plan can
give it, re-solving only when the current plan uses that arc.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from ortools.graph.python import min_cost_flow


logger = logging.getLogger(__name__)

INT64_MAX = 2**63 - 1


class TransportProblemError(ValueError):
    pass


@dataclass
class TransportPlan:
    flows: Dict[Tuple[int, int], int]
    slack: np.ndarray
    objective: float
    n: int = field(default=0)

    @property
    def T(self) -> np.ndarray:
        matrix = np.zeros((self.n, self.n), dtype=np.int64)
        for (i, j), k in self.flows.items():
            matrix[i, j] = k
        return matrix

    @property
    def S(self) -> np.ndarray:
        return self.slack

    def moves(self):
        """Inter-cell flows in (i, j) order."""
        return [(i, j, k) for (i, j), k in sorted(self.flows.items()) if i != j and k > 0]

    def check(self, B: np.ndarray, D: np.ndarray):
        T = self.T
        if (T < 0).any() or (self.slack < 0).any():
            raise TransportProblemError("Plan holds negative flows")
        if (T.sum(axis=1) > B).any():
            raise TransportProblemError("Plan ships more bikes than a cell holds")
        if (T.sum(axis=0) + self.slack < D).any():
            raise TransportProblemError("Plan leaves demand uncovered without slack")


def default_slack_cost(C: np.ndarray) -> float:
    finite = C[np.isfinite(C)]
    top = float(finite.max()) if finite.size else 0.0
    return 10.0 * max(top, 1.0)


def _as_vector(values, name: str, n: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise TransportProblemError(f"{name} must be a vector")
    if n is not None and arr.shape[0] != n:
        raise TransportProblemError(f"{name} has {arr.shape[0]} entries, expected {n}")
    if (arr < 0).any():
        raise TransportProblemError(f"{name} holds negative entries")
    return arr


def solve_transportation(B: Sequence[int], D: Sequence[int], C, lam=None) -> TransportPlan:
    B = _as_vector(B, "B").astype(np.int64)
    n = B.shape[0]
    D = _as_vector(D, "D", n).astype(np.int64)
    C = np.asarray(C, dtype=float)
    if C.shape != (n, n):
        raise TransportProblemError(f"Cost matrix has shape {C.shape}, expected {(n, n)}")
    if (C < 0).any():
        raise TransportProblemError("Cost matrix holds negative entries")
    if lam is None:
        lam = np.full(n, default_slack_cost(C))
    elif np.isscalar(lam):
        lam = np.full(n, float(lam))
    lam = _as_vector(np.asarray(lam, dtype=float), "lambda", n)

    total_demand = int(D.sum())
    total_supply = int(B.sum())
    if total_demand == 0:
        return TransportPlan({}, np.zeros(n, dtype=np.int64), 0.0, n)

    cost_mm = np.where(np.isfinite(C), np.rint(np.where(np.isfinite(C), C, 0) * 1000.0), -1).astype(np.int64)
    lam_mm = np.rint(lam * 1000.0).astype(np.int64)

    # Any flow on one arc is worth less than a millimetre of base cost.
    weight = total_demand + 1
    biggest = int(max(cost_mm.max(initial=0), lam_mm.max(initial=0))) * weight + 1
    refine = biggest * (total_demand + total_supply) < INT64_MAX
    if not refine:
        logger.warning("Transportation costs too large for the lexicographic tie-break; solving unrefined")
        weight = 1

    arcs = [(i, j) for i in range(n) for j in range(n) if B[i] > 0 and D[j] > 0 and cost_mm[i, j] >= 0]
    flows, slack = _min_cost_flow(B, D, cost_mm, lam_mm, arcs, weight)

    if refine:
        # Walk the arcs in row-major order and pin each one at the least
        # flow any optimal plan can give it, given the arcs pinned so far.
        committed: Dict[Tuple[int, int], int] = {}
        supply, demand = B.copy(), D.copy()
        for k, (i, j) in enumerate(arcs):
            if flows.get((i, j), 0) > 0:
                flows, slack = _min_cost_flow(supply, demand, cost_mm, lam_mm, arcs[k:], weight, focus=(i, j))
            least = flows.pop((i, j), 0)
            if least:
                committed[(i, j)] = least
                supply[i] -= least
                demand[j] -= least
        flows = {**committed, **flows}

    objective = float(sum(C[i, j] * k for (i, j), k in flows.items()) + float(np.dot(lam, slack)))
    plan = TransportPlan(dict(sorted(flows.items())), slack, objective, n)
    plan.check(B, D)
    return plan


def _min_cost_flow(B: np.ndarray, D: np.ndarray, cost_mm: np.ndarray, lam_mm: np.ndarray,
                   arcs: Sequence[Tuple[int, int]], weight: int,
                   focus: Optional[Tuple[int, int]] = None) -> Tuple[Dict[Tuple[int, int], int], np.ndarray]:
    """
    One min-cost flow over the supply->demand `arcs`. Costs are multiplied by
    `weight`; the `focus` arc pays one extra unit per bike, so among the
    cheapest plans it returns one with the least flow on that arc.
    """
    n = B.shape[0]
    total_demand = int(D.sum())
    total_supply = int(B.sum())
    slack_node, sink_node = 2 * n, 2 * n + 1

    tails, heads, caps, costs, kinds = [], [], [], [], []

    def arc(tail, head, cap, cost, kind):
        if cap > 0:
            tails.append(tail)
            heads.append(head)
            caps.append(int(cap))
            costs.append(int(cost))
            kinds.append(kind)

    for i, j in arcs:
        extra = 1 if (i, j) == focus else 0
        arc(i, n + j, min(B[i], D[j]), cost_mm[i, j] * weight + extra, ("T", i, j))
    for i in range(n):
        arc(i, sink_node, B[i], 0, ("surplus", i, None))
    for j in range(n):
        arc(slack_node, n + j, D[j], lam_mm[j] * weight, ("S", None, j))
    arc(slack_node, sink_node, total_demand, 0, ("unused", None, None))

    slack = np.zeros(n, dtype=np.int64)
    if not tails:
        return {}, slack

    smcf = min_cost_flow.SimpleMinCostFlow()
    handles = smcf.add_arcs_with_capacity_and_unit_cost(
        np.array(tails, dtype=np.int64), np.array(heads, dtype=np.int64),
        np.array(caps, dtype=np.int64), np.array(costs, dtype=np.int64),
    )
    supplies = [int(b) for b in B] + [-int(d) for d in D] + [total_demand, -total_supply]
    smcf.set_nodes_supplies(np.arange(2 * n + 2), np.array(supplies, dtype=np.int64))

    status = smcf.solve()
    if status != smcf.OPTIMAL:
        raise TransportProblemError(f"Min-cost flow failed with status {status}")

    flows: Dict[Tuple[int, int], int] = {}
    for kind, flow in zip(kinds, smcf.flows(handles).tolist()):
        if flow <= 0:
            continue
        if kind[0] == "T":
            flows[(kind[1], kind[2])] = int(flow)
        elif kind[0] == "S":
            slack[kind[2]] = int(flow)
    return flows, slack
