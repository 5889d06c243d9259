"""Goal-oriented orchestration: decomposition, matching, and path planning.

A plan assigns every subtask of the task template to a node along one
simple source->sink path over the interaction graph and fixes the semantic
representation to transmit. Candidates are scored by a unified utility
(success minus weighted energy, handoff, and history penalties);
``plan`` searches an expanded graph whose states pair a graph node with
subtask progress, while ``plan_bruteforce`` enumerates every simple path
as an independent oracle. Both apply identical feasibility, scoring, and
tie-break rules.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Optional, Sequence

from .intent import Constraint, Goal, Kpi
from .knowledge import KnowledgeBase, RepresentationSpec, UnknownTask, success_model
from .netmodel import NetworkState
from .registry import (
    AgentProfile,
    AgentType,
    Capability,
    KnowledgeGraph,
    interaction_adjacency,
)


class OrchestratorError(Exception):
    pass


class NoFeasiblePlan(OrchestratorError):
    pass


class GraphTooLarge(OrchestratorError):
    pass


BRUTEFORCE_NODE_LIMIT = 14


@dataclass(frozen=True)
class Subtask:
    """One step of a decomposed task and the share of the goal it carries."""

    name: str
    agent_type: AgentType
    capability_kind: str
    kpi_share: float
    kpis: tuple[Kpi, ...] = ()
    constraints: tuple[Constraint, ...] = ()

    def bandwidth_bound_hz(self) -> Optional[float]:
        for c in self.constraints:
            if c.quantity == "bandwidth_hz":
                return c.value
        return None


@dataclass(frozen=True)
class TaskTemplate:
    """Ordered subtasks with linear precedence and reportable KPI names."""

    task_type: str
    subtasks: tuple[Subtask, ...]
    kpis: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.subtasks:
            raise OrchestratorError(f"template {self.task_type!r} needs subtasks")
        total = sum(s.kpi_share for s in self.subtasks)
        if abs(total - 1.0) > 1e-9:
            raise OrchestratorError(f"template {self.task_type!r}: kpi shares sum to {total}")

    @property
    def precedence(self) -> tuple[tuple[str, str], ...]:
        names = [s.name for s in self.subtasks]
        return tuple(zip(names, names[1:]))

    @staticmethod
    def from_dict(doc: Mapping) -> "TaskTemplate":
        return TaskTemplate(
            task_type=str(doc["task_type"]),
            subtasks=tuple(
                Subtask(
                    name=str(s["name"]),
                    agent_type=AgentType(s["agent_type"]),
                    capability_kind=str(s["capability_kind"]),
                    kpi_share=float(s["kpi_share"]),
                )
                for s in doc["subtasks"]
            ),
            kpis=tuple(str(k) for k in doc.get("kpis", ())),
        )


@dataclass(frozen=True)
class SubtaskDag:
    subtasks: tuple[Subtask, ...]
    edges: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class UtilityWeights:
    """Penalty weights of the unified utility; canonical (0.1, 0, 0)."""

    w_energy: float = 0.1
    w_transfer: float = 0.0
    w_history: float = 0.0
    energy_ref_j: float = 1.0

    def __post_init__(self) -> None:
        if min(self.w_energy, self.w_transfer, self.w_history) < 0 or self.energy_ref_j <= 0:
            raise OrchestratorError("weights must be >= 0 and energy_ref > 0")

    @staticmethod
    def from_dict(doc: Mapping) -> "UtilityWeights":
        return UtilityWeights(
            w_energy=float(doc.get("w_energy", 0.1)),
            w_transfer=float(doc.get("w_transfer", 0.0)),
            w_history=float(doc.get("w_history", 0.0)),
            energy_ref_j=float(doc.get("energy_ref_j", 1.0)),
        )


@dataclass(frozen=True)
class PredictedMetrics:
    latency_s: float
    comm_energy_j: float
    compute_energy_j: float
    success: float
    utility: float

    def to_dict(self) -> dict:
        return {
            "latency_s": self.latency_s,
            "comm_energy_j": self.comm_energy_j,
            "compute_energy_j": self.compute_energy_j,
            "success": self.success,
            "utility": self.utility,
        }


@dataclass(frozen=True)
class ExecutionPlan:
    path: tuple[int, ...]
    representation: str
    assignment: tuple[tuple[str, int], ...]
    predicted: PredictedMetrics
    feasible: bool = True

    def stage_node(self, subtask_name: str) -> Optional[int]:
        for name, node in self.assignment:
            if name == subtask_name:
                return node
        return None

    def to_dict(self) -> dict:
        return {
            "path": list(self.path),
            "representation": self.representation,
            "assignment": {name: node for name, node in self.assignment},
            "predicted": self.predicted.to_dict(),
            "feasible": self.feasible,
        }


def utility(
    success: float,
    comm_energy_j: float,
    compute_energy_j: float,
    weights: UtilityWeights,
    transfer: float = 0.0,
    history: float = 0.0,
) -> float:
    """Unified utility: success minus weighted energy, handoff, and history."""
    return (
        success
        - weights.w_energy * (comm_energy_j + compute_energy_j) / weights.energy_ref_j
        - weights.w_transfer * transfer
        - weights.w_history * history
    )


def decompose(goal: Goal, templates: Mapping[str, TaskTemplate]) -> SubtaskDag:
    """Expand a goal into the template's subtask chain.

    Numeric KPI targets are split by kpi_share; constraints are routed to
    the subtask kind they govern (bandwidth to transmit), otherwise copied
    to every subtask.
    """
    template = templates.get(goal.task_type)
    if template is None:
        raise UnknownTask(f"no template for task {goal.task_type!r}")
    subtasks = []
    for subtask in template.subtasks:
        kpis = tuple(
            replace(k, target_value=k.target_value * subtask.kpi_share)
            if k.target_value is not None
            else k
            for k in goal.kpis
        )
        constraints = tuple(
            c
            for c in goal.constraints
            if _constraint_kind(c) is None or _constraint_kind(c) == subtask.capability_kind
        )
        subtasks.append(replace(subtask, kpis=kpis, constraints=constraints))
    return SubtaskDag(subtasks=tuple(subtasks), edges=template.precedence)


def _constraint_kind(constraint: Constraint) -> Optional[str]:
    if constraint.quantity == "bandwidth_hz":
        return "transmit"
    return None


def _rating_covers(profile: AgentProfile, bandwidth_hz: float) -> bool:
    # Link profiles advertise an operating interval (min_hz, max_hz];
    # an unrated profile matches any bandwidth.
    rating = profile.function_range("bandwidth_hz")
    if rating is None:
        return True
    return rating.get("min_hz", 0.0) < bandwidth_hz <= rating.get("max_hz", float("inf"))


def match_agents(subtask: Subtask, graph: KnowledgeGraph) -> list[int]:
    """Nodes whose type and advertised tools satisfy the subtask, ascending."""
    bound = subtask.bandwidth_bound_hz()
    matched = []
    for agent_id, profile in graph.nodes.items():
        if profile.agent_type is not subtask.agent_type:
            continue
        if not any(cap.kind == subtask.capability_kind for cap in profile.tools):
            continue
        if bound is not None and not _rating_covers(profile, bound):
            continue
        matched.append(agent_id)
    return sorted(matched)


# --- candidate construction ------------------------------------------------


@dataclass(frozen=True)
class _Candidate:
    plan: ExecutionPlan
    rep_name: str

    def key(self) -> tuple:
        # Maximal utility, then lower total energy, then lexicographic path,
        # representation, and stage assignment so ties resolve identically
        # in the expanded-graph search and the brute-force oracle.
        p = self.plan.predicted
        return (
            -p.utility,
            p.comm_energy_j + p.compute_energy_j,
            self.plan.path,
            self.rep_name,
            tuple(node for _, node in self.plan.assignment),
        )


def _producer_nodes(graph: KnowledgeGraph, rep: RepresentationSpec) -> list[int]:
    return sorted(
        agent_id
        for agent_id, profile in graph.nodes.items()
        if profile.tool(rep.producer_capability) is not None
    )


def _stage_candidates(
    template: TaskTemplate,
    graph: KnowledgeGraph,
    rep: RepresentationSpec,
    bandwidth_hz: float,
) -> list[list[int]]:
    """Per-subtask candidate nodes for one representation choice.

    The extract stage is pinned to producers of the representation (which
    may sit outside the generic extract kind, e.g. a segmenter whose output
    already is the transmittable raw form); transmit candidates must be
    rated for the configured bandwidth.
    """
    lists: list[list[int]] = []
    for subtask in template.subtasks:
        if subtask.capability_kind == "extract":
            lists.append(_producer_nodes(graph, rep))
            continue
        candidates = []
        for agent_id, profile in graph.nodes.items():
            if profile.agent_type is not subtask.agent_type:
                continue
            if not any(cap.kind == subtask.capability_kind for cap in profile.tools):
                continue
            if subtask.capability_kind == "transmit" and not _rating_covers(
                profile, bandwidth_hz
            ):
                continue
            candidates.append(agent_id)
        lists.append(sorted(candidates))
    return lists


def _stage_capability(
    profile: AgentProfile, subtask: Subtask, rep: RepresentationSpec
) -> Capability:
    if subtask.capability_kind == "extract":
        cap = profile.tool(rep.producer_capability)
    else:
        cap = next((c for c in profile.tools if c.kind == subtask.capability_kind), None)
    if cap is None:  # candidates were filtered on exactly this condition
        raise OrchestratorError(
            f"agent {profile.id} lost capability for subtask {subtask.name!r}"
        )
    return cap


def _evaluate_candidate(
    template: TaskTemplate,
    graph: KnowledgeGraph,
    rep: RepresentationSpec,
    assignment: Sequence[int],
    path: tuple[int, ...],
    knowledge: KnowledgeBase,
    net_state: NetworkState,
    weights: UtilityWeights,
    history: Mapping[int, float] | None,
    task_type: str,
) -> _Candidate:
    """Metrics for one (path, representation, assignment) candidate.

    Only stage capabilities contribute cost; pass-through hops are free.
    The transmit stage additionally pays channel airtime and energy.
    """
    channel = knowledge.channel_params(net_state.channel_id)
    rate = net_state.achievable_rate_bps
    catalog = {spec.name: spec for spec in knowledge.get_representations(task_type)}

    extract_index = next(
        (i for i, s in enumerate(template.subtasks) if s.capability_kind == "extract"),
        None,
    )
    latency = 0.0
    comm_energy = 0.0
    compute_energy = 0.0
    for index, (subtask, node) in enumerate(zip(template.subtasks, assignment)):
        profile = graph.nodes[node]
        cap = _stage_capability(profile, subtask, rep)
        input_bits = _stage_input_bits(index, subtask, extract_index, cap, rep, catalog)
        latency += cap.cost_model.latency_s(input_bits)
        compute_energy += cap.cost_model.energy_j(input_bits)
        if subtask.capability_kind == "transmit":
            latency += rep.size_bits / rate + channel.propagation_delay_s
            comm_energy += channel.tx_power_w * rep.size_bits / rate
    success = success_model(rep.name, latency, knowledge.success_params)
    history_sum = sum((history or {}).get(node, 0.0) for node in path)
    score = utility(
        success,
        comm_energy,
        compute_energy,
        weights,
        transfer=float(len(path) - 1),
        history=history_sum,
    )
    plan_obj = ExecutionPlan(
        path=path,
        representation=rep.name,
        assignment=tuple((s.name, n) for s, n in zip(template.subtasks, assignment)),
        predicted=PredictedMetrics(
            latency_s=latency,
            comm_energy_j=comm_energy,
            compute_energy_j=compute_energy,
            success=success,
            utility=score,
        ),
    )
    return _Candidate(plan=plan_obj, rep_name=rep.name)


def _stage_input_bits(
    index: int,
    subtask: Subtask,
    extract_index: Optional[int],
    cap: Capability,
    rep: RepresentationSpec,
    catalog: Mapping[str, RepresentationSpec],
) -> float:
    # Data volume feeding each stage: nothing before extraction, the
    # producer's input modality at extraction, the chosen representation
    # afterwards, and a bare command at actuation.
    if subtask.capability_kind == "actuate":
        return 0.0
    if extract_index is None or index < extract_index:
        return 0.0
    if index == extract_index:
        source = catalog.get(cap.input_schema.modality)
        return float(source.size_bits) if source is not None else 0.0
    return float(rep.size_bits)


# --- search -----------------------------------------------------------------


def _is_dag(adjacency: Mapping[int, list[int]]) -> bool:
    state: dict[int, int] = {}

    def visit(node: int) -> bool:
        state[node] = 1
        for succ in adjacency.get(node, ()):
            mark = state.get(succ, 0)
            if mark == 1 or (mark == 0 and not visit(succ)):
                return False
        state[node] = 2
        return True

    return all(visit(node) for node in adjacency if state.get(node, 0) == 0)


def _best_path_for_stages(
    adjacency: Mapping[int, list[int]],
    stages: Sequence[int],
    weights: UtilityWeights,
    history: Mapping[int, float] | None,
    acyclic: bool,
) -> Optional[tuple[int, ...]]:
    """Cheapest simple path visiting the assigned stage nodes in order.

    Uniform-cost search over (node, consumed-stage-count) states with edge
    weight = transfer + history penalty (the utility decrement a hop adds);
    among equal-penalty paths the lexicographically smallest node sequence
    wins. Cyclic graphs carry the visited set in the state to preserve
    simple-path semantics.
    """
    hist = history or {}
    start = stages[0]
    goal_state = (stages[-1], len(stages))
    later_stages = [set(stages[k:]) for k in range(len(stages) + 1)]

    start_penalty = weights.w_history * hist.get(start, 0.0)
    start_entry = (start_penalty, (start,), start, 1)
    heap = [start_entry]
    best: dict[object, tuple[float, tuple[int, ...]]] = {}
    while heap:
        penalty, path, node, consumed = heapq.heappop(heap)
        state_key = (node, consumed) if acyclic else (node, consumed, frozenset(path))
        seen = best.get(state_key)
        if seen is not None and seen <= (penalty, path):
            continue
        best[state_key] = (penalty, path)
        if (node, consumed) == goal_state:
            return path
        for succ in adjacency.get(node, ()):
            if not acyclic and succ in path:
                continue
            if consumed < len(stages) and succ == stages[consumed]:
                next_consumed = consumed + 1
            elif succ in later_stages[consumed]:
                continue  # a later stage reached out of order never completes
            else:
                next_consumed = consumed
            heapq.heappush(
                heap,
                (
                    penalty + weights.w_transfer + weights.w_history * hist.get(succ, 0.0),
                    path + (succ,),
                    succ,
                    next_consumed,
                ),
            )
    return None


def _plan_inputs(
    goal: Goal, knowledge: KnowledgeBase
) -> tuple[TaskTemplate, list[RepresentationSpec]]:
    template = knowledge.template_for(goal.task_type)
    if not isinstance(template, TaskTemplate):
        raise UnknownTask(f"template for {goal.task_type!r} is not a TaskTemplate")
    return template, knowledge.get_representations(goal.task_type)


def plan(
    goal: Goal,
    graph: KnowledgeGraph,
    knowledge: KnowledgeBase,
    net_state: NetworkState,
    weights: UtilityWeights,
    history: Mapping[int, float] | None = None,
) -> ExecutionPlan:
    """Utility-maximal execution plan via expanded-graph shortest path.

    Ties break toward lower total energy, then the lexicographically
    smallest node sequence. Raises NoFeasiblePlan when no simple path can
    satisfy every subtask under the hard constraints.
    """
    template, catalog = _plan_inputs(goal, knowledge)
    adjacency = interaction_adjacency(graph)
    acyclic = _is_dag(adjacency)
    best: Optional[_Candidate] = None
    for rep in catalog:
        stage_lists = _stage_candidates(template, graph, rep, net_state.bandwidth_hz)
        if any(not lst for lst in stage_lists):
            continue
        for assignment in itertools.product(*stage_lists):
            if len(set(assignment)) != len(assignment):
                continue
            path = _best_path_for_stages(adjacency, assignment, weights, history, acyclic)
            if path is None:
                continue
            candidate = _evaluate_candidate(
                template, graph, rep, assignment, path, knowledge,
                net_state, weights, history, goal.task_type,
            )
            if best is None or candidate.key() < best.key():
                best = candidate
    if best is None:
        raise NoFeasiblePlan(f"no feasible path for task {goal.task_type!r}")
    return best.plan


def plan_bruteforce(
    goal: Goal,
    graph: KnowledgeGraph,
    knowledge: KnowledgeBase,
    net_state: NetworkState,
    weights: UtilityWeights,
    history: Mapping[int, float] | None = None,
) -> ExecutionPlan:
    """Oracle planner: enumerate all simple paths times representations.

    Applies feasibility, scoring, and tie-breaks identical to ``plan``.
    """
    if len(graph.nodes) > BRUTEFORCE_NODE_LIMIT:
        raise GraphTooLarge(f"{len(graph.nodes)} nodes exceed {BRUTEFORCE_NODE_LIMIT}")
    template, catalog = _plan_inputs(goal, knowledge)
    adjacency = interaction_adjacency(graph)
    best: Optional[_Candidate] = None
    for rep in catalog:
        stage_lists = _stage_candidates(template, graph, rep, net_state.bandwidth_hz)
        if any(not lst for lst in stage_lists):
            continue
        sinks = set(stage_lists[-1])
        for source in stage_lists[0]:
            for path in _simple_paths(adjacency, source, sinks):
                for assignment in _assignments_along(path, stage_lists):
                    candidate = _evaluate_candidate(
                        template, graph, rep, assignment, path, knowledge,
                        net_state, weights, history, goal.task_type,
                    )
                    if best is None or candidate.key() < best.key():
                        best = candidate
    if best is None:
        raise NoFeasiblePlan(f"no feasible path for task {goal.task_type!r}")
    return best.plan


def _simple_paths(
    adjacency: Mapping[int, list[int]], source: int, sinks: set[int]
) -> Iterable[tuple[int, ...]]:
    stack: list[tuple[tuple[int, ...], int]] = [((source,), source)]
    while stack:
        path, node = stack.pop()
        if node in sinks:
            yield path
        for succ in adjacency.get(node, ()):
            if succ not in path:
                stack.append((path + (succ,), succ))


def _assignments_along(
    path: tuple[int, ...], stage_lists: list[list[int]]
) -> Iterable[tuple[int, ...]]:
    """Assignments with strictly increasing positions along the path.

    The first subtask is pinned to the path head and the last to the tail.
    """
    if path[0] not in stage_lists[0] or path[-1] not in stage_lists[-1]:
        return
    count = len(stage_lists)
    if count == 1:
        if len(path) == 1:
            yield (path[0],)
        return

    middle = stage_lists[1:-1]

    def extend(assignment: list[int], position: int, stage: int) -> Iterable[tuple[int, ...]]:
        if stage == len(middle):
            yield tuple([path[0], *assignment, path[-1]])
            return
        for pos in range(position + 1, len(path) - 1):
            if path[pos] in middle[stage]:
                yield from extend(assignment + [path[pos]], pos, stage + 1)

    yield from extend([], 0, 0)


def replan_on_event(
    current_plan: ExecutionPlan,
    event: object,
    goal: Goal,
    graph: KnowledgeGraph,
    knowledge: KnowledgeBase,
    net_state: NetworkState,
    weights: UtilityWeights,
    history: Mapping[int, float] | None = None,
) -> ExecutionPlan:
    """Return the current plan when it is still optimal, else a fresh one.

    ``event`` is the GraphEvent or NetworkState that triggered the check;
    optimality is re-derived from the updated inputs.
    """
    fresh = plan(goal, graph, knowledge, net_state, weights, history)
    if fresh == current_plan:
        return current_plan
    return fresh
