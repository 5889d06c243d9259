"""Robotic fault-detection-and-recovery case study.

Loads a scenario from a single JSON config (agent graph, representation
catalog, channel, success calibration, utility weights, task template,
optional causal model), runs the goal-oriented architecture and the legacy
bit-pipe baseline over the protocol bus, and compares them. A scenario
instance carries mutable run state; use a fresh instance per run for
byte-identical reports.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from . import netmodel
from . import scm as scm_mod
from .intent import Goal, IntentSpec, SourceKind, parse_intent, validate_goal
from .knowledge import (
    ChannelParams,
    KnowledgeBase,
    MappingRule,
    RepresentationSpec,
    SuccessParams,
    success_model,
)
from .netmodel import Channel, NetworkState
from .orchestrator import (
    ExecutionPlan,
    NoFeasiblePlan,
    PredictedMetrics,
    TaskTemplate,
    UtilityWeights,
    _evaluate_candidate,
    _rating_covers,
    _stage_capability,
    _stage_input_bits,
    plan,
    utility,
)
from .protocol import AgentError, Bus, InvokeParams, InvokeResult, Message
from .registry import AgentProfile, AgentType, EdgeKind, KnowledgeGraph, Registry

__all__ = [
    "Scenario",
    "RunReport",
    "ComparisonReport",
    "SuccessParams",
    "success_model",
    "load_scenario",
    "validate_config",
    "canonical_config",
    "run_goagentnet",
    "run_baseline",
    "compare",
    "derive_goal_bounds",
    "report_rows",
    "CSV_COLUMNS",
    "SchemaViolation",
    "ReferentialIntegrity",
    "BaselineZeroEnergy",
]

CSV_COLUMNS = ("bandwidth_hz", "arch", "representation", "t_e2e", "E_c", "E_x", "S", "U")


class ConfigError(Exception):
    def __init__(self, findings: Sequence[tuple[str, str]]):
        self.findings = list(findings)
        super().__init__("; ".join(f"{code}: {detail}" for code, detail in findings))


class SchemaViolation(ConfigError):
    pass


class ReferentialIntegrity(ConfigError):
    pass


class BaselineZeroEnergy(Exception):
    pass


@dataclass
class Scenario:
    config: dict
    registry: Registry
    bus: Bus
    knowledge: KnowledgeBase
    channel: Channel
    weights: UtilityWeights
    task_type: str
    causal_model: Optional[scm_mod.Scm] = None
    scm_config: Optional[dict] = None

    @property
    def graph(self) -> KnowledgeGraph:
        return self.registry.snapshot()


@dataclass(frozen=True)
class RunReport:
    intent_id: str
    intent_text: str
    arch: str
    seed: int
    bandwidth_hz: float
    goal: Goal
    plan: ExecutionPlan
    measured: PredictedMetrics
    events: tuple[dict, ...]
    network_states: tuple[NetworkState, ...]
    advisory_bounds: tuple[tuple[str, float], ...] = ()

    def to_dict(self) -> dict:
        return report_to_dict(self)


def _goal_to_dict(goal: Goal) -> dict:
    return {
        "task_type": goal.task_type,
        "kpis": [
            {
                "name": k.name,
                "direction": k.direction.value,
                "target_value": k.target_value,
                "target_unit": k.target_unit,
            }
            for k in goal.kpis
        ],
        "constraints": [
            {"quantity": c.quantity, "relation": c.relation.value, "value": c.value, "unit": c.unit}
            for c in goal.constraints
        ],
        "tradeoffs": dict(sorted(goal.tradeoffs.items())),
    }


def report_to_dict(report: RunReport) -> dict:
    return {
        "intent_id": report.intent_id,
        "intent_text": report.intent_text,
        "arch": report.arch,
        "seed": report.seed,
        "bandwidth_hz": report.bandwidth_hz,
        "goal": _goal_to_dict(report.goal),
        "plan": report.plan.to_dict(),
        "measured": report.measured.to_dict(),
        "events": list(report.events),
        "network_states": [s.to_dict() for s in report.network_states],
        "advisory_bounds": {name: value for name, value in report.advisory_bounds},
    }


def report_to_json(report: RunReport) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class ComparisonReport:
    intent_id: str
    bandwidth_hz: float
    energy_reduction_pct: float
    success_delta: float
    goagentnet_comm_energy_j: float
    baseline_comm_energy_j: float
    goagentnet_success: float
    baseline_success: float

    def to_dict(self) -> dict:
        return {
            "intent_id": self.intent_id,
            "bandwidth_hz": self.bandwidth_hz,
            "energy_reduction_pct": self.energy_reduction_pct,
            "success_delta": self.success_delta,
            "goagentnet_comm_energy_j": self.goagentnet_comm_energy_j,
            "baseline_comm_energy_j": self.baseline_comm_energy_j,
            "goagentnet_success": self.goagentnet_success,
            "baseline_success": self.baseline_success,
        }


# --- config ------------------------------------------------------------------


def canonical_config() -> dict:
    """Shipped robotic-FDR scenario (11 agents, 3 representations)."""
    text = resources.files("goagentnet").joinpath("data/fdr_canonical.json").read_text()
    return json.loads(text)


def validate_config(doc: Mapping) -> list[tuple[str, str]]:
    """Schema and referential-integrity findings for a scenario document."""
    findings: list[tuple[str, str]] = []
    for key in ("task", "weights", "channel", "agents", "edges"):
        if key not in doc:
            findings.append(("SchemaViolation", f"missing top-level key {key!r}"))
    if findings:
        return findings

    agents = doc["agents"]
    if not agents:
        findings.append(("SchemaViolation", "agents list is empty"))
    ids = set()
    capability_names = set()
    for entry in agents:
        try:
            profile = AgentProfile.from_dict(entry)
        except Exception as exc:
            findings.append(("SchemaViolation", f"bad agent entry {entry.get('id')}: {exc}"))
            continue
        if profile.id in ids:
            findings.append(("SchemaViolation", f"duplicate agent id {profile.id}"))
        ids.add(profile.id)
        capability_names.update(cap.name for cap in profile.tools)

    seen_edges = set()
    for entry in doc["edges"]:
        try:
            from_id, to_id, kind = int(entry[0]), int(entry[1]), EdgeKind(entry[2])
        except Exception as exc:
            findings.append(("SchemaViolation", f"bad edge entry {entry!r}: {exc}"))
            continue
        if from_id not in ids or to_id not in ids:
            findings.append(
                ("ReferentialIntegrity", f"edge {from_id}->{to_id} references unknown agent")
            )
        if from_id == to_id:
            findings.append(("SchemaViolation", f"self-loop on {from_id}"))
        key = (from_id, to_id, kind.value)
        if key in seen_edges:
            findings.append(("SchemaViolation", f"duplicate edge {key}"))
        seen_edges.add(key)

    task = doc["task"]
    for key in ("template", "representations", "success"):
        if key not in task:
            findings.append(("SchemaViolation", f"task section missing {key!r}"))
    reps = {}
    for entry in task.get("representations", ()):
        try:
            spec = _representation_from_dict(entry)
        except Exception as exc:
            findings.append(("SchemaViolation", f"bad representation {entry.get('name')}: {exc}"))
            continue
        if spec.name in reps:
            findings.append(("SchemaViolation", f"duplicate representation {spec.name}"))
        reps[spec.name] = spec
        if spec.producer_capability not in capability_names:
            findings.append(
                (
                    "ReferentialIntegrity",
                    f"no agent provides producer capability {spec.producer_capability!r}",
                )
            )
    for entry in task.get("mapping_rules", ()):
        if entry.get("representation") not in reps:
            findings.append(
                (
                    "ReferentialIntegrity",
                    f"mapping rule references unknown representation "
                    f"{entry.get('representation')!r}",
                )
            )
    if "template" in task:
        try:
            TaskTemplate.from_dict(task["template"])
        except Exception as exc:
            findings.append(("SchemaViolation", f"bad template: {exc}"))
    if "success" in task:
        try:
            _success_params(task, reps.values())
        except Exception as exc:
            findings.append(("SchemaViolation", f"bad success section: {exc}"))
    try:
        _channel_from_dict(doc["channel"])
    except Exception as exc:
        findings.append(("SchemaViolation", f"bad channel: {exc}"))
    try:
        UtilityWeights.from_dict(doc["weights"])
    except Exception as exc:
        findings.append(("SchemaViolation", f"bad weights: {exc}"))
    if "scm" in doc:
        try:
            scm_mod.scm_from_config(doc["scm"]["equations"])
        except Exception as exc:
            findings.append(("SchemaViolation", f"bad scm section: {exc}"))
    return findings


def _representation_from_dict(entry: Mapping) -> RepresentationSpec:
    return RepresentationSpec(
        name=str(entry["name"]),
        size_bits=int(entry["size_bits"]),
        extract_latency_s=float(entry["extract_latency_s"]),
        extract_energy_j=float(entry["extract_energy_j"]),
        sufficiency=float(entry["sufficiency"]),
        producer_capability=str(entry["producer_capability"]),
    )


def _channel_from_dict(entry: Mapping) -> Channel:
    return Channel(
        id=str(entry["id"]),
        bandwidth_hz=float(entry["bandwidth_hz"]),
        spectral_efficiency_bps_per_hz=float(entry.get("spectral_efficiency_bps_per_hz", 1.0)),
        tx_power_w=float(entry.get("tx_power_w", 1.0)),
        propagation_delay_s=float(entry.get("propagation_delay_s", 0.0)),
        loss_prob=float(entry.get("loss_prob", 0.0)),
    )


def _success_params(task: Mapping, reps) -> SuccessParams:
    return SuccessParams(
        deadline_s=float(task["success"]["deadline_s"]),
        decay_per_s=float(task["success"]["decay_per_s"]),
        sufficiency=tuple(sorted((spec.name, spec.sufficiency) for spec in reps)),
    )


def load_scenario(source: Union[str, Path, Mapping]) -> Scenario:
    """Build a fully wired scenario from a config document or path.

    Raises SchemaViolation or ReferentialIntegrity with the collected
    findings when the document is invalid.
    """
    if isinstance(source, (str, Path)):
        doc = json.loads(Path(source).read_text())
    else:
        doc = dict(source)
    findings = validate_config(doc)
    if findings:
        if all(code == "ReferentialIntegrity" for code, _ in findings):
            raise ReferentialIntegrity(findings)
        raise SchemaViolation(findings)

    task = doc["task"]
    template = TaskTemplate.from_dict(task["template"])
    reps = [_representation_from_dict(entry) for entry in task["representations"]]

    knowledge = KnowledgeBase()
    knowledge.register_task(template.task_type, reps, template)
    for entry in task.get("mapping_rules", ()):
        knowledge.add_rule(
            MappingRule(
                task_type=str(entry["task_type"]),
                raw_modality=str(entry["raw_modality"]),
                representation=str(entry["representation"]),
                consumes=str(entry["consumes"]),
                produced_for=str(entry["produced_for"]),
            )
        )
    knowledge.set_success_params(_success_params(task, reps))

    channel = _channel_from_dict(doc["channel"])
    knowledge.set_channel_params(
        channel.id, ChannelParams(channel.tx_power_w, channel.propagation_delay_s)
    )
    for entry in doc.get("assets", ()):
        knowledge.register_asset(str(entry["id"]), str(entry["kind"]), str(entry["ref"]))

    registry = Registry()
    bus = Bus(registry)
    catalog_by_producer = {spec.producer_capability: spec for spec in reps}
    for entry in doc["agents"]:
        profile = AgentProfile.from_dict(entry)
        bus.register_agent(profile, _make_handler(profile, catalog_by_producer))
    for from_id, to_id, kind in doc["edges"]:
        registry.add_edge(int(from_id), int(to_id), EdgeKind(kind))

    causal_model = None
    if "scm" in doc:
        causal_model = scm_mod.scm_from_config(doc["scm"]["equations"])

    return Scenario(
        config=doc,
        registry=registry,
        bus=bus,
        knowledge=knowledge,
        channel=channel,
        weights=UtilityWeights.from_dict(doc["weights"]),
        task_type=template.task_type,
        causal_model=causal_model,
        scm_config=doc.get("scm"),
    )


def _make_handler(profile: AgentProfile, catalog_by_producer: Mapping[str, RepresentationSpec]):
    """Simulated agent endpoint: answers invokes per the capability's role."""

    def handler(capability: str, params: InvokeParams) -> InvokeResult:
        cap = profile.tool(capability)
        if cap is None:
            raise AgentError(-32002, f"agent {profile.id} has no capability {capability!r}")
        duration = cap.cost_model.latency_s(params.size_bits)
        energy = cap.cost_model.energy_j(params.size_bits)
        if capability in catalog_by_producer:
            spec = catalog_by_producer[capability]
            result = {"representation": spec.name, "size_bits": spec.size_bits}
        elif cap.kind == "reason":
            result = {"representation": cap.output_schema.modality, "action": "replan"}
        elif cap.kind == "actuate":
            result = {"ack": True}
        elif cap.kind == "sense":
            result = {"representation": cap.output_schema.modality, "size_bits": params.size_bits}
        else:
            result = {"forwarded_bits": params.size_bits}
        return InvokeResult(result, sim_duration_s=duration, sim_energy_j=energy)

    return handler


# --- runners ----------------------------------------------------------------


def _as_goal(scenario: Scenario, intent: Union[str, IntentSpec, Goal]) -> Goal:
    if isinstance(intent, Goal):
        goal = intent
    else:
        spec = (
            intent
            if isinstance(intent, IntentSpec)
            else IntentSpec(SourceKind.PATTERN_TEXT, intent)
        )
        goal = parse_intent(spec)
    report = validate_goal(goal, {scenario.task_type: scenario.knowledge.template_for(scenario.task_type)})
    blocking = [f for f in report.findings if f.code in ("UnknownTask", "InfeasibleConstraint")]
    if blocking:
        raise SchemaViolation([(f.code, f.detail) for f in blocking])
    return goal


def _apply_bandwidth(scenario: Scenario, goal: Goal) -> NetworkState:
    bound = goal.constraint_value("bandwidth_hz")
    if bound is not None:
        state = netmodel.set_bandwidth(scenario.channel, bound, timestamp=0.0)
    else:
        state = netmodel.report_state(scenario.channel, timestamp=0.0)
    scenario.knowledge.record_state(state)
    return state


def _intent_text(intent: Union[str, IntentSpec, Goal]) -> str:
    if isinstance(intent, str):
        return intent
    if isinstance(intent, IntentSpec):
        return intent.body
    return f"goal:{intent.task_type}"


def _intent_id(goal: Goal, bandwidth_hz: float) -> str:
    return f"{goal.task_type}@{int(bandwidth_hz)}Hz"


def run_goagentnet(
    scenario: Scenario, intent: Union[str, IntentSpec, Goal], seed: int = 0
) -> RunReport:
    """Translate, plan, and execute over the bus with cross-layer feedback."""
    goal = _as_goal(scenario, intent)
    net_state = _apply_bandwidth(scenario, goal)
    plan_obj = plan(goal, scenario.graph, scenario.knowledge, net_state, scenario.weights)
    bounds = derive_goal_bounds(scenario, goal)
    return _execute(scenario, goal, plan_obj, seed, "goagentnet", _intent_text(intent), bounds)


def run_baseline(
    scenario: Scenario, intent: Union[str, IntentSpec, Goal], seed: int = 0
) -> RunReport:
    """Legacy bit pipe: fixed path, raw representation, no replanning."""
    goal = _as_goal(scenario, intent)
    net_state = _apply_bandwidth(scenario, goal)
    plan_obj = _baseline_plan(scenario, goal, net_state)
    return _execute(scenario, goal, plan_obj, seed, "baseline", _intent_text(intent), ())


def _baseline_plan(scenario: Scenario, goal: Goal, net_state: NetworkState) -> ExecutionPlan:
    """Fixed raw-transmission pipe.

    The legacy architecture has no knowledge graph, so this path is wired
    from node roles and need not follow registered graph edges.
    """
    graph = scenario.graph
    knowledge = scenario.knowledge
    template: TaskTemplate = knowledge.template_for(goal.task_type)
    catalog = knowledge.get_representations(goal.task_type)
    raw_name = knowledge.raw_modality(goal.task_type)
    raw = next((r for r in catalog if r.name == raw_name), None)
    if raw is None:
        raw = max(catalog, key=lambda r: r.size_bits)

    def first_of(kind: str, agent_type: Optional[AgentType] = None) -> Optional[int]:
        candidates = [
            agent_id
            for agent_id, profile in graph.nodes.items()
            if any(cap.kind == kind for cap in profile.tools)
            and (agent_type is None or profile.agent_type is agent_type)
        ]
        return min(candidates) if candidates else None

    link = None
    for agent_id in sorted(graph.nodes):
        profile = graph.nodes[agent_id]
        if any(cap.kind == "transmit" for cap in profile.tools) and _rating_covers(
            profile, net_state.bandwidth_hz
        ):
            link = agent_id
            break
    sense = first_of("sense", AgentType.PERCEPTUAL)
    reason = first_of("reason")
    actuate = first_of("actuate", AgentType.ACTUATOR)
    producers = [
        agent_id
        for agent_id in sorted(graph.nodes)
        if graph.nodes[agent_id].tool(raw.producer_capability) is not None
    ]
    if None in (sense, link, reason, actuate) or not producers:
        raise NoFeasiblePlan("baseline pipe cannot be assembled from registered agents")
    producer = producers[0]

    # Pipe order: sense, local processing chain, scheduler, rated link,
    # then the edge-side reasoner and the actuator.
    relays = [first_of("preprocess"), first_of("segment"), first_of("schedule"), producer]
    middle = sorted(
        {node for node in relays if node is not None} - {sense, link, reason, actuate}
    )
    path = [sense, *middle, link, reason, actuate]

    assignment = (sense, producer, link, reason, actuate)
    candidate = _evaluate_candidate(
        template,
        graph,
        raw,
        assignment,
        tuple(path),
        knowledge,
        net_state,
        scenario.weights,
        None,
        goal.task_type,
    )
    return candidate.plan


def _execute(
    scenario: Scenario,
    goal: Goal,
    plan_obj: ExecutionPlan,
    seed: int,
    arch: str,
    intent_text: str,
    bounds: tuple[tuple[str, float], ...],
) -> RunReport:
    rng = random.Random(seed)
    knowledge = scenario.knowledge
    graph = scenario.graph
    template: TaskTemplate = knowledge.template_for(goal.task_type)
    rep = knowledge.representation(goal.task_type, plan_obj.representation)
    catalog = {spec.name: spec for spec in knowledge.get_representations(goal.task_type)}
    subtask_by_name = {s.name: s for s in template.subtasks}
    stage_of_node = {node: name for name, node in plan_obj.assignment}
    extract_index = next(
        (i for i, s in enumerate(template.subtasks) if s.capability_kind == "extract"), None
    )
    stage_index = {s.name: i for i, s in enumerate(template.subtasks)}

    trace_start = len(scenario.bus.message_log)
    states: list[NetworkState] = [knowledge.latest_state(scenario.channel.id)]
    latency = 0.0
    comm_energy = 0.0
    compute_energy = 0.0
    current_modality = "scene"
    current_bits = 0

    for node in plan_obj.path:
        profile = graph.nodes[node]
        if node in stage_of_node:
            subtask = subtask_by_name[stage_of_node[node]]
            cap = _stage_capability(profile, subtask, rep)
            index = stage_index[subtask.name]
            input_bits = _stage_input_bits(index, subtask, extract_index, cap, rep, catalog)
        else:
            subtask = None
            cap = profile.tools[0]
            input_bits = current_bits
        params = InvokeParams(
            target=node,
            capability=cap.name,
            data_type={"modality": current_modality},
            size_bits=int(input_bits),
            payload_ref=f"sim/{arch}/{node}",
        )
        result = scenario.bus.invoke(node, cap.name, params)
        if subtask is not None:
            # Only stage capabilities carry modeled cost; relay hops are free.
            latency += cap.cost_model.latency_s(input_bits)
            compute_energy += cap.cost_model.energy_j(input_bits)
            if subtask.capability_kind == "transmit":
                outcome = netmodel.transmit(scenario.channel, rep.size_bits, rng)
                latency += outcome.latency_s
                comm_energy += outcome.energy_j
                state = netmodel.report_state(scenario.channel, timestamp=latency)
                knowledge.record_state(state)
                states.append(state)
        if "representation" in result:
            current_modality = result["representation"]
            current_bits = int(result.get("size_bits", current_bits))

    success = success_model(rep.name, latency, knowledge.success_params)
    measured = PredictedMetrics(
        latency_s=latency,
        comm_energy_j=comm_energy,
        compute_energy_j=compute_energy,
        success=success,
        utility=utility(
            success,
            comm_energy,
            compute_energy,
            scenario.weights,
            transfer=float(len(plan_obj.path) - 1),
            history=0.0,
        ),
    )
    events = tuple(
        _message_summary(msg) for msg in scenario.bus.message_log[trace_start:]
    )
    return RunReport(
        intent_id=_intent_id(goal, scenario.channel.bandwidth_hz),
        intent_text=intent_text,
        arch=arch,
        seed=seed,
        bandwidth_hz=scenario.channel.bandwidth_hz,
        goal=goal,
        plan=plan_obj,
        measured=measured,
        events=events,
        network_states=tuple(states),
        advisory_bounds=bounds,
    )


def _message_summary(msg: Message) -> dict:
    if msg.is_response:
        kind = "response"
    elif msg.id is None:
        kind = "notification"
    else:
        kind = "request"
    summary: dict = {"type": kind}
    if msg.id is not None:
        summary["id"] = msg.id
    if msg.method is not None:
        summary["method"] = msg.method
    if msg.method == "agent/invoke" and msg.params:
        summary["target"] = msg.params.get("target")
        summary["capability"] = msg.params.get("capability")
        summary["size_bits"] = msg.params.get("size_bits")
    if msg.error is not None:
        summary["error_code"] = msg.error.code
    return summary


def compare(goagent: RunReport, baseline: RunReport) -> ComparisonReport:
    """Energy reduction and success delta of the goal-oriented run."""
    if goagent.intent_id != baseline.intent_id:
        raise ValueError(
            f"reports compare different intents: {goagent.intent_id} vs {baseline.intent_id}"
        )
    if baseline.measured.comm_energy_j <= 0:
        raise BaselineZeroEnergy("baseline communication energy is zero")
    reduction = 100.0 * (1.0 - goagent.measured.comm_energy_j / baseline.measured.comm_energy_j)
    return ComparisonReport(
        intent_id=goagent.intent_id,
        bandwidth_hz=goagent.bandwidth_hz,
        energy_reduction_pct=reduction,
        success_delta=goagent.measured.success - baseline.measured.success,
        goagentnet_comm_energy_j=goagent.measured.comm_energy_j,
        baseline_comm_energy_j=baseline.measured.comm_energy_j,
        goagentnet_success=goagent.measured.success,
        baseline_success=baseline.measured.success,
    )


def derive_goal_bounds(scenario: Scenario, goal: Goal) -> tuple[tuple[str, float], ...]:
    """Advisory per-domain lower bounds from the configured causal model.

    Bounds are derived for KPI targets matching the model's goal variable
    and attached to run reports without constraining the planner.
    """
    cfg = scenario.scm_config
    model = scenario.causal_model
    if cfg is None or model is None:
        return ()
    kpi_name = cfg.get("kpi")
    target_kpi = next(
        (k for k in goal.kpis if k.name == kpi_name and k.target_value is not None), None
    )
    if target_kpi is None:
        return ()
    bounds = []
    baseline = {str(k): float(v) for k, v in cfg.get("baseline", {}).items()}
    for entry in cfg.get("targets", ()):
        lo, hi = entry["range"]
        try:
            bound = scm_mod.derive_bound(
                model,
                goal_var=str(cfg["goal_var"]),
                threshold=float(target_kpi.target_value),
                target_var=str(entry["var"]),
                search_range=(float(lo), float(hi)),
                baseline=baseline,
            )
        except scm_mod.Unsatisfiable:
            continue
        bounds.append((str(entry["var"]), bound))
    return tuple(bounds)


def report_rows(reports: Sequence[RunReport]) -> list[list]:
    """CSV rows (one per report) in the fixed column order."""
    rows = []
    for report in reports:
        m = report.measured
        rows.append(
            [
                report.bandwidth_hz,
                report.arch,
                report.plan.representation,
                m.latency_s,
                m.comm_energy_j,
                m.compute_energy_j,
                m.success,
                m.utility,
            ]
        )
    return rows
