"""Shared fixtures: canonical scenario access and random case generation."""

from __future__ import annotations

import random

import pytest

from goagentnet.intent import Constraint, Direction, Goal, Kpi, Relation
from goagentnet.knowledge import (
    ChannelParams,
    KnowledgeBase,
    RepresentationSpec,
    SuccessParams,
)
from goagentnet.netmodel import Channel, report_state
from goagentnet.orchestrator import Subtask, TaskTemplate, UtilityWeights
from goagentnet.registry import (
    AgentType,
    Capability,
    CostModel,
    DataSchema,
    EdgeKind,
    Registry,
    make_profile,
)
from goagentnet.scenario import canonical_config, load_scenario

INTENT_1 = "Achieve the highest task success rate for robotic FDR under a 5MHz bandwidth constraint."
INTENT_2 = "Achieve the highest task success rate for robotic FDR under a 10MHz bandwidth constraint."
INTENT_3 = "Achieve the highest task success rate for robotic FDR under a 100MHz bandwidth constraint."
INTENT_TEMPLATE = (
    "Achieve the highest task success rate for robotic FDR under a "
    "{bandwidth} bandwidth constraint."
)


@pytest.fixture(scope="session")
def canonical_cfg() -> dict:
    return canonical_config()


@pytest.fixture()
def fdr_scenario(canonical_cfg):
    """Fresh canonical scenario; one per test to isolate run state."""
    return load_scenario(canonical_cfg)


def fresh_scenario():
    return load_scenario(canonical_config())


# --- randomized planner cases -------------------------------------------------
#
# Weights, costs, and history penalties are drawn from dyadic grids so that
# penalty sums are exact in binary floating point; tie-breaks then resolve
# identically no matter the accumulation order.


def _dyadic(rng: random.Random, lo_16ths: int, hi_16ths: int) -> float:
    return rng.randrange(lo_16ths, hi_16ths + 1) / 16.0


def _passthrough(kind: str) -> Capability:
    schema = DataSchema("stream", "anything", "bits")
    return Capability(f"{kind}_hop", kind, schema, schema)


def random_case(rng: random.Random):
    """One random planning problem: (goal, graph, knowledge, state, weights, history)."""
    task = "random_task"
    rep_count = rng.randint(1, 3)
    reps = []
    for i in range(rep_count):
        name = f"rep_{chr(97 + i)}"
        reps.append(
            RepresentationSpec(
                name=name,
                size_bits=int(10 ** rng.uniform(3.0, 7.5)),
                extract_latency_s=_dyadic(rng, 0, 7),
                extract_energy_j=_dyadic(rng, 0, 7),
                sufficiency=_dyadic(rng, 8, 16),
                producer_capability=f"make_{name}",
            )
        )

    bandwidth = rng.choice([1e6, 2e6, 5e6, 1e7, 5e7, 1e8])
    channel = Channel(
        id="ch",
        bandwidth_hz=bandwidth,
        spectral_efficiency_bps_per_hz=_dyadic(rng, 8, 32),
        tx_power_w=_dyadic(rng, 8, 32),
        propagation_delay_s=rng.choice([0.0, 1 / 64]),
    )

    template = _random_template(rng)

    next_id = iter(range(1, 100))
    layers: list[list[tuple[int, AgentType, list[Capability]]]] = []

    def layer(entries):
        if entries:
            layers.append(entries)

    layer(
        [
            (next(next_id), AgentType.PERCEPTUAL, [_sense_capability(rng)])
            for _ in range(rng.randint(1, 2))
        ]
    )
    if rng.random() < 0.5:
        layer([(next(next_id), AgentType.COMPUTATION, [_passthrough("preprocess")])])

    extractors = []
    for rep in reps:
        extractors.append(
            (next(next_id), AgentType.COMPUTATION, [_producer_capability(rng, rep, reps)])
        )
    if rep_count >= 2 and rng.random() < 0.3:
        # one node offering two producer capabilities
        extractors.append(
            (
                next(next_id),
                AgentType.COMPUTATION,
                [
                    _producer_capability(rng, reps[0], reps),
                    _producer_capability(rng, reps[1], reps),
                ],
            )
        )
    layer(extractors)

    if rng.random() < 0.5:
        layer([(next(next_id), AgentType.COMMUNICATION, [_passthrough("schedule")])])

    links = []
    for i in range(rng.randint(1, 2)):
        covering = rng.random() < 0.85 if i == 0 else rng.random() < 0.5
        links.append(
            (
                next(next_id),
                AgentType.COMMUNICATION,
                [_passthrough("transmit")],
                _rating(rng, bandwidth, covering),
            )
        )
    layers.append([(nid, t, caps) for nid, t, caps, _ in links])
    ratings = {nid: r for nid, _, _, r in links}

    reasons = []
    for _ in range(rng.randint(1, 2)):
        schema = DataSchema("multi", "anything", "bits")
        cap = Capability(
            "decide",
            "reason",
            schema,
            DataSchema("plan", "command", "bits"),
            CostModel(latency_base_s=_dyadic(rng, 0, 8), energy_base_j=_dyadic(rng, 0, 4)),
        )
        reasons.append((next(next_id), AgentType.COMPUTATION, [cap]))
    layer(reasons)

    layer(
        [
            (
                next(next_id),
                AgentType.ACTUATOR,
                [
                    Capability(
                        "act",
                        "actuate",
                        DataSchema("plan", "command", "bits"),
                        DataSchema("status", "ack", "bits"),
                    )
                ],
            )
        ]
    )

    registry = Registry()
    for entries in layers:
        for nid, agent_type, caps in entries:
            registry.register(
                make_profile(
                    nid,
                    agent_type,
                    caps,
                    function_space={"bandwidth_hz": ratings[nid]} if nid in ratings else {},
                )
            )

    edge_set = set()
    for upper, lower in zip(layers, layers[1:]):
        for nid, _, _ in lower:
            src = rng.choice(upper)[0]
            edge_set.add((src, nid))
        for src, _, _ in upper:
            for nid, _, _ in lower:
                if rng.random() < 0.55:
                    edge_set.add((src, nid))
    for skip_from, skip_to in zip(layers, layers[2:]):
        for src, _, _ in skip_from:
            for nid, _, _ in skip_to:
                if rng.random() < 0.25:
                    edge_set.add((src, nid))
    if rng.random() < 0.08:
        # occasionally sever a guaranteed edge to exercise NoFeasiblePlan
        edge_set.discard(rng.choice(sorted(edge_set)))
    for src, dst in sorted(edge_set):
        registry.add_edge(src, dst, EdgeKind.INTERACTION_LINK)

    knowledge = KnowledgeBase()
    knowledge.register_task(task, reps, template)
    knowledge.set_success_params(
        SuccessParams(
            deadline_s=_dyadic(rng, 8, 32),
            decay_per_s=_dyadic(rng, 0, 32),
            sufficiency=tuple(sorted((r.name, r.sufficiency) for r in reps)),
        )
    )
    knowledge.set_channel_params(
        channel.id, ChannelParams(channel.tx_power_w, channel.propagation_delay_s)
    )

    weights = UtilityWeights(
        w_energy=rng.randrange(0, 9) / 32,
        w_transfer=rng.choice([0.0, rng.randrange(1, 9) / 1024]),
        w_history=rng.choice([0.0, rng.randrange(1, 9) / 1024]),
        energy_ref_j=rng.choice([0.5, 1.0, 2.0]),
    )
    history = None
    if weights.w_history > 0:
        history = {nid: float(rng.randrange(0, 4)) for nid in registry.snapshot().nodes}

    goal = Goal(
        task_type=task,
        kpis=(Kpi("success_rate", Direction.MAXIMIZE),),
        constraints=(Constraint("bandwidth_hz", Relation.LE, bandwidth, "Hz"),),
    )
    return goal, registry.snapshot(), knowledge, report_state(channel), weights, history


def _random_template(rng: random.Random) -> TaskTemplate:
    roll = rng.random()
    if roll < 0.7:
        spec = [
            ("sense", AgentType.PERCEPTUAL, "sense", 0.25),
            ("extract", AgentType.COMPUTATION, "extract", 0.25),
            ("transmit", AgentType.COMMUNICATION, "transmit", 0.25),
            ("reason", AgentType.COMPUTATION, "reason", 0.125),
            ("actuate", AgentType.ACTUATOR, "actuate", 0.125),
        ]
    elif roll < 0.9:
        spec = [
            ("sense", AgentType.PERCEPTUAL, "sense", 0.25),
            ("extract", AgentType.COMPUTATION, "extract", 0.25),
            ("transmit", AgentType.COMMUNICATION, "transmit", 0.25),
            ("actuate", AgentType.ACTUATOR, "actuate", 0.25),
        ]
    else:
        spec = [
            ("sense", AgentType.PERCEPTUAL, "sense", 0.5),
            ("extract", AgentType.COMPUTATION, "extract", 0.25),
            ("actuate", AgentType.ACTUATOR, "actuate", 0.25),
        ]
    return TaskTemplate(
        task_type="random_task",
        subtasks=tuple(Subtask(n, t, k, share) for n, t, k, share in spec),
        kpis=("success_rate",),
    )


def _sense_capability(rng: random.Random) -> Capability:
    cost = CostModel()
    if rng.random() < 0.3:
        cost = CostModel(latency_base_s=_dyadic(rng, 0, 4), energy_base_j=_dyadic(rng, 0, 2))
    return Capability(
        "capture",
        "sense",
        DataSchema("sensor", "scene", "n/a"),
        DataSchema("tensor", "frame", "bits"),
        cost,
    )


def _producer_capability(rng: random.Random, rep, reps) -> Capability:
    # Occasionally chain off another representation so the extractor's
    # input size resolves through the catalog.
    input_modality = "frame"
    if len(reps) > 1 and rng.random() < 0.3:
        other = rng.choice([r for r in reps if r.name != rep.name])
        input_modality = other.name
    per_bit = rng.choice([0.0, 0.0, 1 / 2**26])
    return Capability(
        rep.producer_capability,
        "extract",
        DataSchema("tensor", input_modality, "bits"),
        DataSchema("tensor", rep.name, "bits"),
        CostModel(
            latency_base_s=rep.extract_latency_s,
            latency_per_bit_s=per_bit,
            energy_base_j=rep.extract_energy_j,
        ),
    )


def _rating(rng: random.Random, bandwidth: float, covering: bool) -> dict[str, float]:
    if covering:
        min_hz = bandwidth * rng.choice([0.0, 0.25, 0.5])
        max_hz = bandwidth * rng.choice([1.0, 2.0, 4.0])
    else:
        min_hz, max_hz = bandwidth, bandwidth * 2
    return {"min_hz": min_hz, "max_hz": max_hz}
