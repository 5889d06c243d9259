"""Planner tests: decomposition, matching, utility, oracle equivalence."""

import random

import pytest

from goagentnet import netmodel
from goagentnet.intent import IntentSpec, SourceKind, parse_intent
from goagentnet.knowledge import KnowledgeBase, RepresentationSpec, SuccessParams, UnknownTask
from goagentnet.knowledge import ChannelParams
from goagentnet.netmodel import Channel, report_state
from goagentnet.orchestrator import (
    GraphTooLarge,
    NoFeasiblePlan,
    Subtask,
    TaskTemplate,
    UtilityWeights,
    decompose,
    match_agents,
    plan,
    plan_bruteforce,
    replan_on_event,
    utility,
)
from goagentnet.registry import (
    AgentType,
    Capability,
    DataSchema,
    EdgeKind,
    Registry,
    make_profile,
)
from goagentnet.scenario import load_scenario

from conftest import INTENT_1, INTENT_2, INTENT_3, random_case

TABLE_PATHS = {
    INTENT_1: ((1, 2, 3, 4, 6, 7, 10, 11), "scene_graph"),
    INTENT_2: ((1, 2, 3, 5, 6, 8, 10, 11), "edge_points"),
    INTENT_3: ((1, 2, 3, 5, 6, 9, 10, 11), "edge_points"),
}


def plan_inputs(scenario, text):
    goal = parse_intent(IntentSpec(SourceKind.PATTERN_TEXT, text))
    state = netmodel.set_bandwidth(
        scenario.channel, goal.constraint_value("bandwidth_hz")
    )
    return goal, scenario.graph, scenario.knowledge, state, scenario.weights


# --- decomposition ------------------------------------------------------------


def test_decompose_fdr_chain(fdr_scenario):
    goal = parse_intent(IntentSpec(SourceKind.PATTERN_TEXT, INTENT_1))
    dag = decompose(goal, fdr_scenario.knowledge.templates)
    names = [s.name for s in dag.subtasks]
    assert names == ["sense", "extract", "transmit", "reason", "actuate"]
    assert dag.edges == tuple(zip(names, names[1:]))


def test_decompose_routes_bandwidth_to_transmit(fdr_scenario):
    goal = parse_intent(IntentSpec(SourceKind.PATTERN_TEXT, INTENT_1))
    dag = decompose(goal, fdr_scenario.knowledge.templates)
    for subtask in dag.subtasks:
        bounds = subtask.bandwidth_bound_hz()
        if subtask.capability_kind == "transmit":
            assert bounds == 5e6
        else:
            assert bounds is None


def test_decompose_single_subtask_template():
    template = TaskTemplate(
        "tiny",
        (Subtask("sense", AgentType.PERCEPTUAL, "sense", 1.0),),
    )
    goal = parse_intent(
        IntentSpec(SourceKind.STRUCTURED, '{"task_type": "tiny"}')
    )
    dag = decompose(goal, {"tiny": template})
    assert len(dag.subtasks) == 1 and dag.edges == ()


def test_decompose_unknown_task(fdr_scenario):
    goal = parse_intent(IntentSpec(SourceKind.STRUCTURED, '{"task_type": "mystery"}'))
    with pytest.raises(UnknownTask):
        decompose(goal, fdr_scenario.knowledge.templates)


# --- matching ------------------------------------------------------------------


def test_match_extract_candidates(fdr_scenario):
    goal = parse_intent(IntentSpec(SourceKind.PATTERN_TEXT, INTENT_1))
    dag = decompose(goal, fdr_scenario.knowledge.templates)
    extract = next(s for s in dag.subtasks if s.name == "extract")
    assert match_agents(extract, fdr_scenario.graph) == [4, 5]


def test_match_transmit_rated_for_5mhz(fdr_scenario):
    goal = parse_intent(IntentSpec(SourceKind.PATTERN_TEXT, INTENT_1))
    dag = decompose(goal, fdr_scenario.knowledge.templates)
    transmit = next(s for s in dag.subtasks if s.name == "transmit")
    assert match_agents(transmit, fdr_scenario.graph) == [7]


def test_match_absent_capability(fdr_scenario):
    orphan = Subtask("verify", AgentType.COMPUTATION, "theorem_proving", 1.0)
    assert match_agents(orphan, fdr_scenario.graph) == []


# --- utility ----------------------------------------------------------------------


def test_utility_canonical_scene_graph_value():
    value = utility(0.72, 0.008, 0.3, UtilityWeights())
    assert value == pytest.approx(0.6892, abs=1e-12)


def test_utility_zero_weights_is_success():
    weights = UtilityWeights(w_energy=0.0, w_transfer=0.0, w_history=0.0)
    assert utility(0.4321, 99.0, 7.0, weights, transfer=9, history=3) == 0.4321


def test_utility_penalty_scaling_preserves_energy_argmax():
    candidates = [(0.9, 1.0, 0.5), (0.9, 0.2, 0.1), (0.9, 2.0, 0.0)]
    for c in (0.5, 1.0, 3.0):
        weights = UtilityWeights(w_energy=0.1 * c, w_transfer=0.0, w_history=0.0)
        scores = [utility(s, ec, ex, weights) for s, ec, ex in candidates]
        assert scores.index(max(scores)) == 1


def test_utility_monotone_in_energy_and_success():
    weights = UtilityWeights()
    base = utility(0.9, 1.0, 0.5, weights)
    assert utility(0.9, 1.5, 0.5, weights) < base
    assert utility(0.9, 1.0, 0.9, weights) < base
    assert utility(0.95, 1.0, 0.5, weights) > base


# --- planning -------------------------------------------------------------------


@pytest.mark.parametrize("text", [INTENT_1, INTENT_2, INTENT_3])
def test_plan_reproduces_table_paths(canonical_cfg, text):
    scenario = load_scenario(canonical_cfg)
    result = plan(*plan_inputs(scenario, text))
    path, rep = TABLE_PATHS[text]
    assert result.path == path
    assert result.representation == rep


@pytest.mark.parametrize("text", [INTENT_1, INTENT_2, INTENT_3])
def test_bruteforce_agrees_on_canonical(canonical_cfg, text):
    scenario = load_scenario(canonical_cfg)
    inputs = plan_inputs(scenario, text)
    assert plan(*inputs) == plan_bruteforce(*inputs)


def test_plan_is_deterministic(canonical_cfg):
    first = plan(*plan_inputs(load_scenario(canonical_cfg), INTENT_2))
    second = plan(*plan_inputs(load_scenario(canonical_cfg), INTENT_2))
    assert first == second


def test_plan_constraint_safety(canonical_cfg):
    rated = {INTENT_1: 7, INTENT_2: 8, INTENT_3: 9}
    for text, link in rated.items():
        scenario = load_scenario(canonical_cfg)
        result = plan(*plan_inputs(scenario, text))
        assert result.stage_node("transmit") == link


def _two_node_setup(with_edge=True):
    registry = Registry()
    sense = Capability(
        "capture", "sense", DataSchema("sensor", "scene", "n/a"), DataSchema("tensor", "frame", "bits")
    )
    act = Capability(
        "act", "actuate", DataSchema("plan", "command", "bits"), DataSchema("status", "ack", "bits")
    )
    registry.register(make_profile(1, AgentType.PERCEPTUAL, [sense]))
    registry.register(make_profile(2, AgentType.ACTUATOR, [act]))
    if with_edge:
        registry.add_edge(1, 2, EdgeKind.INTERACTION_LINK)
    template = TaskTemplate(
        "mini",
        (
            Subtask("sense", AgentType.PERCEPTUAL, "sense", 0.5),
            Subtask("actuate", AgentType.ACTUATOR, "actuate", 0.5),
        ),
    )
    kb = KnowledgeBase()
    kb.register_task("mini", [RepresentationSpec("frame", 1000, 0.0, 0.0, 1.0, "capture")], template)
    kb.set_success_params(SuccessParams(2.0, 1.0, (("frame", 1.0),)))
    kb.set_channel_params("ch", ChannelParams(1.0, 0.0))
    channel = Channel("ch", 1e6)
    goal = parse_intent(IntentSpec(SourceKind.STRUCTURED, '{"task_type": "mini"}'))
    return goal, registry.snapshot(), kb, report_state(channel), UtilityWeights()


def test_plan_two_node_graph():
    inputs = _two_node_setup()
    result = plan(*inputs)
    assert result.path == (1, 2)
    assert result == plan_bruteforce(*inputs)


def test_plan_disconnected_no_feasible():
    inputs = _two_node_setup(with_edge=False)
    with pytest.raises(NoFeasiblePlan):
        plan(*inputs)
    with pytest.raises(NoFeasiblePlan):
        plan_bruteforce(*inputs)


def test_bruteforce_node_limit():
    goal, graph, kb, state, weights = _two_node_setup()
    registry = Registry()
    for i in range(1, 16):
        registry.register(make_profile(i, AgentType.COMPUTATION, [
            Capability("noop", "compute", DataSchema("t", "x", "bits"), DataSchema("t", "x", "bits"))
        ]))
    with pytest.raises(GraphTooLarge):
        plan_bruteforce(goal, registry.snapshot(), kb, state, weights)


# --- replanning ---------------------------------------------------------------------


def test_replan_after_extractor_loss(canonical_cfg):
    scenario = load_scenario(canonical_cfg)
    goal, graph, kb, state, weights = plan_inputs(scenario, INTENT_1)
    original = plan(goal, graph, kb, state, weights)
    event = scenario.bus.deregister_agent(4)
    updated = replan_on_event(original, event, goal, scenario.graph, kb, state, weights)
    assert updated.path == (1, 2, 3, 5, 6, 7, 10, 11)
    assert updated.representation == "edge_points"
    assert updated == plan_bruteforce(goal, scenario.graph, kb, state, weights)


def test_replan_restore_round_trip(canonical_cfg):
    scenario = load_scenario(canonical_cfg)
    goal, graph, kb, state, weights = plan_inputs(scenario, INTENT_1)
    original = plan(goal, graph, kb, state, weights)
    profile = graph.nodes[4]
    scenario.bus.deregister_agent(4)
    degraded = replan_on_event(original, None, goal, scenario.graph, kb, state, weights)
    assert degraded.representation == "edge_points"
    scenario.bus.register_agent(profile)
    scenario.registry.add_edge(3, 4, EdgeKind.INTERACTION_LINK)
    scenario.registry.add_edge(4, 6, EdgeKind.INTERACTION_LINK)
    scenario.registry.add_edge(4, 10, EdgeKind.CAPABILITY_DEPENDENCY)
    restored = replan_on_event(degraded, None, goal, scenario.graph, kb, state, weights)
    assert restored == original


def test_replan_bandwidth_crossover(canonical_cfg):
    scenario = load_scenario(canonical_cfg)
    goal, graph, kb, state, weights = plan_inputs(scenario, INTENT_1)
    original = plan(goal, graph, kb, state, weights)
    assert original.representation == "scene_graph"
    new_state = netmodel.set_bandwidth(scenario.channel, 1e7)
    updated = replan_on_event(original, new_state, goal, graph, kb, new_state, weights)
    assert updated.representation == "edge_points"
    assert updated.stage_node("transmit") == 8


def test_replan_irrelevant_event_returns_same_object(canonical_cfg):
    scenario = load_scenario(canonical_cfg)
    goal, graph, kb, state, weights = plan_inputs(scenario, INTENT_1)
    current = plan(goal, graph, kb, state, weights)
    event = scenario.registry.update_state(9, {"resources": {"buffer_bits": 5e7}})
    result = replan_on_event(current, event, goal, scenario.graph, kb, state, weights)
    assert result is current


# --- oracle equivalence on random instances ----------------------------------------


def test_plan_matches_bruteforce_on_random_graphs():
    feasible = 0
    for case in range(100):
        rng = random.Random(31_000 + case)
        goal, graph, kb, state, weights, history = random_case(rng)
        try:
            fast = plan(goal, graph, kb, state, weights, history)
        except NoFeasiblePlan:
            with pytest.raises(NoFeasiblePlan):
                plan_bruteforce(goal, graph, kb, state, weights, history)
            continue
        oracle = plan_bruteforce(goal, graph, kb, state, weights, history)
        assert fast.path == oracle.path, f"case {case}"
        assert fast.representation == oracle.representation, f"case {case}"
        assert abs(fast.predicted.utility - oracle.predicted.utility) <= 1e-9
        assert fast == oracle, f"case {case}"
        feasible += 1
    assert feasible >= 50  # the generator must mostly produce solvable cases
