"""Knowledge layer tests: catalog, state log, assets, success model."""

import math
import random

import pytest

from goagentnet.knowledge import (
    DuplicateAsset,
    KnowledgeBase,
    MappingRule,
    NoStateYet,
    RepresentationSpec,
    SuccessParams,
    TimestampRegression,
    UnknownAsset,
    UnknownRepresentation,
    UnknownTask,
    success_model,
)
from goagentnet.netmodel import NetworkState


def state(ts: float, channel: str = "uplink") -> NetworkState:
    return NetworkState(
        channel_id=channel,
        timestamp=ts,
        bandwidth_hz=5e6,
        achievable_rate_bps=5e6,
        congestion_level=0.0,
        link_reliability=1.0,
        recent_energy_j=0.0,
    )


def test_catalog_sorted_by_size(fdr_scenario):
    reps = fdr_scenario.knowledge.get_representations("robotic_fdr")
    assert [r.name for r in reps] == ["scene_graph", "edge_points", "raw_point_cloud"]
    assert [r.size_bits for r in reps] == [40000, 16000000, 40000000]
    sizes = [r.size_bits for r in reps]
    assert all(a < b for a, b in zip(sizes, sizes[1:]))


def test_catalog_unknown_task(fdr_scenario):
    with pytest.raises(UnknownTask):
        fdr_scenario.knowledge.get_representations("nope")


def test_mapping_rule_referential_integrity():
    kb = KnowledgeBase()
    kb.register_task(
        "t",
        [RepresentationSpec("only", 10, 0.0, 0.0, 1.0, "make_only")],
    )
    with pytest.raises(UnknownRepresentation):
        kb.add_rule(MappingRule("t", "raw", "missing", "c", "d"))
    with pytest.raises(UnknownTask):
        kb.add_rule(MappingRule("other", "raw", "only", "c", "d"))


def test_state_record_and_latest():
    kb = KnowledgeBase()
    kb.record_state(state(0.0))
    kb.record_state(state(1.5))
    assert kb.latest_state("uplink").timestamp == 1.5


def test_state_timestamp_regression():
    kb = KnowledgeBase()
    kb.record_state(state(2.0))
    with pytest.raises(TimestampRegression):
        kb.record_state(state(1.0))


def test_state_before_any_record():
    with pytest.raises(NoStateYet):
        KnowledgeBase().latest_state("uplink")


def test_latest_matches_linear_scan_oracle():
    rng = random.Random(11)
    kb = KnowledgeBase()
    recorded = []
    ts = 0.0
    for _ in range(200):
        ts += rng.uniform(0.0, 1.0)
        channel = rng.choice(["a", "b", "c"])
        s = state(ts, channel)
        kb.record_state(s)
        recorded.append(s)
    for channel in ("a", "b", "c"):
        mine = [s for s in recorded if s.channel_id == channel]
        if mine:
            oracle = max(mine, key=lambda s: s.timestamp)
            assert kb.latest_state(channel) == oracle


def test_state_log_append_only():
    kb = KnowledgeBase()
    kb.record_state(state(0.0))
    before = kb.state_log("uplink")
    kb.record_state(state(1.0))
    assert kb.state_log("uplink")[: len(before)] == before


def test_asset_round_trip():
    kb = KnowledgeBase()
    kb.register_asset("codebook_v1", "codebook", "asset://cb1")
    asset = kb.fetch_asset("codebook_v1")
    assert (asset.id, asset.kind, asset.ref) == ("codebook_v1", "codebook", "asset://cb1")


def test_asset_duplicate_rejected():
    kb = KnowledgeBase()
    kb.register_asset("x", "model", "ref")
    with pytest.raises(DuplicateAsset):
        kb.register_asset("x", "model", "ref2")


def test_asset_unknown():
    with pytest.raises(UnknownAsset):
        KnowledgeBase().fetch_asset("ghost")


def test_protocol_method_whitelist():
    methods = KnowledgeBase.protocol_methods()
    assert "agent/invoke" in methods and "graph/subscribe" in methods


# --- success model -----------------------------------------------------------


@pytest.fixture()
def params():
    return SuccessParams(
        deadline_s=2.0,
        decay_per_s=1.0,
        sufficiency=(("edge_points", 0.95), ("raw_point_cloud", 0.95), ("scene_graph", 0.72)),
    )


def test_success_within_deadline(params):
    assert success_model("edge_points", 1.9, params) == 0.95


def test_success_decays_past_deadline(params):
    value = success_model("raw_point_cloud", 8.2, params)
    assert value == pytest.approx(0.95 * math.exp(-6.2))
    assert value == pytest.approx(0.00193, abs=2e-5)


def test_success_continuous_at_deadline(params):
    for rep in ("edge_points", "scene_graph", "raw_point_cloud"):
        assert success_model(rep, 2.0, params) == params.sufficiency_of(rep)
