"""Agent registry and knowledge graph with event-sourced updates.

Nodes hold agent profiles; typed directed edges encode permitted data flow
(interaction links), capability dependencies, and shared knowledge. Every
mutation emits a GraphEvent with a strictly increasing sequence number, and
folding the event stream over an empty graph reproduces any snapshot.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Mapping, Optional, Sequence


class RegistryError(Exception):
    pass


class DuplicateId(RegistryError):
    pass


class InvalidProfile(RegistryError):
    pass


class UnknownAgent(RegistryError):
    pass


class UnknownField(RegistryError):
    pass


class DuplicateEdge(RegistryError):
    pass


class InvalidEdge(RegistryError):
    pass


class UnknownEdge(RegistryError):
    pass


class GapInEvents(RegistryError):
    pass


class AgentType(str, Enum):
    PERCEPTUAL = "perceptual"
    COMMUNICATION = "communication"
    COMPUTATION = "computation"
    ACTUATOR = "actuator"
    ORCHESTRATION = "orchestration"


class EdgeKind(str, Enum):
    INTERACTION_LINK = "interaction_link"
    CAPABILITY_DEPENDENCY = "capability_dependency"
    SHARED_KNOWLEDGE = "shared_knowledge"


class EventKind(str, Enum):
    JOINED = "joined"
    LEFT = "left"
    UPDATED = "updated"


@dataclass(frozen=True)
class DataSchema:
    """Descriptor for data flowing in or out of a capability."""

    kind: str
    modality: str
    unit: str = "bits"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "modality": self.modality, "unit": self.unit}

    @staticmethod
    def from_dict(doc: Mapping) -> "DataSchema":
        return DataSchema(str(doc["kind"]), str(doc["modality"]), str(doc.get("unit", "bits")))


@dataclass(frozen=True)
class CostModel:
    """Affine cost in input size: base + per_bit * size_bits."""

    latency_base_s: float = 0.0
    latency_per_bit_s: float = 0.0
    energy_base_j: float = 0.0
    energy_per_bit_j: float = 0.0

    def __post_init__(self) -> None:
        for name in ("latency_base_s", "latency_per_bit_s", "energy_base_j", "energy_per_bit_j"):
            if getattr(self, name) < 0:
                raise InvalidProfile(f"cost model coefficient {name} must be >= 0")

    def latency_s(self, input_bits: float) -> float:
        return self.latency_base_s + self.latency_per_bit_s * input_bits

    def energy_j(self, input_bits: float) -> float:
        return self.energy_base_j + self.energy_per_bit_j * input_bits

    def to_dict(self) -> dict:
        return {
            "latency_base_s": self.latency_base_s,
            "latency_per_bit_s": self.latency_per_bit_s,
            "energy_base_j": self.energy_base_j,
            "energy_per_bit_j": self.energy_per_bit_j,
        }

    @staticmethod
    def from_dict(doc: Mapping) -> "CostModel":
        return CostModel(
            float(doc.get("latency_base_s", 0.0)),
            float(doc.get("latency_per_bit_s", 0.0)),
            float(doc.get("energy_base_j", 0.0)),
            float(doc.get("energy_per_bit_j", 0.0)),
        )


@dataclass(frozen=True)
class Capability:
    """A tool an agent advertises: schemas plus an affine cost model.

    ``kind`` is the functional category used for capability matching
    (sense, extract, transmit, reason, actuate, relay, ...).
    """

    name: str
    kind: str
    input_schema: DataSchema
    output_schema: DataSchema
    cost_model: CostModel = CostModel()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "input_schema": self.input_schema.to_dict(),
            "output_schema": self.output_schema.to_dict(),
            "cost_model": self.cost_model.to_dict(),
        }

    @staticmethod
    def from_dict(doc: Mapping) -> "Capability":
        return Capability(
            str(doc["name"]),
            str(doc["kind"]),
            DataSchema.from_dict(doc["input_schema"]),
            DataSchema.from_dict(doc["output_schema"]),
            CostModel.from_dict(doc.get("cost_model", {})),
        )


@dataclass(frozen=True)
class AgentProfile:
    id: int
    agent_type: AgentType
    tools: tuple[Capability, ...] = ()
    function_space: tuple[tuple[str, tuple[tuple[str, float], ...]], ...] = ()
    resources: tuple[tuple[str, float], ...] = ()

    def tool(self, name: str) -> Optional[Capability]:
        for cap in self.tools:
            if cap.name == name:
                return cap
        return None

    def resource(self, name: str) -> Optional[float]:
        for key, value in self.resources:
            if key == name:
                return value
        return None

    def function_range(self, param: str) -> Optional[dict[str, float]]:
        for key, entries in self.function_space:
            if key == param:
                return dict(entries)
        return None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "agent_type": self.agent_type.value,
            "tools": [cap.to_dict() for cap in self.tools],
            "function_space": {k: dict(v) for k, v in self.function_space},
            "resources": dict(self.resources),
        }

    @staticmethod
    def from_dict(doc: Mapping) -> "AgentProfile":
        return make_profile(
            id=int(doc["id"]),
            agent_type=str(doc["agent_type"]),
            tools=[Capability.from_dict(t) for t in doc.get("tools", [])],
            function_space=doc.get("function_space", {}),
            resources=doc.get("resources", {}),
        )


def make_profile(
    id: int,
    agent_type: AgentType | str,
    tools: Sequence[Capability] = (),
    function_space: Mapping[str, Mapping[str, float]] | None = None,
    resources: Mapping[str, float] | None = None,
) -> AgentProfile:
    """Convenience constructor turning mappings into hashable profile fields."""
    fs = tuple(
        (str(k), tuple(sorted((str(pk), float(pv)) for pk, pv in v.items())))
        for k, v in sorted((function_space or {}).items())
    )
    res = tuple(sorted((str(k), float(v)) for k, v in (resources or {}).items()))
    return AgentProfile(
        id=int(id),
        agent_type=AgentType(agent_type),
        tools=tuple(tools),
        function_space=fs,
        resources=res,
    )


@dataclass(frozen=True)
class Edge:
    from_id: int
    to_id: int
    kind: EdgeKind
    attrs: tuple[tuple[str, str], ...] = ()

    def key(self) -> tuple[int, int, str]:
        return (self.from_id, self.to_id, self.kind.value)


@dataclass(frozen=True)
class GraphEvent:
    seq: int
    kind: EventKind
    payload: dict
    timestamp: float = 0.0


@dataclass(frozen=True)
class KnowledgeGraph:
    nodes: dict[int, AgentProfile]
    edges: tuple[Edge, ...]
    version: int = 0

    @staticmethod
    def empty() -> "KnowledgeGraph":
        return KnowledgeGraph(nodes={}, edges=(), version=0)


def _validate_profile(profile: AgentProfile) -> None:
    if not isinstance(profile.agent_type, AgentType):
        raise InvalidProfile(f"bad agent_type {profile.agent_type!r}")
    for cap in profile.tools:
        if not cap.name:
            raise InvalidProfile(f"agent {profile.id}: capability with empty name")
        if not cap.input_schema.modality or not cap.output_schema.modality:
            raise InvalidProfile(f"agent {profile.id}: capability {cap.name} lacks schemas")


class Registry:
    """Single-writer agent registry emitting an event per accepted mutation.

    Rejected operations raise before any state change and emit nothing.
    Readers take immutable snapshots; listeners receive each event exactly
    once, in sequence order.
    """

    def __init__(self) -> None:
        self._nodes: dict[int, AgentProfile] = {}
        self._edges: list[Edge] = []
        self._seq = 0
        self._event_log: list[GraphEvent] = []
        self._listeners: list[Callable[[GraphEvent], None]] = []

    # -- event plumbing ---------------------------------------------------

    def add_listener(self, listener: Callable[[GraphEvent], None]) -> None:
        self._listeners.append(listener)

    @property
    def last_seq(self) -> int:
        return self._seq

    def events_since(self, seq: int) -> list[GraphEvent]:
        return [e for e in self._event_log if e.seq > seq]

    def _emit(self, kind: EventKind, payload: dict, timestamp: float) -> GraphEvent:
        self._seq += 1
        event = GraphEvent(seq=self._seq, kind=kind, payload=payload, timestamp=timestamp)
        self._event_log.append(event)
        for listener in self._listeners:
            listener(event)
        return event

    # -- mutations ----------------------------------------------------------

    def register(self, profile: AgentProfile, timestamp: float = 0.0) -> tuple[int, GraphEvent]:
        _validate_profile(profile)
        if profile.id in self._nodes:
            raise DuplicateId(f"agent {profile.id} already registered")
        self._nodes[profile.id] = profile
        event = self._emit(EventKind.JOINED, {"profile": profile.to_dict()}, timestamp)
        return profile.id, event

    def deregister(self, agent_id: int, timestamp: float = 0.0) -> GraphEvent:
        if agent_id not in self._nodes:
            raise UnknownAgent(f"agent {agent_id} not registered")
        del self._nodes[agent_id]
        self._edges = [e for e in self._edges if agent_id not in (e.from_id, e.to_id)]
        return self._emit(EventKind.LEFT, {"id": agent_id}, timestamp)

    def update_state(self, agent_id: int, delta: Mapping, timestamp: float = 0.0) -> GraphEvent:
        if agent_id not in self._nodes:
            raise UnknownAgent(f"agent {agent_id} not registered")
        updated = _apply_delta(self._nodes[agent_id], delta)
        self._nodes[agent_id] = updated
        payload = {"id": agent_id, "delta": copy.deepcopy(dict(delta))}
        return self._emit(EventKind.UPDATED, payload, timestamp)

    def add_edge(
        self,
        from_id: int,
        to_id: int,
        kind: EdgeKind | str,
        attrs: Mapping[str, str] | None = None,
        timestamp: float = 0.0,
    ) -> GraphEvent:
        kind = EdgeKind(kind)
        if from_id not in self._nodes or to_id not in self._nodes:
            raise UnknownAgent(f"edge endpoints {from_id}->{to_id} must be registered")
        if from_id == to_id:
            raise InvalidEdge("self-loops are not allowed")
        edge = Edge(from_id, to_id, kind, tuple(sorted((attrs or {}).items())))
        if any(e.key() == edge.key() for e in self._edges):
            raise DuplicateEdge(f"edge {edge.key()} already present")
        self._edges.append(edge)
        payload = {
            "edge_added": {
                "from": from_id,
                "to": to_id,
                "kind": kind.value,
                "attrs": dict(edge.attrs),
            }
        }
        return self._emit(EventKind.UPDATED, payload, timestamp)

    def remove_edge(
        self, from_id: int, to_id: int, kind: EdgeKind | str, timestamp: float = 0.0
    ) -> GraphEvent:
        kind = EdgeKind(kind)
        key = (from_id, to_id, kind.value)
        if not any(e.key() == key for e in self._edges):
            raise UnknownEdge(f"edge {key} not present")
        self._edges = [e for e in self._edges if e.key() != key]
        payload = {"edge_removed": {"from": from_id, "to": to_id, "kind": kind.value}}
        return self._emit(EventKind.UPDATED, payload, timestamp)

    # -- queries ------------------------------------------------------------

    def query(
        self,
        agent_type: AgentType | str | None = None,
        capability_name: str | None = None,
        output_schema: Mapping[str, str] | None = None,
    ) -> list[int]:
        """Ids matching every supplied filter field, sorted ascending."""
        result = []
        for agent_id, profile in self._nodes.items():
            if agent_type is not None and profile.agent_type is not AgentType(agent_type):
                continue
            if capability_name is not None and profile.tool(capability_name) is None:
                continue
            if output_schema is not None and not _schema_match(profile, output_schema):
                continue
            result.append(agent_id)
        return sorted(result)

    def snapshot(self) -> KnowledgeGraph:
        return KnowledgeGraph(nodes=dict(self._nodes), edges=tuple(self._edges), version=self._seq)


def _schema_match(profile: AgentProfile, wanted: Mapping[str, str]) -> bool:
    for cap in profile.tools:
        schema = cap.output_schema.to_dict()
        if all(schema.get(k) == v for k, v in wanted.items()):
            return True
    return False


def _apply_delta(profile: AgentProfile, delta: Mapping) -> AgentProfile:
    allowed = {"resources", "function_space", "tools_add", "tools_remove"}
    unknown = set(delta) - allowed
    if unknown:
        raise UnknownField(f"delta keys {sorted(unknown)} not recognized")

    resources = dict(profile.resources)
    for name, value in delta.get("resources", {}).items():
        if name not in resources:
            raise UnknownField(f"agent {profile.id}: no resource {name!r}")
        resources[name] = float(value)

    fs = {k: dict(v) for k, v in profile.function_space}
    for name, value in delta.get("function_space", {}).items():
        if name not in fs:
            raise UnknownField(f"agent {profile.id}: no function-space entry {name!r}")
        fs[name] = {str(pk): float(pv) for pk, pv in value.items()}

    tools = list(profile.tools)
    for doc in delta.get("tools_add", []):
        cap = doc if isinstance(doc, Capability) else Capability.from_dict(doc)
        if any(t.name == cap.name for t in tools):
            raise UnknownField(f"agent {profile.id}: tool {cap.name!r} already present")
        tools.append(cap)
    for name in delta.get("tools_remove", []):
        if not any(t.name == name for t in tools):
            raise UnknownField(f"agent {profile.id}: no tool {name!r} to remove")
        tools = [t for t in tools if t.name != name]

    return make_profile(
        id=profile.id,
        agent_type=profile.agent_type,
        tools=tools,
        function_space=fs,
        resources=resources,
    )


def fold_events(base: KnowledgeGraph, events: Iterable[GraphEvent]) -> KnowledgeGraph:
    """Replay events over a base graph; the event-sourcing inverse of snapshot.

    Events must be contiguous and ascending from the base version.
    """
    nodes = dict(base.nodes)
    edges = list(base.edges)
    version = base.version
    for event in events:
        if event.seq != version + 1:
            raise GapInEvents(f"expected seq {version + 1}, got {event.seq}")
        version = event.seq
        if event.kind is EventKind.JOINED:
            profile = AgentProfile.from_dict(event.payload["profile"])
            nodes[profile.id] = profile
        elif event.kind is EventKind.LEFT:
            agent_id = event.payload["id"]
            nodes.pop(agent_id, None)
            edges = [e for e in edges if agent_id not in (e.from_id, e.to_id)]
        elif event.kind is EventKind.UPDATED:
            if "delta" in event.payload:
                agent_id = event.payload["id"]
                nodes[agent_id] = _apply_delta(nodes[agent_id], event.payload["delta"])
            elif "edge_added" in event.payload:
                doc = event.payload["edge_added"]
                edges.append(
                    Edge(
                        doc["from"],
                        doc["to"],
                        EdgeKind(doc["kind"]),
                        tuple(sorted(doc.get("attrs", {}).items())),
                    )
                )
            elif "edge_removed" in event.payload:
                doc = event.payload["edge_removed"]
                key = (doc["from"], doc["to"], doc["kind"])
                edges = [e for e in edges if e.key() != key]
    return KnowledgeGraph(nodes=nodes, edges=tuple(edges), version=version)


def to_dot(graph: KnowledgeGraph) -> str:
    """Export to DOT with nodes labeled "id:type" and edges labeled by kind."""
    lines = ["digraph knowledge_graph {"]
    for agent_id in sorted(graph.nodes):
        profile = graph.nodes[agent_id]
        lines.append(f'  n{agent_id} [label="{agent_id}:{profile.agent_type.value}"];')
    for edge in sorted(graph.edges, key=Edge.key):
        lines.append(f'  n{edge.from_id} -> n{edge.to_id} [label="{edge.kind.value}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def interaction_adjacency(graph: KnowledgeGraph) -> dict[int, list[int]]:
    """Successors over interaction links only, deterministically ordered."""
    adj: dict[int, list[int]] = {agent_id: [] for agent_id in graph.nodes}
    for edge in graph.edges:
        if edge.kind is EdgeKind.INTERACTION_LINK:
            adj[edge.from_id].append(edge.to_id)
    for agent_id in adj:
        adj[agent_id] = sorted(adj[agent_id])
    return adj
