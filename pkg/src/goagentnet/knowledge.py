"""Knowledge layer: application and network knowledge bases.

The application side holds the representation catalog, mapping rules, task
templates, success calibration, and opaque shared assets; the network side
holds an append-only log of channel states plus the channel cost parameters
other layers need for prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .netmodel import NetworkState
from .protocol import METHODS


class KnowledgeError(Exception):
    pass


class UnknownTask(KnowledgeError):
    pass


class UnknownRepresentation(KnowledgeError):
    """A mapping rule references a representation missing from the catalog."""


class TimestampRegression(KnowledgeError):
    pass


class NoStateYet(KnowledgeError):
    pass


class DuplicateAsset(KnowledgeError):
    pass


class UnknownAsset(KnowledgeError):
    pass


@dataclass(frozen=True)
class RepresentationSpec:
    """One semantic representation: size, extraction cost, sufficiency."""

    name: str
    size_bits: int
    extract_latency_s: float
    extract_energy_j: float
    sufficiency: float
    producer_capability: str

    def __post_init__(self) -> None:
        if self.size_bits <= 0:
            raise KnowledgeError(f"{self.name}: size_bits must be > 0")
        if not 0.0 <= self.sufficiency <= 1.0:
            raise KnowledgeError(f"{self.name}: sufficiency must lie in [0, 1]")
        if self.extract_latency_s < 0 or self.extract_energy_j < 0:
            raise KnowledgeError(f"{self.name}: extraction costs must be >= 0")


@dataclass(frozen=True)
class MappingRule:
    """Relates raw data, a semantic representation, and the downstream task."""

    task_type: str
    raw_modality: str
    representation: str
    consumes: str
    produced_for: str


@dataclass(frozen=True)
class Asset:
    id: str
    kind: str
    ref: str


@dataclass(frozen=True)
class SuccessParams:
    """Deadline success model: full credit within the deadline, then
    exponential decay at decay_per_s; scaled by per-representation
    sufficiency."""

    deadline_s: float
    decay_per_s: float
    sufficiency: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        if self.deadline_s <= 0:
            raise KnowledgeError("deadline must be > 0")
        if self.decay_per_s < 0:
            raise KnowledgeError("decay rate must be >= 0")
        if isinstance(self.sufficiency, dict):
            object.__setattr__(self, "sufficiency", tuple(sorted(self.sufficiency.items())))
        for name, value in self.sufficiency:
            if not 0.0 <= value <= 1.0:
                raise KnowledgeError(f"sufficiency of {name} must lie in [0, 1]")

    def sufficiency_of(self, representation: str) -> float:
        for name, value in self.sufficiency:
            if name == representation:
                return value
        raise UnknownRepresentation(f"no sufficiency for {representation!r}")


def success_model(representation: str, latency_s: float, params: SuccessParams) -> float:
    """Probability of task success for a representation delivered at latency_s."""
    if latency_s < 0:
        raise KnowledgeError("latency must be >= 0")
    if latency_s <= params.deadline_s:
        timeliness = 1.0
    else:
        timeliness = math.exp(-params.decay_per_s * (latency_s - params.deadline_s))
    return params.sufficiency_of(representation) * timeliness


@dataclass(frozen=True)
class ChannelParams:
    """Cost parameters shared upward so planners can predict transmit cost."""

    tx_power_w: float
    propagation_delay_s: float


class KnowledgeBase:
    """Shared store written by the simulation loop, read by all layers."""

    def __init__(self) -> None:
        self._catalogs: dict[str, list[RepresentationSpec]] = {}
        self._rules: list[MappingRule] = []
        self._templates: dict[str, object] = {}
        self._assets: dict[str, Asset] = {}
        self._state_log: dict[str, list[NetworkState]] = {}
        self._channel_params: dict[str, ChannelParams] = {}
        self._success_params: Optional[SuccessParams] = None

    # -- application knowledge ------------------------------------------------

    def register_task(
        self,
        task_type: str,
        representations: Sequence[RepresentationSpec],
        template: object | None = None,
    ) -> None:
        self._catalogs[task_type] = list(representations)
        if template is not None:
            self._templates[task_type] = template

    def get_representations(self, task_type: str) -> list[RepresentationSpec]:
        """Catalog entries for a task, sorted by size ascending."""
        if task_type not in self._catalogs:
            raise UnknownTask(f"no representations registered for {task_type!r}")
        return sorted(self._catalogs[task_type], key=lambda r: r.size_bits)

    def representation(self, task_type: str, name: str) -> RepresentationSpec:
        for spec in self.get_representations(task_type):
            if spec.name == name:
                return spec
        raise UnknownRepresentation(f"task {task_type!r} has no representation {name!r}")

    def add_rule(self, rule: MappingRule) -> None:
        catalog = self._catalogs.get(rule.task_type)
        if catalog is None:
            raise UnknownTask(f"rule references unregistered task {rule.task_type!r}")
        if not any(spec.name == rule.representation for spec in catalog):
            raise UnknownRepresentation(
                f"rule references unknown representation {rule.representation!r}"
            )
        self._rules.append(rule)

    def rules_for(self, task_type: str) -> list[MappingRule]:
        return [r for r in self._rules if r.task_type == task_type]

    def raw_modality(self, task_type: str) -> Optional[str]:
        for rule in self._rules:
            if rule.task_type == task_type:
                return rule.raw_modality
        return None

    @property
    def templates(self) -> Mapping[str, object]:
        return dict(self._templates)

    def template_for(self, task_type: str) -> object:
        if task_type not in self._templates:
            raise UnknownTask(f"no template registered for {task_type!r}")
        return self._templates[task_type]

    def set_success_params(self, params: SuccessParams) -> None:
        self._success_params = params

    @property
    def success_params(self) -> SuccessParams:
        if self._success_params is None:
            raise KnowledgeError("success parameters not configured")
        return self._success_params

    @staticmethod
    def protocol_methods() -> frozenset[str]:
        """Whitelisted agentic message methods (representation rules item)."""
        return METHODS

    # -- shared assets ----------------------------------------------------------

    def register_asset(self, asset_id: str, kind: str, ref: str) -> Asset:
        if asset_id in self._assets:
            raise DuplicateAsset(f"asset {asset_id!r} already registered")
        asset = Asset(asset_id, kind, ref)
        self._assets[asset_id] = asset
        return asset

    def fetch_asset(self, asset_id: str) -> Asset:
        if asset_id not in self._assets:
            raise UnknownAsset(f"no asset {asset_id!r}")
        return self._assets[asset_id]

    # -- network knowledge --------------------------------------------------------

    def set_channel_params(self, channel_id: str, params: ChannelParams) -> None:
        self._channel_params[channel_id] = params

    def channel_params(self, channel_id: str) -> ChannelParams:
        if channel_id not in self._channel_params:
            raise KnowledgeError(f"no channel parameters for {channel_id!r}")
        return self._channel_params[channel_id]

    def record_state(self, state: NetworkState) -> None:
        log = self._state_log.setdefault(state.channel_id, [])
        if log and state.timestamp < log[-1].timestamp:
            raise TimestampRegression(
                f"{state.channel_id}: timestamp {state.timestamp} precedes {log[-1].timestamp}"
            )
        log.append(state)

    def latest_state(self, channel_id: str) -> NetworkState:
        log = self._state_log.get(channel_id)
        if not log:
            raise NoStateYet(f"no state recorded for channel {channel_id!r}")
        return log[-1]

    def state_log(self, channel_id: str) -> tuple[NetworkState, ...]:
        return tuple(self._state_log.get(channel_id, ()))
