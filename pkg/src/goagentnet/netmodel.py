"""Analytic network layer: rate, latency, transmit energy, state feedback.

The rate model is R = bandwidth * spectral efficiency; transmit cost is
airtime only (tx_power * size / R). Loss triggers geometric retransmission
driven by a caller-supplied seeded RNG, so outcomes are reproducible.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field


class NetModelError(Exception):
    pass


class InvalidBandwidth(NetModelError):
    pass


@dataclass
class Channel:
    """Mutable channel description owned by the simulation loop."""

    id: str
    bandwidth_hz: float
    spectral_efficiency_bps_per_hz: float = 1.0
    tx_power_w: float = 1.0
    propagation_delay_s: float = 0.0
    loss_prob: float = 0.0
    recent_energy_j: float = 0.0

    def __post_init__(self) -> None:
        if self.bandwidth_hz <= 0:
            raise InvalidBandwidth(f"bandwidth must be > 0, got {self.bandwidth_hz}")
        if self.spectral_efficiency_bps_per_hz <= 0:
            raise NetModelError("spectral efficiency must be > 0")
        if self.tx_power_w <= 0:
            raise NetModelError("tx power must be > 0")
        if self.propagation_delay_s < 0:
            raise NetModelError("propagation delay must be >= 0")
        if not 0.0 <= self.loss_prob < 1.0:
            raise NetModelError("loss probability must lie in [0, 1)")


@dataclass(frozen=True)
class TxOutcome:
    latency_s: float
    energy_j: float
    delivered: bool
    attempts: int


@dataclass(frozen=True)
class NetworkState:
    """Upward feedback snapshot reported to the knowledge layer."""

    channel_id: str
    timestamp: float
    bandwidth_hz: float
    achievable_rate_bps: float
    congestion_level: float
    link_reliability: float
    recent_energy_j: float

    def to_dict(self) -> dict:
        return {
            "channel_id": self.channel_id,
            "timestamp": self.timestamp,
            "bandwidth_hz": self.bandwidth_hz,
            "achievable_rate_bps": self.achievable_rate_bps,
            "congestion_level": self.congestion_level,
            "link_reliability": self.link_reliability,
            "recent_energy_j": self.recent_energy_j,
        }


def link_rate(channel: Channel) -> float:
    """Achievable rate in bits per second."""
    return channel.bandwidth_hz * channel.spectral_efficiency_bps_per_hz


def transmit(channel: Channel, size_bits: float, rng: random.Random) -> TxOutcome:
    """Send size_bits over the channel, retrying on loss until delivered."""
    if size_bits < 0:
        raise NetModelError("size_bits must be >= 0")
    attempts = 1
    while rng.random() < channel.loss_prob:
        attempts += 1
    rate = link_rate(channel)
    latency = attempts * (size_bits / rate + channel.propagation_delay_s)
    energy = attempts * channel.tx_power_w * size_bits / rate
    channel.recent_energy_j = energy
    return TxOutcome(latency_s=latency, energy_j=energy, delivered=True, attempts=attempts)


def set_bandwidth(channel: Channel, new_bandwidth_hz: float, timestamp: float = 0.0) -> NetworkState:
    """Retune the channel and return the fresh state for upward feedback."""
    if new_bandwidth_hz <= 0:
        raise InvalidBandwidth(f"bandwidth must be > 0, got {new_bandwidth_hz}")
    channel.bandwidth_hz = float(new_bandwidth_hz)
    return report_state(channel, timestamp=timestamp)


def report_state(channel: Channel, timestamp: float = 0.0, congestion_level: float = 0.0) -> NetworkState:
    """Snapshot consistent with the channel's current fields."""
    return NetworkState(
        channel_id=channel.id,
        timestamp=timestamp,
        bandwidth_hz=channel.bandwidth_hz,
        achievable_rate_bps=link_rate(channel),
        congestion_level=congestion_level,
        link_reliability=1.0 - channel.loss_prob,
        recent_energy_j=channel.recent_energy_j,
    )
