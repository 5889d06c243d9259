"""Agentic communication protocol: framed JSON-RPC messages and a bus.

Wire format is bit-exact: a 4-byte big-endian payload length followed by a
UTF-8 JSON-RPC 2.0 object whose top-level keys appear in fixed order
(jsonrpc, id, method, params / result / error) and whose nested objects are
key-sorted. Equal messages therefore always encode to identical bytes.
"""

from __future__ import annotations

import itertools
import json
import struct
import threading
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Optional

from .registry import AgentProfile, GraphEvent, Registry

JSONRPC_VERSION = "2.0"
MAX_PAYLOAD_BYTES = 0xFFFFFFFF
HEADER_SIZE = 4

# Methods this protocol understands; ping is the connectivity probe.
METHODS = frozenset(
    {
        "agent/register",
        "agent/deregister",
        "agent/invoke",
        "agent/event",
        "graph/query",
        "graph/subscribe",
        "ping",
    }
)

DEFAULT_INVOKE_TIMEOUT_S = 5.0


class ProtocolError(Exception):
    pass


class OversizeMessage(ProtocolError):
    pass


class MalformedJson(ProtocolError):
    pass


class UnknownMethod(ProtocolError):
    pass


class LengthMismatch(ProtocolError):
    pass


class UnknownTarget(ProtocolError):
    pass


class CapabilityNotFound(ProtocolError):
    pass


class Timeout(ProtocolError):
    pass


class RemoteError(ProtocolError):
    def __init__(self, code: int, message: str) -> None:
        super().__init__(f"remote error {code}: {message}")
        self.code = code
        self.message = message


@dataclass(frozen=True)
class RpcError:
    code: int
    message: str


@dataclass(frozen=True)
class Message:
    """One JSON-RPC envelope: request, notification, or response."""

    id: Optional[int] = None
    method: Optional[str] = None
    params: Optional[dict] = None
    result: Optional[dict] = None
    error: Optional[RpcError] = None

    def __post_init__(self) -> None:
        is_call = self.method is not None
        is_reply = self.result is not None or self.error is not None
        if is_call == is_reply:
            raise ProtocolError("message must be exactly one of call or response")
        if is_call and self.method not in METHODS:
            raise UnknownMethod(f"method {self.method!r} not in protocol")
        if is_reply and self.id is None:
            raise ProtocolError("responses require an id")
        if self.result is not None and self.error is not None:
            raise ProtocolError("response carries either result or error, not both")

    @property
    def is_response(self) -> bool:
        return self.result is not None or self.error is not None

    @property
    def is_notification(self) -> bool:
        return self.method is not None and self.id is None

    @staticmethod
    def request(id: int, method: str, params: Optional[dict] = None) -> "Message":
        return Message(id=id, method=method, params=params)

    @staticmethod
    def notification(method: str, params: Optional[dict] = None) -> "Message":
        return Message(method=method, params=params)

    @staticmethod
    def response(id: int, result: dict) -> "Message":
        return Message(id=id, result=result)

    @staticmethod
    def error_response(id: int, code: int, message: str) -> "Message":
        return Message(id=id, error=RpcError(code, message))


@dataclass(frozen=True)
class InvokeParams:
    """Parameters of an agent/invoke call; payloads travel by reference."""

    target: int
    capability: str
    data_type: tuple[tuple[str, str], ...] = ()
    size_bits: int = 0
    payload_ref: str = ""

    def __post_init__(self) -> None:
        if not self.capability:
            raise ProtocolError("capability must be non-empty")
        if self.size_bits < 0:
            raise ProtocolError("size_bits must be >= 0")
        if isinstance(self.data_type, dict):
            object.__setattr__(self, "data_type", tuple(sorted(self.data_type.items())))

    def to_wire(self) -> dict:
        return {
            "target": self.target,
            "capability": self.capability,
            "data_type": dict(self.data_type),
            "size_bits": self.size_bits,
            "payload_ref": self.payload_ref,
        }

    @staticmethod
    def from_wire(doc: Mapping) -> "InvokeParams":
        return InvokeParams(
            target=int(doc["target"]),
            capability=str(doc["capability"]),
            data_type=tuple(sorted((str(k), str(v)) for k, v in doc.get("data_type", {}).items())),
            size_bits=int(doc.get("size_bits", 0)),
            payload_ref=str(doc.get("payload_ref", "")),
        )


def _sorted_json(value: Any) -> Any:
    """Recursively sort mapping keys so equal values serialize identically."""
    if isinstance(value, dict):
        return {k: _sorted_json(value[k]) for k in sorted(value)}
    if isinstance(value, (list, tuple)):
        return [_sorted_json(v) for v in value]
    return value


def encode_payload(msg: Message) -> bytes:
    envelope: dict[str, Any] = {"jsonrpc": JSONRPC_VERSION}
    if msg.id is not None:
        envelope["id"] = msg.id
    if msg.method is not None:
        envelope["method"] = msg.method
        if msg.params is not None:
            envelope["params"] = _sorted_json(msg.params)
    elif msg.error is not None:
        envelope["error"] = {"code": msg.error.code, "message": msg.error.message}
    else:
        envelope["result"] = _sorted_json(msg.result)
    return json.dumps(envelope, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def encode_frame(msg: Message, max_payload: int = MAX_PAYLOAD_BYTES) -> bytes:
    """Length-prefixed canonical bytes for one message."""
    payload = encode_payload(msg)
    if len(payload) > max_payload:
        raise OversizeMessage(f"payload of {len(payload)} bytes exceeds {max_payload}")
    return struct.pack(">I", len(payload)) + payload


def decode_frame(buffer: bytes) -> Optional[tuple[Message, bytes]]:
    """Consume exactly one frame; None signals that more bytes are needed."""
    if len(buffer) < HEADER_SIZE:
        return None
    (length,) = struct.unpack(">I", buffer[:HEADER_SIZE])
    if len(buffer) < HEADER_SIZE + length:
        return None
    payload = buffer[HEADER_SIZE : HEADER_SIZE + length]
    remainder = buffer[HEADER_SIZE + length :]
    return _decode_payload(payload), remainder


def _decode_payload(payload: bytes) -> Message:
    try:
        text = payload.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedJson(f"payload is not UTF-8: {exc}") from exc
    try:
        doc, end = json.JSONDecoder().raw_decode(text)
    except json.JSONDecodeError as exc:
        raise MalformedJson(f"payload is not JSON: {exc}") from exc
    if end != len(text):
        raise LengthMismatch(
            f"frame declares {len(payload)} payload bytes but JSON ends at {end}"
        )
    if not isinstance(doc, dict) or doc.get("jsonrpc") != JSONRPC_VERSION:
        raise MalformedJson("payload is not a JSON-RPC 2.0 object")
    error = None
    if "error" in doc:
        error = RpcError(int(doc["error"]["code"]), str(doc["error"]["message"]))
    try:
        return Message(
            id=doc.get("id"),
            method=doc.get("method"),
            params=doc.get("params"),
            result=doc.get("result"),
            error=error,
        )
    except UnknownMethod:
        raise
    except ProtocolError as exc:
        raise MalformedJson(str(exc)) from exc


class StreamDecoder:
    """Reassemble messages from arbitrarily chunked frame bytes."""

    def __init__(self) -> None:
        self._buffer = b""

    def feed(self, data: bytes) -> list[Message]:
        self._buffer += data
        messages = []
        while True:
            decoded = decode_frame(self._buffer)
            if decoded is None:
                return messages
            msg, self._buffer = decoded
            messages.append(msg)

    @property
    def pending_bytes(self) -> int:
        return len(self._buffer)


@dataclass
class InvokeResult:
    """Handler outcome: a result document plus modeled cost of serving it."""

    result: dict
    sim_duration_s: float = 0.0
    sim_energy_j: float = 0.0


class AgentError(Exception):
    """Raised by handlers to surface a JSON-RPC error to the caller."""

    def __init__(self, code: int, message: str) -> None:
        super().__init__(message)
        self.code = code
        self.message = message


Handler = Callable[[str, InvokeParams], InvokeResult]

_ERR_UNKNOWN_TARGET = -32001
_ERR_CAPABILITY = -32002
_ERR_TIMEOUT = -32003


class Subscription:
    """Ordered stream of graph events past the subscription point."""

    def __init__(self) -> None:
        self._events: list[GraphEvent] = []

    def push(self, event: GraphEvent) -> None:
        self._events.append(event)

    def collect(self) -> list[GraphEvent]:
        """Drain everything received so far, in seq order."""
        events, self._events = self._events, []
        return events


class Bus:
    """In-process message bus tying the registry to agent handlers.

    Every call is routed through the frame codec, so anything that crosses
    the bus is guaranteed wire-encodable. Dispatch is serialized by a lock;
    delivery per connection is FIFO.
    """

    def __init__(
        self, registry: Registry | None = None, default_timeout_s: float = DEFAULT_INVOKE_TIMEOUT_S
    ) -> None:
        self.registry = registry if registry is not None else Registry()
        self.default_timeout_s = default_timeout_s
        self._handlers: dict[int, Handler] = {}
        self._subscriptions: list[Subscription] = []
        self._ids = itertools.count(1)
        self._lock = threading.Lock()
        self.message_log: list[Message] = []
        self.registry.add_listener(self._on_graph_event)

    # -- lifecycle ----------------------------------------------------------

    def register_agent(
        self, profile: AgentProfile, handler: Handler | None = None, timestamp: float = 0.0
    ) -> tuple[int, GraphEvent]:
        with self._lock:
            agent_id, event = self.registry.register(profile, timestamp=timestamp)
            if handler is not None:
                self._handlers[agent_id] = handler
            return agent_id, event

    def deregister_agent(self, agent_id: int, timestamp: float = 0.0) -> GraphEvent:
        with self._lock:
            event = self.registry.deregister(agent_id, timestamp=timestamp)
            self._handlers.pop(agent_id, None)
            return event

    def attach_handler(self, agent_id: int, handler: Handler) -> None:
        self._handlers[agent_id] = handler

    def _on_graph_event(self, event: GraphEvent) -> None:
        for sub in self._subscriptions:
            sub.push(event)

    # -- invocation ---------------------------------------------------------

    def next_id(self) -> int:
        return next(self._ids)

    def invoke(
        self,
        target: int,
        capability: str,
        params: InvokeParams | None = None,
        timeout_s: float | None = None,
    ) -> dict:
        """Send an agent/invoke request and return the correlated result.

        Raises UnknownTarget, CapabilityNotFound, Timeout, or RemoteError.
        """
        if params is None:
            params = InvokeParams(target=target, capability=capability)
        request = Message.request(self.next_id(), "agent/invoke", params.to_wire())
        response = self.round_trip(request, timeout_s=timeout_s)
        if response.error is not None:
            raise self._error_from_code(response.error)
        return response.result or {}

    def _error_from_code(self, error: RpcError) -> ProtocolError:
        if error.code == _ERR_UNKNOWN_TARGET:
            return UnknownTarget(error.message)
        if error.code == _ERR_CAPABILITY:
            return CapabilityNotFound(error.message)
        if error.code == _ERR_TIMEOUT:
            return Timeout(error.message)
        return RemoteError(error.code, error.message)

    def round_trip(self, request: Message, timeout_s: float | None = None) -> Message:
        """Dispatch one encoded request and decode its correlated response."""
        wire = encode_frame(request)
        decoded, rest = decode_frame(wire)  # type: ignore[misc]
        assert not rest
        response = self.dispatch(decoded, timeout_s=timeout_s)
        if response is None:
            raise ProtocolError("request received no response")
        back, rest = decode_frame(encode_frame(response))  # type: ignore[misc]
        assert not rest
        return back

    def dispatch(self, msg: Message, timeout_s: float | None = None) -> Optional[Message]:
        """Serialized dispatch of one decoded message; responses correlate by id."""
        with self._lock:
            self.message_log.append(msg)
            response = self._dispatch_locked(msg, timeout_s)
            if response is not None:
                self.message_log.append(response)
            return response

    def _dispatch_locked(self, msg: Message, timeout_s: float | None) -> Optional[Message]:
        if msg.is_response:
            return None
        if msg.method == "ping":
            return self._reply(msg, {"pong": True})
        if msg.method == "agent/register":
            profile = AgentProfile.from_dict(msg.params["profile"])
            timestamp = float(msg.params.get("timestamp", 0.0))
            agent_id, event = self.registry.register(profile, timestamp=timestamp)
            return self._reply(msg, {"id": agent_id, "seq": event.seq})
        if msg.method == "agent/deregister":
            event = self.registry.deregister(int(msg.params["id"]))
            self._handlers.pop(int(msg.params["id"]), None)
            return self._reply(msg, {"seq": event.seq})
        if msg.method == "graph/query":
            doc = msg.params.get("filter", {}) if msg.params else {}
            ids = self.registry.query(
                agent_type=doc.get("agent_type"),
                capability_name=doc.get("capability_name"),
                output_schema=doc.get("output_schema"),
            )
            return self._reply(msg, {"ids": ids})
        if msg.method == "agent/invoke":
            return self._invoke_locked(msg, timeout_s)
        if msg.method == "agent/event":
            return None  # notifications receive no response
        if msg.method == "graph/subscribe":
            replay_from = (msg.params or {}).get("replay_from")
            events = [] if replay_from is None else self.registry.events_since(int(replay_from))
            return self._reply(
                msg, {"subscribed": True, "replay": [_event_to_wire(e) for e in events]}
            )
        return Message.error_response(msg.id, -32601, f"method {msg.method!r} not handled")

    def _invoke_locked(self, msg: Message, timeout_s: float | None) -> Optional[Message]:
        params = InvokeParams.from_wire(msg.params)
        if msg.id is None:
            return None  # invoke notifications are fire-and-forget
        snapshot_nodes = self.registry.snapshot().nodes
        if params.target not in snapshot_nodes:
            return Message.error_response(
                msg.id, _ERR_UNKNOWN_TARGET, f"agent {params.target} not registered"
            )
        handler = self._handlers.get(params.target)
        profile = snapshot_nodes[params.target]
        if handler is None or (
            profile.tool(params.capability) is None and params.capability != "ping"
        ):
            return Message.error_response(
                msg.id,
                _ERR_CAPABILITY,
                f"agent {params.target} has no capability {params.capability!r}",
            )
        try:
            outcome = handler(params.capability, params)
        except AgentError as exc:
            return Message.error_response(msg.id, exc.code, exc.message)
        limit = self.default_timeout_s if timeout_s is None else timeout_s
        if outcome.sim_duration_s > limit:
            return Message.error_response(
                msg.id,
                _ERR_TIMEOUT,
                f"capability {params.capability!r} took {outcome.sim_duration_s}s "
                f"(limit {limit}s)",
            )
        return Message.response(msg.id, dict(outcome.result))

    def _reply(self, msg: Message, result: dict) -> Optional[Message]:
        if msg.id is None:
            return None
        return Message.response(msg.id, result)

    # -- subscriptions --------------------------------------------------------

    def subscribe(self, replay_from: int | None = None) -> Subscription:
        """Stream of graph events; replay_from splices history before live events."""
        with self._lock:
            sub = Subscription()
            if replay_from is not None:
                for event in self.registry.events_since(replay_from):
                    sub.push(event)
            self._subscriptions.append(sub)
            return sub


def _event_to_wire(event: GraphEvent) -> dict:
    return {
        "seq": event.seq,
        "kind": event.kind.value,
        "payload": event.payload,
        "timestamp": event.timestamp,
    }


def event_notification(event: GraphEvent) -> Message:
    return Message.notification("agent/event", _event_to_wire(event))
