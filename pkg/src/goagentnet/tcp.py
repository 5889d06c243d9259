"""TCP transport for the agent bus.

The server speaks the same length-prefixed frame format as the in-process
bus; each connection gets its own reader thread, responses are written in
request order, and graph/subscribe upgrades a connection to also receive
agent/event notifications.
"""

from __future__ import annotations

import socket
import threading
from typing import Optional

from .protocol import (
    Bus,
    InvokeParams,
    Message,
    ProtocolError,
    RemoteError,
    StreamDecoder,
    encode_frame,
    event_notification,
)


class BusTcpServer:
    """Serve a bus over TCP; one reader thread per accepted connection."""

    def __init__(self, bus: Bus, host: str = "127.0.0.1", port: int = 0) -> None:
        self.bus = bus
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen()
        self.address = self._sock.getsockname()
        self._running = True
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    def _accept_loop(self) -> None:
        while self._running:
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            threading.Thread(target=self._serve, args=(conn,), daemon=True).start()

    def _serve(self, conn: socket.socket) -> None:
        decoder = StreamDecoder()
        write_lock = threading.Lock()
        subscribed = False

        def push_event(event) -> None:
            frame = encode_frame(event_notification(event))
            with write_lock:
                try:
                    conn.sendall(frame)
                except OSError:
                    pass

        with conn:
            while self._running:
                try:
                    data = conn.recv(65536)
                except OSError:
                    return
                if not data:
                    return
                for msg in decoder.feed(data):
                    if msg.method == "graph/subscribe" and not subscribed:
                        subscribed = True
                        replay_from = (msg.params or {}).get("replay_from")
                        # Replay and listener registration happen under the bus
                        # lock so no event is duplicated or lost at the splice.
                        with self.bus._lock:
                            if replay_from is not None:
                                for event in self.bus.registry.events_since(int(replay_from)):
                                    push_event(event)
                            self.bus.registry.add_listener(push_event)
                        response = Message.response(msg.id, {"subscribed": True})
                    else:
                        response = self.bus.dispatch(msg)
                    if response is not None:
                        with write_lock:
                            conn.sendall(encode_frame(response))

    def close(self) -> None:
        self._running = False
        try:
            self._sock.close()
        except OSError:
            pass


class TcpBusClient:
    """Blocking client: one request in flight at a time, FIFO responses."""

    def __init__(self, host: str, port: int, connect_timeout_s: float = 5.0) -> None:
        self._sock = socket.create_connection((host, port), timeout=connect_timeout_s)
        self._sock.settimeout(10.0)
        self._decoder = StreamDecoder()
        self._events: list[Message] = []
        self._next_id = 1

    def _recv_batch(self) -> list[Message]:
        data = self._sock.recv(65536)
        if not data:
            raise ProtocolError("connection closed by server")
        return self._decoder.feed(data)

    def _call(self, method: str, params: Optional[dict] = None) -> Message:
        request = Message.request(self._next_id, method, params)
        self._next_id += 1
        self._sock.sendall(encode_frame(request))
        while True:
            for msg in self._recv_batch():
                if msg.is_response and msg.id == request.id:
                    return msg
                if msg.method == "agent/event":
                    self._events.append(msg)

    def ping(self) -> dict:
        return self._call("ping").result or {}

    def invoke(self, params: InvokeParams) -> dict:
        response = self._call("agent/invoke", params.to_wire())
        if response.error is not None:
            raise RemoteError(response.error.code, response.error.message)
        return response.result or {}

    def query(self, **filter_fields) -> list[int]:
        response = self._call("graph/query", {"filter": filter_fields})
        return list(response.result["ids"])

    def subscribe(self, replay_from: Optional[int] = None) -> None:
        params = {} if replay_from is None else {"replay_from": replay_from}
        self._call("graph/subscribe", params)

    def next_event(self) -> dict:
        """Block until the next agent/event notification arrives."""
        while not self._events:
            for msg in self._recv_batch():
                if msg.method == "agent/event":
                    self._events.append(msg)
        return self._events.pop(0).params or {}

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass
