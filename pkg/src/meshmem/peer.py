"""Running mesh node: TCP listener/dialer over a static peer list, the
receive pipeline, broadcast, and liveness counters.

One lock serializes all store mutations; socket reader threads hand decoded
frames to the store under that lock, so mutations are totally ordered per
node. Framing is one JSON frame per line.
"""

from __future__ import annotations

import json
import os
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Optional

from .cat7 import DEFAULT_DIM, FIELD_ORDER, CMB, FieldName
from .errors import (
    BindFailure,
    ConfigError,
    MalformedFrame,
    MeshMemError,
    SchemaViolation,
)
from .store import (
    DEFAULT_BETA,
    DEFAULT_HOT_AGE_MS,
    DEFAULT_TTL_MS,
    DEFAULT_WARM_AGE_MS,
    MeshMem,
)
from .svaf import RoleProfile, Thresholds
from .wire import decode_frame, encode_frame

MAX_BACKOFF_S = 30.0
INITIAL_BACKOFF_S = 0.2


def now_ms() -> int:
    return int(time.time() * 1000)


def _parse_address(value: str, where: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not host:
        raise ConfigError(where, f"address {value!r} is not host:port")
    try:
        return host, int(port)
    except ValueError:
        raise ConfigError(where, f"port in {value!r} is not an integer") from None


@dataclass(frozen=True)
class PeerConfig:
    node_id: str
    role_name: str
    listen_address: str
    peers: tuple[tuple[str, str], ...]
    profile: RoleProfile
    thresholds: Thresholds
    persistence_path: str
    d: int = DEFAULT_DIM
    ttl_ms: int = DEFAULT_TTL_MS
    hot_age_ms: int = DEFAULT_HOT_AGE_MS
    warm_age_ms: int = DEFAULT_WARM_AGE_MS
    beta: float = DEFAULT_BETA
    control_socket: Optional[str] = None
    # Reserved for mesh-group isolation; currently ignored.
    group_token: Optional[str] = None

    def __post_init__(self):
        if not self.node_id:
            raise ConfigError("node_id", "must be nonempty")
        _parse_address(self.listen_address, "listen_address")
        seen = {self.node_id}
        for pid, addr in self.peers:
            if not pid:
                raise ConfigError("peers", "peer id must be nonempty")
            if pid in seen:
                raise ConfigError("peers", f"duplicate node id {pid!r}")
            seen.add(pid)
            _parse_address(addr, f"peers[{pid}]")

    @property
    def control_socket_path(self) -> str:
        if self.control_socket:
            return self.control_socket
        return os.path.join(
            os.path.dirname(os.path.abspath(self.persistence_path)),
            f"{self.node_id}.control.sock",
        )

    @classmethod
    def from_dict(cls, obj: dict) -> "PeerConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config", "top level must be an object")
        for required in ("node_id", "role_name", "listen_address", "persistence_path"):
            if not obj.get(required):
                raise ConfigError(required, "missing")
        raw_alpha = obj.get("alpha") or {name.value: 1.0 for name in FIELD_ORDER}
        try:
            alpha = {
                name: float(raw_alpha.get(name.value, 0.0)) for name in FIELD_ORDER
            }
            profile = RoleProfile(
                node_role=obj["role_name"],
                alpha=alpha,
                lambda_decay=float(
                    obj.get("lambda_decay", RoleProfile.uniform().lambda_decay)
                ),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError("alpha", str(exc)) from exc
        raw_th = obj.get("thresholds") or {}
        try:
            thresholds = Thresholds(
                t_red=float(raw_th.get("t_red", Thresholds().t_red)),
                t_aln=float(raw_th.get("t_aln", Thresholds().t_aln)),
                t_grd=float(raw_th.get("t_grd", Thresholds().t_grd)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError("thresholds", str(exc)) from exc
        peers = []
        for i, p in enumerate(obj.get("peers") or []):
            if not isinstance(p, dict) or "id" not in p or "address" not in p:
                raise ConfigError(f"peers[{i}]", "must be {id, address}")
            peers.append((p["id"], p["address"]))
        return cls(
            node_id=obj["node_id"],
            role_name=obj["role_name"],
            listen_address=obj["listen_address"],
            peers=tuple(peers),
            profile=profile,
            thresholds=thresholds,
            persistence_path=obj["persistence_path"],
            d=int(obj.get("d", DEFAULT_DIM)),
            ttl_ms=int(obj.get("ttl_ms", DEFAULT_TTL_MS)),
            hot_age_ms=int(obj.get("hot_age_ms", DEFAULT_HOT_AGE_MS)),
            warm_age_ms=int(obj.get("warm_age_ms", DEFAULT_WARM_AGE_MS)),
            beta=float(obj.get("beta", DEFAULT_BETA)),
            control_socket=obj.get("control_socket"),
            group_token=obj.get("group_token"),
        )

    @classmethod
    def from_file(cls, path: str) -> "PeerConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                obj = json.load(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError("config", f"invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(obj)


@dataclass
class PeerState:
    peer_id: str
    address: str
    connected: bool = False
    last_seen: int = 0
    frames_in: int = 0
    frames_out: int = 0
    drops: dict[str, int] = field(
        default_factory=lambda: {
            "echo": 0, "redundant": 0, "rejected": 0, "malformed": 0,
        }
    )

    def snapshot(self) -> dict[str, Any]:
        return {
            "id": self.peer_id,
            "address": self.address,
            "connected": self.connected,
            "last_seen": self.last_seen,
            "frames_in": self.frames_in,
            "frames_out": self.frames_out,
            "drops": dict(self.drops),
        }


class MeshPeer:
    """A running node. Use MeshPeer.start(config); call shutdown() when done."""

    def __init__(self, config: PeerConfig, store: MeshMem):
        self.config = config
        self.store = store
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._listener: Optional[socket.socket] = None
        self._threads: list[threading.Thread] = []
        self._outbound: dict[str, Optional[socket.socket]] = {
            pid: None for pid, _ in config.peers
        }
        self._peer_state: dict[str, PeerState] = {
            pid: PeerState(pid, addr) for pid, addr in config.peers
        }
        # Counters for frames from senders not in the configured peer list.
        self._unknown = PeerState("unknown", "-")

    @classmethod
    def start(cls, config: PeerConfig) -> "MeshPeer":
        store = MeshMem.load(
            config.persistence_path,
            node_id=config.node_id,
            role_name=config.role_name,
            profile=config.profile,
            thresholds=config.thresholds,
            d=config.d,
            beta=config.beta,
            ttl_ms=config.ttl_ms,
            hot_age_ms=config.hot_age_ms,
            warm_age_ms=config.warm_age_ms,
        )
        peer = cls(config, store)
        host, port = _parse_address(config.listen_address, "listen_address")
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind((host, port))
        except OSError as exc:
            listener.close()
            raise BindFailure(f"cannot bind {config.listen_address}: {exc}") from exc
        listener.listen(16)
        listener.settimeout(0.2)
        peer._listener = listener
        peer._spawn(peer._accept_loop, name="accept")
        for pid, addr in config.peers:
            peer._spawn(peer._dial_loop, pid, addr, name=f"dial-{pid}")
        return peer

    @property
    def listen_port(self) -> int:
        return self._listener.getsockname()[1]

    def _spawn(self, fn, *args, name: str) -> None:
        t = threading.Thread(
            target=fn, args=args, name=f"{self.config.node_id}-{name}", daemon=True
        )
        t.start()
        self._threads.append(t)

    # --- transport ---

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            self._spawn(self._read_loop, conn, name="reader")

    def _read_loop(self, conn: socket.socket) -> None:
        conn.settimeout(0.5)
        buf = b""
        with conn:
            while not self._stop.is_set():
                try:
                    chunk = conn.recv(65536)
                except socket.timeout:
                    continue
                except OSError:
                    return
                if not chunk:
                    return
                buf += chunk
                while b"\n" in buf:
                    line, buf = buf.split(b"\n", 1)
                    if line.strip():
                        self.on_frame(line)

    def _dial_loop(self, peer_id: str, address: str) -> None:
        host, port = _parse_address(address, f"peers[{peer_id}]")
        backoff = INITIAL_BACKOFF_S
        while not self._stop.is_set():
            if self._outbound.get(peer_id) is not None:
                self._stop.wait(0.2)
                continue
            try:
                sock = socket.create_connection((host, port), timeout=2.0)
            except OSError:
                self._stop.wait(backoff)
                backoff = min(backoff * 2, MAX_BACKOFF_S)
                continue
            backoff = INITIAL_BACKOFF_S
            with self._lock:
                self._outbound[peer_id] = sock
                self._peer_state[peer_id].connected = True

    def _drop_connection(self, peer_id: str) -> None:
        with self._lock:
            sock = self._outbound.get(peer_id)
            self._outbound[peer_id] = None
            self._peer_state[peer_id].connected = False
        if sock is not None:
            try:
                sock.close()
            except OSError:
                pass

    # --- frame handling ---

    def _state_for(self, sender: str) -> PeerState:
        return self._peer_state.get(sender, self._unknown)

    def on_frame(self, data: bytes) -> None:
        """Decode one line and run the admission pipeline. Never raises; all
        failures are counted."""
        try:
            frame = decode_frame(data, d=self.config.d)
        except (MalformedFrame, SchemaViolation):
            with self._lock:
                self._unknown.drops["malformed"] += 1
            return
        state = self._state_for(frame.cmb.created_by)
        with self._lock:
            state.frames_in += 1
            state.last_seen = now_ms()
            if frame.cmb.created_by == self.config.node_id:
                # Loopback guard: never admit our own frame.
                state.drops["echo"] += 1
                return
            try:
                outcome = self.store.receive(frame.cmb, now_ms())
            except MeshMemError:
                state.drops["malformed"] += 1
                return
        kind = outcome.kind
        if kind != "stored":
            with self._lock:
                state.drops[kind.removesuffix("_dropped")] += 1

    def broadcast(self, cmb: CMB, only: Optional[set[str]] = None) -> dict[str, str]:
        """Send one frame to every connected peer (optionally restricted to
        a recipient set). Per-peer failures never abort the others."""
        payload = encode_frame(cmb, now_ms()) + b"\n"
        report: dict[str, str] = {}
        for pid, _ in self.config.peers:
            if only is not None and pid not in only:
                continue
            sock = self._outbound.get(pid)
            if sock is None:
                report[pid] = "failed: not connected"
                continue
            try:
                sock.sendall(payload)
                with self._lock:
                    self._peer_state[pid].frames_out += 1
                report[pid] = "ok"
            except OSError as exc:
                report[pid] = f"failed: {exc}"
                self._drop_connection(pid)
        return report

    # --- tool surface ---

    def observe(
        self,
        field_texts: dict[FieldName, str],
        mood_coords: tuple[float, float],
        body=None,
        to: Optional[set[str]] = None,
    ):
        with self._lock:
            entry = self.store.observe(field_texts, mood_coords, body, now_ms())
        report = self.broadcast(entry.cmb, only=to)
        return entry, report

    def recall(self, query_texts=None, limit: int = 10):
        with self._lock:
            return self.store.recall(query_texts, limit)

    def fetch(self, key: str):
        with self._lock:
            return self.store.fetch(key)

    def peers(self) -> list[dict[str, Any]]:
        with self._lock:
            return [self._peer_state[pid].snapshot() for pid, _ in self.config.peers]

    def status(self) -> dict[str, Any]:
        with self._lock:
            return {
                "node_id": self.config.node_id,
                "role": self.config.role_name,
                "listen_address": self.config.listen_address,
                "store_size": len(self.store.entries),
                "peers": [
                    self._peer_state[pid].snapshot() for pid, _ in self.config.peers
                ],
                "unknown": self._unknown.snapshot(),
            }

    def shutdown(self) -> None:
        self._stop.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        for pid in list(self._outbound):
            self._drop_connection(pid)
        for t in self._threads:
            if t is not threading.current_thread():
                t.join(timeout=2.0)
