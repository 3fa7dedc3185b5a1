"""One-round federated protocol: M clients report, the server ranks, all learn.

Clients run the local phase on their own shard (discretize, then MI/CD
matrices) and send a single report. The server blocks at a barrier until all
M reports arrive, aggregates, ranks, and broadcasts the identical ranking
back to every client. There is no second round: one exchange ends the
protocol. A missing or malformed report aborts the whole round; partial
aggregation is never performed.

Two transports with identical semantics: in-process queues, and TCP with
4-byte big-endian length-prefixed JSON frames.
"""

from __future__ import annotations

import json
import queue
import socket
import struct
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

from .client import SCHEMA_VERSION, ClientReport, compute_local_report
from .dataset import MultiLabelDataset, discretize
from .pareto import FeatureRanking, rank_features
from .server import aggregate, objectives

SERVER_ID = -1

EventHook = Callable[[dict], None]


class ProtocolError(RuntimeError):
    """A violated protocol contract: duplicate/unknown client, bad dims, timeout."""


@dataclass(frozen=True)
class ProtocolMessage:
    """Round message: a client Report, the server's Ranking, or an Abort.

    Reports flow client -> server only; Ranking and Abort flow server ->
    client only. The server's sender id is -1.
    """

    kind: str
    sender: int
    body: dict
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.kind not in ("report", "ranking", "abort"):
            raise ValueError(f"unknown message kind {self.kind!r}")

    def to_json(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "kind": self.kind,
            "sender": int(self.sender),
            "body": self.body,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ProtocolMessage":
        if obj.get("schema_version") != SCHEMA_VERSION:
            raise ProtocolError(f"schema_version mismatch: {obj.get('schema_version')!r}")
        return cls(kind=obj["kind"], sender=int(obj["sender"]), body=obj["body"])

    def encode(self) -> bytes:
        return json.dumps(self.to_json(), separators=(",", ":")).encode("utf-8")

    @classmethod
    def decode(cls, raw: bytes) -> "ProtocolMessage":
        return cls.from_json(json.loads(raw.decode("utf-8")))


def send_message(sock: socket.socket, msg: ProtocolMessage) -> None:
    raw = msg.encode()
    sock.sendall(struct.pack("!I", len(raw)) + raw)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ProtocolError("connection closed mid-frame")
        buf += chunk
    return buf


def recv_message(sock: socket.socket) -> ProtocolMessage:
    (length,) = struct.unpack("!I", _recv_exact(sock, 4))
    return ProtocolMessage.decode(_recv_exact(sock, length))


@dataclass
class RunConfig:
    """Settings for one federated round plus the downstream evaluation sweep."""

    num_clients: int = 10
    bins: int = 10
    alpha: float = 0.5
    seed: int = 42
    top_k: list[int] = field(default_factory=list)
    data_path: str | None = None
    knn_k: int = 10
    transport: str = "in-process"
    timeout_s: float = 60.0
    weighted: bool = False

    def __post_init__(self):
        if self.num_clients < 2:
            raise ValueError("M must be a minimum of 2")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")
        if self.knn_k < 1:
            raise ValueError("knn k must be >= 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.timeout_s <= 0:
            raise ValueError("timeout must be positive")
        if any(k < 1 for k in self.top_k):
            raise ValueError("every top_k must be >= 1")
        self.tcp_address()  # validates the transport string

    def tcp_address(self) -> tuple[str, int] | None:
        """(host, port) for a tcp transport, None for in-process."""
        if self.transport == "in-process":
            return None
        spec = self.transport
        for prefix in ("tcp://", "tcp "):
            if spec.startswith(prefix):
                host, _, port = spec[len(prefix):].rpartition(":")
                if host and port.isdigit():
                    return host, int(port)
        raise ValueError(f"transport must be 'in-process' or 'tcp host:port', got {self.transport!r}")

    def to_json(self) -> dict:
        return {
            "num_clients": self.num_clients,
            "bins": self.bins,
            "alpha": self.alpha,
            "seed": self.seed,
            "top_k": list(self.top_k),
            "data_path": self.data_path,
            "knn_k": self.knn_k,
            "transport": self.transport,
            "timeout_s": self.timeout_s,
            "weighted": self.weighted,
        }


class ReportCollector:
    """Server-side barrier: exactly one report per client id in [0, M)."""

    def __init__(self, num_clients: int):
        if num_clients < 2:
            raise ValueError("M must be a minimum of 2")
        self.num_clients = num_clients
        self.reports: dict[int, ClientReport] = {}

    def add(self, report: ClientReport) -> None:
        cid = report.client_id
        if not 0 <= cid < self.num_clients:
            raise ProtocolError(f"unknown client id {cid}")
        if cid in self.reports:
            raise ProtocolError(f"duplicate report from client {cid}")
        if self.reports:
            first = next(iter(self.reports.values()))
            if (report.num_features, report.num_labels) != (first.num_features, first.num_labels):
                raise ProtocolError(
                    f"client {cid} reported {report.num_features}x{report.num_labels} matrices, "
                    f"expected {first.num_features}x{first.num_labels}"
                )
        self.reports[cid] = report

    @property
    def complete(self) -> bool:
        return len(self.reports) == self.num_clients

    def ranking(self, weighted: bool = False) -> FeatureRanking:
        if not self.complete:
            raise ProtocolError(f"only {len(self.reports)} of {self.num_clients} reports present")
        stats = aggregate(list(self.reports.values()), weighted=weighted)
        return rank_features(objectives(stats))


def _local_report(shard: MultiLabelDataset, client_id: int, bins: int) -> ClientReport:
    if shard.num_instances < 1:
        raise ValueError(f"client {client_id} shard is empty")
    return compute_local_report(discretize(shard, bins), client_id)


def _emit(events: EventHook | None, event: str, **extra) -> None:
    if events is not None:
        events({"event": event, **extra})


def run_round(config: RunConfig, shards: list[MultiLabelDataset],
              events: EventHook | None = None) -> FeatureRanking:
    """Execute one full federated round over the given per-client shards.

    Returns the ranking; every client receives the identical ranking. Any
    client failure, duplicate report, dimension mismatch, or timeout aborts
    the round with ProtocolError and no ranking is emitted.
    """
    if len(shards) != config.num_clients:
        raise ValueError(f"expected {config.num_clients} shards, got {len(shards)}")
    for cid, shard in enumerate(shards):
        if shard.num_instances < 1:
            raise ValueError(f"client {cid} shard is empty")

    _emit(events, "round_start", num_clients=config.num_clients, transport=config.transport)
    if config.tcp_address() is None:
        ranking, received = _round_in_process(config, shards, events)
    else:
        ranking, received = _round_tcp(config, shards, events)

    # Barrier contract: every client saw the same ranking the server returned.
    expected = ranking.to_json()
    for cid, got in received.items():
        if got.to_json() != expected:
            raise ProtocolError(f"client {cid} received a different ranking")
    _emit(events, "round_complete")
    return ranking


def _round_in_process(config, shards, events):
    inbox: queue.Queue = queue.Queue()
    replies = {cid: queue.Queue() for cid in range(config.num_clients)}
    received: dict[int, FeatureRanking] = {}
    lock = threading.Lock()

    def client_task(cid: int, shard: MultiLabelDataset):
        try:
            report = _local_report(shard, cid, config.bins)
        except Exception as exc:  # surfaced by the server as an abort
            inbox.put(("error", cid, exc))
            return
        inbox.put(("report", cid, report))
        msg = replies[cid].get(timeout=config.timeout_s + 5.0)
        if msg.kind == "ranking":
            with lock:
                received[cid] = FeatureRanking.from_json(msg.body)

    threads = [
        threading.Thread(target=client_task, args=(cid, shard), daemon=True)
        for cid, shard in enumerate(shards)
    ]
    for t in threads:
        t.start()

    collector = ReportCollector(config.num_clients)
    deadline = time.monotonic() + config.timeout_s
    try:
        while not collector.complete:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ProtocolError(f"timed out waiting for client reports ({config.timeout_s}s)")
            try:
                kind, cid, payload = inbox.get(timeout=remaining)
            except queue.Empty:
                raise ProtocolError(f"timed out waiting for client reports ({config.timeout_s}s)") from None
            if kind == "error":
                raise ProtocolError(f"client {cid} failed: {payload}")
            collector.add(payload)
            _emit(events, "report_received", client_id=cid)
        ranking = collector.ranking(weighted=config.weighted)
    except Exception as exc:
        for q in replies.values():
            q.put(ProtocolMessage(kind="abort", sender=SERVER_ID, body={"reason": str(exc)}))
        _emit(events, "abort", reason=str(exc))
        raise

    _emit(events, "ranking_ready")
    for cid, q in replies.items():
        q.put(ProtocolMessage(kind="ranking", sender=SERVER_ID, body=ranking.to_json()))
        _emit(events, "broadcast", client_id=cid)
    for t in threads:
        t.join()
    return ranking, received


def serve_round(listener: socket.socket, num_clients: int, timeout_s: float = 60.0,
                weighted: bool = False, events: EventHook | None = None) -> FeatureRanking:
    """Collect M reports over TCP, rank, broadcast; abort everyone on failure.

    The listener must already be bound and listening. Connections are held
    open between report and broadcast so every client hears the outcome.
    """
    deadline = time.monotonic() + timeout_s
    collector = ReportCollector(num_clients)
    connections: list[socket.socket] = []
    try:
        try:
            while not collector.complete:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise ProtocolError(f"timed out waiting for client reports ({timeout_s}s)")
                listener.settimeout(remaining)
                try:
                    conn, _ = listener.accept()
                except socket.timeout:
                    raise ProtocolError(f"timed out waiting for client reports ({timeout_s}s)") from None
                connections.append(conn)
                conn.settimeout(max(deadline - time.monotonic(), 0.001))
                try:
                    msg = recv_message(conn)
                except TimeoutError:
                    raise ProtocolError(f"timed out waiting for client reports ({timeout_s}s)") from None
                if msg.kind != "report":
                    raise ProtocolError(f"expected a report, got {msg.kind!r} from {msg.sender}")
                report = ClientReport.from_json(msg.body)
                if report.client_id != msg.sender:
                    raise ProtocolError(
                        f"report client_id {report.client_id} does not match sender {msg.sender}"
                    )
                collector.add(report)
                _emit(events, "report_received", client_id=msg.sender)
            ranking = collector.ranking(weighted=weighted)
        except Exception as exc:
            abort = ProtocolMessage(kind="abort", sender=SERVER_ID, body={"reason": str(exc)})
            for conn in connections:
                try:
                    send_message(conn, abort)
                except OSError:
                    pass
            _emit(events, "abort", reason=str(exc))
            raise

        _emit(events, "ranking_ready")
        reply = ProtocolMessage(kind="ranking", sender=SERVER_ID, body=ranking.to_json())
        for conn in connections:
            send_message(conn, reply)
        _emit(events, "broadcast")
        return ranking
    finally:
        for conn in connections:
            try:
                conn.close()
            except OSError:
                pass


def exchange_report(address: tuple[str, int], report: ClientReport,
                    timeout_s: float = 60.0) -> FeatureRanking:
    """Client side of the TCP round: send one report, wait for the ranking."""
    with socket.create_connection(address, timeout=timeout_s) as sock:
        send_message(sock, ProtocolMessage(kind="report", sender=report.client_id,
                                           body=report.to_json()))
        msg = recv_message(sock)
    if msg.kind == "abort":
        raise ProtocolError(f"round aborted: {msg.body.get('reason', 'unknown')}")
    if msg.kind != "ranking":
        raise ProtocolError(f"expected a ranking, got {msg.kind!r}")
    return FeatureRanking.from_json(msg.body)


def _round_tcp(config, shards, events):
    host, port = config.tcp_address()
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    listener.bind((host, port))
    listener.listen(config.num_clients)
    address = listener.getsockname()[:2]

    outcome: dict = {}
    received: dict[int, FeatureRanking] = {}
    errors: list[Exception] = []
    lock = threading.Lock()

    def server_task():
        try:
            outcome["ranking"] = serve_round(
                listener, config.num_clients, config.timeout_s, config.weighted, events
            )
        except Exception as exc:
            outcome["error"] = exc

    def client_task(cid: int, shard: MultiLabelDataset):
        try:
            report = _local_report(shard, cid, config.bins)
            ranking = exchange_report(address, report, config.timeout_s)
            with lock:
                received[cid] = ranking
        except Exception as exc:
            with lock:
                errors.append(exc)

    server = threading.Thread(target=server_task, daemon=True)
    server.start()
    clients = [
        threading.Thread(target=client_task, args=(cid, shard), daemon=True)
        for cid, shard in enumerate(shards)
    ]
    for t in clients:
        t.start()
    for t in clients:
        t.join()
    server.join()
    listener.close()

    if "error" in outcome:
        raise outcome["error"]
    if errors:
        raise ProtocolError(f"client failure during round: {errors[0]}")
    return outcome["ranking"], received
