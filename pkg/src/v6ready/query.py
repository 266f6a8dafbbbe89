"""Policy-driven DNS query engine.

Behavior per scan policy: UDP first with EDNS, retry over TCP on
truncation, drop EDNS after a FORMERR, at most ``max_retries``
timeout-driven attempts per transport path spaced by ``retry_wait``,
and every outcome (including failures) cached per (server, qname, qtype).
"""

from __future__ import annotations

import random
import socket
import struct
import threading
import time
from dataclasses import dataclass
from typing import Callable, Protocol

from .names import DomainName
from .records import CLASS_IN, RRType, V4, V6
from .wire import (
    DnsMessage,
    Edns,
    Question,
    RCODE_FORMERR,
    WireFormatError,
    decode,
    encode,
)

UDP = "udp"
TCP = "tcp"


class TransportTimeout(Exception):
    pass


class TransportUnreachable(Exception):
    pass


@dataclass(frozen=True, order=True)
class ServerAddress:
    ip: str
    port: int = 53

    @property
    def protocol(self) -> str:
        return V6 if ":" in self.ip else V4

    def __str__(self) -> str:
        return f"[{self.ip}]:{self.port}" if ":" in self.ip else f"{self.ip}:{self.port}"


class Transport(Protocol):
    def exchange(self, server: ServerAddress, transport: str, payload: bytes,
                 timeout: float) -> bytes:
        """Send one DNS payload, return the raw (unframed) reply bytes.

        Raises TransportTimeout when no reply arrives in time and
        TransportUnreachable when the network refuses delivery.
        """
        ...


@dataclass(frozen=True)
class QueryPolicy:
    max_retries: int = 4
    retry_wait: float = 20.0
    udp_timeout: float = 3.0
    tcp_timeout: float = 10.0
    edns_payload: int | None = 1232

    def __post_init__(self):
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")
        if self.retry_wait < 0 or self.udp_timeout < 0 or self.tcp_timeout < 0:
            raise ValueError("waits must be >= 0")


RESPONSE = "response"
TIMEOUT = "timeout"
UNREACHABLE = "unreachable"
MALFORMED = "malformed"


@dataclass(frozen=True)
class QueryOutcome:
    kind: str
    message: DnsMessage | None = None
    transport_used: str | None = None
    edns_used: bool | None = None

    @property
    def ok(self) -> bool:
        return self.kind == RESPONSE


class ResponseCache:
    """Shared outcome cache with in-flight coalescing.

    A key is (server ip, port, qname, qtype, qclass). Failure outcomes are
    stored exactly like successes; there is no eviction within a run.
    """

    def __init__(self):
        self._entries: dict[tuple, tuple[QueryOutcome, float]] = {}
        self._inflight: set[tuple] = set()
        self._cond = threading.Condition()
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._entries)

    def begin(self, key: tuple) -> QueryOutcome | None:
        """Return the cached outcome, or claim ownership (None) if absent.

        Blocks while another caller is already fetching the same key.
        """
        with self._cond:
            while True:
                if key in self._entries:
                    self.hits += 1
                    return self._entries[key][0]
                if key not in self._inflight:
                    self._inflight.add(key)
                    self.misses += 1
                    return None
                self._cond.wait()

    def fulfill(self, key: tuple, outcome: QueryOutcome) -> None:
        with self._cond:
            self._entries[key] = (outcome, time.time())
            self._inflight.discard(key)
            self._cond.notify_all()

    def abort(self, key: tuple) -> None:
        with self._cond:
            self._inflight.discard(key)
            self._cond.notify_all()

    def peek(self, key: tuple) -> QueryOutcome | None:
        with self._cond:
            entry = self._entries.get(key)
            return entry[0] if entry else None


class QueryEngine:
    """Issues queries through a Transport under a QueryPolicy."""

    def __init__(
        self,
        transport: Transport,
        policy: QueryPolicy | None = None,
        cache: ResponseCache | None = None,
        rng: random.Random | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.transport = transport
        self.policy = policy or QueryPolicy()
        self.cache = cache or ResponseCache()
        self.rng = rng or random.Random()
        self._sleep = sleep

    def query(
        self,
        server: ServerAddress,
        qname: DomainName,
        qtype: RRType,
        qclass: int = CLASS_IN,
    ) -> QueryOutcome:
        key = (server.ip, server.port, qname, qtype, qclass)
        cached = self.cache.begin(key)
        if cached is not None:
            return cached
        try:
            outcome = self._run(server, qname, qtype, qclass)
        except BaseException:
            self.cache.abort(key)
            raise
        self.cache.fulfill(key, outcome)
        return outcome

    def _run(self, server, qname, qtype, qclass) -> QueryOutcome:
        transport = UDP
        edns = self.policy.edns_payload is not None
        tried: set[tuple[str, bool]] = set()
        while True:
            tried.add((transport, edns))
            outcome = self._attempt_path(server, qname, qtype, qclass, transport, edns)
            if outcome.kind != RESPONSE:
                return outcome
            msg = outcome.message
            assert msg is not None
            if msg.tc and transport == UDP and (TCP, edns) not in tried:
                transport = TCP
                continue
            if msg.rcode == RCODE_FORMERR and edns and (transport, False) not in tried:
                edns = False
                continue
            return outcome

    def _attempt_path(self, server, qname, qtype, qclass, transport, edns) -> QueryOutcome:
        timeout = self.policy.udp_timeout if transport == UDP else self.policy.tcp_timeout
        for attempt in range(self.policy.max_retries):
            if attempt:
                self._sleep(self.policy.retry_wait)
            msg_id = self.rng.randrange(0x10000)
            query_msg = DnsMessage(
                id=msg_id,
                question=Question(qname, qtype, qclass),
                edns=Edns(self.policy.edns_payload) if edns else None,
            )
            try:
                raw = self.transport.exchange(server, transport, encode(query_msg), timeout)
            except TransportTimeout:
                continue
            except TransportUnreachable:
                return QueryOutcome(UNREACHABLE)
            try:
                msg = decode(raw)
            except WireFormatError:
                return QueryOutcome(MALFORMED)
            if msg.id != msg_id or not msg.qr:
                return QueryOutcome(MALFORMED)
            return QueryOutcome(RESPONSE, msg, transport, edns)
        return QueryOutcome(TIMEOUT)


class UdpTcpTransport:
    """Real-socket transport. A fresh UDP socket per attempt gives each
    exchange a new ephemeral source port."""

    def exchange(self, server: ServerAddress, transport: str, payload: bytes,
                 timeout: float) -> bytes:
        family = socket.AF_INET6 if ":" in server.ip else socket.AF_INET
        try:
            if transport == UDP:
                return self._udp(family, server, payload, timeout)
            return self._tcp(family, server, payload, timeout)
        except socket.timeout as exc:
            raise TransportTimeout(str(exc)) from exc
        except OSError as exc:
            raise TransportUnreachable(str(exc)) from exc

    def _udp(self, family, server, payload, timeout) -> bytes:
        with socket.socket(family, socket.SOCK_DGRAM) as sock:
            sock.settimeout(timeout)
            sock.sendto(payload, (server.ip, server.port))
            data, _addr = sock.recvfrom(65535)
            return data

    def _tcp(self, family, server, payload, timeout) -> bytes:
        with socket.create_connection((server.ip, server.port), timeout=timeout) as sock:
            sock.settimeout(timeout)
            sock.sendall(struct.pack("!H", len(payload)) + payload)
            head = self._read_exact(sock, 2)
            (n,) = struct.unpack("!H", head)
            return self._read_exact(sock, n)

    @staticmethod
    def _read_exact(sock, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            chunk = sock.recv(n - len(buf))
            if not chunk:
                raise TransportUnreachable("connection closed mid-frame")
            buf += chunk
        return bytes(buf)


class RouteTransport:
    """Wraps a transport, rewriting virtual server addresses to real ones.

    Used by the loopback harness: records keep their virtual addresses while
    delivery goes to bound sockets.
    """

    def __init__(self, inner: Transport, route: dict[str, tuple[str, int]]):
        self.inner = inner
        self.route = route

    def exchange(self, server: ServerAddress, transport: str, payload: bytes,
                 timeout: float) -> bytes:
        mapped = self.route.get(server.ip)
        if mapped is None:
            raise TransportUnreachable(f"no route for {server.ip}")
        return self.inner.exchange(
            ServerAddress(mapped[0], mapped[1]), transport, payload, timeout
        )
