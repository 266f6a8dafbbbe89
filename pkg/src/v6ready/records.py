"""Typed resource records and per-zone record sets."""

from __future__ import annotations

import socket
from dataclasses import dataclass, field
from typing import Mapping

from .names import ROOT, DomainName

V4 = "v4"
V6 = "v6"
PROTOCOLS = (V4, V6)

CLASS_IN = 1
CLASS_CH = 3


@dataclass(frozen=True)
class RRType:
    """A 16-bit RR type. Unknown types round-trip through their value."""

    value: int

    NS: "RRType" = None  # type: ignore[assignment]
    A: "RRType" = None  # type: ignore[assignment]
    AAAA: "RRType" = None  # type: ignore[assignment]
    SOA: "RRType" = None  # type: ignore[assignment]
    TXT: "RRType" = None  # type: ignore[assignment]
    MX: "RRType" = None  # type: ignore[assignment]
    CNAME: "RRType" = None  # type: ignore[assignment]
    OPT: "RRType" = None  # type: ignore[assignment]

    def __post_init__(self):
        if not 0 <= self.value <= 0xFFFF:
            raise ValueError(f"rrtype out of 16-bit range: {self.value}")

    def __str__(self) -> str:
        return _TYPE_NAMES.get(self.value, f"TYPE{self.value}")

    @classmethod
    def from_text(cls, text: str) -> "RRType":
        t = text.strip().upper()
        if t in _TYPE_VALUES:
            return cls(_TYPE_VALUES[t])
        if t.startswith("TYPE") and t[4:].isdigit():
            return cls(int(t[4:]))
        raise ValueError(f"unknown rrtype {text!r}")


_TYPE_VALUES = {
    "A": 1, "NS": 2, "CNAME": 5, "SOA": 6, "MX": 15, "TXT": 16,
    "AAAA": 28, "OPT": 41,
}
_TYPE_NAMES = {v: k for k, v in _TYPE_VALUES.items()}

RRType.A = RRType(1)
RRType.NS = RRType(2)
RRType.CNAME = RRType(5)
RRType.SOA = RRType(6)
RRType.MX = RRType(15)
RRType.TXT = RRType(16)
RRType.AAAA = RRType(28)
RRType.OPT = RRType(41)


@dataclass(frozen=True)
class SoaData:
    mname: DomainName
    rname: DomainName
    serial: int
    refresh: int = 3600
    retry: int = 600
    expire: int = 86400
    minimum: int = 300


@dataclass(frozen=True)
class MxData:
    preference: int
    exchange: DomainName


def pack_address(text: str) -> bytes:
    """Presentation address to packed bytes; 4 for IPv4, 16 for IPv6."""
    if ":" in text:
        return socket.inet_pton(socket.AF_INET6, text)
    return socket.inet_pton(socket.AF_INET, text)


def unpack_address(raw: bytes) -> str:
    if len(raw) == 4:
        return socket.inet_ntop(socket.AF_INET, raw)
    if len(raw) == 16:
        return socket.inet_ntop(socket.AF_INET6, raw)
    raise ValueError(f"address payload must be 4 or 16 bytes, got {len(raw)}")


def address_protocol(text: str) -> str:
    return V6 if ":" in text else V4


def canonical_address(text: str) -> str:
    """The presentation form a wire round-trip would produce."""
    return unpack_address(pack_address(text))


@dataclass(frozen=True)
class ResourceRecord:
    """One typed RR with the bailiwick it was observed under.

    ``bailiwick`` is the zone the responding server answered for; records
    whose owner is not at or below it are kept but flagged out-of-zone and
    never trusted for resolution.
    """

    owner: DomainName
    rrtype: RRType
    ttl: int
    data: object
    bailiwick: DomainName | None = None

    def __post_init__(self):
        if self.rrtype == RRType.A:
            if not (isinstance(self.data, bytes) and len(self.data) == 4):
                raise ValueError("A payload must be exactly 4 bytes")
        elif self.rrtype == RRType.AAAA:
            if not (isinstance(self.data, bytes) and len(self.data) == 16):
                raise ValueError("AAAA payload must be exactly 16 bytes")

    @property
    def in_bailiwick(self) -> bool:
        """False when observed under a bailiwick that does not cover owner."""
        if self.bailiwick is None:
            return False
        return self.owner.is_within(self.bailiwick)

    @property
    def address(self) -> str:
        if self.rrtype not in (RRType.A, RRType.AAAA):
            raise ValueError("address only defined for A/AAAA records")
        return unpack_address(self.data)  # type: ignore[arg-type]

    @property
    def target(self) -> DomainName:
        if self.rrtype not in (RRType.NS, RRType.CNAME):
            raise ValueError("target only defined for NS/CNAME records")
        return self.data  # type: ignore[return-value]

    def with_bailiwick(self, zone: DomainName) -> "ResourceRecord":
        return ResourceRecord(self.owner, self.rrtype, self.ttl, self.data, zone)


@dataclass(frozen=True)
class AddrRecords:
    """Addresses seen for one (ns name, bailiwick) pair, split by protocol."""

    v4: frozenset[str] = frozenset()
    v6: frozenset[str] = frozenset()

    def for_protocol(self, proto: str) -> frozenset[str]:
        return self.v4 if proto == V4 else self.v6

    def merged(self, other: "AddrRecords") -> "AddrRecords":
        return AddrRecords(self.v4 | other.v4, self.v6 | other.v6)

    @property
    def empty(self) -> bool:
        return not self.v4 and not self.v6


_NO_ADDRS = AddrRecords()


@dataclass(frozen=True)
class ZoneRecordSet:
    """Everything observed about one zone's delegation.

    NS sets are keyed by the bailiwick of the response that carried them,
    so a parent/child disagreement survives as two distinct entries.
    Address records are keyed by (ns name, bailiwick) the same way.
    """

    zone: DomainName
    ns_by_bailiwick: Mapping[DomainName, frozenset[DomainName]] = field(default_factory=dict)
    addr_by_bailiwick: Mapping[tuple[DomainName, DomainName], AddrRecords] = field(default_factory=dict)
    orphans: frozenset[DomainName] = frozenset()

    def delegating_zone(self) -> DomainName | None:
        """Deepest proper-ancestor bailiwick that served NS for this zone."""
        parents = [b for b in self.ns_by_bailiwick
                   if b != self.zone and self.zone.is_within(b)]
        if not parents:
            return None
        return max(parents, key=lambda b: len(b.labels))

    def ns_parent_view(self) -> frozenset[DomainName]:
        """Union of NS targets observed under proper-ancestor bailiwicks."""
        out: set[DomainName] = set()
        for bw, targets in self.ns_by_bailiwick.items():
            if bw != self.zone and self.zone.is_within(bw):
                out |= targets
        return frozenset(out)

    def ns_child_view(self) -> frozenset[DomainName] | None:
        """NS targets the zone claims for itself, or None if never seen."""
        return self.ns_by_bailiwick.get(self.zone)

    def all_ns(self) -> frozenset[DomainName]:
        out: set[DomainName] = set()
        for targets in self.ns_by_bailiwick.values():
            out |= targets
        return frozenset(out)

    def glue_addrs(self, ns: DomainName, proto: str) -> frozenset[str]:
        """Addresses for ``ns`` observed under any proper ancestor of the zone."""
        out: set[str] = set()
        for (name, bw), addrs in self.addr_by_bailiwick.items():
            if name == ns and bw != self.zone and self.zone.is_within(bw):
                out |= addrs.for_protocol(proto)
        return frozenset(out)

    def apex_addrs(self, ns: DomainName, proto: str) -> frozenset[str]:
        """Addresses for ``ns`` observed under the zone's own bailiwick."""
        return self.addr_by_bailiwick.get((ns, self.zone), _NO_ADDRS).for_protocol(proto)

    def addrs_with_bailiwick(self, ns: DomainName, bw: DomainName, proto: str) -> frozenset[str]:
        return self.addr_by_bailiwick.get((ns, bw), _NO_ADDRS).for_protocol(proto)

    def any_addrs(self, ns: DomainName, proto: str) -> frozenset[str]:
        out: set[str] = set()
        for (name, _bw), addrs in self.addr_by_bailiwick.items():
            if name == ns:
                out |= addrs.for_protocol(proto)
        return frozenset(out)


ROOT_ZONE = ROOT
