"""In-process simulated DNS universe with scriptable fault injection.

Fixture zones form a tree rooted at ".". Each NS name owns virtual
addresses; the authoritative records for a name live in the deepest
fixture zone containing it. Servers answer like RFC-conformant
authoritatives unless a defect says otherwise.

Defect meanings (attached to the zone they break):
  drop-aaaa-glue     the parent omits AAAA glue when delegating this zone
  drop-aaaa-apex     this zone's servers serve no AAAA for in-zone names
  truncate-udp       this zone's servers truncate every UDP reply
  formerr-on-edns    this zone's servers return FORMERR to EDNS queries
  blackhole-v6       this zone's servers never answer on IPv6 addresses
  blackhole-all      this zone's servers never answer at all
  wrong-ns-set-child this zone's apex NS set adds a server the parent
                     delegation does not list
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Mapping

from .names import ROOT, DomainName, normalize
from .passive import PassiveTuple
from .query import (
    ServerAddress,
    TransportTimeout,
    TransportUnreachable,
    UDP,
)
from .records import (
    AddrRecords,
    CLASS_CH,
    MxData,
    ResourceRecord,
    RRType,
    SoaData,
    V4,
    V6,
)
from .wire import (
    DnsMessage,
    RCODE_FORMERR,
    RCODE_NXDOMAIN,
    RCODE_REFUSED,
    decode,
    encode,
)

DROP_AAAA_GLUE = "drop-aaaa-glue"
DROP_AAAA_APEX = "drop-aaaa-apex"
TRUNCATE_UDP = "truncate-udp"
FORMERR_ON_EDNS = "formerr-on-edns"
BLACKHOLE_V6 = "blackhole-v6"
BLACKHOLE_ALL = "blackhole-all"
WRONG_NS_SET_CHILD = "wrong-ns-set-child"

ALL_DEFECTS = frozenset({
    DROP_AAAA_GLUE, DROP_AAAA_APEX, TRUNCATE_UDP, FORMERR_ON_EDNS,
    BLACKHOLE_V6, BLACKHOLE_ALL, WRONG_NS_SET_CHILD,
})


class OrphanZone(ValueError):
    pass


class AddressCollision(ValueError):
    pass


@dataclass(frozen=True)
class FixtureNs:
    """One nameserver host: its name and the addresses it listens on.

    Addresses are stored in canonical presentation form so they compare
    equal to what a wire round-trip produces.
    """

    name: DomainName
    v4: tuple[str, ...] = ()
    v6: tuple[str, ...] = ()

    def __post_init__(self):
        from .records import canonical_address

        object.__setattr__(self, "v4", tuple(canonical_address(a) for a in self.v4))
        object.__setattr__(self, "v6", tuple(canonical_address(a) for a in self.v6))

    def addrs(self, proto: str) -> tuple[str, ...]:
        return self.v4 if proto == V4 else self.v6


@dataclass(frozen=True)
class FixtureZone:
    """One zone of the simulated tree.

    ``ns`` entries carry addresses only when the name is inside this zone;
    out-of-bailiwick NS addresses belong to their host zone (declare them
    there, via ``ns`` or ``hosted``). ``glue_in_parent`` optionally narrows
    which addresses the parent serves as glue, per NS name.
    """

    zone: DomainName
    ns: tuple[FixtureNs, ...] = ()
    hosted: tuple[FixtureNs, ...] = ()
    glue_in_parent: Mapping[DomainName, AddrRecords] | None = None
    defects: frozenset[str] = frozenset()
    version: str | None = None
    soa_serials: Mapping[DomainName, int] | None = None
    txt: tuple[bytes, ...] = ()
    mx: tuple[tuple[int, DomainName], ...] = ()
    cnames: tuple[tuple[DomainName, DomainName], ...] = ()

    def __post_init__(self):
        unknown = self.defects - ALL_DEFECTS
        if unknown:
            raise ValueError(f"unknown defects: {sorted(unknown)}")


def zone_fixture(zone: str, ns: Iterable[tuple[str, Iterable[str], Iterable[str]]],
                 **kwargs) -> FixtureZone:
    """Terse constructor: ns entries are (name, v4 addrs, v6 addrs)."""
    entries = tuple(
        FixtureNs(normalize(name), tuple(v4), tuple(v6)) for name, v4, v6 in ns
    )
    if "hosted" in kwargs:
        kwargs["hosted"] = tuple(
            FixtureNs(normalize(name), tuple(v4), tuple(v6))
            for name, v4, v6 in kwargs["hosted"]
        )
    if "defects" in kwargs:
        kwargs["defects"] = frozenset(kwargs["defects"])
    return FixtureZone(zone=normalize(zone), ns=entries, **kwargs)


DEFAULT_ROOT = zone_fixture(
    ".",
    [("a.root-servers.test", ["10.255.0.1"], ["fd00:ffff::1"]),
     ("b.root-servers.test", ["10.255.0.2"], ["fd00:ffff::2"])],
)
# The default root's NS live under a pseudo-TLD that is never delegated;
# they are reached through hints only, like the real priming set.


@dataclass(frozen=True)
class LogEntry:
    timestamp: int
    direction: str  # "query" | "response"
    address: str
    protocol: str
    transport: str
    message: DnsMessage


class PacketLog:
    def __init__(self):
        self.entries: list[LogEntry] = []

    def append(self, entry: LogEntry) -> None:
        self.entries.append(entry)

    def queries(self, protocol: str | None = None) -> list[LogEntry]:
        return [e for e in self.entries
                if e.direction == "query"
                and (protocol is None or e.protocol == protocol)]

    def exchange_keys(self) -> list[tuple[str, str, str]]:
        """(server address, qname, qtype) per query, in order."""
        out = []
        for e in self.queries():
            q = e.message.question
            if q:
                out.append((e.address, str(q.qname), str(q.qtype)))
        return out


_CHILD_ONLY_LABEL = b"ns-child-only"
_VERSION_BIND = normalize("version.bind")


class Universe:
    """A deterministic virtual network implementing the Transport protocol."""

    def __init__(self, fixtures: dict[DomainName, FixtureZone], seed: int = 0,
                 latency: Mapping[str, int] | None = None,
                 loss: Mapping[str, float] | None = None):
        self.fixtures = fixtures
        self.log = PacketLog()
        self.clock = 0
        self.latency = dict(latency or {})
        self.loss = dict(loss or {})
        self._rng = random.Random(seed)
        self._index()

    # -- construction -------------------------------------------------------

    def _index(self) -> None:
        if ROOT not in self.fixtures:
            raise OrphanZone("no root fixture")
        self.parent: dict[DomainName, DomainName] = {}
        for zone in self.fixtures:
            if zone == ROOT:
                continue
            best = ROOT
            for other in self.fixtures:
                if other != zone and zone.is_within(other) and len(other) > len(best):
                    best = other
            self.parent[zone] = best
        self.children: dict[DomainName, list[DomainName]] = {z: [] for z in self.fixtures}
        for zone, par in self.parent.items():
            self.children[par].append(zone)
        for kids in self.children.values():
            kids.sort()

        # Synthetic child-only servers use reserved ranges (10.254.0.0/16 and
        # fd00:fffe::/32); fixtures must not allocate addresses there.
        self.extra_child_ns: dict[DomainName, FixtureNs] = {}
        serial = 0
        for zone in sorted(self.fixtures):
            fz = self.fixtures[zone]
            if WRONG_NS_SET_CHILD in fz.defects:
                serial += 1
                name = DomainName((_CHILD_ONLY_LABEL,) + zone.labels)
                self.extra_child_ns[zone] = FixtureNs(
                    name,
                    (f"10.254.{serial // 256}.{serial % 256}",),
                    (f"fd00:fffe::{serial:x}",),
                )

        # Authoritative home of every host name, plus the address registry.
        self.host_of: dict[DomainName, FixtureNs] = {}
        self.owner_zone: dict[DomainName, DomainName] = {}
        self.address_name: dict[str, DomainName] = {}
        for zone, fz in self.fixtures.items():
            hosts = [e for e in fz.ns if e.name.is_within(zone)] + list(fz.hosted)
            if zone in self.extra_child_ns:
                hosts.append(self.extra_child_ns[zone])
            for entry in hosts:
                if not entry.name.is_within(zone):
                    raise OrphanZone(
                        f"host {entry.name} declared in {zone} but not within it")
                known = self.host_of.get(entry.name)
                if known is not None and known != entry:
                    raise AddressCollision(f"conflicting declarations for {entry.name}")
                self.host_of[entry.name] = entry
                self.owner_zone[entry.name] = zone
                for addr in entry.v4 + entry.v6:
                    claimed = self.address_name.get(addr)
                    if claimed is not None and claimed != entry.name:
                        raise AddressCollision(
                            f"{addr} claimed by {claimed} and {entry.name}")
                    self.address_name[addr] = entry.name
        for zone, fz in self.fixtures.items():
            for entry in fz.ns:
                if not entry.name.is_within(zone) and (entry.v4 or entry.v6):
                    raise AddressCollision(
                        f"out-of-bailiwick NS {entry.name} of {zone} must not "
                        f"declare addresses; declare them in its host zone")

        # zones each host name serves (delegation view plus child extras)
        self.serves: dict[DomainName, set[DomainName]] = {}
        for zone, fz in self.fixtures.items():
            for entry in fz.ns:
                self.serves.setdefault(entry.name, set()).add(zone)
            if zone in self.extra_child_ns:
                self.serves.setdefault(self.extra_child_ns[zone].name, set()).add(zone)

    # -- views used by both the answer path and the exports ------------------

    def delegation_ns(self, zone: DomainName) -> list[DomainName]:
        return sorted(e.name for e in self.fixtures[zone].ns)

    def apex_ns(self, zone: DomainName) -> list[DomainName]:
        names = [e.name for e in self.fixtures[zone].ns]
        extra = self.extra_child_ns.get(zone)
        if extra:
            names.append(extra.name)
        return sorted(names)

    def glue_addrs(self, zone: DomainName, ns: DomainName, proto: str) -> tuple[str, ...]:
        """Glue the parent serves when delegating ``zone``, for one NS name."""
        fz = self.fixtures[zone]
        if not ns.is_within(zone):
            return ()
        if proto == V6 and DROP_AAAA_GLUE in fz.defects:
            return ()
        if fz.glue_in_parent is not None:
            subset = fz.glue_in_parent.get(ns)
            if subset is None:
                return ()
            from .records import canonical_address

            return tuple(sorted(canonical_address(a)
                                for a in subset.for_protocol(proto)))
        host = self.host_of.get(ns)
        return tuple(sorted(host.addrs(proto))) if host else ()

    def apex_addrs(self, ns: DomainName, proto: str) -> tuple[str, ...]:
        """Address records the owner zone serves for ``ns`` at its apex."""
        host = self.host_of.get(ns)
        if host is None:
            return ()
        owner = self.owner_zone[ns]
        if proto == V6 and DROP_AAAA_APEX in self.fixtures[owner].defects:
            return ()
        return tuple(sorted(host.addrs(proto)))

    def listen_addrs(self, ns: DomainName, proto: str) -> tuple[str, ...]:
        host = self.host_of.get(ns)
        return tuple(sorted(host.addrs(proto))) if host else ()

    def root_hints(self) -> list[tuple[DomainName, str, str]]:
        hints = []
        for entry in self.fixtures[ROOT].ns:
            for addr in entry.v4:
                hints.append((entry.name, V4, addr))
            for addr in entry.v6:
                hints.append((entry.name, V6, addr))
        return hints

    # -- transport ----------------------------------------------------------

    def exchange(self, server: ServerAddress, transport: str, payload: bytes,
                 timeout: float) -> bytes:
        proto = server.protocol
        msg = decode(payload)
        self.clock += 1 + self.latency.get(server.ip, 0)
        self.log.append(LogEntry(self.clock, "query", server.ip, proto, transport, msg))
        name = self.address_name.get(server.ip)
        if name is None:
            raise TransportUnreachable(f"no server at {server.ip}")
        if self.loss.get(server.ip) and self._rng.random() < self.loss[server.ip]:
            raise TransportTimeout("packet lost")
        reply = self._answer(name, server.ip, msg, transport)
        if reply is None:
            raise TransportTimeout(f"{server.ip} does not respond")
        self.clock += 1
        self.log.append(LogEntry(self.clock, "response", server.ip, proto, transport, reply))
        return encode(reply)

    # -- server behavior ----------------------------------------------------

    def _answer(self, name: DomainName, address: str, msg: DnsMessage,
                transport: str) -> DnsMessage | None:
        owner = self.owner_zone[name]
        defects = self.fixtures[owner].defects
        if BLACKHOLE_ALL in defects:
            return None
        if BLACKHOLE_V6 in defects and ":" in address:
            return None
        q = msg.question
        if q is None:
            return msg.reply_skeleton(rcode=RCODE_FORMERR)
        if q.qclass == CLASS_CH:
            if q.qtype == RRType.TXT and q.qname == _VERSION_BIND:
                version = self.fixtures[owner].version
                if version:
                    rr = ResourceRecord(q.qname, RRType.TXT, 0, (version.encode(),))
                    return msg.reply_skeleton(aa=True, answer=(rr,))
            return msg.reply_skeleton(rcode=RCODE_REFUSED)

        zone = self._deepest_served(name, q.qname)
        if zone is None:
            return msg.reply_skeleton(rcode=RCODE_REFUSED)
        zdefects = self.fixtures[zone].defects
        if FORMERR_ON_EDNS in zdefects and msg.edns is not None:
            return msg.reply_skeleton(rcode=RCODE_FORMERR)
        if TRUNCATE_UDP in zdefects and transport == UDP:
            return msg.reply_skeleton(tc=True)

        delegated = self._delegation_for(zone, q.qname, name)
        if delegated is not None:
            return self._referral(msg, delegated)
        return self._apex_answer(msg, zone, name)

    def _deepest_served(self, name: DomainName, qname: DomainName) -> DomainName | None:
        best = None
        for zone in self.serves.get(name, ()):
            if qname.is_within(zone) and (best is None or len(zone) > len(best)):
                best = zone
        return best

    def _delegation_for(self, zone: DomainName, qname: DomainName,
                        server: DomainName) -> DomainName | None:
        for child in self.children.get(zone, ()):
            if qname.is_within(child):
                if child in self.serves.get(server, ()):
                    continue  # also authoritative for the child: answer directly
                return child
        return None

    def _referral(self, msg: DnsMessage, child: DomainName) -> DnsMessage:
        authority = tuple(
            ResourceRecord(child, RRType.NS, 3600, target)
            for target in self.delegation_ns(child)
        )
        additional = []
        for target in self.delegation_ns(child):
            for proto, rrtype in ((V4, RRType.A), (V6, RRType.AAAA)):
                for addr in self.glue_addrs(child, target, proto):
                    additional.append(ResourceRecord(
                        target, rrtype, 3600, _pack(addr)))
        return msg.reply_skeleton(authority=authority, additional=tuple(additional))

    def _apex_answer(self, msg: DnsMessage, zone: DomainName,
                     server: DomainName) -> DnsMessage:
        q = msg.question
        assert q is not None
        fz = self.fixtures[zone]
        if q.qname == zone:
            if q.qtype == RRType.NS:
                answer = tuple(
                    ResourceRecord(zone, RRType.NS, 3600, t)
                    for t in self.apex_ns(zone)
                )
                additional = []
                for t in self.apex_ns(zone):
                    if not t.is_within(zone):
                        continue
                    for proto, rrtype in ((V4, RRType.A), (V6, RRType.AAAA)):
                        for addr in self.apex_addrs(t, proto):
                            additional.append(ResourceRecord(t, rrtype, 3600, _pack(addr)))
                return msg.reply_skeleton(aa=True, answer=answer,
                                          additional=tuple(additional))
            if q.qtype == RRType.SOA:
                serial = 1
                if fz.soa_serials:
                    serial = fz.soa_serials.get(server, 1)
                primary = self.apex_ns(zone)
                soa = SoaData(
                    mname=primary[0] if primary else zone,
                    rname=DomainName((b"hostmaster",) + zone.labels),
                    serial=serial,
                )
                rr = ResourceRecord(zone, RRType.SOA, 3600, soa)
                return msg.reply_skeleton(aa=True, answer=(rr,))
            if q.qtype == RRType.TXT:
                if fz.txt:
                    rr = ResourceRecord(zone, RRType.TXT, 3600, fz.txt)
                    return msg.reply_skeleton(aa=True, answer=(rr,))
                return msg.reply_skeleton(aa=True)
            if q.qtype == RRType.MX:
                answer = tuple(
                    ResourceRecord(zone, RRType.MX, 3600, MxData(pref, host))
                    for pref, host in fz.mx
                )
                return msg.reply_skeleton(aa=True, answer=answer)
            if (q.qtype in (RRType.A, RRType.AAAA)
                    and self.owner_zone.get(zone) == zone):
                # the apex name doubles as a nameserver host
                proto = V4 if q.qtype == RRType.A else V6
                answer = tuple(
                    ResourceRecord(zone, q.qtype, 3600, _pack(a))
                    for a in self.apex_addrs(zone, proto)
                )
                return msg.reply_skeleton(aa=True, answer=answer)
            return msg.reply_skeleton(aa=True)
        for owner, target in fz.cnames:
            if q.qname == owner:
                rr = ResourceRecord(owner, RRType.CNAME, 3600, target)
                return msg.reply_skeleton(aa=True, answer=(rr,))
        if q.qname in self.host_of and self.owner_zone[q.qname] == zone:
            if q.qtype in (RRType.A, RRType.AAAA):
                proto = V4 if q.qtype == RRType.A else V6
                answer = tuple(
                    ResourceRecord(q.qname, q.qtype, 3600, _pack(a))
                    for a in self.apex_addrs(q.qname, proto)
                )
                return msg.reply_skeleton(aa=True, answer=answer)
            return msg.reply_skeleton(aa=True)
        if self._has_names_below(q.qname):
            return msg.reply_skeleton(aa=True)
        return msg.reply_skeleton(aa=True, rcode=RCODE_NXDOMAIN)

    def _has_names_below(self, qname: DomainName) -> bool:
        return any(z.is_within(qname) for z in self.fixtures) or any(
            n.is_within(qname) for n in self.host_of
        )

    # -- exports -------------------------------------------------------------

    def export_tuples(self) -> list[PassiveTuple]:
        """Aggregate the response history into passive observations.

        Identical exchanges collapse into one tuple with a higher count,
        mirroring cache-miss aggregation.
        """
        acc: dict[tuple, dict] = {}
        for entry in self.log.entries:
            if entry.direction != "response":
                continue
            name = self.address_name.get(entry.address)
            q = entry.message.question
            if name is None or q is None:
                continue
            bailiwick = self._deepest_served(name, q.qname)
            if bailiwick is None:
                continue
            rrsets: dict[tuple[DomainName, RRType], list[str]] = {}
            for rr in (entry.message.answer + entry.message.authority
                       + entry.message.additional):
                value = _rr_text(rr)
                if value is None:
                    continue
                rrsets.setdefault((rr.owner, rr.rrtype), []).append(value)
            for (owner, rrtype), values in rrsets.items():
                key = (owner, rrtype.value, bailiwick, tuple(sorted(set(values))))
                slot = acc.setdefault(key, {
                    "count": 0, "first": entry.timestamp, "last": entry.timestamp})
                slot["count"] += 1
                slot["first"] = min(slot["first"], entry.timestamp)
                slot["last"] = max(slot["last"], entry.timestamp)
        out = []
        for (owner, tval, bailiwick, values), slot in sorted(
                acc.items(), key=lambda kv: (str(kv[0][0]), kv[0][1], str(kv[0][2]))):
            out.append(PassiveTuple(
                count=slot["count"],
                time_first=slot["first"],
                time_last=slot["last"],
                rrname=owner,
                rrtype=RRType(tval),
                bailiwick=bailiwick,
                rdata=values,
            ))
        return out


def _pack(addr: str) -> bytes:
    from .records import pack_address

    return pack_address(addr)


def _rr_text(rr: ResourceRecord) -> str | None:
    if rr.rrtype == RRType.NS:
        return str(rr.target)
    if rr.rrtype in (RRType.A, RRType.AAAA):
        return rr.address
    return None


def build_universe(fixtures: Iterable[FixtureZone] | dict[DomainName, FixtureZone],
                   seed: int = 0, **kwargs) -> Universe:
    """Index fixtures into a queryable universe.

    An empty fixture list yields a root-only universe; a non-empty list
    must include the root.
    """
    if isinstance(fixtures, dict):
        fmap = dict(fixtures)
    else:
        fmap = {fz.zone: fz for fz in fixtures}
    if not fmap:
        fmap = {ROOT: DEFAULT_ROOT}
    return Universe(fmap, seed=seed, **kwargs)


# -- static record-level export ---------------------------------------------


def fixture_tuples(universe: Universe, base_time: int = 1_600_000_000) -> list[PassiveTuple]:
    """The complete record-level view of a universe as passive tuples.

    This is what a sensor with full visibility would have collected: both
    NS views per zone, glue under the parent bailiwick, and every host's
    apex addresses under its owner zone, with record defects applied.
    """
    out: list[PassiveTuple] = []

    def emit(rrname, rrtype, bailiwick, values):
        values = tuple(sorted(values))
        if values:
            out.append(PassiveTuple(1, base_time, base_time, rrname, rrtype,
                                    bailiwick, values))

    for zone in sorted(universe.fixtures):
        if zone != ROOT:
            parent = universe.parent[zone]
            emit(zone, RRType.NS, parent,
                 [str(n) for n in universe.delegation_ns(zone)])
            for ns in universe.delegation_ns(zone):
                if not ns.is_within(zone):
                    continue
                emit(ns, RRType.A, parent, universe.glue_addrs(zone, ns, V4))
                emit(ns, RRType.AAAA, parent, universe.glue_addrs(zone, ns, V6))
        emit(zone, RRType.NS, zone, [str(n) for n in universe.apex_ns(zone)])
    for name, owner in sorted(universe.owner_zone.items()):
        emit(name, RRType.A, owner, universe.apex_addrs(name, V4))
        emit(name, RRType.AAAA, owner, universe.apex_addrs(name, V6))
    return out


# -- brute-force ground truth -------------------------------------------------


def ground_truth(universe: Universe) -> dict[DomainName, dict[str, bool]]:
    """Per-zone resolvability by exhaustive path enumeration.

    Independent of the fixed-point code: recursive descent over fixture
    data. A dependency loop is cut on the current path (it cannot prove
    resolution by itself); a True found despite a cut is sound and cached,
    while a False reached through a cut is path-dependent and is not.
    """
    memo: dict[tuple[DomainName, str], bool] = {}

    def server_responds(ns: DomainName, proto: str) -> bool:
        owner = universe.owner_zone.get(ns)
        if owner is None:
            return False
        defects = universe.fixtures[owner].defects
        if BLACKHOLE_ALL in defects:
            return False
        if BLACKHOLE_V6 in defects and proto == V6:
            return False
        return True

    def resolvable(zone: DomainName, proto: str,
                   path: frozenset[DomainName]) -> tuple[bool, bool]:
        """(result, tainted): tainted means a cycle cut may have hidden a path."""
        key = (zone, proto)
        if key in memo:
            return memo[key], False
        if zone in path:
            return False, True
        if zone == ROOT:
            ok = any(
                universe.listen_addrs(e.name, proto) and server_responds(e.name, proto)
                for e in universe.fixtures[ROOT].ns
            )
            memo[key] = ok
            return ok, False
        path = path | {zone}
        tainted = False

        def via_own_zone(ns: DomainName) -> bool:
            nonlocal tainted
            owner = universe.owner_zone.get(ns)
            if owner is None:
                return False
            ok, t = resolvable(owner, proto, path)
            tainted = tainted or t
            if not ok:
                return False
            return bool(universe.apex_addrs(ns, proto)) and server_responds(ns, proto)

        parent_ok, t = resolvable(universe.parent[zone], proto, path)
        tainted = tainted or t
        if not parent_ok:
            result = False
        else:
            glue_ok = False
            for ns in universe.delegation_ns(zone):
                if ns.is_within(zone):
                    if universe.glue_addrs(zone, ns, proto) and server_responds(ns, proto):
                        glue_ok = True
                        break
                elif via_own_zone(ns):
                    glue_ok = True
                    break
            zone_ok = False
            for ns in universe.apex_ns(zone):
                if ns.is_within(zone):
                    if universe.apex_addrs(ns, proto) and server_responds(ns, proto):
                        zone_ok = True
                        break
                elif via_own_zone(ns):
                    zone_ok = True
                    break
            result = glue_ok and zone_ok
        if result or not tainted:
            memo[key] = result
        return result, tainted and not result

    truth = {}
    for zone in sorted(universe.fixtures):
        if zone == ROOT:
            continue
        truth[zone] = {
            p: resolvable(zone, p, frozenset())[0] for p in (V4, V6)
        }
    return truth


# -- random universes ----------------------------------------------------------


DEFAULT_DEFECT_RATES = {
    "ns-no-v6": 0.2,
    "ns-no-v4": 0.04,
    "oob-ns": 0.3,
    DROP_AAAA_GLUE: 0.12,
    DROP_AAAA_APEX: 0.12,
    WRONG_NS_SET_CHILD: 0.1,
    TRUNCATE_UDP: 0.05,
    FORMERR_ON_EDNS: 0.05,
}


def dump_fixtures(out, fixtures: Iterable[FixtureZone]) -> None:
    """One JSON document per zone, after a format header line."""
    import json

    out.write(json.dumps({"format": "mocknet-fixtures", "version": 1}) + "\n")
    for fz in sorted(fixtures, key=lambda f: f.zone):
        doc = {
            "zone": str(fz.zone),
            "ns": [{"name": str(e.name), "v4": list(e.v4), "v6": list(e.v6)}
                   for e in fz.ns],
            "hosted": [{"name": str(e.name), "v4": list(e.v4), "v6": list(e.v6)}
                       for e in fz.hosted],
            "defects": sorted(fz.defects),
        }
        if fz.glue_in_parent is not None:
            doc["glue_in_parent"] = {
                str(ns): {"v4": sorted(a.v4), "v6": sorted(a.v6)}
                for ns, a in sorted(fz.glue_in_parent.items(),
                                    key=lambda kv: str(kv[0]))
            }
        if fz.version is not None:
            doc["version"] = fz.version
        if fz.soa_serials:
            doc["soa_serials"] = {str(n): s for n, s in sorted(
                fz.soa_serials.items(), key=lambda kv: str(kv[0]))}
        if fz.txt:
            doc["txt"] = [t.decode("utf-8", "replace") for t in fz.txt]
        if fz.mx:
            doc["mx"] = [[pref, str(host)] for pref, host in fz.mx]
        if fz.cnames:
            doc["cnames"] = [[str(a), str(b)] for a, b in fz.cnames]
        out.write(json.dumps(doc, sort_keys=True) + "\n")


def load_fixtures(path) -> list[FixtureZone]:
    """Read a fixture file produced by dump_fixtures (or written by hand)."""
    import json
    from pathlib import Path

    fixtures = []
    lines = [l for l in Path(path).read_text(encoding="utf-8").splitlines()
             if l.strip()]
    if not lines:
        return []
    header = json.loads(lines[0])
    if header.get("format") != "mocknet-fixtures":
        raise ValueError(f"not a fixture file: {path}")
    for line in lines[1:]:
        doc = json.loads(line)

        def entries(key):
            return tuple(
                FixtureNs(normalize(e["name"]), tuple(e.get("v4", ())),
                          tuple(e.get("v6", ())))
                for e in doc.get(key, ())
            )

        glue = None
        if "glue_in_parent" in doc:
            glue = {
                normalize(ns): AddrRecords(frozenset(a.get("v4", ())),
                                           frozenset(a.get("v6", ())))
                for ns, a in doc["glue_in_parent"].items()
            }
        fixtures.append(FixtureZone(
            zone=normalize(doc["zone"]),
            ns=entries("ns"),
            hosted=entries("hosted"),
            glue_in_parent=glue,
            defects=frozenset(doc.get("defects", ())),
            version=doc.get("version"),
            soa_serials={normalize(n): s
                         for n, s in doc.get("soa_serials", {}).items()} or None,
            txt=tuple(t.encode() for t in doc.get("txt", ())),
            mx=tuple((pref, normalize(host)) for pref, host in doc.get("mx", ())),
            cnames=tuple((normalize(a), normalize(b))
                         for a, b in doc.get("cnames", ())),
        ))
    return fixtures


class LoopbackServer:
    """Serves a universe on real loopback sockets for end-to-end runs.

    One UDP+TCP listener per address family; every A in a response is
    rewritten to 127.0.0.1 and every AAAA to ::1, so a real client keeps
    talking to the listener while record presence is preserved. Queries
    are answered by the deepest fixture zone covering the qname, the way a
    server authoritative for a whole subtree answers: parent and child
    views merge, so parent-side defects (withheld glue) are not observable
    here. Record-absence defects survive. Full-fidelity testing uses the
    in-process virtual transport instead.
    """

    def __init__(self, universe: Universe, port: int = 0, enable_v6: bool = True):
        import socket as _socket

        self.universe = universe
        self._threads = []
        self._running = False
        self.udp6 = self.tcp6 = None
        # One port must be free across both families; with an ephemeral
        # request, retry if the v4-chosen port is taken on ::1.
        last_error = None
        for _attempt in range(16):
            socks = []
            try:
                udp4 = _socket.socket(_socket.AF_INET, _socket.SOCK_DGRAM)
                socks.append(udp4)
                udp4.bind(("127.0.0.1", port))
                chosen = udp4.getsockname()[1]
                tcp4 = _socket.socket(_socket.AF_INET, _socket.SOCK_STREAM)
                socks.append(tcp4)
                tcp4.setsockopt(_socket.SOL_SOCKET, _socket.SO_REUSEADDR, 1)
                tcp4.bind(("127.0.0.1", chosen))
                tcp4.listen(16)
                if enable_v6:
                    udp6 = _socket.socket(_socket.AF_INET6, _socket.SOCK_DGRAM)
                    socks.append(udp6)
                    udp6.bind(("::1", chosen))
                    tcp6 = _socket.socket(_socket.AF_INET6, _socket.SOCK_STREAM)
                    socks.append(tcp6)
                    tcp6.setsockopt(_socket.SOL_SOCKET, _socket.SO_REUSEADDR, 1)
                    tcp6.bind(("::1", chosen))
                    tcp6.listen(16)
                    self.udp6, self.tcp6 = udp6, tcp6
            except OSError as exc:
                last_error = exc
                for sock in socks:
                    sock.close()
                if port:  # explicit port: nothing to retry
                    raise
                continue
            self.udp4, self.tcp4 = udp4, tcp4
            self.port = chosen
            self._socks = socks
            break
        else:
            raise OSError(f"could not bind a common loopback port: {last_error}")

    def root_hints_text(self) -> str:
        lines = []
        for name, proto, _addr in self.universe.root_hints():
            addr = "127.0.0.1" if proto == V4 else "::1"
            lines.append(f"{name} {proto} {addr}")
        return "\n".join(sorted(set(lines))) + "\n"

    def _flat_answer(self, payload: bytes, transport: str, family_addr: str) -> bytes | None:
        try:
            msg = decode(payload)
        except Exception:
            return None
        q = msg.question
        if q is None:
            return encode(msg.reply_skeleton(rcode=RCODE_FORMERR))
        zone = None
        for z in self.universe.fixtures:
            if q.qname.is_within(z) and (zone is None or len(z) > len(zone)):
                zone = z
        if zone is None:
            return encode(msg.reply_skeleton(rcode=RCODE_REFUSED))
        candidates = [n for n in self.universe.apex_ns(zone)
                      if n in self.universe.owner_zone]
        if not candidates:
            return encode(msg.reply_skeleton(rcode=RCODE_REFUSED))
        reply = self.universe._answer(candidates[0], family_addr, msg, transport)
        if reply is None:
            return None
        return encode(_rewrite_loopback(reply))

    def start(self) -> None:
        import threading

        self._running = True

        def udp_loop(sock, family_addr):
            while self._running:
                try:
                    data, peer = sock.recvfrom(65535)
                except OSError:
                    return
                out = self._flat_answer(data, UDP, family_addr)
                if out is not None:
                    sock.sendto(out, peer)

        def tcp_loop(sock, family_addr):
            import struct as _struct

            while self._running:
                try:
                    conn, _peer = sock.accept()
                except OSError:
                    return
                with conn:
                    try:
                        head = _recv_exact(conn, 2)
                        (n,) = _struct.unpack("!H", head)
                        data = _recv_exact(conn, n)
                    except OSError:
                        continue
                    out = self._flat_answer(data, "tcp", family_addr)
                    if out is not None:
                        conn.sendall(_struct.pack("!H", len(out)) + out)

        pairs = [(self.udp4, udp_loop, "127.0.0.1"), (self.tcp4, tcp_loop, "127.0.0.1")]
        if self.udp6 is not None:
            pairs += [(self.udp6, udp_loop, "::1"), (self.tcp6, tcp_loop, "::1")]
        for sock, fn, family_addr in pairs:
            t = threading.Thread(target=fn, args=(sock, family_addr), daemon=True)
            t.start()
            self._threads.append(t)

    def stop(self) -> None:
        self._running = False
        for sock in self._socks:
            try:
                sock.close()
            except OSError:
                pass

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.stop()


def _recv_exact(conn, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = conn.recv(n - len(buf))
        if not chunk:
            raise OSError("connection closed")
        buf += chunk
    return bytes(buf)


def _rewrite_loopback(msg: DnsMessage) -> DnsMessage:
    from dataclasses import replace as _replace

    from .records import pack_address

    def rewrite(section):
        seen = set()
        out = []
        for rr in section:
            if rr.rrtype == RRType.A:
                rr = ResourceRecord(rr.owner, rr.rrtype, rr.ttl, pack_address("127.0.0.1"))
            elif rr.rrtype == RRType.AAAA:
                rr = ResourceRecord(rr.owner, rr.rrtype, rr.ttl, pack_address("::1"))
            key = (rr.owner, rr.rrtype, rr.data if isinstance(rr.data, bytes) else id(rr))
            if rr.rrtype in (RRType.A, RRType.AAAA):
                if key in seen:
                    continue
                seen.add(key)
            out.append(rr)
        return tuple(out)

    return _replace(
        msg,
        answer=rewrite(msg.answer),
        authority=rewrite(msg.authority),
        additional=rewrite(msg.additional),
    )


def random_universe(
    seed: int,
    size: int,
    defect_rates: Mapping[str, float] | None = None,
    acyclic_oob: bool = False,
) -> tuple[Universe, dict[DomainName, dict[str, bool]]]:
    """A seeded random tree of ``size`` zones plus its ground truth.

    Rates control record-level defects; liveness defects are injected only
    by targeted fixtures since passive data cannot observe them. With
    ``acyclic_oob`` every out-of-bailiwick NS is hosted in an
    earlier-created zone, which rules out dependency cycles; useful when a
    run must be able to observe every zone over some protocol.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    rates = dict(DEFAULT_DEFECT_RATES)
    if defect_rates:
        rates.update(defect_rates)
    rng = random.Random(seed)

    zones: list[DomainName] = [ROOT]
    for i in range(size):
        parent = rng.choice(zones)
        if len(parent.labels) >= 6:
            parent = ROOT
        zones.append(parent.child(f"z{i}".encode()))

    counter = [0]

    def fresh_addrs(want_v4: bool, want_v6: bool) -> tuple[tuple[str, ...], tuple[str, ...]]:
        counter[0] += 1
        n = counter[0]
        v4 = (f"10.{(n >> 8) & 0xFF}.{n & 0xFF}.53",) if want_v4 else ()
        v6 = (f"fd00::{n:x}",) if want_v6 else ()
        return v4, v6

    zone_ns: dict[DomainName, list[DomainName]] = {z: [] for z in zones}
    declared: dict[DomainName, FixtureNs] = {}
    host_zone_of: dict[DomainName, DomainName] = {}

    for idx, zone in enumerate(zones):
        count = 2 if zone == ROOT else rng.choice((1, 2))
        for j in range(count):
            host = zone
            if zone != ROOT and rng.random() < rates["oob-ns"]:
                pool = zones[:idx] if acyclic_oob else zones
                candidates = [z for z in pool if z != ROOT and not z.is_within(zone)]
                if candidates:
                    host = rng.choice(candidates)
            name = host.child(f"ns{j}-{idx}".encode())
            want_v4 = zone == ROOT or rng.random() >= rates["ns-no-v4"]
            want_v6 = True if zone == ROOT else rng.random() >= rates["ns-no-v6"]
            v4, v6 = fresh_addrs(want_v4, want_v6)
            declared[name] = FixtureNs(name, v4, v6)
            host_zone_of[name] = host
            zone_ns[zone].append(name)

    fixtures: dict[DomainName, FixtureZone] = {}
    for zone in zones:
        defects: set[str] = set()
        if zone != ROOT:
            for defect in (DROP_AAAA_GLUE, DROP_AAAA_APEX, WRONG_NS_SET_CHILD,
                           TRUNCATE_UDP, FORMERR_ON_EDNS):
                if rng.random() < rates.get(defect, 0.0):
                    defects.add(defect)
        entries = tuple(
            declared[name] if host_zone_of[name] == zone else FixtureNs(name)
            for name in zone_ns[zone]
        )
        own_ns = {name for name in zone_ns[zone] if host_zone_of[name] == zone}
        hosted = tuple(
            declared[name]
            for name, host in sorted(host_zone_of.items())
            if host == zone and name not in own_ns
        )
        fixtures[zone] = FixtureZone(
            zone=zone, ns=entries, hosted=hosted, defects=frozenset(defects),
        )

    universe = Universe(fixtures, seed=seed)
    return universe, ground_truth(universe)
