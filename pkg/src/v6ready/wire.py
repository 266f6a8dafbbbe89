"""RFC 1035 message encoding/decoding with EDNS(0) and TCP framing.

Encoding never emits name compression; decoding accepts it. The OPT
pseudo-record is lifted out of the additional section into ``edns``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

from .names import DomainName
from .records import (
    CLASS_IN,
    MxData,
    ResourceRecord,
    RRType,
    SoaData,
)

MAX_MESSAGE = 0xFFFF  # TCP length prefix bound

RCODE_NOERROR = 0
RCODE_FORMERR = 1
RCODE_SERVFAIL = 2
RCODE_NXDOMAIN = 3
RCODE_NOTIMP = 4
RCODE_REFUSED = 5

OPCODE_QUERY = 0


class WireFormatError(ValueError):
    """Message bytes that cannot be decoded."""


class MessageTooLarge(ValueError):
    """Encoded message would exceed the 64 KiB TCP bound."""


@dataclass(frozen=True)
class Edns:
    udp_payload_size: int = 1232


@dataclass(frozen=True)
class Question:
    qname: DomainName
    qtype: RRType
    qclass: int = CLASS_IN


@dataclass(frozen=True)
class DnsMessage:
    id: int = 0
    qr: bool = False
    opcode: int = OPCODE_QUERY
    aa: bool = False
    tc: bool = False
    rd: bool = False
    ra: bool = False
    rcode: int = RCODE_NOERROR
    question: Question | None = None
    answer: tuple[ResourceRecord, ...] = ()
    authority: tuple[ResourceRecord, ...] = ()
    additional: tuple[ResourceRecord, ...] = ()
    edns: Edns | None = None

    def reply_skeleton(self, **overrides) -> "DnsMessage":
        """A response shell echoing id/question; sections start empty."""
        base = DnsMessage(
            id=self.id, qr=True, opcode=self.opcode, rd=self.rd,
            question=self.question,
        )
        return replace(base, **overrides)


def encode_name(name: DomainName) -> bytes:
    out = bytearray()
    for label in name.labels:
        out.append(len(label))
        out += label
    out.append(0)
    return bytes(out)


def _encode_rdata(rr: ResourceRecord) -> bytes:
    t = rr.rrtype
    if t in (RRType.NS, RRType.CNAME):
        return encode_name(rr.data)  # type: ignore[arg-type]
    if t in (RRType.A, RRType.AAAA):
        return rr.data  # type: ignore[return-value]
    if t == RRType.SOA:
        soa: SoaData = rr.data  # type: ignore[assignment]
        return (
            encode_name(soa.mname)
            + encode_name(soa.rname)
            + struct.pack("!IIIII", soa.serial, soa.refresh, soa.retry,
                          soa.expire, soa.minimum)
        )
    if t == RRType.MX:
        mx: MxData = rr.data  # type: ignore[assignment]
        return struct.pack("!H", mx.preference) + encode_name(mx.exchange)
    if t == RRType.TXT:
        out = bytearray()
        for chunk in rr.data:  # type: ignore[union-attr]
            for i in range(0, max(len(chunk), 1), 255):
                piece = chunk[i : i + 255]
                out.append(len(piece))
                out += piece
        return bytes(out)
    if isinstance(rr.data, bytes):
        return rr.data
    raise WireFormatError(f"cannot encode rdata for {t}")


def _encode_rr(rr: ResourceRecord, rrclass: int = CLASS_IN) -> bytes:
    rdata = _encode_rdata(rr)
    if len(rdata) > 0xFFFF:
        raise MessageTooLarge(f"rdata of {rr.owner} is {len(rdata)} bytes")
    return (
        encode_name(rr.owner)
        + struct.pack("!HHIH", rr.rrtype.value, rrclass, rr.ttl, len(rdata))
        + rdata
    )


def encode(msg: DnsMessage) -> bytes:
    """Wire bytes for ``msg``; appends an OPT record iff ``edns`` is set."""
    flags = (
        (int(msg.qr) << 15)
        | ((msg.opcode & 0xF) << 11)
        | (int(msg.aa) << 10)
        | (int(msg.tc) << 9)
        | (int(msg.rd) << 8)
        | (int(msg.ra) << 7)
        | (msg.rcode & 0xF)
    )
    arcount = len(msg.additional) + (1 if msg.edns else 0)
    out = bytearray(
        struct.pack(
            "!HHHHHH",
            msg.id & 0xFFFF,
            flags,
            1 if msg.question else 0,
            len(msg.answer),
            len(msg.authority),
            arcount,
        )
    )
    if msg.question:
        out += encode_name(msg.question.qname)
        out += struct.pack("!HH", msg.question.qtype.value, msg.question.qclass)
    for rr in msg.answer:
        out += _encode_rr(rr)
    for rr in msg.authority:
        out += _encode_rr(rr)
    for rr in msg.additional:
        out += _encode_rr(rr)
    if msg.edns:
        out += b"\x00" + struct.pack(
            "!HHIH", RRType.OPT.value, msg.edns.udp_payload_size, 0, 0
        )
    if len(out) > MAX_MESSAGE:
        raise MessageTooLarge(f"{len(out)} bytes exceeds {MAX_MESSAGE}")
    return bytes(out)


def _decode_name(data: bytes, offset: int) -> tuple[DomainName, int]:
    labels: list[bytes] = []
    jumps = 0
    end = None  # offset after the name in the original stream
    pos = offset
    while True:
        if pos >= len(data):
            raise WireFormatError("truncated name")
        length = data[pos]
        if length == 0:
            pos += 1
            if end is None:
                end = pos
            break
        if length & 0xC0 == 0xC0:
            if pos + 1 >= len(data):
                raise WireFormatError("truncated compression pointer")
            target = ((length & 0x3F) << 8) | data[pos + 1]
            if end is None:
                end = pos + 2
            if target >= pos:
                raise WireFormatError("forward compression pointer")
            jumps += 1
            if jumps > 64:
                raise WireFormatError("compression pointer loop")
            pos = target
            continue
        if length & 0xC0:
            raise WireFormatError(f"bad label length byte {length:#x}")
        if pos + 1 + length > len(data):
            raise WireFormatError("label runs past message end")
        labels.append(data[pos + 1 : pos + 1 + length])
        pos += 1 + length
        if len(labels) > 128:
            raise WireFormatError("too many labels")
    try:
        return DomainName(labels), end
    except ValueError as exc:
        raise WireFormatError(str(exc)) from exc


def _decode_rdata(data: bytes, rdstart: int, rdlen: int, rrtype: RRType) -> object:
    rdend = rdstart + rdlen
    if rrtype in (RRType.NS, RRType.CNAME):
        name, _ = _decode_name(data, rdstart)
        return name
    if rrtype in (RRType.A, RRType.AAAA):
        return data[rdstart:rdend]
    if rrtype == RRType.SOA:
        mname, off = _decode_name(data, rdstart)
        rname, off = _decode_name(data, off)
        if off + 20 > rdend:
            raise WireFormatError("short SOA rdata")
        serial, refresh, retry, expire, minimum = struct.unpack_from("!IIIII", data, off)
        return SoaData(mname, rname, serial, refresh, retry, expire, minimum)
    if rrtype == RRType.MX:
        (pref,) = struct.unpack_from("!H", data, rdstart)
        exchange, _ = _decode_name(data, rdstart + 2)
        return MxData(pref, exchange)
    if rrtype == RRType.TXT:
        chunks = []
        pos = rdstart
        while pos < rdend:
            n = data[pos]
            if pos + 1 + n > rdend:
                raise WireFormatError("TXT string runs past rdata")
            chunks.append(data[pos + 1 : pos + 1 + n])
            pos += 1 + n
        return tuple(chunks)
    return data[rdstart:rdend]


def _decode_rr(data: bytes, offset: int) -> tuple[ResourceRecord | None, Edns | None, int]:
    owner, off = _decode_name(data, offset)
    if off + 10 > len(data):
        raise WireFormatError("truncated RR header")
    tval, rrclass, ttl, rdlen = struct.unpack_from("!HHIH", data, off)
    off += 10
    if off + rdlen > len(data):
        raise WireFormatError("rdata runs past message end")
    rrtype = RRType(tval)
    if rrtype == RRType.OPT:
        # class carries the advertised UDP payload size
        return None, Edns(udp_payload_size=rrclass), off + rdlen
    payload = _decode_rdata(data, off, rdlen, rrtype)
    return ResourceRecord(owner, rrtype, ttl, payload), None, off + rdlen


def decode(data: bytes) -> DnsMessage:
    if len(data) < 12:
        raise WireFormatError("message shorter than header")
    mid, flags, qd, an, ns, ar = struct.unpack_from("!HHHHHH", data, 0)
    offset = 12
    question = None
    if qd > 1:
        raise WireFormatError(f"unsupported qdcount {qd}")
    if qd == 1:
        qname, offset = _decode_name(data, offset)
        if offset + 4 > len(data):
            raise WireFormatError("truncated question")
        qtype, qclass = struct.unpack_from("!HH", data, offset)
        offset += 4
        question = Question(qname, RRType(qtype), qclass)
    sections: list[list[ResourceRecord]] = [[], [], []]
    edns = None
    for sect, count in zip(sections, (an, ns, ar)):
        for _ in range(count):
            rr, opt, offset = _decode_rr(data, offset)
            if opt is not None:
                edns = opt
            elif rr is not None:
                sect.append(rr)
    return DnsMessage(
        id=mid,
        qr=bool(flags & 0x8000),
        opcode=(flags >> 11) & 0xF,
        aa=bool(flags & 0x0400),
        tc=bool(flags & 0x0200),
        rd=bool(flags & 0x0100),
        ra=bool(flags & 0x0080),
        rcode=flags & 0xF,
        question=question,
        answer=tuple(sections[0]),
        authority=tuple(sections[1]),
        additional=tuple(sections[2]),
        edns=edns,
    )


def frame_tcp(payload: bytes) -> bytes:
    """Prefix ``payload`` with the 2-byte length used on DNS-over-TCP."""
    if len(payload) > MAX_MESSAGE:
        raise MessageTooLarge(f"{len(payload)} bytes exceeds {MAX_MESSAGE}")
    return struct.pack("!H", len(payload)) + payload


def unframe_tcp(data: bytes) -> bytes:
    if len(data) < 2:
        raise WireFormatError("short TCP frame")
    (n,) = struct.unpack_from("!H", data, 0)
    if len(data) < 2 + n:
        raise WireFormatError("TCP frame shorter than its length prefix")
    return data[2 : 2 + n]
