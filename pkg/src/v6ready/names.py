"""Domain name normalization and bailiwick arithmetic.

Names are sequences of lowercase ASCII label byte-strings, root = empty
sequence. IDN labels are passed through as opaque punycode bytes; nothing
here is Unicode-aware because wire fidelity is what matters.
"""

from __future__ import annotations

from typing import Iterable

MAX_LABEL = 63
MAX_WIRE = 255


class DnsNameError(ValueError):
    """Base class for malformed domain names."""


class EmptyLabel(DnsNameError):
    pass


class LabelTooLong(DnsNameError):
    pass


class NameTooLong(DnsNameError):
    pass


class DomainName:
    """An immutable, normalized DNS name.

    ``labels`` are ordered leftmost-first, so ``www.example.org`` is
    ``(b"www", b"example", b"org")`` and the root is ``()``.
    """

    __slots__ = ("labels", "_hash")

    labels: tuple[bytes, ...]

    def __init__(self, labels: Iterable[bytes]):
        lab = tuple(bytes(l).lower() for l in labels)
        wire_len = 1
        for l in lab:
            if not l:
                raise EmptyLabel("empty label")
            if len(l) > MAX_LABEL:
                raise LabelTooLong(f"label exceeds {MAX_LABEL} bytes: {l[:16]!r}...")
            wire_len += len(l) + 1
        if wire_len > MAX_WIRE:
            raise NameTooLong(f"name wire length {wire_len} exceeds {MAX_WIRE}")
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "_hash", hash(lab))

    def __setattr__(self, name, value):
        raise AttributeError("DomainName is immutable")

    # -- identity ---------------------------------------------------------

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        return isinstance(other, DomainName) and self.labels == other.labels

    def __lt__(self, other: "DomainName") -> bool:
        # Hierarchical order: compare from the root side so siblings group.
        return tuple(reversed(self.labels)) < tuple(reversed(other.labels))

    def __repr__(self) -> str:
        return f"DomainName({str(self)!r})"

    def __str__(self) -> str:
        if not self.labels:
            return "."
        return ".".join(_present_label(l) for l in self.labels)

    # -- structure --------------------------------------------------------

    @property
    def is_root(self) -> bool:
        return not self.labels

    def __len__(self) -> int:
        return len(self.labels)

    def parent(self) -> "DomainName":
        """Drop the leftmost label. Undefined for the root."""
        if not self.labels:
            raise DnsNameError("the root has no parent")
        return DomainName(self.labels[1:])

    def child(self, label: bytes | str) -> "DomainName":
        if isinstance(label, str):
            label = label.encode("ascii")
        return DomainName((label,) + self.labels)

    def is_within(self, zone: "DomainName") -> bool:
        """True iff self equals ``zone`` or is a descendant of it."""
        n = len(zone.labels)
        if n == 0:
            return True
        return len(self.labels) >= n and self.labels[-n:] == zone.labels

    def ancestor_at_depth(self, depth: int) -> "DomainName":
        """The enclosing name with ``depth`` labels (0 = root)."""
        if depth > len(self.labels):
            raise DnsNameError("depth exceeds label count")
        if depth == 0:
            return ROOT
        return DomainName(self.labels[-depth:])


ROOT = DomainName(())


def normalize(name: str | bytes | DomainName) -> DomainName:
    """Parse a dot-separated presentation-format name into a DomainName.

    Accepts an optional trailing dot; RFC 1035 master-file escapes
    (``\\.`` and ``\\DDD``) are honored. Raises EmptyLabel, LabelTooLong
    or NameTooLong on malformed input.
    """
    if isinstance(name, DomainName):
        return name
    if isinstance(name, bytes):
        text = name.decode("ascii", errors="strict")
    else:
        text = name
    if text in (".", ""):
        # A lone dot is the root; the empty string is tolerated as root too,
        # matching common passive-data conventions.
        return ROOT
    labels: list[bytes] = []
    current = bytearray()
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\\":
            i += 1
            if i >= n:
                raise DnsNameError("dangling escape")
            if text[i].isdigit():
                if i + 3 > n or not text[i : i + 3].isdigit():
                    raise DnsNameError("bad \\DDD escape")
                code = int(text[i : i + 3])
                if code > 255:
                    raise DnsNameError("\\DDD escape out of range")
                current.append(code)
                i += 3
            else:
                current.append(ord(text[i]))
                i += 1
        elif ch == ".":
            if not current:
                raise EmptyLabel(f"empty label in {text!r}")
            labels.append(bytes(current))
            current = bytearray()
            i += 1
        else:
            current.append(ord(ch))
            i += 1
    if current:
        labels.append(bytes(current))
    elif text.endswith("."):
        pass  # trailing dot already consumed the final label
    else:
        raise EmptyLabel(f"empty label in {text!r}")
    return DomainName(labels)


def _present_label(label: bytes) -> str:
    out = []
    for b in label:
        c = chr(b)
        if c in ".\\":
            out.append("\\" + c)
        elif 0x21 <= b <= 0x7E:
            out.append(c)
        else:
            out.append("\\%03d" % b)
    return "".join(out)


def is_in_bailiwick(name: DomainName, zone: DomainName) -> bool:
    """True iff ``name`` is ``zone`` itself or lies below it."""
    return name.is_within(zone)


def enclosing_zones(name: DomainName) -> list[DomainName]:
    """All label-boundary names from the root down to ``name`` inclusive."""
    return [name.ancestor_at_depth(d) for d in range(len(name.labels) + 1)]
