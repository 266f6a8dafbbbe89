"""Domain grouping, NS-set operator aggregation and centralization CDFs.

Zones are grouped into TLD / second-level / below-second-level buckets
(PSL-driven) plus popularity tiers when a toplist is supplied. NS sets are
aggregated to the PSL-registered domains of their member names, with
configurable pattern rules to collapse known multi-zone operators, and a
CDF of zones per NS set summarizes centralization among zones that do not
resolve over IPv6.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping

from .classify import ResolutionStatus
from .names import DomainName, normalize
from .psl import PublicSuffixList, registered_or_self

GROUP_TLD = "tld"
GROUP_SECOND_LEVEL = "second-level"
GROUP_BELOW_SECOND_LEVEL = "below-second-level"

RANK_TIERS = (
    ("top1k", 1_000),
    ("1k-10k", 10_000),
    ("10k-100k", 100_000),
    ("100k-1m", 1_000_000),
)

STATES = ("dual", "v4-only", "v6-only", "none")


@dataclass(frozen=True)
class DomainGroup:
    kind: str  # hierarchy bucket or "rank-tier"
    tier: str | None = None
    unknown_suffix: bool = False
    private_rule: bool = False

    @property
    def label(self) -> str:
        return self.tier if self.kind == "rank-tier" else self.kind


def parse_tld_list(text: str) -> frozenset[DomainName]:
    """One TLD per line, '#' comments, case-insensitive."""
    out = set()
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            out.add(normalize(line))
    return frozenset(out)


def load_tld_list(path: str | Path) -> frozenset[DomainName]:
    return parse_tld_list(Path(path).read_text(encoding="utf-8"))


def parse_toplist(text: str) -> dict[DomainName, int]:
    """rank,domain CSV (headerless); later duplicates keep the best rank."""
    out: dict[DomainName, int] = {}
    for row in csv.reader(text.splitlines()):
        if not row or len(row) < 2 or not row[0].strip().isdigit():
            continue
        rank = int(row[0].strip())
        name = normalize(row[1].strip())
        if name not in out or rank < out[name]:
            out[name] = rank
    return out


def load_toplist(path: str | Path) -> dict[DomainName, int]:
    return parse_toplist(Path(path).read_text(encoding="utf-8"))


def rank_tier(rank: int) -> str | None:
    for tier, bound in RANK_TIERS:
        if rank <= bound:
            return tier
    return None


def group_domain(
    name: DomainName,
    psl: PublicSuffixList,
    tlds: frozenset[DomainName],
    toplist: Mapping[DomainName, int] | None = None,
) -> frozenset[DomainGroup]:
    """Exactly one hierarchy group plus an optional rank tier."""
    if name.is_root:
        raise ValueError("the root has no grouping")
    groups: set[DomainGroup] = set()
    match = psl.match(name)
    if len(name.labels) == 1:
        groups.add(DomainGroup(GROUP_TLD, unknown_suffix=name not in tlds))
    elif match is None:
        # No PSL rule: group under the rightmost label, flagged.
        if len(name.labels) == 2:
            groups.add(DomainGroup(GROUP_SECOND_LEVEL, unknown_suffix=True))
        else:
            groups.add(DomainGroup(GROUP_BELOW_SECOND_LEVEL, unknown_suffix=True))
    else:
        suffix_depth = len(match.suffix.labels)
        if len(name.labels) == suffix_depth:
            # A multi-label public suffix is registry infrastructure,
            # grouped with the TLDs.
            groups.add(DomainGroup(GROUP_TLD, private_rule=match.private))
        elif len(name.labels) == suffix_depth + 1:
            groups.add(DomainGroup(GROUP_SECOND_LEVEL, private_rule=match.private))
        else:
            groups.add(DomainGroup(GROUP_BELOW_SECOND_LEVEL, private_rule=match.private))
    if toplist:
        registered = registered_or_self(psl, name)
        rank = toplist.get(name, toplist.get(registered))
        if rank is not None:
            tier = rank_tier(rank)
            if tier:
                groups.add(DomainGroup("rank-tier", tier=tier))
    return frozenset(groups)


# -- NS set aggregation -----------------------------------------------------


@dataclass(frozen=True)
class OperatorRule:
    pattern: re.Pattern
    label: str


def parse_operator_rules(text: str) -> tuple[OperatorRule, ...]:
    """Lines of ``REGEX<whitespace>LABEL``; '#' comments. Default is empty:
    operator knowledge is site-specific and ships as configuration."""
    rules = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise ValueError(f"bad operator rule line: {raw!r}")
        rules.append(OperatorRule(re.compile(parts[0]), parts[1].strip()))
    return tuple(rules)


def load_operator_rules(path: str | Path) -> tuple[OperatorRule, ...]:
    return parse_operator_rules(Path(path).read_text(encoding="utf-8"))


def ns_set_key(
    ns_names: Iterable[DomainName],
    psl: PublicSuffixList,
    rules: tuple[OperatorRule, ...] = (),
) -> frozenset[str]:
    """Order-insensitive operator identifier for one zone's NS set."""
    out = set()
    for ns in ns_names:
        text = str(ns)
        label = None
        for rule in rules:
            if rule.pattern.search(text):
                label = rule.label
                break
        if label is None:
            label = str(registered_or_self(psl, ns))
        out.add(label)
    return frozenset(out)


@dataclass
class CdfResult:
    """Zones-per-NS-set concentration among non-IPv6-resolvable zones."""

    points: list[tuple[float, float]] = field(default_factory=list)
    set_count: int = 0
    zone_count: int = 0
    top10_share: float = 0.0
    top10pct_share: float = 0.0
    sets: list[tuple[frozenset[str], int]] = field(default_factory=list)


def nsset_cdf(
    entries: Iterable[tuple[Iterable[DomainName], bool]],
    psl: PublicSuffixList,
    rules: tuple[OperatorRule, ...] = (),
) -> CdfResult:
    """CDF over the number of zones per NS set.

    ``entries`` are (NS names, v6_resolvable) pairs; only zones that do not
    resolve over IPv6 enter the distribution. Points run over NS sets
    sorted by descending zone count: (fraction of sets, cumulative fraction
    of zones).
    """
    counts: dict[frozenset[str], int] = {}
    for ns_names, v6_ok in entries:
        if v6_ok:
            continue
        key = ns_set_key(ns_names, psl, rules)
        counts[key] = counts.get(key, 0) + 1
    result = CdfResult()
    if not counts:
        return result
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], sorted(kv[0])))
    result.sets = ordered
    result.set_count = len(ordered)
    result.zone_count = sum(counts.values())
    cum = 0
    for i, (_key, n) in enumerate(ordered):
        cum += n
        result.points.append(((i + 1) / result.set_count, cum / result.zone_count))
    result.top10_share = sum(n for _, n in ordered[:10]) / result.zone_count
    top10pct = max(1, round(result.set_count * 0.10))
    result.top10pct_share = sum(n for _, n in ordered[:top10pct]) / result.zone_count
    return result


# -- CSV outputs ---------------------------------------------------------------


def state_share_rows(
    statuses: Mapping[DomainName, ResolutionStatus],
    psl: PublicSuffixList | None = None,
    tlds: frozenset[DomainName] | None = None,
    toplist: Mapping[DomainName, int] | None = None,
) -> list[dict]:
    """Per-group resolvability state shares; the 'all' row is always present."""
    buckets: dict[str, dict[str, int]] = {}

    def bump(label: str, state: str):
        b = buckets.setdefault(label, {s: 0 for s in STATES})
        b[state] += 1

    for zone, status in statuses.items():
        bump("all", status.state)
        if psl is not None and tlds is not None and not zone.is_root:
            for group in group_domain(zone, psl, tlds, toplist):
                bump(group.label, status.state)
    rows = []
    for label in sorted(buckets, key=lambda x: (x != "all", x)):
        counts = buckets[label]
        total = sum(counts.values())
        row = {"group": label, "total": total}
        for s in STATES:
            row[s] = counts[s]
            row[f"{s}_pct"] = round(100.0 * counts[s] / total, 4) if total else 0.0
        rows.append(row)
    return rows


def cause_share_rows(statuses: Mapping[DomainName, ResolutionStatus]) -> list[dict]:
    """Cause shares over zones with IPv6 intent that do not resolve via IPv6."""
    population = 0
    counts: dict[str, int] = {}
    for status in statuses.values():
        if not status.intent_v6 or status.v6:
            continue
        population += 1
        for cause in status.causes:
            counts[cause] = counts.get(cause, 0) + 1
    rows = []
    for cause in sorted(counts):
        rows.append({
            "cause": cause,
            "zones": counts[cause],
            "population": population,
            "pct": round(100.0 * counts[cause] / population, 4) if population else 0.0,
        })
    return rows


def write_csv(out: IO[str], rows: list[dict]) -> None:
    if not rows:
        out.write("")
        return
    writer = csv.DictWriter(out, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    writer.writerows(rows)


def cdf_rows(result: CdfResult) -> list[dict]:
    rows = [
        {
            "set_fraction": round(x, 6),
            "zone_fraction": round(y, 6),
        }
        for x, y in result.points
    ]
    return rows
