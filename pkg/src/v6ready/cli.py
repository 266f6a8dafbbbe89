"""Operator-facing commands: single-domain check, bulk scan, and passive
simulation over tuple files.

Every flag can also be supplied through an environment variable with the
``V6READY_`` prefix (``V6READY_ROOTS``, ``V6READY_TIMEOUT``, ...); explicit
flags win. Exit codes for ``check``: 0 = resolvable in an IPv6-only
environment, 1 = not, 2 = operational error.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .analytics import (
    cause_share_rows,
    cdf_rows,
    load_operator_rules,
    load_tld_list,
    load_toplist,
    nsset_cdf,
    state_share_rows,
    write_csv,
)
from .names import DnsNameError, normalize
from .passive import (
    IngestStats,
    classify_zones,
    fixed_point,
    ingest,
    iter_tuples,
    open_tuple_stream,
    snapshot_stats,
    write_verdicts,
)
from .psl import PublicSuffixList
from .query import QueryEngine, QueryPolicy, ResponseCache, UdpTcpTransport
from .resolver import (
    DepthLimitExceeded,
    PROTOCOL_BOTH,
    PROTOCOL_V4_ONLY,
    PROTOCOL_V6_ONLY,
    Resolver,
    RootUnreachable,
    default_root_hints,
    load_root_hints,
)

EXIT_OK = 0
EXIT_NOT_V6 = 1
EXIT_ERROR = 2

ENV_PREFIX = "V6READY_"


class ConfigError(ValueError):
    pass


def _env(name: str) -> str | None:
    return os.environ.get(ENV_PREFIX + name)


@dataclass
class RunConfig:
    roots: str | None
    protocol_filter: str
    timeout: float
    tcp_timeout: float
    retries: int
    retry_wait: float
    concurrency: int
    fmt: str
    seed: int | None
    port: int

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        filt = PROTOCOL_BOTH
        if getattr(args, "v4_only", False) and getattr(args, "v6_only", False):
            raise ConfigError("--v4-only and --v6-only are mutually exclusive")
        if getattr(args, "v4_only", False):
            filt = PROTOCOL_V4_ONLY
        if getattr(args, "v6_only", False):
            filt = PROTOCOL_V6_ONLY
        cfg = cls(
            roots=args.roots,
            protocol_filter=filt,
            timeout=args.timeout,
            tcp_timeout=args.tcp_timeout,
            retries=args.retries,
            retry_wait=args.retry_wait,
            concurrency=getattr(args, "concurrency", 1),
            fmt=args.format,
            seed=args.seed,
            port=args.port,
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.retries < 1:
            raise ConfigError("--retries must be >= 1")
        if self.timeout <= 0 or self.tcp_timeout <= 0:
            raise ConfigError("timeouts must be positive")
        if self.retry_wait < 0:
            raise ConfigError("--retry-wait must be >= 0")
        if self.concurrency < 1:
            raise ConfigError("--concurrency must be >= 1")
        if not 1 <= self.port <= 65535:
            raise ConfigError("--port out of range")
        if self.roots is not None and not Path(self.roots).is_file():
            raise ConfigError(f"root hints file not found: {self.roots}")

    def policy(self) -> QueryPolicy:
        return QueryPolicy(
            max_retries=self.retries,
            retry_wait=self.retry_wait,
            udp_timeout=self.timeout,
            tcp_timeout=self.tcp_timeout,
        )

    def hints(self):
        if self.roots is None:
            return default_root_hints()
        return load_root_hints(self.roots)


def _build_resolver(cfg: RunConfig, transport_factory=None) -> Resolver:
    transport = transport_factory(cfg) if transport_factory else UdpTcpTransport()
    rng = random.Random(cfg.seed) if cfg.seed is not None else random.Random()
    engine = QueryEngine(transport, policy=cfg.policy(), rng=rng)
    return Resolver(
        engine,
        root_hints=cfg.hints(),
        protocol_filter=cfg.protocol_filter,
        server_port=cfg.port,
    )


# -- check ---------------------------------------------------------------------


def _render_check_text(result) -> str:
    lines = [f"target: {result.target}"]
    lines.append(
        f"state: {result.state} (v4 {'yes' if result.v4_resolvable else 'NO'}, "
        f"v6 {'yes' if result.v6_resolvable else 'NO'})"
    )
    lines.append(f"ipv6 intent: {'yes' if result.status.intent_v6 else 'no'}")
    if result.status.v6_failures:
        lines.append("ipv6 failure causes:")
        for f in sorted(result.status.v6_failures, key=lambda f: f.cause):
            witnesses = ", ".join(f.witnesses) if f.witnesses else "-"
            lines.append(f"  {f.cause}: {witnesses}")
    if result.steps:
        lines.append("delegation chain:")
        for step in result.steps:
            state = step.status.state if step.status else "?"
            parent_ns = ", ".join(sorted(str(n) for n in step.parent_ns_set))
            lines.append(f"  {step.zone} [{state}] parent NS: {parent_ns}")
            if step.child_ns_set is not None and step.child_ns_set != step.parent_ns_set:
                child_ns = ", ".join(sorted(str(n) for n in step.child_ns_set))
                lines.append(f"    child NS: {child_ns}")
    if result.liveness:
        lines.append("nameserver liveness:")
        for addr, proto, verdict in result.liveness:
            lines.append(f"  {addr} {proto} {verdict}")
    if result.server_version:
        lines.append("server versions:")
        for addr in sorted(result.server_version):
            lines.append(f"  {addr}: {result.server_version[addr]}")
    return "\n".join(lines)


def cmd_check(args, transport_factory=None) -> int:
    try:
        cfg = RunConfig.from_args(args)
        target = normalize(args.domain)
    except (ConfigError, DnsNameError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    resolver = _build_resolver(cfg, transport_factory)
    try:
        result = resolver.resolve_chain(target, enrich_result=True, probe_liveness=True)
    except (RootUnreachable, DepthLimitExceeded, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if cfg.fmt == "structured":
        print(json.dumps(result.to_json_dict(), sort_keys=True, indent=2))
    else:
        print(_render_check_text(result))
    return EXIT_OK if result.v6_resolvable else EXIT_NOT_V6


# -- scan ---------------------------------------------------------------------


def _parse_domain_list(path: str) -> list[tuple[str, int | None]]:
    """One domain per line, or rank,domain CSV rows."""
    out = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "," in line:
            rank_text, domain = line.split(",", 1)
            rank = int(rank_text.strip()) if rank_text.strip().isdigit() else None
            out.append((domain.strip(), rank))
        else:
            out.append((line, None))
    return out


def cmd_scan(args, transport_factory=None) -> int:
    try:
        cfg = RunConfig.from_args(args)
        domains = _parse_domain_list(args.list)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    journal_path = Path(args.journal) if args.journal else None
    completed: set[str] = set()
    if journal_path and journal_path.exists():
        completed = {
            line.strip() for line in journal_path.read_text().splitlines() if line.strip()
        }
    out_path = Path(args.output) if args.output else Path(args.list + ".results.jsonl")

    policy = cfg.policy()
    transport = transport_factory(cfg) if transport_factory else UdpTcpTransport()
    shared_cache = ResponseCache()
    local = threading.local()

    def get_resolver() -> Resolver:
        if not hasattr(local, "resolver"):
            rng = random.Random(cfg.seed) if cfg.seed is not None else random.Random()
            engine = QueryEngine(transport, policy=policy, cache=shared_cache, rng=rng)
            local.resolver = Resolver(
                engine,
                root_hints=cfg.hints(),
                protocol_filter=cfg.protocol_filter,
                server_port=cfg.port,
            )
        return local.resolver

    states: Counter = Counter()

    def work(item):
        domain, rank = item
        row = {"domain": domain, "rank": rank, "error": None}
        try:
            result = get_resolver().resolve_chain(domain)
            row.update(result.to_json_dict())
        except (RootUnreachable, DepthLimitExceeded, DnsNameError, OSError) as exc:
            row["error"] = str(exc)
        return row

    pending = [(d, r) for d, r in domains if d not in completed]
    skipped = len(domains) - len(pending)
    # workers resolve concurrently; rows land here in input order, so the
    # journal and output writes stay single-threaded
    with open(out_path, "a", encoding="utf-8") as out, ThreadPoolExecutor(
        max_workers=cfg.concurrency
    ) as pool:
        journal = open(journal_path, "a", encoding="utf-8") if journal_path else None
        try:
            for row in pool.map(work, pending):
                out.write(json.dumps(row, sort_keys=True) + "\n")
                out.flush()
                if journal:
                    journal.write(row["domain"] + "\n")
                    journal.flush()
                if row["error"] is not None:
                    states["error"] += 1
                else:
                    states[row["state"]] += 1
        finally:
            if journal:
                journal.close()
    total = sum(states.values())
    print(f"scanned {total} domains ({skipped} already journaled)")
    for state in ("dual", "v4-only", "v6-only", "none", "error"):
        if total:
            print(f"  {state:8s} {states[state]:6d}  {100.0 * states[state] / total:6.2f}%")
        else:
            print(f"  {state:8s} {states[state]:6d}")
    print(f"results: {out_path}")
    return EXIT_OK


# -- simulate -------------------------------------------------------------------


def cmd_simulate(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    stats = IngestStats()
    tuples = []
    readable = 0
    for path in args.tuples:
        try:
            stream = open_tuple_stream(path)
        except OSError as exc:
            print(f"warning: cannot read {path}: {exc}", file=sys.stderr)
            continue
        readable += 1
        with stream:
            tuples.extend(iter_tuples(stream, stats))
    if args.tuples and not readable:
        print("error: no tuple file was readable", file=sys.stderr)
        return EXIT_ERROR

    result = ingest(tuples, stats)
    table = fixed_point(result.record_sets)
    statuses = classify_zones(result.record_sets, table)
    snapshot = snapshot_stats(table, statuses, month=args.month)

    psl = PublicSuffixList.load(args.psl) if args.psl else None
    tlds = load_tld_list(args.tlds) if args.tlds else None
    toplist = load_toplist(args.toplist) if args.toplist else None
    rules = load_operator_rules(args.operator_rules) if args.operator_rules else ()

    with open(outdir / "verdicts.jsonl", "w", encoding="utf-8") as fh:
        write_verdicts(fh, result.record_sets, statuses)
    doc = snapshot.to_json()
    doc["ingest"] = {
        "tuples": stats.tuples,
        "malformed": stats.malformed,
        "cname_skipped": stats.cname_skipped,
        "orphan_addresses": len(result.orphan_addresses),
    }
    (outdir / "stats.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    with open(outdir / "states.csv", "w", newline="", encoding="utf-8") as fh:
        write_csv(fh, state_share_rows(statuses, psl, tlds, toplist))
    with open(outdir / "causes.csv", "w", newline="", encoding="utf-8") as fh:
        write_csv(fh, cause_share_rows(statuses))
    if psl is not None:
        entries = [
            (result.record_sets[zone].all_ns(), statuses[zone].v6)
            for zone in statuses
        ]
        cdf = nsset_cdf(entries, psl, rules)
        with open(outdir / "nsset-cdf.csv", "w", newline="", encoding="utf-8") as fh:
            write_csv(fh, cdf_rows(cdf))
        summary_extra = (f", top-10 NS sets cover "
                         f"{100.0 * cdf.top10_share:.1f}% of non-v6 zones"
                         if cdf.zone_count else "")
    else:
        summary_extra = ""
    print(
        f"zones: {snapshot.total} (dual {snapshot.dual}, v4-only {snapshot.v4_only}, "
        f"v6-only {snapshot.v6_only}, none {snapshot.none}; "
        f"unknown-parent {snapshot.unknown_parent}; malformed tuples "
        f"{stats.malformed}){summary_extra}"
    )
    print(f"outputs in {outdir}")
    return EXIT_OK


# -- argument plumbing --------------------------------------------------------


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--roots", default=_env("ROOTS"),
                   help="root hints file (name protocol address per line)")
    proto = p.add_mutually_exclusive_group()
    proto.add_argument("--v4-only", action="store_true",
                       default=_env("V4_ONLY") == "1")
    proto.add_argument("--v6-only", action="store_true",
                       default=_env("V6_ONLY") == "1")
    p.add_argument("--timeout", type=float, default=float(_env("TIMEOUT") or 3.0),
                   help="UDP timeout seconds")
    p.add_argument("--tcp-timeout", type=float,
                   default=float(_env("TCP_TIMEOUT") or 10.0))
    p.add_argument("--retries", type=int, default=int(_env("RETRIES") or 4),
                   help="attempts per transport path")
    p.add_argument("--retry-wait", type=float,
                   default=float(_env("RETRY_WAIT") or 20.0),
                   help="seconds between timeout-driven attempts")
    p.add_argument("--format", choices=("text", "structured"),
                   default=_env("FORMAT") or "text")
    p.add_argument("--seed", type=int,
                   default=int(_env("SEED")) if _env("SEED") else None)
    p.add_argument("--port", type=int, default=int(_env("PORT") or 53),
                   help="server port (loopback test harnesses use high ports)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="v6ready",
        description="Check whether DNS zones resolve in an IPv6-only world.",
        epilog=f"Flags may also be set via {ENV_PREFIX}* environment variables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="check one zone or FQDN")
    p_check.add_argument("domain")
    _add_common_flags(p_check)

    p_scan = sub.add_parser("scan", help="scan a domain list (resumable)")
    p_scan.add_argument("list", help="domain-per-line file or rank,domain CSV")
    p_scan.add_argument("--journal", default=_env("JOURNAL"),
                        help="completed-domain journal for resumption")
    p_scan.add_argument("--output", default=_env("OUTPUT"),
                        help="results JSONL path")
    p_scan.add_argument("--concurrency", type=int,
                        default=int(_env("CONCURRENCY") or 8))
    _add_common_flags(p_scan)

    p_sim = sub.add_parser("simulate", help="passive fixed-point simulation")
    p_sim.add_argument("tuples", nargs="+", help="tuple files (TSV or JSONL, .gz ok)")
    p_sim.add_argument("--psl", default=_env("PSL"), help="public suffix list file")
    p_sim.add_argument("--tlds", default=_env("TLDS"), help="TLD list file")
    p_sim.add_argument("--toplist", default=_env("TOPLIST"),
                       help="rank,domain CSV")
    p_sim.add_argument("--operator-rules", default=_env("OPERATOR_RULES"),
                       help="NS operator collapse patterns (regex label)")
    p_sim.add_argument("--month", default=None, help="snapshot tag for stats")
    p_sim.add_argument("--out", default="v6ready-out", help="output directory")

    return parser


def main(argv=None, transport_factory=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "check":
            return cmd_check(args, transport_factory)
        if args.command == "scan":
            return cmd_scan(args, transport_factory)
        if args.command == "simulate":
            return cmd_simulate(args)
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_ERROR
    parser.error("unknown command")
    return EXIT_ERROR


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
