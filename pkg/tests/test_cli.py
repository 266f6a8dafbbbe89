import json
import sys

import pytest

from universes import (
    broken_oob_universe,
    combined_two_scenario_universe,
    healthy_depth3_universe,
    healthy_zone,
    root_fixture,
)
from v6ready import cli
from v6ready.mocknet import (
    LoopbackServer,
    build_universe,
    fixture_tuples,
    ground_truth,
    zone_fixture,
)
from v6ready.records import V4, V6


def write_hints(tmp_path, universe):
    path = tmp_path / "roots.hints"
    lines = [f"{name} {proto} {addr}" for name, proto, addr in universe.root_hints()]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def run_cli(argv, universe=None):
    factory = (lambda cfg: universe) if universe is not None else None
    return cli.main(argv, transport_factory=factory)


FAST = ["--timeout", "0.2", "--tcp-timeout", "0.2", "--retry-wait", "0", "--seed", "1"]


def test_check_healthy_zone_exits_zero(tmp_path, capsys):
    u = healthy_depth3_universe()
    rc = run_cli(["check", "d.t", "--roots", write_hints(tmp_path, u), *FAST], u)
    out = capsys.readouterr().out
    assert rc == 0
    assert "state: dual" in out


def test_check_broken_zone_exits_one_with_cause(tmp_path, capsys):
    u = broken_oob_universe()
    rc = run_cli(["check", "example.org", "--roots", write_hints(tmp_path, u), *FAST], u)
    out = capsys.readouterr().out
    assert rc == 1
    assert "no-aaaa-for-ns" in out


def test_check_structured_output(tmp_path, capsys):
    u = broken_oob_universe()
    rc = run_cli(["check", "example.org", "--roots", write_hints(tmp_path, u),
                  "--format", "structured", *FAST], u)
    doc = json.loads(capsys.readouterr().out)
    assert rc == 1
    assert doc["state"] == "v4-only"
    assert doc["causes"] == ["no-aaaa-for-ns"]


def test_check_bad_domain_exits_two(tmp_path, capsys):
    u = healthy_depth3_universe()
    rc = run_cli(["check", "bad..name", "--roots", write_hints(tmp_path, u), *FAST], u)
    assert rc == 2


def test_check_unreachable_roots_exits_two(tmp_path, capsys):
    u = healthy_depth3_universe()
    hints = tmp_path / "roots.hints"
    hints.write_text("a.root v4 192.0.2.254\n")

    class Dead:
        def exchange(self, server, transport, payload, timeout):
            from v6ready.query import TransportTimeout

            raise TransportTimeout("dead")

    rc = cli.main(
        ["check", "d.t", "--roots", str(hints), "--retries", "1", *FAST],
        transport_factory=lambda cfg: Dead(),
    )
    assert rc == 2


def test_check_conflicting_protocol_flags_rejected(tmp_path, capsys):
    u = healthy_depth3_universe()
    with pytest.raises(SystemExit):  # argparse mutual exclusion
        run_cli(["check", "d.t", "--v4-only", "--v6-only",
                 "--roots", write_hints(tmp_path, u)], u)


def four_state_universe():
    return build_universe([
        root_fixture(),
        healthy_zone("t", 10),
        healthy_zone("dualzone.t", 11),
        zone_fixture("v4zone.t", [("ns.v4zone.t", ["10.60.0.1"], [])]),
        zone_fixture("v6zone.t", [("ns.v6zone.t", [], ["fd00:60::2"])]),
        zone_fixture("nozone.t", [("ns.nozone.t", [], [])]),
    ])


def test_scan_four_states_summary(tmp_path, capsys):
    u = four_state_universe()
    domains = tmp_path / "domains.txt"
    domains.write_text("dualzone.t\nv4zone.t\nv6zone.t\nnozone.t\n")
    out = tmp_path / "results.jsonl"
    rc = run_cli([
        "scan", str(domains), "--roots", write_hints(tmp_path, u),
        "--output", str(out), "--concurrency", "1", *FAST,
    ], u)
    assert rc == 0
    text = capsys.readouterr().out
    assert "scanned 4 domains" in text
    for state in ("dual", "v4-only", "v6-only", "none"):
        assert f"{state:8s}      1   25.00%" in text
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert {r["domain"]: r["state"] for r in rows} == {
        "dualzone.t": "dual", "v4zone.t": "v4-only",
        "v6zone.t": "v6-only", "nozone.t": "none",
    }


def test_scan_resumes_from_journal_without_new_exchanges(tmp_path, capsys):
    u = four_state_universe()
    domains = tmp_path / "domains.txt"
    domains.write_text("dualzone.t\nv4zone.t\n")
    journal = tmp_path / "journal.txt"
    out = tmp_path / "results.jsonl"
    args = [
        "scan", str(domains), "--roots", write_hints(tmp_path, u),
        "--journal", str(journal), "--output", str(out),
        "--concurrency", "1", *FAST,
    ]
    assert run_cli(args, u) == 0
    first_packets = len(u.log.entries)
    assert journal.read_text().splitlines() == ["dualzone.t", "v4zone.t"]
    assert run_cli(args, u) == 0
    assert len(u.log.entries) == first_packets  # rerun touched the network zero times
    assert "2 already journaled" in capsys.readouterr().out


def test_scan_rank_csv_preserves_ranks(tmp_path):
    u = four_state_universe()
    domains = tmp_path / "ranked.csv"
    domains.write_text("1,dualzone.t\n20000,v4zone.t\n")
    out = tmp_path / "results.jsonl"
    rc = run_cli([
        "scan", str(domains), "--roots", write_hints(tmp_path, u),
        "--output", str(out), "--concurrency", "1", *FAST,
    ], u)
    assert rc == 0
    rows = {r["domain"]: r for r in map(json.loads, out.read_text().splitlines())}
    assert rows["dualzone.t"]["rank"] == 1
    assert rows["v4zone.t"]["rank"] == 20000


def write_tuples(path, tuples):
    with open(path, "w") as fh:
        for t in tuples:
            fh.write(json.dumps({
                "count": t.count, "time_first": t.time_first,
                "time_last": t.time_last, "rrname": str(t.rrname),
                "rrtype": str(t.rrtype), "bailiwick": str(t.bailiwick),
                "rdata": list(t.rdata),
            }) + "\n")


def test_simulate_matches_ground_truth(tmp_path, capsys):
    u = combined_two_scenario_universe()
    truth = ground_truth(u)
    tuple_path = tmp_path / "tuples.jsonl"
    write_tuples(tuple_path, fixture_tuples(u))
    outdir = tmp_path / "out"
    rc = cli.main(["simulate", str(tuple_path), "--out", str(outdir)])
    assert rc == 0
    lines = (outdir / "verdicts.jsonl").read_text().splitlines()
    docs = [json.loads(l) for l in lines[1:]]
    verdicts = {d["zone"]: (d["v4"], d["v6"]) for d in docs}
    for zone, expected in truth.items():
        assert verdicts[str(zone)] == (expected[V4], expected[V6]), str(zone)
    left = [d for d in docs if d["zone"] == "example.org"][0]
    right = [d for d in docs if d["zone"] == "sub.example.org"][0]
    assert left["state"] == "v4-only" and "no-aaaa-for-ns" in left["causes"]
    assert right["state"] == "v4-only" and "missing-glue" in right["causes"]
    stats = json.loads((outdir / "stats.json").read_text())
    assert stats["total_zones"] == len(docs)


def test_simulate_empty_input_exits_zero(tmp_path, capsys):
    empty = tmp_path / "empty.tsv"
    empty.write_text("")
    outdir = tmp_path / "out"
    rc = cli.main(["simulate", str(empty), "--out", str(outdir)])
    assert rc == 0
    stats = json.loads((outdir / "stats.json").read_text())
    assert stats["total_zones"] == 0


def test_simulate_all_inputs_unreadable_exits_two(tmp_path, capsys):
    rc = cli.main(["simulate", str(tmp_path / "missing.tsv"),
                   "--out", str(tmp_path / "out")])
    assert rc == 2


def test_simulate_with_psl_writes_cdf(tmp_path):
    u = combined_two_scenario_universe()
    tuple_path = tmp_path / "tuples.jsonl"
    write_tuples(tuple_path, fixture_tuples(u))
    psl = tmp_path / "psl.dat"
    psl.write_text("org\nnet\ntest\n")
    outdir = tmp_path / "out"
    rc = cli.main(["simulate", str(tuple_path), "--psl", str(psl),
                   "--out", str(outdir)])
    assert rc == 0
    assert (outdir / "nsset-cdf.csv").exists()
    assert (outdir / "states.csv").read_text().startswith("group,")


def test_environment_variables_override_defaults(tmp_path, capsys, monkeypatch):
    u = broken_oob_universe()
    monkeypatch.setenv("V6READY_FORMAT", "structured")
    monkeypatch.setenv("V6READY_ROOTS", write_hints(tmp_path, u))
    monkeypatch.setenv("V6READY_RETRY_WAIT", "0")
    monkeypatch.setenv("V6READY_SEED", "1")
    rc = run_cli(["check", "example.org", "--timeout", "0.2",
                  "--tcp-timeout", "0.2"], u)
    doc = json.loads(capsys.readouterr().out)
    assert rc == 1
    assert doc["format"] == "chain-result"


def test_scan_with_worker_pool(tmp_path, capsys):
    u = four_state_universe()
    domains = tmp_path / "domains.txt"
    domains.write_text("dualzone.t\nv4zone.t\nv6zone.t\nnozone.t\n")
    out = tmp_path / "results.jsonl"
    rc = run_cli([
        "scan", str(domains), "--roots", write_hints(tmp_path, u),
        "--output", str(out), "--concurrency", "4", *FAST,
    ], u)
    assert rc == 0
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert {r["domain"]: r["state"] for r in rows} == {
        "dualzone.t": "dual", "v4zone.t": "v4-only",
        "v6zone.t": "v6-only", "nozone.t": "none",
    }


# -- end-to-end over real loopback sockets -----------------------------------


def test_loopback_end_to_end_exit_codes(tmp_path, capsys):
    u_ok = healthy_depth3_universe()
    with LoopbackServer(u_ok) as srv:
        hints = tmp_path / "loop.hints"
        hints.write_text(srv.root_hints_text())
        rc = cli.main([
            "check", "d.t", "--roots", str(hints), "--port", str(srv.port),
            "--timeout", "1.0", "--tcp-timeout", "1.0", "--retry-wait", "0",
            "--retries", "2", "--seed", "1",
        ])
    assert rc == 0

    u_bad = broken_oob_universe()
    with LoopbackServer(u_bad) as srv:
        hints = tmp_path / "loop2.hints"
        hints.write_text(srv.root_hints_text())
        rc = cli.main([
            "check", "example.org", "--roots", str(hints), "--port", str(srv.port),
            "--timeout", "1.0", "--tcp-timeout", "1.0", "--retry-wait", "0",
            "--retries", "2", "--seed", "1",
        ])
        out = capsys.readouterr().out
    assert rc == 1
    assert "no-aaaa-for-ns" in out


def test_loopback_unreachable_port_exits_two(tmp_path):
    hints = tmp_path / "dead.hints"
    hints.write_text("a.root v4 127.0.0.1\n")
    rc = cli.main([
        "check", "d.t", "--roots", str(hints), "--port", "1",  # closed port
        "--timeout", "0.2", "--tcp-timeout", "0.2", "--retry-wait", "0",
        "--retries", "1", "--seed", "1",
    ])
    assert rc == 2


def test_check_structured_output_is_deterministic(tmp_path, capsys):
    def run():
        u = combined_two_scenario_universe()
        rc = run_cli([
            "check", "sub.example.org", "--roots", write_hints(tmp_path, u),
            "--format", "structured", *FAST,
        ], u)
        assert rc == 1
        return capsys.readouterr().out

    assert run() == run()


def test_loopback_tcp_fallback_on_truncation(tmp_path, capsys):
    # Real sockets end to end: the zone truncates UDP, so the client must
    # complete the walk over TCP.
    from v6ready.mocknet import TRUNCATE_UDP
    from universes import healthy_zone, root_fixture
    from v6ready.mocknet import build_universe

    u = build_universe([
        root_fixture(),
        healthy_zone("t", 10, defects={TRUNCATE_UDP}),
        healthy_zone("d.t", 11, defects={TRUNCATE_UDP}),
    ])
    with LoopbackServer(u) as srv:
        hints = tmp_path / "tcp.hints"
        hints.write_text(srv.root_hints_text())
        rc = cli.main([
            "check", "d.t", "--roots", str(hints), "--port", str(srv.port),
            "--timeout", "1.0", "--tcp-timeout", "1.0", "--retry-wait", "0",
            "--retries", "2", "--seed", "1", "--format", "structured",
        ])
    doc = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert doc["state"] == "dual"
