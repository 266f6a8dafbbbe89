import pytest

from universes import (
    combined_two_scenario_universe,
    crawl,
    healthy_depth3_universe,
    make_resolver,
    passive_verdicts,
)
from v6ready.mocknet import (
    AddressCollision,
    BLACKHOLE_V6,
    FixtureNs,
    FixtureZone,
    OrphanZone,
    build_universe,
    fixture_tuples,
    ground_truth,
    random_universe,
    zone_fixture,
)
from v6ready.names import ROOT, normalize
from v6ready.records import V4, V6

N = normalize


def test_combined_universe_serves_six_zones():
    u = combined_two_scenario_universe()
    assert len(u.fixtures) == 6
    assert N("sub.example.org") in u.fixtures
    assert u.parent[N("sub.example.org")] == N("example.org")
    assert u.parent[N("example.org")] == N("org")


def test_empty_fixture_list_builds_root_only_universe():
    u = build_universe([])
    assert sorted(map(str, u.fixtures)) == ["."]
    assert len(u.root_hints()) == 4  # two servers, both protocols


def test_missing_root_is_orphan():
    with pytest.raises(OrphanZone):
        build_universe([zone_fixture("com", [("ns.com", ["10.1.1.1"], [])])])


def test_address_collision_detected():
    with pytest.raises(AddressCollision):
        build_universe([
            zone_fixture(".", [
                ("a.root", ["10.0.0.1"], []),
                ("b.root", ["10.0.0.1"], []),
            ]),
        ])


def test_oob_ns_must_not_declare_addresses_inline():
    with pytest.raises(AddressCollision):
        build_universe([
            zone_fixture(".", [("a.root", ["10.0.0.1"], [])]),
            zone_fixture("com", [("ns.elsewhere.org", ["10.1.1.1"], [])]),
        ])


def test_glue_subset_and_defect_rules():
    from universes import missing_glue_universe

    u = missing_glue_universe()
    sub = N("sub.example.org")
    ns3 = N("ns3.sub.example.org")
    assert u.glue_addrs(sub, ns3, V4) == ("10.0.7.1",)
    assert u.glue_addrs(sub, ns3, V6) == ()  # withheld by glue_in_parent
    assert u.apex_addrs(ns3, V6) == ("fd00::71",)


def test_deterministic_packet_log_for_same_seed():
    def run():
        u = healthy_depth3_universe()
        resolver = make_resolver(u, seed=42)
        resolver.resolve_chain("s.d.t")
        return [
            (e.direction, e.address, e.protocol, e.transport, e.message.id,
             str(e.message.question.qname) if e.message.question else None)
            for e in u.log.entries
        ]

    assert run() == run()


def test_random_tree_seed7_identical_packet_log_across_runs():
    def run():
        u, _truth = random_universe(7, 50)
        resolver = make_resolver(u, seed=7)
        for zone in sorted(u.fixtures):
            if zone == ROOT:
                continue
            resolver.resolve_chain(zone)
        return [
            (e.direction, e.address, e.protocol, e.transport, e.message.id,
             str(e.message.question.qname) if e.message.question else None)
            for e in u.log.entries
        ]

    first = run()
    assert first == run()
    assert len(first) > 100


def test_random_universe_reproducible():
    u1, t1 = random_universe(7, 50)
    u2, t2 = random_universe(7, 50)
    assert t1 == t2
    assert sorted(u1.fixtures) == sorted(u2.fixtures)
    for z in u1.fixtures:
        assert u1.fixtures[z] == u2.fixtures[z]


def test_zero_defect_rates_mean_all_dual():
    rates = {k: 0.0 for k in ("ns-no-v6", "ns-no-v4", "oob-ns", "drop-aaaa-glue",
                              "drop-aaaa-apex", "wrong-ns-set-child",
                              "truncate-udp", "formerr-on-edns")}
    _u, truth = random_universe(3, 40, rates)
    assert all(t == {V4: True, V6: True} for t in truth.values())


def test_blackhole_v6_on_root_kills_all_v6():
    fixtures = [
        FixtureZone(
            zone=ROOT,
            ns=(FixtureNs(N("a.root"), ("10.0.0.1",), ("fd00::1",)),),
            defects=frozenset({BLACKHOLE_V6}),
        ),
        zone_fixture("com", [("ns.com", ["10.1.0.1"], ["fd00:1::1"])]),
    ]
    u = build_universe(fixtures)
    truth = ground_truth(u)
    assert all(not t[V6] for t in truth.values())
    assert all(t[V4] for t in truth.values())


def _independent_reachability(universe):
    """Second oracle: iterative frontier expansion, written from scratch."""
    out = {}
    for proto in (V4, V6):
        def alive(ns):
            owner = universe.owner_zone.get(ns)
            if owner is None:
                return False
            d = universe.fixtures[owner].defects
            if "blackhole-all" in d or ("blackhole-v6" in d and proto == V6):
                return False
            return True

        resolved = set()
        root_ok = any(
            universe.listen_addrs(e.name, proto) and alive(e.name)
            for e in universe.fixtures[ROOT].ns
        )
        while True:
            added = False
            for zone in universe.fixtures:
                if zone == ROOT or zone in resolved:
                    continue
                parent = universe.parent[zone]
                parent_ok = root_ok if parent == ROOT else parent in resolved
                if not parent_ok:
                    continue

                def usable(ns, side):
                    if ns.is_within(zone):
                        pool = (universe.glue_addrs(zone, ns, proto) if side == "glue"
                                else universe.apex_addrs(ns, proto))
                        return bool(pool) and alive(ns)
                    owner = universe.owner_zone.get(ns)
                    if owner is None or owner == ROOT:
                        return False
                    return (owner in resolved and bool(universe.apex_addrs(ns, proto))
                            and alive(ns))

                glue_ok = any(usable(ns, "glue") for ns in universe.delegation_ns(zone))
                zone_ok = any(usable(ns, "zone") for ns in universe.apex_ns(zone))
                if glue_ok and zone_ok:
                    resolved.add(zone)
                    added = True
            if not added:
                break
        for zone in universe.fixtures:
            if zone == ROOT:
                continue
            out.setdefault(zone, {})[proto] = zone in resolved
    return out


def test_ground_truth_matches_second_enumerator():
    for seed in range(12):
        u, truth = random_universe(seed, 50)
        assert truth == _independent_reachability(u), f"seed {seed}"


def test_conformance_no_defects_active_and_passive_dual():
    u = healthy_depth3_universe()
    truth = ground_truth(u)
    assert all(t == {V4: True, V6: True} for t in truth.values())
    _resolver, results = crawl(u)
    for zone, res in results.items():
        assert res.v4_resolvable and res.v6_resolvable, str(zone)
    _rs, table, _statuses = passive_verdicts(fixture_tuples(u))
    for zone in truth:
        assert table.zones[zone].res == {V4: True, V6: True}


def test_export_faithfulness_from_crawl_history():
    for seed in (5, 9):
        u, truth = random_universe(seed, 25, {"ns-no-v4": 0.0}, acyclic_oob=True)
        crawl(u)
        _rs, table, _statuses = passive_verdicts(u.export_tuples())
        for zone, expected in truth.items():
            assert zone in table.zones, f"{zone} missing from export"
            assert table.zones[zone].res == expected, str(zone)


def test_version_and_serials_served():
    u = build_universe([
        zone_fixture(".", [("a.root", ["10.0.0.1"], [])]),
        zone_fixture(
            "com",
            [("ns1.com", ["10.1.0.1"], []), ("ns2.com", ["10.1.0.2"], [])],
            version="srv-1.2",
            soa_serials={N("ns1.com"): 100, N("ns2.com"): 200},
        ),
    ])
    resolver = make_resolver(u)
    result = resolver.resolve_chain("com", enrich_result=True)
    assert set(result.server_version.values()) == {"srv-1.2"}
    serials = {addr: rows[0].split()[2]
               for addr, rows in result.enrichment["SOA"].items() if rows}
    assert sorted(serials.values()) == ["100", "200"]


def test_fixture_file_round_trip(tmp_path):
    import io

    from universes import combined_two_scenario_universe
    from v6ready.mocknet import dump_fixtures, load_fixtures

    u = combined_two_scenario_universe()
    buf = io.StringIO()
    dump_fixtures(buf, u.fixtures.values())
    path = tmp_path / "fixtures.jsonl"
    path.write_text(buf.getvalue())
    loaded = load_fixtures(path)
    rebuilt = build_universe(loaded)
    assert sorted(rebuilt.fixtures) == sorted(u.fixtures)
    for zone in u.fixtures:
        assert rebuilt.fixtures[zone] == u.fixtures[zone], str(zone)
    assert ground_truth(rebuilt) == ground_truth(u)


def test_restoring_dropped_records_never_breaks_resolution():
    # Removing record-dropping defects only adds records; no zone may flip
    # from resolvable to unresolvable on either protocol, in any path.
    from dataclasses import replace

    from universes import crawl
    from v6ready.mocknet import DROP_AAAA_APEX, DROP_AAAA_GLUE
    from v6ready.passive import fixed_point, ingest

    for seed in (21, 22, 23):
        u, truth = random_universe(seed, 30, {"drop-aaaa-glue": 0.3,
                                              "drop-aaaa-apex": 0.3})
        improved_fixtures = [
            replace(fz, defects=fz.defects - {DROP_AAAA_GLUE, DROP_AAAA_APEX})
            for fz in u.fixtures.values()
        ]
        improved = build_universe(improved_fixtures)
        truth2 = ground_truth(improved)
        for zone, before in truth.items():
            after = truth2[zone]
            for proto in (V4, V6):
                assert before[proto] <= after[proto], (seed, str(zone), proto)
        table_before = fixed_point(ingest(fixture_tuples(u)).record_sets)
        table_after = fixed_point(ingest(fixture_tuples(improved)).record_sets)
        for zone in truth:
            for proto in (V4, V6):
                assert (table_before.zones[zone].res[proto]
                        <= table_after.zones[zone].res[proto]), (seed, str(zone))
        _r, before_active = crawl(u)
        _r, after_active = crawl(improved)
        for zone in truth:
            assert before_active[zone].v6_resolvable <= after_active[zone].v6_resolvable
            assert before_active[zone].v4_resolvable <= after_active[zone].v4_resolvable


def test_latency_and_loss_knobs():
    import random as random_mod

    from universes import TEST_POLICY, healthy_zone, root_fixture
    from v6ready.query import QueryEngine, ServerAddress, TIMEOUT
    from v6ready.records import RRType

    fixtures = [root_fixture(), healthy_zone("t", 10, ns_count=1)]
    addr = "10.10.0.1"

    # total loss: the engine exhausts its budget and reports a timeout
    u = build_universe(fixtures, loss={addr: 1.0})
    engine = QueryEngine(u, policy=TEST_POLICY, rng=random_mod.Random(1),
                         sleep=lambda s: None)
    outcome = engine.query(ServerAddress(addr), N("t"), RRType.SOA)
    assert outcome.kind == TIMEOUT
    assert len(u.log.queries()) == 4  # every attempt was delivered and lost

    # latency inflates the logical clock between entries
    u_fast = build_universe(fixtures)
    u_slow = build_universe(fixtures, latency={addr: 50})
    for universe in (u_fast, u_slow):
        engine = QueryEngine(universe, policy=TEST_POLICY,
                             rng=random_mod.Random(1), sleep=lambda s: None)
        engine.query(ServerAddress(addr), N("t"), RRType.SOA)
    assert u_slow.log.entries[0].timestamp > u_fast.log.entries[0].timestamp
