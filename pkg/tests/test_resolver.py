import pytest

from universes import (
    N,
    TEST_POLICY,
    broken_oob_universe,
    crawl,
    healthy_depth3_universe,
    healthy_depth4_universe,
    healthy_zone,
    make_resolver,
    missing_glue_universe,
    root_fixture,
)
from v6ready.classify import CAUSE_MISSING_GLUE, CAUSE_NO_AAAA_FOR_NS
from v6ready.mocknet import (
    BLACKHOLE_V6,
    FixtureNs,
    FixtureZone,
    WRONG_NS_SET_CHILD,
    build_universe,
    zone_fixture,
)
from v6ready.records import AddrRecords, V4, V6
from v6ready.resolver import (
    PROTOCOL_V4_ONLY,
    PROTOCOL_V6_ONLY,
    Resolver,
    RootUnreachable,
)


def test_broken_oob_scenario_is_v4_only():
    u = broken_oob_universe()
    resolver = make_resolver(u)
    res = resolver.resolve_chain("example.org")
    assert res.v4_resolvable and not res.v6_resolvable
    assert res.state == "v4-only"
    assert res.status.causes == {CAUSE_NO_AAAA_FOR_NS}
    assert not res.status.intent_v6
    # the NS host zone itself is fine
    assert resolver.resolve_chain("example.net").state == "dual"


def test_missing_glue_scenario_is_v4_only():
    u = missing_glue_universe()
    resolver = make_resolver(u)
    res = resolver.resolve_chain("sub.example.org")
    assert res.state == "v4-only"
    assert res.status.causes == {CAUSE_MISSING_GLUE}
    assert res.status.intent_v6
    assert resolver.resolve_chain("example.org").state == "dual"


def test_dual_stack_depth3_with_empty_nonterminal_gap():
    # www.s.d.t is not a zone; neither is an intermediate boundary below it.
    u = healthy_depth3_universe()
    resolver = make_resolver(u)
    res = resolver.resolve_chain("www.deep.s.d.t")
    assert res.state == "dual"
    assert [str(s.zone) for s in res.steps] == ["t", "d.t", "s.d.t"]


def test_protocol_isolation_v6_only_emits_no_v4_packets():
    u = healthy_depth3_universe()
    crawl(u, protocol_filter=PROTOCOL_V6_ONLY)
    assert u.log.queries(V4) == []
    assert len(u.log.queries(V6)) > 0


def test_protocol_isolation_v4_only_emits_no_v6_packets():
    u = healthy_depth3_universe()
    crawl(u, protocol_filter=PROTOCOL_V4_ONLY)
    assert u.log.queries(V6) == []
    assert len(u.log.queries(V4)) > 0


def test_query_frugality_and_qname_minimization_depth4():
    u = healthy_depth4_universe()
    resolver = make_resolver(u)
    resolver.resolve_chain("c.b.a.t")
    keys = u.log.exchange_keys()
    assert len(keys) == len(set(keys)), "duplicate (server, qname, qtype) exchange"
    ns_qnames = {q for _, q, t in keys if t == "NS"}
    assert ns_qnames == {"t", "a.t", "b.a.t", "c.b.a.t"}  # one boundary each


def test_child_only_ns_discovered_and_queried():
    u = build_universe([
        root_fixture(),
        healthy_zone("t", 10),
        healthy_zone("d.t", 11, defects={WRONG_NS_SET_CHILD}),
    ])
    resolver = make_resolver(u)
    res = resolver.resolve_chain("d.t")
    step = res.steps[-1]
    extra = step.child_ns_set - step.parent_ns_set
    assert len(extra) == 1
    extra_name = next(iter(extra))
    assert str(extra_name).startswith("ns-child-only")
    queried_addrs = {addr for addr, _, _ in step.queried_servers}
    assert u.listen_addrs(extra_name, V4)[0] in queried_addrs


def test_liveness_probe_v4_only_listener():
    u = build_universe([
        root_fixture(),
        healthy_zone("t", 10),
        healthy_zone("d.t", 11, ns_count=1, defects={BLACKHOLE_V6}),
    ])
    resolver = make_resolver(u)
    res = resolver.resolve_chain("d.t", probe_liveness=True)
    verdicts = {(proto, verdict) for _addr, proto, verdict in res.liveness}
    assert (V4, "responsive") in verdicts
    assert (V6, "unresponsive") in verdicts


def test_liveness_rejects_unspecified_address():
    u = healthy_depth3_universe()
    resolver = make_resolver(u)
    rows = resolver.probe_ns_liveness(
        N("ns.weird.t"), AddrRecords(frozenset({"0.0.0.0"}), frozenset({"::"})),
        N("t"))
    assert {(a, p, v) for a, p, v in rows} == {
        ("0.0.0.0", V4, "invalid"), ("::", V6, "invalid")}


def test_liveness_healthy_both_stacks():
    u = healthy_depth3_universe()
    resolver = make_resolver(u)
    res = resolver.resolve_chain("d.t", probe_liveness=True)
    assert res.liveness
    assert all(v == "responsive" for _, _, v in res.liveness)


def test_enrichment_mx_absent_is_empty_not_error():
    u = healthy_depth3_universe()
    resolver = make_resolver(u)
    res = resolver.resolve_chain("d.t", enrich_result=True)
    assert all(rows == [] for rows in res.enrichment["MX"].values())
    assert all(rows for rows in res.enrichment["NS"].values())


def test_deterministic_chain_result():
    def run():
        u = healthy_depth4_universe()
        resolver = make_resolver(u, seed=5)
        return resolver.resolve_chain("c.b.a.t").to_json_dict()

    assert run() == run()


def test_adding_glue_never_breaks_resolution():
    broken = missing_glue_universe()
    res_broken = crawl(broken)[1][N("sub.example.org")]
    fixed_fixtures = dict(broken.fixtures)
    sub = fixed_fixtures[N("sub.example.org")]
    from dataclasses import replace

    fixed_fixtures[N("sub.example.org")] = replace(sub, glue_in_parent=None)
    fixed = build_universe(list(fixed_fixtures.values()))
    res_fixed = crawl(fixed)[1][N("sub.example.org")]
    assert res_broken.v4_resolvable <= res_fixed.v4_resolvable
    assert res_broken.v6_resolvable <= res_fixed.v6_resolvable
    assert res_fixed.v6_resolvable


def test_cname_at_ns_target_recorded_not_chased():
    u = build_universe([
        root_fixture(),
        healthy_zone("t", 10),
        FixtureZone(
            zone=N("d.t"),
            ns=(
                FixtureNs(N("ns0.d.t"), ("10.50.0.1",), ("fd00:50::1",)),
                FixtureNs(N("alias.d.t")),
            ),
            cnames=((N("alias.d.t"), N("ns0.d.t")),),
        ),
    ])
    resolver = make_resolver(u)
    res = resolver.resolve_chain("d.t")
    step = res.steps[-1]
    assert N("alias.d.t") in step.cname_ns
    # no query was ever sent for the CNAME target chain
    assert res.state == "dual"  # ns0 alone carries the zone


def test_root_unreachable_raises():
    u = build_universe([
        zone_fixture(".", [("a.root", ["10.0.0.1"], [])]),
    ])

    class DeadTransport:
        def exchange(self, server, transport, payload, timeout):
            from v6ready.query import TransportTimeout

            raise TransportTimeout("dead")

    import random

    from v6ready.query import QueryEngine

    engine = QueryEngine(DeadTransport(), policy=TEST_POLICY,
                         rng=random.Random(1), sleep=lambda s: None)
    resolver = Resolver(engine, root_hints=u.root_hints())
    with pytest.raises(RootUnreachable):
        resolver.resolve_chain("example.com")


def test_layer_concurrency_gives_same_verdicts():
    import random as random_mod

    from v6ready.query import QueryEngine

    u1 = healthy_depth4_universe()
    sequential = make_resolver(u1).resolve_chain("c.b.a.t")
    u2 = healthy_depth4_universe()
    engine = QueryEngine(u2, policy=TEST_POLICY, rng=random_mod.Random(1),
                         sleep=lambda s: None)
    parallel = Resolver(
        engine, root_hints=u2.root_hints(), layer_concurrency=4,
    ).resolve_chain("c.b.a.t")
    assert (sequential.v4_resolvable, sequential.v6_resolvable) == (
        parallel.v4_resolvable, parallel.v6_resolvable)
    assert [str(s.zone) for s in sequential.steps] == [
        str(s.zone) for s in parallel.steps]


def test_strict_vs_lenient_reachability():
    u = build_universe([
        root_fixture(),
        healthy_zone("t", 10),
        healthy_zone("d.t", 11, defects={WRONG_NS_SET_CHILD}),
    ])
    resolver = make_resolver(u)
    res = resolver.resolve_chain("d.t")
    assert res.v6_resolvable and res.strict_v6  # parent-listed servers answer
