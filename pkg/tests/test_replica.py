"""Replica construction, the bundling morphism, and lifted lattice operations."""

import pytest

from matchlattice import (
    LinearPref,
    Market,
    Matching,
    NotStable,
    QuotaLinearChoice,
    SetListChoice,
    blair_geq_firms,
    blair_geq_firms_q,
    brute_join,
    brute_meet,
    build_related_market,
    enumerate_matchings,
    enumerate_stable,
    lifted_join_firms,
    lifted_join_workers,
    lifted_meet_firms,
    phi,
    phi_inverse_stable,
    phi_preimage,
    q_extended_choose,
    random_market,
    RandomMarketSpec,
    validate_market,
)
from matchlattice.replica import ReplicaMap, as_set_list, related_market_to_json


@pytest.fixture(scope="module")
def micro():
    """Two firms, one worker with quota 2 who wants both."""
    m = Market(
        "many_to_many_responsive",
        {
            "f1": QuotaLinearChoice(["w"], 1),
            "f2": QuotaLinearChoice(["w"], 1),
        },
        worker_prefs={"w": LinearPref(("f1", "f2"))},
        worker_quotas={"w": 2},
    )
    return build_related_market(m)


def test_micro_related_market(micro):
    assert micro.market.variant == "many_to_one"
    assert micro.market.worker_ids == ("w#1", "w#2")
    for r in micro.market.worker_ids:
        assert micro.market.worker_pref(r).order == ("f1", "f2")
    assert validate_market(micro.market).ok


def test_micro_phi_and_non_injectivity(micro):
    a = Matching([("f1", "w#1"), ("f2", "w#2")])
    b = Matching([("f1", "w#2"), ("f2", "w#1")])
    bundled = Matching([("f1", "w"), ("f2", "w")])
    assert phi(micro, a) == bundled
    assert phi(micro, b) == bundled  # phi is not injective off the stable set
    assert phi(micro, Matching.empty()) == Matching.empty()


def test_micro_phi_preimage_canonical(micro):
    bundled = Matching([("f1", "w"), ("f2", "w")])
    assert phi_preimage(micro, bundled) == Matching([("f1", "w#1"), ("f2", "w#2")])
    assert phi_preimage(micro, Matching.empty()) == Matching.empty()


def test_q_extension_lowest_index_rules(micro):
    c = micro.market.firm_choice("f1")
    assert c.choose({"w#1", "w#2"}) == {"w#1"}
    assert c.choose({"w#2"}) == {"w#2"}


def test_q_extension_per_worker_lowest_index():
    base = SetListChoice([["a", "b"], ["a"], ["b"]], ground=["a", "b"])
    rmap = ReplicaMap.build(["a", "b"], {"a": 2, "b": 3})
    chosen = q_extended_choose(base, rmap, {"a#2", "b#1", "b#3"})
    assert chosen == {"a#2", "b#1"}


def test_q_extension_projection_identity():
    """pi(Cq(S)) == C(pi(S)) on every replica subset."""
    from itertools import combinations

    base = SetListChoice([["a", "b"], ["a"], ["b"]], ground=["a", "b"])
    rmap = ReplicaMap.build(["a", "b"], {"a": 2, "b": 2})
    replicas = list(rmap.replicas)
    for r in range(len(replicas) + 1):
        for combo in combinations(replicas, r):
            s = frozenset(combo)
            chosen = q_extended_choose(base, rmap, s)
            assert rmap.project(chosen) == base.choose(rmap.project(s))
            assert chosen <= s


def test_quota_one_related_market_is_isomorphic():
    m = random_market(3, RandomMarketSpec(variant="many_to_many_responsive",
                                          n_firms=3, n_workers=3, worker_quota_max=1))
    rm = build_related_market(m)
    assert rm.market.worker_ids == tuple(f"{w}#1" for w in m.worker_ids)
    src_stable = enumerate_stable(m)
    rel_stable = enumerate_stable(rm.market)
    relabeled = {
        Matching([(f, w.split("#")[0]) for f, w in mu.edges] ) for mu in rel_stable
    }
    assert relabeled == set(src_stable)


def test_related_market_size_and_validation():
    m = Market(
        "many_to_many_responsive",
        {"f1": QuotaLinearChoice(["w1", "w2"], 2), "f2": QuotaLinearChoice(["w2", "w1"], 1)},
        worker_prefs={"w1": LinearPref(("f1", "f2")), "w2": LinearPref(("f2", "f1"))},
        worker_quotas={"w1": 2, "w2": 1},
    )
    rm = build_related_market(m)
    assert len(rm.market.worker_ids) == 3
    assert validate_market(rm.market).ok  # q-extensions stay substitutable


def test_rejects_non_responsive_market(example1):
    m, _ = example1
    from matchlattice import SchemaError

    with pytest.raises(SchemaError):
        build_related_market(m)


def seeded_responsive(seed):
    return random_market(
        seed,
        RandomMarketSpec(
            variant="many_to_many_responsive",
            n_firms=3,
            n_workers=3,
            worker_quota_max=2,
            firm_kind="mixed",
        ),
    )


def test_phi_surjective_via_preimage_round_trip():
    for seed in range(8):
        m = seeded_responsive(seed)
        rm = build_related_market(m)
        for nu in enumerate_matchings(m):
            assert phi(rm, phi_preimage(rm, nu)) == nu


def test_stable_sets_in_bijection():
    for seed in range(8):
        m = seeded_responsive(seed)
        rm = build_related_market(m)
        src = enumerate_stable(m)
        rel = enumerate_stable(rm.market)
        image = [phi(rm, mu) for mu in rel]
        assert len(rel) == len(src)
        assert len(set(image)) == len(image)  # injective on the stable set
        assert set(image) == set(src)


def test_phi_acts_as_projection_on_firms():
    for seed in range(5):
        m = seeded_responsive(seed)
        rm = build_related_market(m)
        for nu in enumerate_matchings(m):
            mu = phi_preimage(rm, nu)
            bundled = phi(rm, mu)
            for f in m.firm_ids:
                assert bundled.of_firm(f) == rm.rmap.project(mu.of_firm(f))
                assert (mu.of_firm(f) == frozenset()) == (bundled.of_firm(f) == frozenset())


def test_order_isomorphism_on_stable_pairs():
    for seed in range(8):
        m = seeded_responsive(seed)
        rm = build_related_market(m)
        rel = enumerate_stable(rm.market)
        for a in rel:
            for b in rel:
                assert blair_geq_firms(rm.market, a, b) == blair_geq_firms_q(
                    m, phi(rm, a), phi(rm, b)
                )


def test_phi_inverse_stable_round_trip_and_rejection():
    m = seeded_responsive(1)
    rm = build_related_market(m)
    stable = enumerate_stable(m)
    for nu in stable:
        mu = phi_inverse_stable(rm, nu)
        assert phi(rm, mu) == nu
    non_stable = next(
        nu for nu in enumerate_matchings(m) if nu not in stable
    )
    with pytest.raises(NotStable):
        phi_inverse_stable(rm, non_stable)


def test_phi_inverse_of_stable_empty_matching():
    m = Market(
        "many_to_many_responsive",
        {"f1": QuotaLinearChoice([], 1, ground=["w1"])},
        worker_prefs={"w1": LinearPref(())},
        worker_quotas={"w1": 2},
    )
    rm = build_related_market(m)
    assert enumerate_stable(m) == [Matching.empty()]
    assert phi_inverse_stable(rm, Matching.empty()) == Matching.empty()


def test_micro_market_unique_stable_and_lifted_join(micro):
    stable = enumerate_stable(micro.source)
    assert stable == [Matching([("f1", "w"), ("f2", "w")])]
    assert len(enumerate_stable(micro.market)) == 1
    only = stable[0]
    assert lifted_join_firms(micro, only, only) == only
    assert lifted_meet_firms(micro, only, only) == only


def test_lifted_operations_match_oracle():
    for seed in range(8):
        m = seeded_responsive(seed)
        rm = build_related_market(m)
        stable = enumerate_stable(m)
        for a in stable:
            for b in stable:
                join = lifted_join_firms(rm, a, b)
                meet = lifted_meet_firms(rm, a, b)
                assert join == brute_join(m, "blair_firms", a, b, stable)
                assert meet == brute_meet(m, "blair_firms", a, b, stable)
                assert lifted_join_workers(rm, a, b) == meet
                assert join == lifted_join_firms(rm, b, a)
        for a in stable:
            assert lifted_join_firms(rm, a, a) == a


def test_lifted_agrees_with_direct_general_engine():
    """Responsive markets also run on the engine directly; both routes agree."""
    from matchlattice import stable_join_firms, stable_meet_firms

    for seed in range(6):
        m = seeded_responsive(seed)
        rm = build_related_market(m)
        stable = enumerate_stable(m)
        for a in stable:
            for b in stable:
                assert stable_join_firms(m, a, b) == lifted_join_firms(rm, a, b)
                assert stable_meet_firms(m, a, b) == lifted_meet_firms(rm, a, b)


def test_as_set_list_reproduces_lazy_choice():
    from itertools import combinations

    m = seeded_responsive(2)
    rm = build_related_market(m)
    for f in m.firm_ids:
        lazy = rm.market.firm_choice(f)
        materialised = as_set_list(lazy)
        replicas = list(lazy.ground)
        for r in range(len(replicas) + 1):
            for combo in combinations(replicas, r):
                s = frozenset(combo)
                assert materialised.choose(s) == lazy.choose(s)


def test_related_market_json_emission():
    m = seeded_responsive(0)
    rm = build_related_market(m)
    obj = related_market_to_json(rm)
    again = Market.from_json(obj)
    assert again.worker_ids == rm.market.worker_ids
    assert validate_market(again).ok
    # identical stable sets under the re-encoded choice functions
    assert set(enumerate_stable(again)) == set(enumerate_stable(rm.market))
