"""Transport between responsive many-to-many markets and many-to-one markets.

A worker with quota ``q`` becomes ``q`` replicas (``w#1`` ... ``w#q``), each
carrying the worker's linear order over firms.  Firm choice functions extend
to replicas lazily: project the offered replicas down to base workers, apply
the base choice, then take the lowest-index replica present of each chosen
worker.  Substitutability survives this extension, the stable sets of the
two markets are in order-preserving bijection through the bundling map
``phi``, and the lattice operations lift along it.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .errors import CapExceeded, NotStable, PreimageNotStable, SchemaError
from .market import (
    AgentId,
    ChoiceFunction,
    LinearPref,
    Market,
    SetListChoice,
    sort_agents,
)
from .matching import Matching, blair_geq_firms, is_stable
from . import tarski


def replica_id(w: AgentId, t: int) -> AgentId:
    return f"{w}#{t}"


@dataclass(frozen=True)
class ReplicaMap:
    """Bookkeeping between base workers and their replicas."""

    base_workers: tuple[AgentId, ...]
    quotas: dict[AgentId, int]
    replicas: tuple[AgentId, ...]
    base_of: dict[AgentId, AgentId]
    index_of: dict[AgentId, int]
    replicas_of: dict[AgentId, tuple[AgentId, ...]]

    @staticmethod
    def build(workers, quotas) -> "ReplicaMap":
        base = tuple(sort_agents(workers))
        replicas: list[AgentId] = []
        base_of: dict[AgentId, AgentId] = {}
        index_of: dict[AgentId, int] = {}
        replicas_of: dict[AgentId, tuple[AgentId, ...]] = {}
        for w in base:
            mine = tuple(replica_id(w, t) for t in range(1, quotas[w] + 1))
            replicas_of[w] = mine
            replicas.extend(mine)
            for t, r in enumerate(mine, start=1):
                base_of[r] = w
                index_of[r] = t
        return ReplicaMap(base, dict(quotas), tuple(replicas), base_of, index_of, replicas_of)

    def project(self, replicas) -> frozenset[AgentId]:
        return frozenset(self.base_of[r] for r in replicas)


class QExtensionChoice(ChoiceFunction):
    """A base choice over workers, lifted to their replicas.

    Evaluated per query, never materialised: the chosen workers are
    ``base.choose(project(S))`` and each is represented by its lowest-index
    replica present in ``S``.
    """

    def __init__(self, base: ChoiceFunction, rmap: ReplicaMap, ground=None):
        super().__init__(rmap.replicas if ground is None else ground)
        self.base = base
        self.rmap = rmap

    def _choose(self, s: frozenset[AgentId]) -> frozenset[AgentId]:
        lowest: dict[AgentId, AgentId] = {}
        for r in s:
            w = self.rmap.base_of[r]
            best = lowest.get(w)
            if best is None or self.rmap.index_of[r] < self.rmap.index_of[best]:
                lowest[w] = r
        chosen = self.base.choose(frozenset(lowest))
        return frozenset(lowest[w] for w in chosen)

    @property
    def list_length(self) -> int:
        return self.base.list_length

    def rebased(self, ground) -> "QExtensionChoice":
        return QExtensionChoice(self.base, self.rmap, frozenset(ground))

    def __repr__(self):
        return f"QExtensionChoice({self.base!r})"


def q_extended_choose(base: ChoiceFunction, rmap: ReplicaMap, offered) -> frozenset[AgentId]:
    """One-shot evaluation of the replica extension of ``base``."""
    return QExtensionChoice(base, rmap).choose(offered)


@dataclass(frozen=True)
class RelatedMarket:
    """A responsive market together with its derived many-to-one market."""

    source: Market
    market: Market
    rmap: ReplicaMap


def build_related_market(m: Market) -> RelatedMarket:
    """Replicate workers by quota and extend firm choices to replicas."""
    if m.variant != "many_to_many_responsive":
        raise SchemaError("related markets are built from responsive many-to-many markets")
    rmap = ReplicaMap.build(m.worker_ids, {w: m.worker_quota(w) for w in m.worker_ids})
    firms = {f: QExtensionChoice(m.firm_choice(f), rmap) for f in m.firm_ids}
    prefs = {r: LinearPref(m.worker_pref(rmap.base_of[r]).order) for r in rmap.replicas}
    derived = Market("many_to_one", firms, worker_prefs=prefs)
    return RelatedMarket(m, derived, rmap)


def phi(rm: RelatedMarket, mu: Matching) -> Matching:
    """Bundle replica assignments back into a many-to-many matching."""
    mu.validate_for(rm.market)
    edges = set()
    for w in rm.rmap.base_workers:
        for r in rm.rmap.replicas_of[w]:
            for f in mu.of_worker(r):
                edges.add((f, w))
    out = Matching(edges)
    out.validate_for(rm.source)
    return out


def phi_preimage(rm: RelatedMarket, nu: Matching) -> Matching:
    """The canonical replica assignment mapping to ``nu`` under phi.

    Each worker's firms are handed to her replicas best-first: the most
    preferred firm goes to replica 1, and so on.  ``phi`` of the result is
    ``nu`` again, which witnesses surjectivity.
    """
    nu.validate_for(rm.source)
    edges = []
    for w in rm.rmap.base_workers:
        pref = rm.source.worker_pref(w)
        held = sorted(nu.of_worker(w), key=pref.rank)
        for t, f in enumerate(held, start=1):
            edges.append((f, replica_id(w, t)))
    out = Matching(edges)
    out.validate_for(rm.market)
    return out


def phi_inverse_stable(rm: RelatedMarket, nu: Matching) -> Matching:
    """The unique stable preimage of a stable many-to-many matching."""
    if not is_stable(rm.source, nu):
        raise NotStable("phi_inverse_stable requires a stable matching of the source market")
    mu = phi_preimage(rm, nu)
    if not is_stable(rm.market, mu):
        raise PreimageNotStable(
            "canonical preimage is not stable in the related market; "
            "this indicates a stability bug in the source market"
        )
    return mu


def blair_geq_firms_q(m: Market, nu: Matching, nu2: Matching) -> bool:
    """Firm order on many-to-many matchings, via the source choice functions."""
    return blair_geq_firms(m, nu, nu2)


def _lifted(rm: RelatedMarket, nu: Matching, nu2: Matching, op) -> Matching:
    a = phi_inverse_stable(rm, nu)
    b = phi_inverse_stable(rm, nu2)
    return phi(rm, op(rm.market, a, b, check=False))


def lifted_join_firms(rm: RelatedMarket, nu: Matching, nu2: Matching) -> Matching:
    """Firm-order join of two stable responsive matchings, via the replica market."""
    return _lifted(rm, nu, nu2, tarski.stable_join_firms)


def lifted_meet_firms(rm: RelatedMarket, nu: Matching, nu2: Matching) -> Matching:
    return _lifted(rm, nu, nu2, tarski.stable_meet_firms)


def lifted_join_workers(rm: RelatedMarket, nu: Matching, nu2: Matching) -> Matching:
    """Worker-order join; equals the firm-order meet by duality."""
    return lifted_meet_firms(rm, nu, nu2)


def lifted_meet_workers(rm: RelatedMarket, nu: Matching, nu2: Matching) -> Matching:
    return lifted_join_firms(rm, nu, nu2)


def as_set_list(c: ChoiceFunction, cap: int = 14) -> SetListChoice:
    """Materialise any path-independent choice function as a set list.

    Collects the image of the choice function and orders it so that a set
    beats everything it would be chosen over; first-fit evaluation then
    reproduces the original on every input, which is asserted.  Exists so
    lazily evaluated choices can be emitted in the market JSON schema.
    """
    items = tuple(sort_agents(c.ground))
    if len(items) > cap:
        raise CapExceeded(f"cannot materialise over {len(items)} elements (cap {cap})")
    image = set()
    subsets = []
    for r in range(len(items) + 1):
        subsets.extend(frozenset(x) for x in combinations(items, r))
    for s in subsets:
        chosen = c.choose(s)
        if chosen:
            image.add(chosen)
    remaining = sorted(image, key=lambda x: (len(x), sort_agents(x)))
    ordered: list[frozenset] = []
    while remaining:
        maximal = [
            a
            for a in remaining
            if all(b == a or c.choose(a | b) != b for b in remaining)
        ]
        if not maximal:
            raise SchemaError("choice function is not path independent; no set-list form")
        maximal.sort(key=lambda x: (-len(x), sort_agents(x)))
        head = maximal[0]
        ordered.append(head)
        remaining.remove(head)
    out = SetListChoice(ordered, ground=c.ground)
    for s in subsets:
        if out.choose(s) != c.choose(s):
            raise SchemaError("choice function is not path independent; no set-list form")
    return out


def related_market_to_json(rm: RelatedMarket, cap: int = 14) -> dict:
    """The related market in the standard schema (set lists for firm choices)."""
    firms = {
        f: {
            "kind": "set_list",
            "list": [sort_agents(x) for x in as_set_list(rm.market.firm_choice(f), cap).subsets],
        }
        for f in rm.market.firm_ids
    }
    workers = {
        r: {"kind": "linear", "order": list(rm.market.worker_pref(r).order)}
        for r in rm.market.worker_ids
    }
    return {"variant": "many_to_one", "firms": firms, "workers": workers}
