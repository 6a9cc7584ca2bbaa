"""Layered arborescence instances.

The main family is a labeled layered DAG over a ground set [m]: vertices
of layer i carry subset labels whose size grows by eps*rho*m per layer
through an expanding phase and shrinks again through a collapsing phase,
with edges given by label inclusion.  Vertex ids are (layer, colex rank
of the label), so instances are reproducible and edges never need to be
stored: adjacency is regenerated from the labels.

Small explicit instances (private-block gap graphs, the shared-sink
counterexample, a hand-sized quality-1 example) share the same interface.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from .scalars import Monomial, Rat, Scalar

SIZE_CAP_DEFAULT = 24

Vertex = tuple[int, int]          # (layer, rank)
Edge = tuple[Vertex, Vertex]


class InstanceError(ValueError):
    pass


# ---------------------------------------------------------------------------
# colexicographic subset ranking


def rank_colex(mask: int) -> int:
    rank = 0
    i = 1
    pos = 0
    m = mask
    while m:
        if m & 1:
            rank += math.comb(pos, i)
            i += 1
        m >>= 1
        pos += 1
    return rank


def unrank_colex(rank: int, k: int) -> int:
    """Bitmask of the rank-th k-subset in colex order."""
    mask = 0
    r = rank
    for i in range(k, 0, -1):
        a = i - 1
        while math.comb(a + 1, i) <= r:
            a += 1
        r -= math.comb(a, i)
        mask |= 1 << a
    return mask


def bits_of(mask: int) -> list[int]:
    out = []
    pos = 0
    while mask:
        if mask & 1:
            out.append(pos)
        mask >>= 1
        pos += 1
    return out


# ---------------------------------------------------------------------------
# parameters and degree profile


@dataclass(frozen=True)
class InstanceParams:
    m: int
    rho: Fraction
    epsilon: Fraction
    ell: int

    def __post_init__(self):
        object.__setattr__(self, "rho", Fraction(self.rho))
        object.__setattr__(self, "epsilon", Fraction(self.epsilon))
        if not 0 < self.rho <= Fraction(1, 4):
            raise InstanceError(f"rho={self.rho} outside (0, 1/4]")
        if self.ell * self.epsilon != 3:
            raise InstanceError("ell * epsilon must equal 3")
        for name, q in (("rho*m", self.rho * self.m),
                        ("eps*rho*m", self.epsilon * self.rho * self.m),
                        ("1/eps", 1 / self.epsilon)):
            if Fraction(q).denominator != 1:
                raise InstanceError(f"divisibility violation: {name}={q} not integral")

    @property
    def rho_m(self) -> int:
        return int(self.rho * self.m)

    @property
    def step(self) -> int:
        """Label-size increment per layer, eps*rho*m."""
        return int(self.epsilon * self.rho * self.m)

    @property
    def peak_layer(self) -> int:
        """Layer index 2/eps where labels reach size 2*rho*m."""
        return int(2 / self.epsilon)

    def label_size(self, i: int) -> int:
        if not 0 <= i <= self.ell:
            raise InstanceError(f"layer {i} out of range")
        if i <= self.peak_layer:
            return i * self.step
        return 4 * self.rho_m - i * self.step


def make_params(m: int, rho, epsilon=None, ell=None) -> InstanceParams:
    rho = Fraction(rho)
    if epsilon is None and ell is None:
        epsilon = Fraction(1)
    if epsilon is None:
        epsilon = Fraction(3, ell)
    epsilon = Fraction(epsilon)
    if ell is None:
        ell = int(3 / epsilon)
    return InstanceParams(m, rho, epsilon, ell)


@dataclass(frozen=True)
class DegreeProfile:
    """Per-layer degree data: k_i, gamma_i = k_i / delta_i^+, graph degrees."""

    k: tuple[Scalar, ...]             # index 0..ell-1
    gamma: tuple[Scalar, ...]         # index 0..ell-1
    delta_plus: tuple[int, ...]       # index 0..ell-1
    delta_minus: tuple[int, ...]      # index 1..ell (entry 0 unused = 0)


def _gamma_monomials(p: InstanceParams) -> tuple[Monomial, Monomial, Monomial]:
    eps = p.epsilon
    num = Monomial.from_factorial(p.step)
    fact_rho = Monomial.from_factorial(p.rho_m)
    g1 = num.div(fact_rho.mul(Monomial.from_binomial(p.m - p.rho_m, p.rho_m)).pow(eps))
    g2 = num.div(fact_rho.mul(Monomial.from_binomial(2 * p.rho_m, p.rho_m)).pow(eps))
    g3 = num.div(fact_rho.pow(eps))
    return g1, g2, g3


def degree_profile(p: InstanceParams) -> DegreeProfile:
    g1, g2, g3 = _gamma_monomials(p)
    one_over_eps = int(1 / p.epsilon)
    gammas, ks, dplus = [], [], []
    dminus = [0] * (p.ell + 1)
    for i in range(p.ell):
        if i < one_over_eps:
            g = g1
        elif i < 2 * one_over_eps:
            g = g2
        else:
            g = g3
        if i < p.peak_layer:
            dp = math.comb(p.m - p.label_size(i), p.step)
        else:
            dp = math.comb(p.label_size(i), p.step)
        gammas.append(g)
        dplus.append(dp)
        ks.append(g.mul(Monomial.from_int(dp)) if dp > 1 else g)
    for i in range(1, p.ell + 1):
        if i <= p.peak_layer:
            dminus[i] = math.comb(p.label_size(i), p.step)
        else:
            dminus[i] = math.comb(p.m - p.label_size(i), p.step)
    return DegreeProfile(tuple(ks), tuple(gammas), tuple(dplus), tuple(dminus))


# ---------------------------------------------------------------------------
# instances


class LayeredInstance:
    """Interface shared by labeled and explicit layered instances."""

    ell: int
    source: Vertex

    def layer_size(self, i: int) -> int:
        raise NotImplementedError

    def vertices(self, i: int):
        return ((i, r) for r in range(self.layer_size(i)))

    def is_sink(self, v: Vertex) -> bool:
        return v[0] == self.ell

    def k_of(self, v: Vertex) -> Scalar:
        raise NotImplementedError

    def out_neighbors(self, v: Vertex) -> list[Vertex]:
        raise NotImplementedError

    def in_neighbors(self, v: Vertex) -> list[Vertex]:
        raise NotImplementedError

    def out_degree(self, v: Vertex) -> int:
        return len(self.out_neighbors(v))

    def in_degree(self, v: Vertex) -> int:
        return len(self.in_neighbors(v))

    def edge_exists(self, u: Vertex, v: Vertex) -> bool:
        return v in self.out_neighbors(u)

    def out_edges(self, v: Vertex):
        return [(v, w) for w in self.out_neighbors(v)]

    def in_edges(self, v: Vertex):
        return [(u, v) for u in self.in_neighbors(v)]

    def edges_into_layer(self, i: int):
        for v in self.vertices(i):
            for u in self.in_neighbors(v):
                yield (u, v)

    def all_edges(self):
        for i in range(1, self.ell + 1):
            yield from self.edges_into_layer(i)

    @property
    def n_vertices(self) -> int:
        return sum(self.layer_size(i) for i in range(self.ell + 1))

    @property
    def n_edges(self) -> int:
        return sum(1 for _ in self.all_edges())

    def reachable(self, v: Vertex, u: Vertex) -> bool:
        """True when u is reachable from v (reflexively)."""
        if v == u:
            return True
        if v[0] >= u[0]:
            return False
        frontier = {v}
        for _ in range(u[0] - v[0]):
            frontier = {w for x in frontier for w in self.out_neighbors(x)}
        return u in frontier


class LabeledInstance(LayeredInstance):
    def __init__(self, params: InstanceParams, profile: DegreeProfile | None = None):
        self.params = params
        self.ell = params.ell
        self.profile = profile or degree_profile(params)
        self.source = (0, 0)
        self._sizes = [math.comb(params.m, params.label_size(i))
                       for i in range(params.ell + 1)]

    def layer_size(self, i: int) -> int:
        return self._sizes[i]

    @property
    def sinks(self):
        return list(self.vertices(self.ell))

    def label(self, v: Vertex) -> int:
        return unrank_colex(v[1], self.params.label_size(v[0]))

    def vertex_with_label(self, i: int, mask: int) -> Vertex:
        if bin(mask).count("1") != self.params.label_size(i):
            raise InstanceError("label size does not match layer")
        return (i, rank_colex(mask))

    def k_of(self, v: Vertex) -> Scalar:
        if self.is_sink(v):
            raise InstanceError("sinks carry no degree requirement")
        return self.profile.k[v[0]]

    def gamma_of(self, i: int) -> Scalar:
        return self.profile.gamma[i]

    def out_degree(self, v: Vertex) -> int:
        return self.profile.delta_plus[v[0]] if v[0] < self.ell else 0

    def in_degree(self, v: Vertex) -> int:
        return self.profile.delta_minus[v[0]] if v[0] > 0 else 0

    def out_neighbors(self, v: Vertex) -> list[Vertex]:
        i = v[0]
        if i >= self.ell:
            return []
        p = self.params
        mask = self.label(v)
        ranks = []
        if i + 1 <= p.peak_layer:  # expanding: supersets
            complement = [b for b in range(p.m) if not mask >> b & 1]
            for extra in combinations(complement, p.step):
                new = mask
                for b in extra:
                    new |= 1 << b
                ranks.append(rank_colex(new))
        else:  # collapsing: subsets
            for removed in combinations(bits_of(mask), p.step):
                new = mask
                for b in removed:
                    new &= ~(1 << b)
                ranks.append(rank_colex(new))
        return [(i + 1, r) for r in sorted(ranks)]

    def in_neighbors(self, v: Vertex) -> list[Vertex]:
        i = v[0]
        if i <= 0:
            return []
        p = self.params
        mask = self.label(v)
        ranks = []
        if i <= p.peak_layer:  # predecessor is a subset
            for removed in combinations(bits_of(mask), p.step):
                new = mask
                for b in removed:
                    new &= ~(1 << b)
                ranks.append(rank_colex(new))
        else:  # predecessor is a superset
            complement = [b for b in range(p.m) if not mask >> b & 1]
            for extra in combinations(complement, p.step):
                new = mask
                for b in extra:
                    new |= 1 << b
                ranks.append(rank_colex(new))
        return [(i - 1, r) for r in sorted(ranks)]

    def edge_exists(self, u: Vertex, v: Vertex) -> bool:
        if v[0] != u[0] + 1:
            return False
        su, sv = self.label(u), self.label(v)
        if v[0] <= self.params.peak_layer:
            return su & sv == su
        return sv & su == sv

    def reachable(self, v: Vertex, u: Vertex) -> bool:
        if v == u:
            return True
        if not 0 <= u[0] - v[0]:
            return False
        peak = self.params.peak_layer
        sv, su = self.label(v), self.label(u)
        if u[0] <= peak:
            return v[0] < u[0] and sv & su == sv
        if v[0] >= peak:
            return v[0] < u[0] and su & sv == su
        # crossing the peak: some label of size 2*rho*m must contain both
        union = sv | su
        return bin(union).count("1") <= 2 * self.params.rho_m

    def descendant_count_in_layer(self, v: Vertex, j: int) -> int:
        """|D(v) cap L_j| without enumeration."""
        p = self.params
        i = v[0]
        if j < i or j > self.ell:
            return 0
        if j == i:
            return 1
        size_v, size_j = p.label_size(i), p.label_size(j)
        if j <= p.peak_layer:
            return math.comb(p.m - size_v, size_j - size_v)
        if i >= p.peak_layer:
            return math.comb(size_v, size_j)
        # crossing the peak: count labels of size_j whose union with v's
        # label still fits inside a peak label
        total = 0
        for t in range(0, min(size_v, size_j) + 1):
            if size_v + size_j - t <= 2 * p.rho_m:
                total += math.comb(size_v, t) * math.comb(p.m - size_v, size_j - t)
        return total


class ExplicitInstance(LayeredInstance):
    def __init__(self, layers: list[list[Vertex]], out_adj: dict[Vertex, list[Vertex]],
                 k_map: dict[Vertex, Scalar]):
        self._layers = layers
        self.ell = len(layers) - 1
        self.source = layers[0][0]
        self._out = {v: sorted(ws) for v, ws in out_adj.items()}
        self._in: dict[Vertex, list[Vertex]] = {}
        for v, ws in self._out.items():
            for w in ws:
                self._in.setdefault(w, []).append(v)
        for w in self._in:
            self._in[w].sort()
        self._k = k_map

    def layer_size(self, i: int) -> int:
        return len(self._layers[i])

    def vertices(self, i: int):
        return iter(self._layers[i])

    @property
    def sinks(self):
        return list(self._layers[self.ell])

    def k_of(self, v: Vertex) -> Scalar:
        if self.is_sink(v):
            raise InstanceError("sinks carry no degree requirement")
        return self._k[v]

    def out_neighbors(self, v: Vertex) -> list[Vertex]:
        return self._out.get(v, [])

    def in_neighbors(self, v: Vertex) -> list[Vertex]:
        return self._in.get(v, [])


# ---------------------------------------------------------------------------
# builders


def build_mmda(params: InstanceParams, size_cap: int = SIZE_CAP_DEFAULT) -> LabeledInstance:
    if params.m > size_cap:
        raise InstanceError(f"m={params.m} exceeds the size cap {size_cap}")
    return LabeledInstance(params)


def build_depth3_direct(m: int, rho) -> LabeledInstance:
    """Depth-3 instance built from its own closed-form degree data.

    Independent of the general gamma formulas; used to cross-check that
    the eps=1 specialization of the general builder is the same instance.
    """
    params = make_params(m, rho, epsilon=Fraction(1))
    rm = params.rho_m
    c_top = Monomial.from_binomial(m, rm)
    c_mid = Monomial.from_binomial(m - rm, rm)
    c_small = Monomial.from_binomial(2 * rm, rm)
    ks = (c_top.div(c_mid), c_mid.div(c_small), c_small)
    dplus = (math.comb(m, rm), math.comb(m - rm, rm), math.comb(2 * rm, rm))
    dminus = (0, 1, math.comb(2 * rm, rm), math.comb(m - rm, rm))
    gammas = tuple(k.div(Monomial.from_int(d)) for k, d in zip(ks, dplus))
    profile = DegreeProfile(ks, gammas, dplus, dminus)
    return LabeledInstance(params, profile)


@dataclass(frozen=True)
class SantaView:
    """Max-min allocation translation of a private-block gap instance."""

    players: tuple
    resources: tuple
    values: dict        # (player, resource) -> Fraction; missing means 0
    target: Fraction


def build_config_lp_gap(k: int):
    """Source feeding k^2 private blocks of k middle vertices and k sinks."""
    if k < 2:
        raise InstanceError("k must be at least 2")
    s = (0, 0)
    l1 = [(1, j) for j in range(k * k)]
    l2 = [(2, j) for j in range(k * k * k)]
    l3 = [(3, j) for j in range(k * k * k)]
    out = {s: list(l1)}
    for j, v in enumerate(l1):
        out[v] = [(2, j * k + t) for t in range(k)]
    # each middle vertex is joined to all k sinks of its own block
    for j, w in enumerate(l2):
        block = j // k
        out[w] = [(3, block * k + t) for t in range(k)]
    kk = Rat(Fraction(k))
    k_map = {s: kk, **{v: kk for v in l1}, **{w: kk for w in l2}}
    inst = ExplicitInstance([[s], l1, l2, l3], out, k_map)
    inst.santa = _santa_view(inst, k)
    return inst


def _santa_view(inst: ExplicitInstance, k: int) -> SantaView:
    inv_k = Fraction(1, k)
    players = [inst.source] + list(inst.vertices(1)) + list(inst.vertices(2))
    resources = [v for i in (1, 2, 3) for v in inst.vertices(i)]
    values = {}
    for pl in players:
        if pl != inst.source:
            values[(pl, pl)] = Fraction(1)      # own private resource
        for w in inst.out_neighbors(pl):
            values[(pl, w)] = inv_k             # next layer privates
    return SantaView(tuple(players), tuple(resources), values, Fraction(1))


def build_subtree_counterexample(k: int) -> ExplicitInstance:
    """Depth 2: k^2 middle vertices with one private sink each plus k
    public sinks shared by everyone."""
    if k < 2:
        raise InstanceError("k must be at least 2")
    s = (0, 0)
    l1 = [(1, j) for j in range(k * k)]
    private = [(2, j) for j in range(k * k)]
    public = [(2, k * k + t) for t in range(k)]
    out = {s: list(l1)}
    for j, v in enumerate(l1):
        out[v] = [private[j]] + public
    kk = Rat(Fraction(k))
    k_map = {s: kk, **{v: kk for v in l1}}
    inst = ExplicitInstance([[s], l1, private + public], out, k_map)
    inst.public_sinks = tuple(public)
    inst.private_sinks = tuple(private)
    return inst


def build_depth3_example() -> ExplicitInstance:
    """Small depth-3 instance with k_v = 2 everywhere.

    Contains a perfect binary arborescence (quality 1) while any single
    directed path gives quality 1/2; a few cross edges keep the search
    honest.
    """
    s = (0, 0)
    l1 = [(1, 0), (1, 1)]
    l2 = [(2, j) for j in range(4)]
    l3 = [(3, j) for j in range(8)]
    out = {
        s: l1,
        (1, 0): [(2, 0), (2, 1), (2, 2)],
        (1, 1): [(2, 1), (2, 2), (2, 3)],
        (2, 0): [(3, 0), (3, 1), (3, 2)],
        (2, 1): [(3, 2), (3, 3)],
        (2, 2): [(3, 4), (3, 5)],
        (2, 3): [(3, 5), (3, 6), (3, 7)],
    }
    two = Rat(Fraction(2))
    k_map = {s: two, **{v: two for v in l1}, **{w: two for w in l2}}
    return ExplicitInstance([[s], l1, l2, l3], out, k_map)


def desiderata_identities(params: InstanceParams) -> list[tuple[str, bool]]:
    """Exact identities pinning the products of k_i over each phase.

    prod_{i<1/eps} k_i = C(m, rm)/C((1-rho)m, rm),
    prod_{i<2/eps} k_i = C(m, rm)/C(2rm, rm),
    prod_{i<3/eps} k_i = C(m, rm);
    checked as prime-exponent maps, so equality is syntactic.
    """
    from .scalars import compare_certified
    prof = degree_profile(params)
    m, rm = params.m, params.rho_m
    one_over_eps = int(1 / params.epsilon)
    running = Monomial.one()
    targets = {
        one_over_eps: Monomial.from_binomial(m, rm).div(
            Monomial.from_binomial(m - rm, rm)),
        2 * one_over_eps: Monomial.from_binomial(m, rm).div(
            Monomial.from_binomial(2 * rm, rm)),
        3 * one_over_eps: Monomial.from_binomial(m, rm),
    }
    out = []
    for i in range(params.ell):
        running = running.mul(prof.gamma[i]).mul(Monomial.from_int(prof.delta_plus[i])
                                                 if prof.delta_plus[i] > 1
                                                 else Monomial.one())
        if i + 1 in targets:
            out.append((f"phase-prefix:{i + 1}",
                        compare_certified(running, targets[i + 1]) == "="))
    return out


# ---------------------------------------------------------------------------
# graph queries


class GraphQueries:
    """Ancestor/descendant/path accessors with sorted, deterministic output."""

    def __init__(self, inst: LayeredInstance):
        self.inst = inst

    def _check(self, v: Vertex):
        i, r = v
        if not (0 <= i <= self.inst.ell and 0 <= r < self.inst.layer_size(i)):
            raise InstanceError(f"unknown vertex {v}")

    def ancestors(self, v: Vertex) -> list[Vertex]:
        self._check(v)
        out = []
        frontier = {v}
        for i in range(v[0], 0, -1):
            frontier = {u for w in frontier for u in self.inst.in_neighbors(w)}
            out.extend(frontier)
        return sorted(set(out))

    def descendants(self, v: Vertex) -> list[Vertex]:
        self._check(v)
        out = []
        frontier = {v}
        for i in range(v[0], self.inst.ell):
            frontier = {u for w in frontier for u in self.inst.out_neighbors(w)}
            out.extend(frontier)
        return sorted(set(out))

    def ancestor_edges(self, e: Edge) -> list[Edge]:
        """Edges ending at the start vertex of e or at one of its ancestors."""
        u, _ = e
        tops = [u] + self.ancestors(u)
        out = []
        for z in tops:
            out.extend(self.inst.in_edges(z))
        return sorted(out)

    def descendant_edges(self, e: Edge) -> list[Edge]:
        """Edges starting at the end vertex of e or below it."""
        _, v = e
        starts = [v] + self.descendants(v)
        out = []
        for z in starts:
            out.extend(self.inst.out_edges(z))
        return sorted(out)

    def delta_plus(self, v: Vertex) -> list[Edge]:
        self._check(v)
        return self.inst.out_edges(v)

    def delta_minus(self, v: Vertex) -> list[Edge]:
        self._check(v)
        return self.inst.in_edges(v)

    # path accessors; a path is a tuple of edges
    def children_paths(self, p: tuple) -> list[tuple]:
        end = p[-1][1]
        return [p + ((end, w),) for w in self.inst.out_neighbors(end)]

    def descendant_paths(self, p: tuple, max_extra: int) -> list[tuple]:
        out = [p]
        frontier = [p]
        for _ in range(max_extra):
            frontier = [q for f in frontier for q in self.children_paths(f)]
            out.extend(frontier)
        return out

    def paths_into(self, v: Vertex, max_len: int) -> list[tuple]:
        """All paths of 1..max_len edges ending at v."""
        self._check(v)
        out = []
        layer = [((u, v),) for u in self.inst.in_neighbors(v)]
        out.extend(layer)
        for _ in range(max_len - 1):
            layer = [((w, p[0][0]),) + p
                     for p in layer for w in self.inst.in_neighbors(p[0][0])]
            out.extend(layer)
        return sorted(out)


def graph_queries(inst: LayeredInstance) -> GraphQueries:
    return GraphQueries(inst)


# ---------------------------------------------------------------------------
# JSON form: labels are never serialized, edges are label-determined


def instance_to_json(inst: LayeredInstance) -> dict:
    from .scalars import scalar_to_json
    if isinstance(inst, LabeledInstance):
        p = inst.params
        return {
            "schema_version": 1,
            "kind": "labeled",
            "params": {"m": p.m, "rho": str(p.rho),
                       "epsilon": str(p.epsilon), "ell": p.ell},
            "layers": [{"index": i, "label_size": p.label_size(i),
                        "size": inst.layer_size(i)}
                       for i in range(p.ell + 1)],
            "profile": {
                "k": [scalar_to_json(k) for k in inst.profile.k],
                "gamma": [scalar_to_json(g) for g in inst.profile.gamma],
                "delta_plus": list(inst.profile.delta_plus),
                "delta_minus": list(inst.profile.delta_minus),
            },
        }
    out = {
        "schema_version": 1,
        "kind": "explicit",
        "layers": [[list(v) for v in inst.vertices(i)] for i in range(inst.ell + 1)],
        "edges": [[list(u), list(v)] for u, v in inst.all_edges()],
        "k": [[list(v), scalar_to_json(inst.k_of(v))]
              for i in range(inst.ell) for v in inst.vertices(i)],
    }
    return out


def instance_from_json(data: dict) -> LayeredInstance:
    if data.get("kind") == "labeled":
        q = data["params"]
        params = InstanceParams(int(q["m"]), Fraction(q["rho"]),
                                Fraction(q["epsilon"]), int(q["ell"]))
        return LabeledInstance(params)
    layers = [[tuple(v) for v in layer] for layer in data["layers"]]
    out_adj: dict[Vertex, list[Vertex]] = {}
    for u, v in data["edges"]:
        out_adj.setdefault(tuple(u), []).append(tuple(v))
    k_map = {tuple(v): Rat(Fraction(entry["exact"]))
             for v, entry in data["k"]}
    return ExplicitInstance(layers, out_adj, k_map)


def dump_instance(inst: LayeredInstance, path: str):
    with open(path, "w") as fh:
        json.dump(instance_to_json(inst), fh, indent=1, sort_keys=True)
        fh.write("\n")
