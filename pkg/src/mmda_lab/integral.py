"""Integral arborescences: exact search on small instances and the
sink-accessibility counting certificate that bounds achievable quality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from fractions import Fraction

from .instances import InstanceError, LabeledInstance, LayeredInstance, Vertex
from .scalars import Monomial, Scalar, compare_certified


def _ceil_frac(q: Fraction) -> int:
    return -((-q.numerator) // q.denominator)


@dataclass(frozen=True)
class IntegralSolution:
    edges: frozenset

    def out_degree(self, v: Vertex) -> int:
        return sum(1 for e in self.edges if e[0] == v)

    def in_degree(self, v: Vertex) -> int:
        return sum(1 for e in self.edges if e[1] == v)

    def selected_vertices(self, inst: LayeredInstance) -> list[Vertex]:
        """Source plus every vertex with in-degree one."""
        ins = {e[1] for e in self.edges}
        return [inst.source] + sorted(ins)

    def source_paths(self, inst: LayeredInstance) -> list[tuple]:
        """All directed paths of the solution starting at the source."""
        children: dict[Vertex, list[Vertex]] = {}
        for u, v in self.edges:
            children.setdefault(u, []).append(v)
        out = []
        frontier = [((inst.source,), inst.source)]
        while frontier:
            nxt = []
            for path, end in frontier:
                for w in sorted(children.get(end, [])):
                    q = path + (w,)
                    out.append(q)
                    nxt.append((q, w))
            frontier = nxt
        return out

    def check_structure(self, inst: LayeredInstance) -> bool:
        """In-degree at most one and every edge on a source-rooted path."""
        indeg: dict[Vertex, int] = {}
        for _, v in self.edges:
            indeg[v] = indeg.get(v, 0) + 1
            if indeg[v] > 1:
                return False
        reached = {inst.source}
        frontier = {inst.source}
        while frontier:
            frontier = {v for u, v in self.edges if u in frontier}
            reached |= frontier
        return all(u in reached for u, _ in self.edges)


@dataclass(frozen=True)
class SolutionQuality:
    alpha: Fraction


def solution_quality(inst: LayeredInstance, sol: IntegralSolution) -> SolutionQuality:
    """min over the source and covered non-sinks of out-degree / k_v."""
    best = None
    for v in sol.selected_vertices(inst):
        if inst.is_sink(v):
            continue
        kv = inst.k_of(v).as_fraction()
        ratio = Fraction(sol.out_degree(v)) / kv
        best = ratio if best is None else min(best, ratio)
    return SolutionQuality(best if best is not None else Fraction(0))


def single_path_solution(inst: LayeredInstance) -> IntegralSolution:
    """The trivial fallback: one source-to-sink path (out-degree one)."""
    edges = []
    v = inst.source
    while not inst.is_sink(v):
        w = inst.out_neighbors(v)[0]
        edges.append((v, w))
        v = w
    return IntegralSolution(frozenset(edges))


# ---------------------------------------------------------------------------
# branch and bound


class _Budget:
    def __init__(self, nodes: int):
        self.left = nodes

    def tick(self) -> bool:
        self.left -= 1
        return self.left >= 0


@dataclass
class BruteforceResult:
    solution: IntegralSolution
    quality: SolutionQuality
    complete: bool
    nodes_used: int
    infeasible_above: Fraction | None


def _sink_layer_counts(inst: LayeredInstance, v: Vertex):
    if isinstance(inst, LabeledInstance):
        return inst.descendant_count_in_layer(v, inst.ell)
    seen = {v}
    frontier = {v}
    while frontier:
        frontier = {w for u in frontier for w in inst.out_neighbors(u)}
        seen |= frontier
    return sum(1 for u in seen if inst.is_sink(u))


def _feasible(inst: LayeredInstance, q: Fraction, budget: _Budget):
    """Search for an arborescence with out-degree >= q*k_v everywhere.

    Returns an edge set, None (proven infeasible), or "unknown" when the
    node budget ran out first.
    """
    demand_of = {}
    for i in range(inst.ell):
        for v in inst.vertices(i):
            demand_of[v] = _ceil_frac(q * inst.k_of(v).as_fraction())
    total_sinks = inst.layer_size(inst.ell)
    sinks_below: dict[Vertex, int] = {}

    def need_below(v: Vertex) -> int:
        """Sinks a subtree rooted at v must contain."""
        r = sinks_below.get(v)
        if r is None:
            r = 1
            for j in range(v[0], inst.ell):
                kmin = min(inst.k_of(u).as_fraction() for u in inst.vertices(j))
                r *= max(_ceil_frac(q * kmin), 1)
            sinks_below[v] = r
        return r

    reach_cache: dict[Vertex, int] = {}

    def reach_sinks(v: Vertex) -> int:
        r = reach_cache.get(v)
        if r is None:
            r = reach_cache[v] = _sink_layer_counts(inst, v)
        return r

    used: set[Vertex] = set()
    used_sinks = [0]
    unknown = [False]

    def expand(pending: list[Vertex]) -> frozenset | None:
        if not budget.tick():
            unknown[0] = True
            return None
        if not pending:
            return frozenset()
        # global counting bound
        total_need = sum(need_below(v) for v in pending)
        if total_need > total_sinks - used_sinks[0]:
            return None
        v = pending[0]
        rest = pending[1:]
        d = demand_of[v]
        if d == 0:
            return expand(rest)
        candidates = [w for w in inst.out_neighbors(v) if w not in used]
        # per-vertex counting bound
        for u in pending:
            avail = reach_sinks(u) - sum(1 for t in used
                                         if inst.is_sink(t) and inst.reachable(u, t))
            if avail < need_below(u):
                return None
        if len(candidates) < d:
            return None
        order = sorted(candidates, key=lambda w: (-reach_sinks(w), w))
        for group in combinations(order, d):
            for w in group:
                used.add(w)
                if inst.is_sink(w):
                    used_sinks[0] += 1
            nxt = rest + [w for w in group if not inst.is_sink(w)]
            sub = expand(nxt)
            if sub is not None:
                return sub | frozenset((v, w) for w in group)
            for w in group:
                used.discard(w)
                if inst.is_sink(w):
                    used_sinks[0] -= 1
            if unknown[0]:
                return None
        return None

    tree = expand([inst.source])
    if tree is not None:
        return tree
    return "unknown" if unknown[0] else None


def bruteforce_best(inst: LayeredInstance, budget: int = 2_000_000) -> BruteforceResult:
    """Best min-degree-ratio arborescence by candidate-quality search.

    Candidate qualities are the possible ratios d/k_v; feasibility of each
    is decided by a depth-first search with counting pruning.  When the
    budget runs out the best found solution is returned with the
    completeness flag cleared.
    """
    ratios = set()
    for i in range(inst.ell):
        for v in inst.vertices(i):
            kv = inst.k_of(v).as_fraction()
            for d in range(1, inst.out_degree(v) + 1):
                ratios.add(Fraction(d) / kv)
    cap = min(Fraction(inst.out_degree(v)) / inst.k_of(v).as_fraction()
              for i in range(inst.ell) for v in inst.vertices(i))
    candidates = sorted(r for r in ratios if r <= cap)
    bud = _Budget(budget)
    best_edges = single_path_solution(inst).edges
    best_q = solution_quality(inst, IntegralSolution(best_edges)).alpha
    infeasible_above = None
    complete = True

    lo = 0
    hi = len(candidates)
    # binary search over the candidate grid: find the top feasible quality
    while lo < hi:
        mid = (lo + hi) // 2
        q = candidates[mid]
        if q <= best_q:
            lo = mid + 1
            continue
        res = _feasible(inst, q, bud)
        if res == "unknown":
            complete = False
            hi = mid
        elif res is None:
            infeasible_above = q if infeasible_above is None else min(infeasible_above, q)
            hi = mid
        else:
            sol = IntegralSolution(res)
            best_q = solution_quality(inst, sol).alpha
            best_edges = res
            lo = mid + 1
    nodes_used = budget - bud.left
    return BruteforceResult(IntegralSolution(best_edges), SolutionQuality(best_q),
                            complete, nodes_used, infeasible_above)


# ---------------------------------------------------------------------------
# counting certificate


@dataclass(frozen=True)
class CertificateVariant:
    threshold: int
    t1_size: int
    t2_size: int
    alpha_min: Scalar          # every feasible ratio-q solution has 1/q >= this
    quality_bound: Scalar      # q <= this


@dataclass(frozen=True)
class CountingCertificate:
    theta: Fraction
    variants: tuple

    def best_quality_bound(self) -> Scalar:
        # the certificate may be evaluated at both integer thresholds;
        # each variant is valid, so the strongest (smallest) bound applies
        best = self.variants[0].quality_bound
        for v in self.variants[1:]:
            if compare_certified(v.quality_bound, best) == "<":
                best = v.quality_bound
        return best

    def to_json(self) -> dict:
        from .scalars import scalar_to_json
        return {
            "theta": str(self.theta),
            "variants": [{
                "threshold": v.threshold,
                "t1_size": v.t1_size,
                "t2_size": v.t2_size,
                "alpha_min": scalar_to_json(v.alpha_min),
                "quality_bound": scalar_to_json(v.quality_bound),
            } for v in self.variants],
        }


def t1_count(m: int, rho_m: int, threshold: int) -> int:
    """Sinks whose label meets a fixed rho*m-label in >= threshold elements."""
    return sum(math.comb(rho_m, j) * math.comb(m - rho_m, rho_m - j)
               for j in range(threshold, rho_m + 1))


def t2_count(rho_m: int, threshold: int) -> int:
    """Sinks below a fixed peak vertex meeting the label in < threshold."""
    return sum(math.comb(rho_m, j) * math.comb(rho_m, rho_m - j)
               for j in range(0, threshold))


def counting_certificate(inst: LabeledInstance, v: Vertex | None = None,
                         theta: Fraction | None = None) -> CountingCertificate:
    p = inst.params
    theta = Fraction(p.rho, 3) if theta is None else Fraction(theta)
    tm = theta * p.m
    thresholds = sorted({math.floor(tm), math.ceil(tm)})
    c1 = Monomial.from_binomial(p.m - p.rho_m, p.rho_m)
    c2 = Monomial.from_binomial(2 * p.rho_m, p.rho_m)
    eps = p.epsilon
    variants = []
    for j0 in thresholds:
        t1 = t1_count(p.m, p.rho_m, j0)
        t2 = t2_count(p.rho_m, j0)
        alpha1 = (c1.div(Monomial.from_int(2 * t1))).pow(eps / 2)
        if t2 > 0:
            alpha2 = (c2.div(Monomial.from_int(2 * t2))).pow(eps)
            alpha = alpha1 if compare_certified(alpha1, alpha2) != ">" else alpha2
        else:
            alpha = alpha1
        variants.append(CertificateVariant(j0, t1, t2, alpha, alpha.pow(-1)))
    return CountingCertificate(theta, tuple(variants))


# ---------------------------------------------------------------------------
# reachable-supply infeasibility


@dataclass(frozen=True)
class HallWitness:
    infeasible: bool
    depth: int | None
    demand: Fraction | None
    supply: int | None


def hall_infeasibility(inst: LayeredInstance, root: Vertex,
                       depth: int | None = None) -> HallWitness:
    """Counting obstruction to any subtree rooted at root.

    A tree with out-degree >= k everywhere needs prod(k) distinct
    vertices d layers below its root; when fewer are reachable, no such
    subtree (hence no fractional relocated solution of value 1) exists.
    """
    i0 = root[0]
    depth = depth if depth is not None else inst.ell - i0
    demand = Fraction(1)
    frontier = {root}
    for d in range(1, depth + 1):
        layer = i0 + d - 1
        if layer >= inst.ell:
            break
        kmin = min(inst.k_of(v).as_fraction() for v in inst.vertices(layer))
        demand *= kmin
        frontier = {w for u in frontier for w in inst.out_neighbors(u)}
        if len(frontier) < demand:
            return HallWitness(True, d, demand, len(frontier))
    return HallWitness(False, None, None, None)
