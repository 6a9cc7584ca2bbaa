"""Closed-form fractional solutions and their exact verification.

Everything here is a closed form evaluated in exact arithmetic: the
assignment-LP solution, the relocated-source subtree solutions of the
depth-3 instance, and the path-hierarchy solution.  Verifiers either
enumerate (small instances) or work class-by-class using the label
symmetry of the construction, in which case per-class worst cases are
taken from the monotone closed-form path counts, so both modes are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .instances import (Edge, InstanceError, LabeledInstance,
                        LayeredInstance, Vertex)
from .reports import ViolationReport, check_eq, check_ge, check_le, vacuous
from .scalars import MONO_ONE, Monomial, Rat, Scalar, as_scalar

ENUMERATION_CAP = 10 ** 7

E0_TAIL = (-1, 0)


def dummy_edge(inst: LayeredInstance) -> Edge:
    return (E0_TAIL, inst.source)


class EnumerationCapExceeded(InstanceError):
    pass


# ---------------------------------------------------------------------------
# edge solutions


class LayerSolution:
    """Edge values constant within each layer (index = endpoint layer)."""

    def __init__(self, inst: LayeredInstance, layer_values: list[Scalar]):
        self.inst = inst
        self.layer_values = layer_values   # index 1..ell; entry 0 unused

    def value(self, e: Edge) -> Scalar:
        return self.layer_values[e[1][0]]


class SparseSolution:
    """Edge values from a table; absent edges carry zero."""

    def __init__(self, inst: LayeredInstance, table: dict[Edge, Fraction]):
        self.inst = inst
        self.table = table

    def value(self, e: Edge) -> Scalar:
        return Rat(self.table.get(e, Fraction(0)))

    def support(self):
        return self.table.items()


def assignment_solution(inst: LabeledInstance) -> LayerSolution:
    """x_e = gamma_{i-1} * prod_{j<i} (gamma_{j-1} delta_j^-) on layer i."""
    prof = inst.profile
    values: list[Scalar] = [None]
    running = MONO_ONE
    for i in range(1, inst.ell + 1):
        gamma = prof.gamma[i - 1]
        values.append(gamma.mul(running))
        dm = prof.delta_minus[i]
        running = running.mul(gamma).mul(Monomial.from_int(dm) if dm > 1 else MONO_ONE)
    return LayerSolution(inst, values)


# ---------------------------------------------------------------------------
# assignment LP verification


def verify_assignment(inst: LayeredInstance, sol, allowance=Fraction(1),
                      root: Vertex | None = None) -> ViolationReport:
    """Certified check of the covering/packing/bounds constraints.

    ``root`` relocates the covering obligation (used for subtree
    solutions); it defaults to the instance source.  At the root the
    demand multiplier is max(in-flow, 1).
    """
    allowance = as_scalar(allowance)
    if isinstance(sol, LayerSolution) and isinstance(inst, LabeledInstance) \
            and root in (None, inst.source):
        return _verify_layerwise(inst, sol, allowance)
    return _verify_sparse(inst, sol, allowance, root or inst.source)


def _verify_layerwise(inst: LabeledInstance, sol: LayerSolution,
                      allowance: Scalar) -> ViolationReport:
    rep = ViolationReport()
    prof = inst.profile
    xs = sol.layer_values
    mono = lambda n: Monomial.from_int(n) if n > 1 else MONO_ONE

    rep.add(check_ge("covering:source", mono(prof.delta_plus[0]).mul(xs[1]),
                     prof.k[0]))
    for i in range(1, inst.ell):
        lhs = mono(prof.delta_plus[i]).mul(xs[i + 1])
        inflow = mono(prof.delta_minus[i]).mul(xs[i])
        rhs = prof.k[i].mul(inflow)
        rep.add(check_ge(f"covering:layer{i}", lhs, rhs))
    for i in range(1, inst.ell + 1):
        inflow = mono(prof.delta_minus[i]).mul(xs[i])
        rep.add(check_le(f"packing:layer{i}", inflow, allowance))
    for i in range(1, inst.ell + 1):
        rep.add(check_le(f"bounds:layer{i}", xs[i], Rat(Fraction(1)), kind="bounds"))
    return rep


def _verify_sparse(inst: LayeredInstance, sol, allowance: Scalar,
                   root: Vertex) -> ViolationReport:
    rep = ViolationReport()
    out_sum: dict[Vertex, Fraction] = {}
    in_sum: dict[Vertex, Fraction] = {}
    bad_bounds = 0
    for e, val in sol.support():
        if not (0 <= val <= 1):
            bad_bounds += 1
            rep.add(check_le(f"bounds:{e}", Rat(val), Rat(Fraction(1)), kind="bounds"))
        u, v = e
        out_sum[u] = out_sum.get(u, Fraction(0)) + val
        in_sum[v] = in_sum.get(v, Fraction(0)) + val

    if inst.is_sink(root):
        rep.add(vacuous(f"covering:root{root}", "covering",
                        Rat(out_sum.get(root, Fraction(0))), Rat(Fraction(0))))
    else:
        demand_root = max(in_sum.get(root, Fraction(0)), Fraction(1))
        k_root = inst.k_of(root).as_fraction()
        if k_root is None:
            raise InstanceError("sparse verification needs rational requirements")
        rep.add(check_ge(f"covering:root{root}", Rat(out_sum.get(root, Fraction(0))),
                         Rat(k_root * demand_root)))

    for v in sorted(set(in_sum) | set(out_sum)):
        inflow = in_sum.get(v, Fraction(0))
        if inflow > 0:
            rep.add(check_le(f"packing:{v}", Rat(inflow), allowance))
        if v == root or inst.is_sink(v):
            continue
        if inflow > 0:
            kv = inst.k_of(v).as_fraction()
            rep.add(check_ge(f"covering:{v}", Rat(out_sum.get(v, Fraction(0))),
                             Rat(kv * inflow)))
        else:
            rep.add(vacuous(f"covering:{v}", "covering",
                            Rat(out_sum.get(v, Fraction(0))), Rat(Fraction(0))))
    return rep


# ---------------------------------------------------------------------------
# subtree solutions (depth-3 construction only)


class SubtreeFamily:
    """Relocated-source solutions x^{(e)}, one per edge, x_e^{(e)} = 1."""

    def __init__(self, inst: LabeledInstance):
        if inst.params.epsilon != 1:
            raise InstanceError("subtree solutions are defined for the depth-3 form")
        self.inst = inst
        p = inst.params
        self.c_top = math.comb(p.m, p.rho_m)
        self.c_mid = math.comb(p.m - p.rho_m, p.rho_m)
        self.c_small = math.comb(2 * p.rho_m, p.rho_m)
        self.scale = Fraction(self.c_mid, self.c_top)
        self._label = inst.label

    def sink_split(self, j: int) -> Fraction:
        """Value on a bottom edge whose sink meets the trigger label in j."""
        p = self.inst.params
        return self.scale / math.comb(p.m - 2 * p.rho_m + j, j)

    def value(self, f: Edge, e: Edge) -> Fraction:
        """x_e^{(f)}, zero off the descendant cone."""
        if f == e:
            return Fraction(1)
        layer_f, layer_e = f[1][0], e[1][0]
        if layer_e <= layer_f:
            return Fraction(0)
        lf = self._label(f[1])
        if layer_f == 1:
            if layer_e == 2:
                return (Fraction(1, self.c_small)
                        if e[0] == f[1] else Fraction(0))
            # bottom edge (w, t): the middle vertex must lie below f
            lw = self._label(e[0])
            if lw & lf != lf:
                return Fraction(0)
            j = bin(self._label(e[1]) & lf).count("1")
            return self.sink_split(j)
        if layer_f == 2:
            return Fraction(1) if layer_e == 3 and e[0] == f[1] else Fraction(0)
        return Fraction(0)

    def support(self, f: Edge):
        """Edges with x^{(f)} > 0, with their values."""
        inst = self.inst
        yield f, Fraction(1)
        layer_f = f[1][0]
        if layer_f == 1:
            v = f[1]
            lv = self._label(v)
            for w in inst.out_neighbors(v):
                yield (v, w), Fraction(1, self.c_small)
                for t in inst.out_neighbors(w):
                    j = bin(self._label(t) & lv).count("1")
                    yield (w, t), self.sink_split(j)
        elif layer_f == 2:
            for t in inst.out_neighbors(f[1]):
                yield (f[1], t), Fraction(1)

    def solution_for(self, f: Edge) -> SparseSolution:
        return SparseSolution(self.inst, dict(self.support(f)))

    def triggers(self):
        return self.inst.all_edges()


def subtree_solutions(inst: LabeledInstance) -> SubtreeFamily:
    return SubtreeFamily(inst)


def sink_inflow(fam: SubtreeFamily, f: Edge, t: Vertex) -> Fraction:
    """Sum of x^{(f)} over the in-edges of sink t (the flow-splitting sum)."""
    inst = fam.inst
    total = Fraction(0)
    for w in inst.in_neighbors(t):
        total += fam.value(f, (w, t))
    return total


# ---------------------------------------------------------------------------
# path hierarchy


class PathSolution:
    """y(p) = x_{first edge} * prod of per-layer selection ratios.

    The value of a path only depends on the layer its first edge enters
    and its edge count, so the solution is stored in closed form; paths
    themselves are enumerated only on demand (and only when the total
    count fits under the cap).
    """

    def __init__(self, inst: LabeledInstance, rounds: int,
                 cap: int = ENUMERATION_CAP):
        if rounds > inst.ell:
            raise InstanceError("rounds exceed instance depth")
        self.inst = inst
        self.rounds = rounds
        self.max_len = rounds + 1
        self.cap = cap
        self.x = assignment_solution(inst)
        self.dummy = dummy_edge(inst)

    def value_class(self, first_layer: int, n_edges: int) -> Scalar:
        """Value of any path of n_edges edges whose first edge enters
        first_layer (0 = the dummy root edge)."""
        prof = self.inst.profile
        if first_layer == 0:
            y: Scalar = MONO_ONE
            lo = 0
        else:
            y = self.x.layer_values[first_layer]
            lo = first_layer
        for j in range(lo, lo + n_edges - 1):
            y = y.mul(prof.gamma[j])
        return y

    def value(self, path: tuple) -> Scalar:
        first = path[0]
        layer = 0 if first == self.dummy else first[1][0]
        return self.value_class(layer, len(path))

    # enumeration ---------------------------------------------------------
    def path_count(self) -> int:
        """Exact number of paths with 1..max_len edges (dummy-rooted included)."""
        inst = self.inst
        prof = inst.profile
        total = 0
        # paths whose first edge enters layer i: start vertex in layer i-1
        for i in range(1, inst.ell + 1):
            run = inst.layer_size(i - 1)
            for length in range(1, self.max_len + 1):
                end = i + length - 1
                if end > inst.ell:
                    break
                run *= prof.delta_plus[end - 1]
                total += run
        # dummy-rooted: the dummy edge plus up to max_len - 1 real edges
        total += 1
        run = 1
        for r in range(1, self.max_len):
            if r > inst.ell:
                break
            run *= prof.delta_plus[r - 1]
            total += run
        return total

    def enumerate_paths(self):
        if self.path_count() > self.cap:
            raise EnumerationCapExceeded(
                f"path enumeration above cap {self.cap}")
        inst = self.inst
        # dummy-rooted
        frontier = [(self.dummy,)]
        yield (self.dummy,)
        for _ in range(self.max_len - 1):
            nxt = []
            for p in frontier:
                end = p[-1][1]
                for w in inst.out_neighbors(end):
                    q = p + ((end, w),)
                    nxt.append(q)
                    yield q
            frontier = nxt
        # paths rooted anywhere
        for i in range(0, inst.ell):
            for v in inst.vertices(i):
                frontier = [((v, w),) for w in inst.out_neighbors(v)]
                yield from frontier
                for _ in range(self.max_len - 1):
                    nxt = []
                    for p in frontier:
                        end = p[-1][1]
                        for w in inst.out_neighbors(end):
                            q = p + ((end, w),)
                            nxt.append(q)
                            yield q
                    frontier = nxt


def path_solution(inst: LabeledInstance, rounds: int,
                  cap: int = ENUMERATION_CAP) -> PathSolution:
    return PathSolution(inst, rounds, cap)


# ---------------------------------------------------------------------------
# exact path counting


def count_paths_from(inst: LabeledInstance, v: Vertex) -> dict:
    """Exact path counts from v to every descendant, one forward pass."""
    counts = {v: 1}
    out = {v: 1}
    frontier = counts
    for _ in range(v[0], inst.ell):
        nxt: dict[Vertex, int] = {}
        for w, c in frontier.items():
            for z in inst.out_neighbors(w):
                nxt[z] = nxt.get(z, 0) + c
        out.update(nxt)
        frontier = nxt
    return out


def count_paths(inst: LabeledInstance, v: Vertex, u: Vertex) -> int:
    """Exact number of directed paths from v to u (1 when v == u)."""
    if v == u:
        return 1
    if v[0] > u[0] or not inst.reachable(v, u):
        return 0
    counts = {v: 1}
    for _ in range(u[0] - v[0]):
        nxt: dict[Vertex, int] = {}
        for w, c in counts.items():
            for z in inst.out_neighbors(w):
                if inst.reachable(z, u):
                    nxt[z] = nxt.get(z, 0) + c
        counts = nxt
    return counts.get(u, 0)


def closed_form_paths(inst: LabeledInstance, i: int, j: int,
                      label_overlap: int) -> int:
    """Path count between layers i and j from the label data alone.

    ``label_overlap`` is |S_v cap S_u|.  Within a single phase the count
    only depends on (i, j) (labels must nest); across the peak it depends
    on the union size.
    """
    p = inst.params
    if not (0 <= i <= j <= inst.ell):
        raise InstanceError("bad layer pair")
    if i == j:
        return 1
    si, sj = p.label_size(i), p.label_size(j)
    if label_overlap > min(si, sj) or label_overlap < 0:
        raise InstanceError("impossible overlap")
    step = p.step
    peak = p.peak_layer

    def orderings(blocks: int) -> int:
        return math.factorial(blocks * step) // math.factorial(step) ** blocks

    if j <= peak:
        return orderings(j - i) if label_overlap == si else 0
    if i >= peak:
        return orderings(j - i) if label_overlap == sj else 0
    union = si + sj - label_overlap
    if union > 2 * p.rho_m:
        return 0
    middle = math.comb(p.m - union, 2 * p.rho_m - union)
    return middle * orderings(j - peak) * orderings(peak - i)


def max_paths_between_layers(inst: LabeledInstance, i: int, j: int) -> int:
    """Largest path count over vertex pairs (v in L_i, u in L_j).

    The cross-peak count decreases as the label union grows, so the
    maximum is attained at the smallest feasible union, i.e. nested
    labels (overlap = min of the two label sizes).
    """
    p = inst.params
    si, sj = p.label_size(i), p.label_size(j)
    return closed_form_paths(inst, i, j, min(si, sj))


@dataclass
class HelperLemmaReport:
    report: ViolationReport
    largest_distance: int
    xi_max: Fraction
    pairs: list[dict]


def check_helper_lemma(inst: LabeledInstance, xi: Fraction) -> HelperLemmaReport:
    """Compare worst-case path counts against 1/prod(gamma) per layer pair."""
    xi = Fraction(xi)
    if not 0 < xi <= 1:
        raise InstanceError("xi must lie in (0, 1]")
    d_cap = int(xi * inst.ell)
    prof = inst.profile
    rep = ViolationReport()
    pairs = []
    ok_by_distance: dict[int, bool] = {}
    for i in range(inst.ell + 1):
        inv_gamma = MONO_ONE
        for j in range(i, min(inst.ell, i + d_cap) + 1):
            d = j - i
            if d > d_cap:
                break
            if j > i:
                inv_gamma = inv_gamma.mul(prof.gamma[j - 1])
            count = max_paths_between_layers(inst, i, j)
            bound = inv_gamma.pow(-1)
            chk = check_le(f"paths:({i},{j})", Rat(Fraction(count)), bound)
            rep.add(chk)
            ok_by_distance[d] = ok_by_distance.get(d, True) and bool(chk.satisfied)
            pairs.append({"i": i, "j": j, "count": count,
                          "bound_approx": bound.approx(),
                          "ok": chk.satisfied})
    best = 0
    for d in range(1, d_cap + 1):
        if ok_by_distance.get(d, False) and best == d - 1:
            best = d
    return HelperLemmaReport(rep, best, Fraction(best, inst.ell), pairs)


# ---------------------------------------------------------------------------
# path hierarchy verification


def verify_path_hierarchy(inst: LabeledInstance, ps: PathSolution,
                          mode: str = "auto") -> ViolationReport:
    if mode == "auto":
        mode = "enumerated" if ps.path_count() <= min(ps.cap, 200_000) else "symbolic"
    if mode == "enumerated":
        return _verify_paths_enumerated(inst, ps)
    if mode == "symbolic":
        return _verify_paths_symbolic(inst, ps)
    raise ValueError(f"unknown mode {mode!r}")


def _verify_paths_symbolic(inst: LabeledInstance, ps: PathSolution) -> ViolationReport:
    """Class-by-class verification using the label symmetry.

    Within a class (start layer, length) every path has the same value
    and the same constraint geometry, and the lifted packing worst case
    over vertex pairs is the monotone closed-form maximum, so these
    checks cover every individual constraint.
    """
    rep = ViolationReport()
    prof = inst.profile
    t = ps.rounds

    # (1) lifted covering: children sum equals k at the endpoint, per layer
    for io in range(inst.ell):
        lhs = prof.gamma[io].mul(Monomial.from_int(prof.delta_plus[io])
                                 if prof.delta_plus[io] > 1 else MONO_ONE)
        rep.add(check_eq(f"lifted-covering:end-layer{io}", lhs, prof.k[io]))
    rep.add(vacuous("lifted-covering:end-sink", "equality",
                    Rat(Fraction(0)), Rat(Fraction(0))))

    # (2) lifted packing: worst path count times the value ratio, per (i, j)
    for i in range(inst.ell + 1):
        inv = MONO_ONE
        for j in range(i, inst.ell + 1):
            d = j - i
            if d > t:
                break
            if j > i:
                inv = inv.mul(prof.gamma[j - 1])
            count = max_paths_between_layers(inst, i, j)
            lhs = inv.mul(Monomial.from_int(count) if count > 1 else MONO_ONE)
            rep.add(check_le(f"lifted-packing:({i},{j})", lhs, Rat(Fraction(1))))

    # (3)+(4) unlifted assignment constraints for y({e}) = x_e
    rep.merge(_verify_layerwise(inst, ps.x, Rat(Fraction(1))))

    # (5) consistency: extending a path in front multiplies by 1/delta^-,
    # extending at the back multiplies by gamma; both factors are <= 1
    for i in range(inst.ell):
        rep.add(check_le(f"consistency:gamma{i}", prof.gamma[i], Rat(Fraction(1))))
    for i in range(1, inst.ell + 1):
        rep.add(check_ge(f"consistency:delta-minus{i}",
                         Rat(Fraction(prof.delta_minus[i])), Rat(Fraction(1)),
                         kind="bounds"))

    # (6) root normalization
    rep.add(check_eq("root", ps.value((ps.dummy,)), Rat(Fraction(1))))

    # (7) bounds, per (start layer, length) class
    for i in range(0, inst.ell + 1):
        for length in range(1, ps.max_len + 1):
            last = (i + length - 1) if i > 0 else (length - 1)
            if (i > 0 and i + length - 1 > inst.ell) or (i == 0 and length - 1 > inst.ell):
                break
            y = ps.value_class(i, length)
            rep.add(check_le(f"bounds:class({i},{length})", y, Rat(Fraction(1)),
                             kind="bounds"))
            rep.add(check_ge(f"positive:class({i},{length})", y, Rat(Fraction(0)),
                             kind="bounds"))
    return rep


def _verify_paths_enumerated(inst: LabeledInstance, ps: PathSolution) -> ViolationReport:
    """Explicit checker; path values within a sum always share a class
    (they end at the same vertex with the same length), so sums are
    count-times-value and stay exact even when values are irrational."""
    rep = ViolationReport()
    t = ps.rounds
    paths = list(ps.enumerate_paths())
    by_prefix: dict[tuple, list[tuple]] = {}
    for p in paths:
        if len(p) > 1:
            by_prefix.setdefault(p[:-1], []).append(p)

    def times(value: Scalar, count: int) -> Scalar:
        if count == 0:
            return Rat(Fraction(0))
        if isinstance(value, Monomial):
            return value.mul(Monomial.from_int(count)) if count > 1 else value
        return Rat(value.as_fraction() * count)

    # (1) lifted covering
    for p in paths:
        if len(p) > t:
            continue
        end = p[-1][1]
        children = by_prefix.get(p, [])
        if inst.is_sink(end):
            assert not children
            rep.add(vacuous(f"lifted-covering:{_pid(p)}", "equality",
                            Rat(Fraction(0)), Rat(Fraction(0))))
            continue
        total = times(ps.value(p + ((end, inst.out_neighbors(end)[0]),)),
                      len(children))
        rhs = inst.k_of(end).mul(ps.value(p)) if hasattr(inst.k_of(end), "mul") \
            else Rat(inst.k_of(end).as_fraction() * ps.value(p).as_fraction())
        rep.add(check_eq(f"lifted-covering:{_pid(p)}", total, rhs))

    # (2) lifted packing: group descendants of p by endpoint; value only
    # depends on the endpoint's layer, so per-endpoint sums are counts
    for p in paths:
        budget = ps.max_len - len(p)
        if budget < 0:
            continue
        ends: dict[Vertex, int] = {p[-1][1]: 1}
        frontier = [p]
        for _ in range(budget):
            nxt = []
            for q in frontier:
                for r in by_prefix.get(q, []):
                    nxt.append(r)
                    ends[r[-1][1]] = ends.get(r[-1][1], 0) + 1
            frontier = nxt
        first_layer = 0 if p[0] == ps.dummy else p[0][1][0]
        for v, count in sorted(ends.items()):
            extension = v[0] - p[-1][1][0]
            total = times(ps.value_class(first_layer, len(p) + extension), count)
            rep.add(check_le(f"lifted-packing:{_pid(p)}@{v}", total, ps.value(p)))

    # (3)+(4) unlifted constraints
    rep.merge(_verify_layerwise(inst, ps.x, Rat(Fraction(1))))

    # (5) consistency for contiguous subpaths
    for q in paths:
        if q[0] == ps.dummy:
            continue
        yq = ps.value(q)
        for a in range(len(q)):
            for b in range(a + 1, len(q) + 1):
                if (a, b) == (0, len(q)):
                    continue
                rep.add(check_le(f"consistency:{_pid(q)}[{a}:{b}]", yq,
                                 ps.value(q[a:b])))

    # (6) + (7)
    rep.add(check_eq("root", ps.value((ps.dummy,)), Rat(Fraction(1))))
    for p in paths:
        rep.add(check_le(f"bounds:{_pid(p)}", ps.value(p), Rat(Fraction(1)),
                         kind="bounds"))
    return rep


def _pid(p: tuple) -> str:
    verts = [p[0][0]] + [e[1] for e in p]
    return ">".join("e0" if v == E0_TAIL else f"{v[0]}.{v[1]}" for v in verts)
