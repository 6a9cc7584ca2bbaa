import math
import random
from fractions import Fraction

import pytest

from mmda_lab.instances import build_mmda, make_params
from mmda_lab.relaxations import (SparseSolution, assignment_solution,
                                  check_helper_lemma, closed_form_paths,
                                  count_paths, max_paths_between_layers,
                                  path_solution, sink_inflow,
                                  subtree_solutions, verify_assignment,
                                  verify_path_hierarchy)
from mmda_lab.scalars import Rat, compare_certified


class TestAssignmentSolution:
    def test_depth3_values(self, sol8):
        assert sol8.layer_values[1].as_fraction() == Fraction(1, 15)
        assert sol8.layer_values[2].as_fraction() == Fraction(1, 90)
        assert sol8.layer_values[3].as_fraction() == Fraction(1, 15)

    def test_first_layer_is_gamma0(self, inst8, inst16_deep):
        for inst in (inst8, inst16_deep):
            sol = assignment_solution(inst)
            assert compare_certified(sol.layer_values[1],
                                     inst.profile.gamma[0]) == "="

    def test_deep_first_layer_has_rational_exponent(self, inst16_deep):
        x1 = assignment_solution(inst16_deep).layer_values[1]
        assert any(e.denominator == 2 for _, e in x1.exponents)


class TestVerifyAssignment:
    def test_depth3_feasible(self, inst8, sol8):
        rep = verify_assignment(inst8, sol8)
        assert rep.ok
        assert not rep.violations and not rep.undecided

    def test_deep_feasible(self, inst16_deep):
        rep = verify_assignment(inst16_deep, assignment_solution(inst16_deep))
        assert rep.ok

    def test_final_packing_is_exactly_one(self, inst16_deep):
        rep = verify_assignment(inst16_deep, assignment_solution(inst16_deep))
        last = [c for c in rep.checks if c.constraint_id == "packing:layer6"]
        assert len(last) == 1
        assert compare_certified(last[0].lhs, Rat(Fraction(1))) == "="

    def test_phase_boundary_packing_values(self, inst16_deep):
        # the in-flow product equals 1/C((1-rho)m, rho m) exactly at both
        # ends of the middle phase
        rep = verify_assignment(inst16_deep, assignment_solution(inst16_deep))
        packing = {c.constraint_id: c for c in rep.checks
                   if c.constraint_id.startswith("packing")}
        boundary = Rat(Fraction(1, 495))   # 1/C(12, 4)
        assert compare_certified(packing["packing:layer2"].lhs, boundary) == "="
        assert compare_certified(packing["packing:layer4"].lhs, boundary) == "="

    def test_all_zero_solution_violates_source(self, inst8):
        rep = verify_assignment(inst8, SparseSolution(inst8, {}))
        bad = [c for c in rep.violations if c.constraint_id.startswith("covering:root")]
        assert bad and bad[0].lhs.as_fraction() == 0

    def test_feasible_for_every_valid_param_set(self):
        # layer-symmetric verification is pure profile arithmetic, so the
        # sweep to m = 20 costs nothing even where layers are huge
        for m in range(4, 21):
            for rho_m in range(1, m // 4 + 1):
                for d in range(1, rho_m + 1):
                    if rho_m % d:
                        continue
                    params = make_params(m, Fraction(rho_m, m), epsilon=Fraction(1, d))
                    inst = build_mmda(params)
                    rep = verify_assignment(inst, assignment_solution(inst))
                    assert rep.ok and not rep.undecided, params


class TestSubtreeFamily:
    def test_values_on_first_layer_trigger(self, inst8, family8):
        e = ((0, 0), (1, 0))
        vals = dict(family8.support(e))
        assert vals[e] == 1
        w = inst8.out_neighbors((1, 0))[0]
        assert vals[((1, 0), w)] == Fraction(1, 6)
        lv = inst8.label((1, 0))
        seen = {}
        for (u, v), val in vals.items():
            if v[0] == 3:
                seen[bin(inst8.label(v) & lv).count("1")] = val
        assert seen[0] == Fraction(15, 28)
        assert seen[2] == Fraction(15, 28) / 15 == Fraction(1, 28)

    def test_support_inside_descendant_cone(self, inst8, family8):
        e = ((0, 0), (1, 3))
        lv = inst8.label((1, 3))
        for (u, v), val in family8.support(e):
            if (u, v) == e:
                continue
            assert inst8.label(u) & lv == lv or u == (1, 3)

    def test_flow_splitting_identity_all_sinks(self, inst8, family8):
        e = ((0, 0), (1, 0))
        for t in inst8.vertices(3):
            assert sink_inflow(family8, e, t) == Fraction(15, 28)

    def test_every_subtree_passes_relocated_check(self, inst8, family8):
        for f in inst8.all_edges():
            rep = verify_assignment(inst8, family8.solution_for(f), root=f[1])
            assert rep.ok, f

    def test_rejects_deep_instance(self, inst16_deep):
        with pytest.raises(Exception):
            subtree_solutions(inst16_deep)


class TestPathSolution:
    def test_single_edge_value_is_x(self, inst8):
        ps = path_solution(inst8, 2)
        e = ((0, 0), (1, 0))
        assert ps.value((e,)).as_fraction() == Fraction(1, 15)

    def test_two_edge_value(self, inst8):
        ps = path_solution(inst8, 2)
        assert ps.value_class(1, 2).as_fraction() == Fraction(1, 90)

    def test_dummy_root(self, inst8):
        ps = path_solution(inst8, 2)
        assert ps.value((ps.dummy,)).as_fraction() == 1

    def test_path_count_matches_enumeration(self, inst4):
        ps = path_solution(inst4, 2)
        assert ps.path_count() == len(list(ps.enumerate_paths()))


class TestPathCounting:
    def test_nested_pair_count(self, inst8):
        v = (1, 0)
        u = (3, inst8.vertex_with_label(3, inst8.label(v))[1])
        assert count_paths(inst8, v, u) == 15
        assert closed_form_paths(inst8, 1, 3, 2) == 15

    def test_source_to_peak(self, inst16_deep):
        assert closed_form_paths(inst16_deep, 0, 2, 0) == 6
        assert count_paths(inst16_deep, (0, 0), (2, 7)) == 6

    def test_identity_pair(self, inst8):
        assert count_paths(inst8, (3, 5), (3, 5)) == 1

    def test_unreachable_pair(self, inst8):
        v, u = (1, 0), (3, 27)
        if not inst8.reachable(v, u):
            assert count_paths(inst8, v, u) == 0

    def _exhaustive(self, inst):
        verts = [v for i in range(inst.ell + 1) for v in inst.vertices(i)]
        for v in verts:
            for u in verts:
                if v[0] > u[0]:
                    continue
                dp = count_paths(inst, v, u)
                if inst.reachable(v, u):
                    ov = bin(inst.label(v) & inst.label(u)).count("1")
                    assert dp == closed_form_paths(inst, v[0], u[0], ov), (v, u)
                else:
                    assert dp == 0

    def test_exhaustive_m8(self, inst8):
        self._exhaustive(inst8)

    def test_exhaustive_m8_deep(self, inst8_deep):
        self._exhaustive(inst8_deep)


class TestHelperLemma:
    def test_deep_instance_distance_two(self, inst16_deep):
        hl = check_helper_lemma(inst16_deep, Fraction(1, 3))
        assert hl.largest_distance >= 2
        assert not hl.report.violations

    def test_depth3_distance_one_only(self, inst8):
        hl = check_helper_lemma(inst8, Fraction(1))
        assert hl.largest_distance == 1
        bad = [p for p in hl.pairs if not p["ok"]]
        assert {(p["i"], p["j"]) for p in bad} == {(1, 3)}

    def test_single_step_always_certified(self, inst16_deep):
        # one-step counts are 1 and gamma <= 1
        hl = check_helper_lemma(inst16_deep, Fraction(1, 6))
        one_step = [p for p in hl.pairs if p["j"] == p["i"] + 1]
        assert one_step and all(p["ok"] for p in one_step)

    def test_source_to_peak_bound_values(self, inst16_deep):
        # (0, 2): six orderings against 1/(gamma_0 gamma_1) = 11880/4
        hl = check_helper_lemma(inst16_deep, Fraction(1, 3))
        pair = next(p for p in hl.pairs if (p["i"], p["j"]) == (0, 2))
        assert pair["count"] == 6 and pair["ok"]
        inv = inst16_deep.profile.gamma[0].mul(inst16_deep.profile.gamma[1]).pow(-1)
        assert inv.as_fraction() == Fraction(11880, 4)

    def test_worst_case_is_max_overlap(self, inst16_deep):
        # cross-peak: nested labels maximize the count
        cnt_nested = closed_form_paths(inst16_deep, 3, 5,
                                       min(6, 6))
        assert max_paths_between_layers(inst16_deep, 3, 5) == cnt_nested
        assert closed_form_paths(inst16_deep, 3, 5, 5) <= cnt_nested


class TestPathHierarchy:
    def test_deep_t2_zero_violations(self, inst16_deep):
        ps = path_solution(inst16_deep, 2)
        rep = verify_path_hierarchy(inst16_deep, ps, mode="symbolic")
        assert rep.ok, [c.constraint_id for c in rep.violations]

    def test_lifted_covering_exact_equality(self, inst16_deep):
        ps = path_solution(inst16_deep, 2)
        rep = verify_path_hierarchy(inst16_deep, ps, mode="symbolic")
        eq = [c for c in rep.checks if c.constraint_id.startswith("lifted-covering")]
        assert eq and all(c.satisfied for c in eq)
        assert all(c.kind == "equality" for c in eq)

    def test_depth3_two_rounds_reports_but_is_violated(self, inst8):
        # two rounds defeat the depth-3 instance: the checker must report
        # the lifted packing failure rather than certify it
        rep = verify_path_hierarchy(inst8, path_solution(inst8, 2), mode="symbolic")
        ids = [c.constraint_id for c in rep.violations]
        assert ids == ["lifted-packing:(1,3)"]

    def test_enumerated_matches_symbolic_on_small_instance(self, inst4):
        ps = path_solution(inst4, 1)
        sym = verify_path_hierarchy(inst4, ps, mode="symbolic")
        enu = verify_path_hierarchy(inst4, ps, mode="enumerated")
        assert sym.ok == enu.ok == True

    def test_enumerated_detects_depth3_failure(self, inst4):
        ps = path_solution(inst4, 2)
        enu = verify_path_hierarchy(inst4, ps, mode="enumerated")
        sym = verify_path_hierarchy(inst4, ps, mode="symbolic")
        assert (not enu.ok) and (not sym.ok)

    def test_root_constraint(self, inst8):
        ps = path_solution(inst8, 1)
        rep = verify_path_hierarchy(inst8, ps, mode="symbolic")
        root = [c for c in rep.checks if c.constraint_id == "root"]
        assert root and root[0].satisfied

    def test_source_children_sum_is_ks(self, inst8):
        # children of the dummy root path: sum of y over delta+(s) equals k_s
        ps = path_solution(inst8, 1)
        total = sum((ps.value(((ps.dummy,) + ((inst8.source, w),))[1:]).as_fraction()
                     for w in inst8.out_neighbors(inst8.source)), Fraction(0))
        assert total == Fraction(28, 15)


class TestConsistencyRatio:
    def test_front_extension_ratio(self, inst8):
        # extending in front multiplies the value by 1/delta^- per layer
        ps = path_solution(inst8, 2)
        y_front = ps.value_class(1, 2)
        y_inner = ps.value_class(2, 1)
        ratio = y_front.as_fraction() / y_inner.as_fraction()
        assert ratio == Fraction(1, inst8.profile.delta_minus[1])
