"""Exact congestion identities of the shadow distribution and the
controls that show where its key property comes from and where it breaks.
"""

import math
import time
from fractions import Fraction

import pytest

from mmda_lab.instances import build_subtree_counterexample
from mmda_lab.relaxations import sink_inflow
from mmda_lab.shadow import (ConditionEvent, counterexample_shadow_model,
                             sa1_certificate)


class TestMiddleLayerPackingIdentity:
    def test_triggered_congestion_sums_to_one(self, inst8, model8, family8):
        # every middle vertex: the first-layer triggers below it each push
        # exactly 1/C(2rm, rm) onto one in-edge, and there are C(2rm, rm)
        # of them
        for v in list(inst8.vertices(2))[:10]:
            total = Fraction(0)
            for w in inst8.in_neighbors(v):
                f = (inst8.source, w)
                contribution = sum((val for e, val in family8.support(f)
                                    if e[1] == v), Fraction(0))
                assert contribution == Fraction(1, 6)
                total += contribution
            assert total == 1


class TestBottomLayerCongestionBound:
    def test_term_by_term_closed_form(self, inst8, model8, family8):
        # conditioned congestion estimate at a sink: direct enumeration of
        # sum over first-layer edges of (6x + trigger value) * inflow
        # equals 6 + (C1/C0)^2 * sum_j C(m-2rm+j, j)^-1 C(rm, j)^2
        inst = inst8
        m, rm = 8, 2
        c0, c1 = math.comb(m, rm), math.comb(m - rm, rm)
        w = inst.out_neighbors((1, 0))[0]
        t = inst.out_neighbors(w)[0]
        e1 = (w, t)
        lw, lt = inst.label(w), inst.label(t)
        x1 = Fraction(1, c1)
        inflow = Fraction(c1, c0)
        direct = Fraction(0)
        by_j: dict[int, Fraction] = {}
        for v in inst.vertices(1):
            e = (inst.source, v)
            trig = family8.value(e, e1)
            direct += (6 * x1 + trig) * inflow
            if trig:
                j = bin(inst.label(v) & lt).count("1")
                by_j[j] = by_j.get(j, 0) + trig * inflow
        closed = 6 + Fraction(c1, c0) ** 2 * sum(
            Fraction(math.comb(rm, j) ** 2, math.comb(m - 2 * rm + j, j))
            for j in range(rm + 1))
        assert direct == closed
        # term-by-term: the j-grouped pieces match the closed-form terms
        for j in range(rm + 1):
            expected = (Fraction(c1, c0) ** 2 *
                        Fraction(math.comb(rm, j) ** 2,
                                 math.comb(m - 2 * rm + j, j)))
            assert by_j.get(j, Fraction(0)) == expected, j

    def test_flow_inflow_constant(self, inst8, family8):
        e = (inst8.source, (1, 7))
        vals = {sink_inflow(family8, e, t) for t in list(inst8.vertices(3))[:9]}
        assert vals == {Fraction(15, 28)}


class TestSharedSinkControl:
    def test_ratio_degenerates_on_public_edges(self):
        inst = build_subtree_counterexample(3)
        model = counterexample_shadow_model(inst)
        v = (1, 0)
        pub = inst.public_sinks[0]
        e = (v, pub)
        assert model.x_of(e) == 0
        assert model.marginal(e) == Fraction(1, 3)
        # private edges keep their mass
        priv = inst.private_sinks[0]
        assert model.x_of((v, priv)) == 1

    def test_private_edges_certain(self):
        inst = build_subtree_counterexample(2)
        model = counterexample_shadow_model(inst)
        assert model.marginal(((1, 0), inst.private_sinks[0])) == 1


class TestSkippedEvents:
    def test_certain_edges_skip_negative_conditioning(self):
        # private edges of the shared-sink model are active with
        # probability one; their negative conditionings are skipped and
        # counted, not raised
        inst = build_subtree_counterexample(2)
        model = counterexample_shadow_model(inst)
        res = sa1_certificate(model, Fraction(0), Fraction(10))
        assert res.events_skipped == len(inst.private_sinks)
        assert res.events_checked == 2 * inst.n_edges - res.events_skipped


class TestFullConditionalSweep:
    def test_recorded_fixture_levels(self, inst8, model8):
        # every edge, both signs: recorded floor/ceiling from the exact
        # engine; the run also exercises the skipped-event accounting
        t0 = time.monotonic()
        res = sa1_certificate(model8, Fraction(1, 7), Fraction(4))
        dt = time.monotonic() - t0
        assert res.passed, (res.min_covering_slack, res.max_packing_sum)
        assert res.events_checked == 2 * inst8.n_edges
        assert res.events_skipped == 0
        # recorded fixture values: the binding conditionings
        assert res.min_covering_slack > Fraction(1, 7)
        assert res.max_packing_sum < 4
        assert dt < 420, dt
