import json

import numpy as np
import pytest

from funnelopt import bench
from funnelopt.errors import ConfigError
from funnelopt.funnel import FunnelParams, local_search, omega_t, trace_to_jsonl
from funnelopt.problem import WHITE_BOX, EvaluationLedger, GreyBoxProblem


def disk_problem(**kw):
    # min x0 + x1 on the unit disk; solution -(1, 1)/sqrt(2)
    return GreyBoxProblem(n=2, f=lambda x: x[0] + x[1], lx=[-2, -2], ux=[2, 2],
                          c=lambda x: np.array([x @ x]), lc=[-np.inf], uc=[1.0], **kw)


def check_trace(trace):
    """Funnel invariants that must hold on every iteration record."""
    levels = {}
    for r in trace:
        if "k" not in r:
            continue
        levels.setdefault(r["level"], []).append(r)
        assert r["d_inf"] <= r["delta"] + 1e-12
        if "Jt" in r:
            assert r["Jt"] <= 1e-6 * (1 + r["J_norm"] * r["t_norm"])
        assert r.get("x_in_box", True) and r.get("s_in_box", True)
        assert max(r["delta"], r["delta_f_new"], r["delta_z_new"]) <= r["delta_max"]
        if r["accepted"]:
            assert r["v_new"] <= r["vmax"] * (1 + 1e-12)
    for recs in levels.values():
        vm = [r["vmax"] for r in recs]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(vm, vm[1:]))


class TestParams:
    @pytest.mark.parametrize("kw", [dict(whichmodel=5), dict(gamma1=1.5), dict(eta1=0.95),
                                    dict(lam=0.5), dict(projection="qr")])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            FunnelParams(**kw).validate()

    def test_feasibility_first(self):
        assert FunnelParams.feasibility_first().kappa_r == 0.0

    def test_omega_t_is_increasing(self):
        t = np.logspace(-8, 2, 30)
        w = [omega_t(v) for v in t]
        assert omega_t(0.0) == 0.0
        assert all(b >= a for a, b in zip(w, w[1:]))


class TestLocalSearch:
    def test_bound_constrained_quadratic(self):
        p = GreyBoxProblem(n=3, f=lambda x: float(np.sum((x - [0.5, 2.0, -1.0]) ** 2)),
                           lx=[-1, -1, -1], ux=[1, 1, 1])
        rec = local_search(p, np.zeros(3), max_evals=200, rng=0)
        np.testing.assert_allclose(rec.x, [0.5, 1.0, -1.0], atol=1e-3)
        assert rec.cv == 0.0

    def test_unbounded_variables_allowed(self):
        p = GreyBoxProblem(n=2, f=lambda x: (x[0] - 3) ** 2 + (x[1] + 1) ** 2)
        rec = local_search(p, np.zeros(2), max_evals=100, rng=0)
        np.testing.assert_allclose(rec.x, [3, -1], atol=1e-3)

    def test_inequality_constrained(self):
        rec = local_search(disk_problem(), np.zeros(2), max_evals=150, rng=0, trace=True)
        assert rec.feasible
        assert rec.f == pytest.approx(-np.sqrt(2), abs=1e-3)
        check_trace(rec.trace)

    def test_infeasible_start(self):
        rec = local_search(disk_problem(), np.array([1.9, 1.9]), max_evals=200, rng=1)
        assert rec.feasible and rec.f == pytest.approx(-np.sqrt(2), abs=1e-3)

    def test_equality_constraint(self):
        p = bench.get_problem("G11")
        rec = local_search(p, np.array([0.3, 0.8]), max_evals=200, rng=0)
        assert rec.feasible and rec.f == pytest.approx(0.75, abs=1e-3)

    @pytest.mark.parametrize("whichmodel", [1, 2, 3, 4])
    def test_model_variants(self, whichmodel):
        rec = local_search(disk_problem(), np.zeros(2), params=FunnelParams(whichmodel=whichmodel),
                           max_evals=200, rng=0)
        assert rec.feasible and rec.f == pytest.approx(-np.sqrt(2), abs=1e-2)

    def test_budget_respected(self):
        led = EvaluationLedger()
        rec = local_search(bench.get_problem("G7"), np.zeros(10), led, max_evals=25, rng=0)
        assert rec.evaluations <= 25 and led.bb_calls <= 25
        assert rec.status == "budget"

    def test_grey_box_and_black_box_agree(self):
        e = bench.get_entry("HS23")
        x0 = np.array([3.0, 3.0])
        black = local_search(e.problem(), x0, max_evals=200, rng=0)
        grey = local_search(e.problem("grey-box"), x0, max_evals=200, rng=0)
        assert grey.feasible and grey.f == pytest.approx(2.0, abs=1e-2)
        assert black.feasible and black.f == pytest.approx(2.0, abs=1e-2)

    def test_white_box_only_problem(self):
        p = GreyBoxProblem(n=2, f=lambda x: float(x @ x), f_kind=WHITE_BOX,
                           f_grad=lambda x: 2 * x, lx=[-1, -1], ux=[1, 1])
        led = EvaluationLedger(budget=0)
        rec = local_search(p, np.array([0.5, -0.5]), led, max_evals=10, rng=0)
        assert led.bb_calls == 0
        assert np.linalg.norm(rec.x) <= 1e-3

    def test_already_critical_start(self):
        p = GreyBoxProblem(n=2, f=lambda x: float(x @ x), lx=[0, 0], ux=[1, 1])
        rec = local_search(p, np.zeros(2), max_evals=50, rng=0)
        np.testing.assert_array_equal(rec.x, [0.0, 0.0])
        assert rec.converged

    def test_seeded_runs_repeat(self):
        a = local_search(disk_problem(), np.array([0.5, 0.2]), max_evals=80, rng=3)
        b = local_search(disk_problem(), np.array([0.5, 0.2]), max_evals=80, rng=3)
        np.testing.assert_array_equal(a.x, b.x)
        assert a.evaluations == b.evaluations

    def test_callback_and_jsonl(self):
        seen = []
        rec = local_search(disk_problem(), np.zeros(2), max_evals=60, rng=0, trace=True,
                           callback=seen.append)
        assert seen == rec.trace
        lines = trace_to_jsonl(rec.trace).splitlines()
        assert len(lines) == len(rec.trace)
        json.loads(lines[0])

    def test_bad_start_shape(self):
        with pytest.raises(ValueError):
            local_search(disk_problem(), np.zeros(3))

    def test_record_serializes(self):
        rec = local_search(disk_problem(), np.zeros(2), max_evals=60, rng=0)
        d = rec.to_dict()
        json.dumps(d)
        assert d["f"] == rec.f


class TestBenchmarkTraces:
    @pytest.mark.parametrize("name", ["G6", "G8", "PVD4", "SR7", "Hesse"])
    def test_invariants_from_random_start(self, name):
        e = bench.get_entry(name)
        rng = np.random.default_rng(0)
        x0 = np.array(e.lx) + (np.array(e.ux) - np.array(e.lx)) * rng.uniform(size=e.n)
        rec = local_search(e.problem(), x0, max_evals=50 * e.n, rng=0, trace=True)
        check_trace(rec.trace)
