import csv

import numpy as np
import pytest

from conftest import random_instance
from open_dgd import _accel
from open_dgd.dgd import dgd_step, run
from open_dgd.functions import (FunctionClassParams, QuadraticFunction, make_paper_pair,
                                random_quadratics, validate_membership)
from open_dgd.network import complete, cycle
from open_dgd.objective import ProblemInstance, exact_minimizer_F_rho, exact_minimizer_f
from open_dgd.open_system import (OPEN_TRACE_COLUMNS, Event, EventSchedule, ScheduleError,
                                  adversarial_probe, departure_placeholder, envelope_for,
                                  simulate_open, stability_radius)


@pytest.fixture
def example_instance():
    f1, f2, fb = make_paper_pair(100.0)
    inst = ProblemInstance((f1, f2), complete(2), 1.0, params=FunctionClassParams(1.0, 100.0, 2))
    return inst, f2, fb


# -- radius ----------------------------------------------------------------------

def test_radius_boundary_branch():
    env = stability_radius(1.0, 1.0, 1.0, 2.0, 2)
    assert env.kappa_rho == 3.0
    assert env.R == pytest.approx((1 + np.sqrt(6)) * np.sqrt(2) * 2, rel=1e-14)
    assert env.R == pytest.approx(9.7566, abs=1e-4)


def test_radius_small_branch():
    env = stability_radius(1.0, 1.0, 0.0, 5.0, 1)
    assert env.kappa_rho == 1.0
    assert env.R == pytest.approx((1 + np.sqrt(6)) * 2, rel=1e-14)


def test_radius_large_branch():
    env = stability_radius(1.0, 4.0, 2.0, 3.0, 4)
    assert env.kappa_rho == 10.0
    assert env.b == pytest.approx(6.0)
    assert env.R == pytest.approx(6 + 12 * np.sqrt(5), rel=1e-14)


@pytest.mark.parametrize("args", [(0.0, 1.0, 1.0, 1.0, 1), (2.0, 1.0, 1.0, 1.0, 1),
                                  (1.0, 1.0, -1.0, 1.0, 1), (1.0, 1.0, 1.0, -1.0, 1),
                                  (1.0, 1.0, 1.0, 1.0, 0)])
def test_radius_rejects(args):
    with pytest.raises(ValueError):
        stability_radius(*args)


def test_b_below_R():
    for kr in np.linspace(1, 200, 50):
        env = stability_radius(1.0, 1.0, kr - 1, 1.0, 3)
        assert env.b <= env.R


# -- schedules -------------------------------------------------------------------

def test_schedule_validation(example_instance):
    inst, _, _ = example_instance
    bad = QuadraticFunction(np.eye(2), [2.0, 0.0])
    with pytest.raises(ScheduleError, match="not in the class"):
        EventSchedule(events=(Event(3, 0, bad),)).validate(inst)
    with pytest.raises(ScheduleError, match="out of range"):
        EventSchedule(events=(Event(3, 5, inst.functions[0]),)).validate(inst)
    with pytest.raises(ScheduleError):
        EventSchedule(mode="bogus")
    with pytest.raises(ScheduleError):
        EventSchedule(mode="periodic")
    with pytest.raises(ScheduleError):
        EventSchedule(events=(Event(-1, 0, inst.functions[0]),))
    with pytest.raises(ScheduleError):
        EventSchedule(mode="adversarial_random", period=0)


def test_events_sorted(example_instance):
    inst, f2, fb = example_instance
    s = EventSchedule(events=(Event(5, 1, fb), Event(2, 1, f2)))
    assert [e.k for e in s.events] == [2, 5]


def test_placeholder_is_member():
    p = FunctionClassParams(0.5, 20.0, 3)
    f = departure_placeholder(p)
    assert validate_membership(f, p).ok
    np.testing.assert_array_equal(f.minimizer, 0)


def test_departure_event_uses_placeholder(example_instance):
    inst, f2, fb = example_instance
    gone = departure_placeholder(inst.params)
    x0 = np.ones((2, 2))
    a = simulate_open(inst, x0, EventSchedule(events=(Event(3, 1, None),)), 20)
    b = simulate_open(inst, x0, EventSchedule(events=(Event(3, 1, gone),)), 20)
    np.testing.assert_array_equal(a.final_x, b.final_x)
    want = exact_minimizer_f([inst.functions[0], gone])
    np.testing.assert_allclose(a.f_minimizers[-1], want, atol=1e-12)


# -- simulation ------------------------------------------------------------------

def test_empty_schedule_bitwise(backend):
    rng = np.random.default_rng(0)
    inst = random_instance(rng)
    x0 = rng.standard_normal((inst.n, inst.d))
    a = run(inst, x0, 50, backend=backend)
    b = simulate_open(inst, x0, EventSchedule(), 50, backend=backend)
    for col in ("norm_x", "dist_to_min", "F_rho", "consensus_residual"):
        assert np.array_equal(getattr(a, col), getattr(b, col))


def test_scripted_matches_manual_loop(example_instance, backend):
    inst, f2, fb = example_instance
    events = (Event(0, 1, fb), Event(3, 1, f2), Event(3, 0, fb), Event(7, 0, inst.functions[0]))
    tr = simulate_open(inst, np.zeros((2, 2)), EventSchedule(events=events), 10, backend=backend)
    funcs = list(inst.functions)
    x = np.zeros((2, 2))
    for k in range(11):
        for e in events:
            if e.k == k:
                funcs[e.agent] = e.function
        cur = inst.with_functions(funcs)
        assert tr.norm_x[k] == pytest.approx(np.linalg.norm(x), rel=1e-12)
        assert tr.inst_min_norm[k] == pytest.approx(np.linalg.norm(exact_minimizer_F_rho(cur)),
                                                    rel=1e-10)
        assert tr.event_count[k] == sum(e.k == k for e in events)
        x = dgd_step(cur, x)


def test_example_swap_jumps(example_instance, backend):
    inst, f2, fb = example_instance
    sched = EventSchedule(mode="periodic", agent=1, period=1, cycle=(fb, f2))
    tr = simulate_open(inst, np.zeros((2, 2)), sched, 1000, backend=backend)
    np.testing.assert_allclose(tr.f_minimizers[0::2], [[0.0, 0.0]] * 501, atol=1e-9)
    np.testing.assert_allclose(tr.f_minimizers[1::2], [[0.0, 4.95]] * 500, atol=1e-9)
    assert tr.entry_k == 0
    assert tr.violations == 0
    assert tr.inside_ball.all()


def test_locality_of_replacement(example_instance):
    # swapping agent 1 leaves agent 0's next iterate unchanged
    inst, _, fb = example_instance
    x = np.array([[0.3, -0.2], [0.5, 0.9]])
    a = dgd_step(inst, x)
    b = dgd_step(inst.with_functions((inst.functions[0], fb)), x)
    np.testing.assert_array_equal(a[0], b[0])
    assert not np.allclose(a[1], b[1])


def test_adversarial_random_many_agents(backend):
    rng = np.random.default_rng(1)
    params = FunctionClassParams(1.0, 10.0, 2)
    inst = ProblemInstance(tuple(random_quadratics(rng, 50, params)), cycle(50), 1.0, params=params)
    sched = EventSchedule(mode="adversarial_random", seed=3, spectrum="extreme", on_sphere=True)
    tr = simulate_open(inst, np.zeros((50, 2)), sched, 10_000, track_minimizer=False,
                       backend=backend)
    assert tr.entry_k == 0
    assert tr.max_post_entry_norm <= tr.envelope.R
    assert tr.event_count[0] == 50


def test_adversarial_worst(example_instance, backend):
    inst, _, _ = example_instance
    sched = EventSchedule(mode="adversarial_worst", seed=1)
    tr = simulate_open(inst, np.zeros((2, 2)), sched, 2000, backend=backend)
    assert tr.violations == 0
    assert tr.max_post_entry_norm > 0


def test_antipodal_stress(backend):
    # every agent's minimizer flips between +u and -u each step
    n, d = 6, 3
    params = FunctionClassParams(1.0, 50.0, d)
    u = np.ones(d) / np.sqrt(d)
    plus = QuadraticFunction(np.diag([1.0, 50.0, 50.0]), u)
    minus = QuadraticFunction(np.diag([1.0, 50.0, 50.0]), -u)
    events = tuple(Event(k, i, plus if k % 2 else minus) for k in range(400) for i in range(n))
    inst = ProblemInstance((plus,) * n, cycle(n), 5.0, params=params)
    env = envelope_for(inst)
    x0 = np.tile(u, (n, 1)) * (env.R * (1 - 1e-9) / np.sqrt(n))
    tr = simulate_open(inst, x0, EventSchedule(events=events), 400, backend=backend)
    assert tr.entry_k == 0
    assert tr.violations == 0


def test_backends_agree_open():
    if len(_accel.available_backends()) < 2:
        pytest.skip("numba unavailable")
    rng = np.random.default_rng(2)
    inst = random_instance(rng, n=5, d=2)
    sched = EventSchedule(mode="adversarial_random", seed=5, period=3)
    a = simulate_open(inst, np.ones((5, 2)), sched, 300, backend="numba")
    b = simulate_open(inst, np.ones((5, 2)), sched, 300, backend="numpy")
    np.testing.assert_allclose(a.norm_x, b.norm_x, rtol=1e-10)
    np.testing.assert_allclose(a.inst_min_norm, b.inst_min_norm, rtol=1e-10)
    sched = EventSchedule(mode="adversarial_worst", seed=5)
    a = simulate_open(inst, np.ones((5, 2)), sched, 300, backend="numba")
    b = simulate_open(inst, np.ones((5, 2)), sched, 300, backend="numpy")
    np.testing.assert_allclose(a.norm_x, b.norm_x, rtol=1e-10)


def test_entry_latch():
    # start outside the ball, enter, stay
    rng = np.random.default_rng(3)
    inst = random_instance(rng, n=3, d=2)
    env = envelope_for(inst)
    x0 = np.full((3, 2), 3 * env.R)
    tr = simulate_open(inst, x0, EventSchedule(mode="adversarial_random", seed=1), 500)
    assert tr.entry_k is not None and tr.entry_k > 0
    assert not tr.inside_ball[0]
    assert tr.inside_ball[tr.entry_k:].all()


def test_open_trace_csv(tmp_path, example_instance):
    inst, f2, fb = example_instance
    tr = simulate_open(inst, np.zeros((2, 2)),
                       EventSchedule(mode="periodic", agent=1, cycle=(fb, f2)), 9)
    p = tmp_path / "t.csv"
    tr.to_csv(p)
    rows = list(csv.reader(open(p)))
    assert tuple(rows[0]) == OPEN_TRACE_COLUMNS
    assert len(rows) == 11
    assert rows[1][-1] == "1"


# -- probe -----------------------------------------------------------------------

def test_probe_high_penalty():
    rng = np.random.default_rng(4)
    inst = random_instance(rng, n=4, d=2, rho=100.0)
    res = adversarial_probe(inst, np.zeros((4, 2)), 500, restarts=4, seed=0)
    assert res.violations == 0
    assert 0 < res.ratio <= 1


def test_probe_single_agent():
    f = QuadraticFunction(np.diag([1.0, 4.0]), [0.6, 0.0])
    inst = ProblemInstance((f,), complete(1), 0.0)
    res = adversarial_probe(inst, [1.0, 1.0], 200, restarts=2)
    assert res.ratio <= 1


def test_probe_deterministic_across_jobs():
    rng = np.random.default_rng(5)
    inst = random_instance(rng, n=3, d=2)
    a = adversarial_probe(inst, np.zeros((3, 2)), 300, restarts=6, seed=11, jobs=1)
    b = adversarial_probe(inst, np.zeros((3, 2)), 300, restarts=6, seed=11, jobs=3)
    assert a == b
