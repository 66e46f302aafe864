import json
import os
import subprocess
import sys

import numpy as np
import pytest

from open_dgd import _accel, io
from open_dgd.functions import make_paper_pair
from open_dgd.objective import exact_minimizer_f


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return p


def test_two_agent_fixture_is_example_pair():
    inst, extras = io.load_instance(io.fixture_path("two_agent.json"))
    f1, f2, fb = make_paper_pair(100.0)
    np.testing.assert_allclose(inst.functions[0].hessian, f1.hessian, atol=1e-13)
    np.testing.assert_allclose(inst.functions[1].hessian, f2.hessian, atol=1e-13)
    agent, g = extras["swap"]
    assert agent == 1
    np.testing.assert_allclose(g.hessian, fb.hessian, atol=1e-13)
    np.testing.assert_allclose(exact_minimizer_f(inst.functions), [0, 4.95], atol=1e-9)
    assert inst.rho == 1.0 and inst.net.n == 2


def test_bare_fixture_names_resolve():
    assert io.resolve_path("example_swap.json") == io.fixture_path("example_swap.json")
    sched = io.load_schedule("example_swap.json")
    assert sched.mode == "periodic" and len(sched.cycle) == 2
    inst, _ = io.load_instance("complete_10.json")
    assert inst.n == 10 and inst.net.lambda_n == pytest.approx(10.0)


def test_round_trip(tmp_path):
    inst, _ = io.load_instance("two_agent.json")
    p = tmp_path / "rt.json"
    io.dump_json(io.instance_to_json(inst), p)
    again, _ = io.load_instance(p)
    for a, b in zip(inst.functions, again.functions):
        np.testing.assert_array_equal(a.hessian, b.hessian)
        np.testing.assert_array_equal(a.minimizer, b.minimizer)
    assert again.eta == inst.eta and again.params == inst.params


def test_missing_file_names_path(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.json"):
        io.load_instance(tmp_path / "nope.json")


def test_bad_json_has_line_info(tmp_path):
    p = write(tmp_path, "bad.json", '{\n  "rho": 1,\n  oops\n}')
    with pytest.raises(io.ParseError, match=r"bad\.json:3:"):
        io.load_instance(p)


@pytest.mark.parametrize("obj,where", [
    ({"network": {"generator": {"kind": "complete", "n": 2}}, "rho": 1}, "functions"),
    ({"functions": [{"type": "quadratic", "hessian": [[1]], "minimizer": [0]}] * 2,
      "network": {"generator": {"kind": "star", "n": 2}}, "rho": 1}, "network.generator.kind"),
    ({"functions": [{"type": "cubic"}], "network": {"adjacency": [[1]]}, "rho": 1},
     "functions[0].type"),
    ({"functions": [{"type": "quadratic", "hessian": [[1]]}], "network": {"adjacency": [[1]]},
      "rho": 1}, "functions[0].minimizer"),
    ({"functions": [{"type": "quadratic", "hessian": [[1]], "minimizer": [0]}],
      "network": {"adjacency": [[1]]}, "rho": "big"}, "rho"),
    ({"functions": [{"type": "quadratic", "hessian": [[1]], "minimizer": [0]}] * 2,
      "network": {"adjacency": [[1, 0], [0, 1]]}, "rho": 1}, "network"),
    ({"functions": [{"type": "quadratic", "hessian": [[1]], "minimizer": [0]}] * 2,
      "network": {"generator": {"kind": "complete", "n": 2}}, "rho": 1,
      "swap": {"agent": 4, "function": {"type": "quadratic", "hessian": [[1]], "minimizer": [0]}}},
     "swap.agent"),
])
def test_parse_errors_name_field(tmp_path, obj, where):
    p = write(tmp_path, "i.json", obj)
    with pytest.raises(io.ParseError) as exc:
        io.load_instance(p)
    assert where in str(exc.value)


def test_schedule_parsing(tmp_path):
    f = {"type": "quadratic", "hessian": [[1.0, 0], [0, 2.0]], "minimizer": [0.5, 0]}
    s = io.parse_schedule({"mode": "scripted", "events": [{"k": 4, "agent": 0, "function": f},
                                                          {"k": 1, "agent": 1, "function": f}]})
    assert [e.k for e in s.events] == [1, 4]
    s = io.parse_schedule({"mode": "adversarial_random", "period": 3, "seed": 8})
    assert (s.period, s.seed) == (3, 8)
    s = io.parse_schedule({"mode": "scripted", "events": [{"k": 2, "agent": 0, "function": None}]})
    assert s.events[0].function is None
    with pytest.raises(io.ParseError, match="events"):
        io.parse_schedule({"mode": "scripted"})
    with pytest.raises(io.ParseError, match="mode"):
        io.parse_schedule({"mode": "chaos"})


def test_random_descriptor_expands():
    fs = io.parse_functions([{"type": "random", "count": 4, "alpha": 1, "beta": 5, "dim": 3}])
    assert len(fs) == 4 and all(f.dim == 3 for f in fs)


def test_x0_parsing():
    base = {"functions": [{"type": "quadratic", "hessian": [[1]], "minimizer": [0]}] * 2,
            "network": {"generator": {"kind": "complete", "n": 2}}, "rho": 1}
    _, ex = io.parse_instance({**base, "x0": [1.0, 2.0]})
    np.testing.assert_array_equal(ex["x0"], [[1.0], [2.0]])
    with pytest.raises(io.ParseError, match="x0"):
        io.parse_instance({**base, "x0": [1.0, 2.0, 3.0]})


# -- backend flag ---------------------------------------------------------------

def _backend_in_subprocess(value):
    env = dict(os.environ, OPEN_DGD_BACKEND=value)
    return subprocess.run([sys.executable, "-c", "from open_dgd import _accel; print(_accel.BACKEND)"],
                          env=env, capture_output=True, text=True)


def test_backend_env_flag():
    out = _backend_in_subprocess("numpy")
    assert out.returncode == 0 and out.stdout.strip() == "numpy"
    out = _backend_in_subprocess("auto")
    assert out.stdout.strip() == ("numba" if _accel.NUMBA_AVAILABLE else "numpy")
    out = _backend_in_subprocess("cuda")
    assert out.returncode != 0 and "OPEN_DGD_BACKEND" in out.stderr


def test_resolve():
    assert _accel.resolve("numpy") == "numpy"
    assert _accel.resolve(None) == _accel.BACKEND
    with pytest.raises(ValueError):
        _accel.resolve("fortran")
