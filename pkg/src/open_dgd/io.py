"""JSON descriptors for functions, networks, instances and schedules."""
import json
from pathlib import Path

import numpy as np

from . import network as nw
from .functions import FunctionClassParams, QuadraticFunction, RotatedQuadratic2D, random_quadratics
from .objective import ProblemInstance
from .open_system import Event, EventSchedule


class ParseError(ValueError):
    """Descriptor is malformed; the message names the offending field."""

    def __init__(self, where, msg):
        super().__init__(f"{where}: {msg}" if where else msg)
        self.where = where
        self.msg = msg


def _get(obj, key, where, kind=None, default=...):
    if not isinstance(obj, dict):
        raise ParseError(where, f"expected an object, got {type(obj).__name__}")
    if key not in obj:
        if default is ...:
            raise ParseError(f"{where}.{key}" if where else key, "missing field")
        return default
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise ParseError(f"{where}.{key}" if where else key,
                         f"expected {getattr(kind, '__name__', kind)}, got {type(val).__name__}")
    return val


def _array(val, where, ndim):
    try:
        arr = np.array(val, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ParseError(where, f"not a numeric array ({exc})") from None
    if arr.ndim != ndim:
        raise ParseError(where, f"expected a {ndim}-D array, got {arr.ndim}-D")
    return arr


_NUM = (int, float)


def parse_function(obj, where="function"):
    """One descriptor; ``{"type": "random", "count": k, ...}`` expands to a list."""
    kind = _get(obj, "type", where, str)
    try:
        if kind == "quadratic":
            H = _array(_get(obj, "hessian", where), f"{where}.hessian", 2)
            c = _array(_get(obj, "minimizer", where), f"{where}.minimizer", 1)
            return QuadraticFunction(H, c)
        if kind == "rotated2d":
            return RotatedQuadratic2D(
                float(_get(obj, "phi", where, _NUM)), int(_get(obj, "sign", where, int)),
                tuple(_array(_get(obj, "minimizer", where), f"{where}.minimizer", 1)),
                float(_get(obj, "alpha", where, _NUM)), float(_get(obj, "beta", where, _NUM)),
            ).to_quadratic()
        if kind == "random":
            params = FunctionClassParams(float(_get(obj, "alpha", where, _NUM)),
                                         float(_get(obj, "beta", where, _NUM)),
                                         int(_get(obj, "dim", where, int, 2)))
            rng = np.random.default_rng(int(_get(obj, "seed", where, int, 0)))
            return random_quadratics(rng, int(_get(obj, "count", where, int)), params,
                                     spectrum=_get(obj, "spectrum", where, str, "loguniform"),
                                     on_sphere=bool(_get(obj, "on_sphere", where, bool, False)))
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(where, str(exc)) from None
    raise ParseError(f"{where}.type", f"unknown function type {kind!r}")


def parse_functions(items, where="functions"):
    if not isinstance(items, list) or not items:
        raise ParseError(where, "expected a nonempty list of function descriptors")
    out = []
    for i, item in enumerate(items):
        f = parse_function(item, f"{where}[{i}]")
        out.extend(f if isinstance(f, list) else [f])
    return out


def parse_network(obj, where="network"):
    try:
        if isinstance(obj, dict) and "adjacency" in obj:
            return nw.build_network(_array(obj["adjacency"], f"{where}.adjacency", 2))
        gen = _get(obj, "generator", where, dict)
        gw = f"{where}.generator"
        kind = _get(gen, "kind", gw, str)
        if kind not in nw.GENERATORS:
            raise ParseError(f"{gw}.kind", f"unknown generator {kind!r}; one of {sorted(nw.GENERATORS)}")
        kw = {"edge_weight": float(_get(gen, "edge_weight", gw, _NUM, 1.0)),
              "self_weight": float(_get(gen, "self_weight", gw, _NUM, 1.0))}
        if kind == "erdos_renyi":
            kw["p"] = float(_get(gen, "p", gw, _NUM))
            kw["seed"] = int(_get(gen, "seed", gw, int, 0))
        return nw.GENERATORS[kind](int(_get(gen, "n", gw, int)), **kw)
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(where, str(exc)) from None


def parse_instance(obj):
    """Returns ``(instance, extras)``; extras carries optional ``x0`` and ``swap``."""
    funcs = parse_functions(_get(obj, "functions", ""))
    net = parse_network(_get(obj, "network", ""))
    rho = float(_get(obj, "rho", "", _NUM))
    eta = _get(obj, "eta", "", _NUM, None)
    params = None
    if "alpha" in obj or "beta" in obj:
        params = FunctionClassParams(float(_get(obj, "alpha", "", _NUM)),
                                     float(_get(obj, "beta", "", _NUM)), funcs[0].dim)
    try:
        inst = ProblemInstance(tuple(funcs), net, rho, eta, params)
    except ValueError as exc:
        raise ParseError("", str(exc)) from None
    extras = {}
    if "x0" in obj:
        x0 = _array(obj["x0"], "x0", 2 if np.ndim(obj["x0"]) == 2 else 1)
        if x0.size != inst.n * inst.d:
            raise ParseError("x0", f"expected {inst.n * inst.d} entries, got {x0.size}")
        extras["x0"] = x0.reshape(inst.n, inst.d)
    if "swap" in obj:
        sw = _get(obj, "swap", "", dict)
        agent = int(_get(sw, "agent", "swap", int))
        if not 0 <= agent < inst.n:
            raise ParseError("swap.agent", f"agent {agent} out of range for n={inst.n}")
        fb = parse_function(_get(sw, "function", "swap"), "swap.function")
        extras["swap"] = (agent, fb)
    return inst, extras


def parse_schedule(obj):
    mode = _get(obj, "mode", "", str)
    kw = {"mode": mode}
    if "period" in obj:
        kw["period"] = int(_get(obj, "period", "", int))
    if "seed" in obj:
        kw["seed"] = int(_get(obj, "seed", "", int))
    for key, kind in (("spectrum", str), ("on_sphere", bool), ("pool_size", int)):
        if key in obj:
            kw[key] = _get(obj, key, "", kind)
    if mode == "scripted":
        events = []
        for i, ev in enumerate(_get(obj, "events", "", list)):
            w = f"events[{i}]"
            f = _get(ev, "function", w)
            events.append(Event(int(_get(ev, "k", w, int)), int(_get(ev, "agent", w, int)),
                                None if f is None else parse_function(f, f"{w}.function")))
        kw["events"] = tuple(events)
    elif mode == "periodic":
        kw["agent"] = int(_get(obj, "agent", "", int))
        kw["cycle"] = tuple(parse_functions(_get(obj, "functions", ""), "functions"))
    try:
        return EventSchedule(**kw)
    except ValueError as exc:
        raise ParseError("", str(exc)) from None


FIXTURES = Path(__file__).with_name("fixtures")


def fixture_path(name):
    """Path of a bundled fixture such as ``two_agent.json``."""
    return FIXTURES / name


def resolve_path(path):
    """``path`` itself if it exists, else a bundled fixture of that bare name."""
    path = Path(path)
    if not path.exists() and path.parent == Path(".") and (FIXTURES / path.name).is_file():
        return FIXTURES / path.name
    return path


def load_json(path):
    """Read a JSON file; raises ``FileNotFoundError`` or :class:`ParseError` with line info."""
    path = resolve_path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None


def _load(path, parser):
    obj = load_json(path)
    try:
        return parser(obj)
    except ParseError as exc:
        where = f"{path}: {exc.where}" if exc.where else str(path)
        raise ParseError(where, exc.msg) from None


def load_instance(path):
    return _load(path, parse_instance)


def load_schedule(path):
    return _load(path, parse_schedule)


def function_to_json(f):
    return {"type": "quadratic", "hessian": f.hessian.tolist(), "minimizer": f.minimizer.tolist()}


def instance_to_json(inst):
    return {"functions": [function_to_json(f) for f in inst.functions],
            "network": {"adjacency": inst.net.adjacency.tolist()},
            "rho": inst.rho, "eta": inst.eta,
            "alpha": inst.params.alpha, "beta": inst.params.beta}


def dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
