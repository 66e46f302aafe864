"""Empirical worst case of the swap sensitivity ``||x^a - x^b||``.

The search runs over 2-D quadratics with spectrum ``{alpha, beta}``: each
function is encoded as ``(angle, radius, polar_angle)``, the rotation angle
of its Hessian and its minimizer in polar coordinates, so the unit-ball
constraint is a box.  Functions are ordered ``f_1 .. f_{n-1}, f_a, f_b``.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .bounds import sensitivity_bound
from .dgd import write_csv
from .functions import RotatedQuadratic2D

SCALING_COLUMNS = ("kappa", "sqrt_kappa", "n", "best_value", "ratio_to_sqrt_kappa",
                   "bound")


@dataclass(frozen=True)
class SearchSpace:
    n: int
    kappa: float
    d: int = 2
    alpha: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need n >= 2, got {self.n}")
        if self.kappa < 1:
            raise ValueError(f"kappa must be >= 1, got {self.kappa}")
        if self.d != 2:
            raise ValueError("only the 2-D rotated-quadratic family is implemented")

    @property
    def beta(self):
        return self.alpha * self.kappa

    @property
    def n_functions(self):
        return self.n + 1

    @property
    def size(self):
        return 3 * self.n_functions

    @property
    def lower(self):
        return np.tile([-np.pi / 2, 0.0, -np.pi], self.n_functions)

    @property
    def upper(self):
        return np.tile([np.pi / 2, 1.0, np.pi], self.n_functions)

    def check(self, point):
        point = np.asarray(point, dtype=np.float64)
        if point.shape != (self.size,):
            raise ValueError(f"expected {self.size} coordinates, got shape {point.shape}")
        if np.any(point < self.lower - 1e-12) or np.any(point > self.upper + 1e-12):
            raise ValueError("point lies outside the search box")
        return point

    def example_start(self):
        """Running example: common ``f_1`` copies, ``f_a = f_2``, ``f_b`` = ``f_1`` moved to (1, 0)."""
        phi = np.arctan(1.0 / np.sqrt(self.kappa))
        f1 = [-phi, 1.0, np.pi]
        fa = [phi, 1.0, 0.0]
        fb = [-phi, 1.0, 0.0]
        return np.array(f1 * (self.n - 1) + fa + fb)

    def random_point(self, rng):
        return rng.uniform(self.lower, self.upper)

    def decode(self, point):
        """The ``n + 1`` encoded functions as quadratics."""
        p = self.check(point).reshape(self.n_functions, 3)
        out = []
        for angle, r, th in p:
            c = (r * np.cos(th), r * np.sin(th))
            out.append(RotatedQuadratic2D(abs(angle), 1 if angle >= 0 else -1, c,
                                          self.alpha, self.beta).to_quadratic())
        return out


def objective(space, point, backend=None):
    """``||x^a - x^b||`` at an encoded point."""
    point = space.check(point)
    return float(kernels.pair_distance(point[None, :], space.n - 1, space.alpha, space.beta,
                                       backend=backend)[0])


def pattern_search(space, start, budget, step=0.25, min_step=1e-9, backend=None):
    """Maximise by polling ``x +- step * width_j e_j`` for every coordinate at once.

    Moves to the best improving poll point, otherwise halves the step.
    Returns ``(point, value, history)`` with the best value after each poll.
    """
    lo, hi = space.lower, space.upper
    width = hi - lo
    x = np.clip(np.asarray(start, dtype=np.float64), lo, hi)
    fx = float(kernels.pair_distance(x[None, :], space.n - 1, space.alpha, space.beta,
                                     backend=backend)[0])
    evals = 1
    history = [fx]
    eye = np.eye(space.size)
    while evals < budget and step > min_step:
        moves = np.concatenate([eye, -eye]) * (step * width)
        polls = np.clip(x + moves, lo, hi)
        vals = kernels.pair_distance(polls, space.n - 1, space.alpha, space.beta, backend=backend)
        evals += polls.shape[0]
        j = int(np.argmax(vals))
        if vals[j] > fx:
            x, fx = polls[j], float(vals[j])
        else:
            step *= 0.5
        history.append(fx)
    return x, fx, history


@dataclass
class SearchResult:
    point: np.ndarray
    value: float
    history: np.ndarray
    start_values: tuple
    restart_values: tuple


def search(space, restarts=8, budget=4000, seed=0, jobs=1, backend=None):
    """Multi-start pattern search; restart 0 starts from the running example.

    Each restart owns a child of ``SeedSequence(seed)``; the reduction is an
    ordered max, so results do not depend on ``jobs``.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    if restarts < 1:
        raise ValueError("need at least one restart")
    children = np.random.SeedSequence(seed).spawn(restarts)

    def one(r):
        start = space.example_start() if r == 0 else space.random_point(np.random.default_rng(children[r]))
        start_value = objective(space, np.clip(start, space.lower, space.upper), backend=backend)
        x, fx, hist = pattern_search(space, start, budget, backend=backend)
        return start_value, x, fx, hist

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, range(restarts)))
    else:
        results = [one(r) for r in range(restarts)]
    best = max(range(restarts), key=lambda r: (results[r][2], -r))
    history = np.maximum.accumulate(np.concatenate([r[3] for r in results]))
    return SearchResult(point=results[best][1], value=results[best][2], history=history,
                        start_values=tuple(r[0] for r in results),
                        restart_values=tuple(r[2] for r in results))


def scaling_report(n, kappas, restarts=8, budget=4000, seed=0, jobs=1, backend=None):
    """Best value found per ``kappa``, its ratio to ``sqrt(kappa)`` and the proven bound."""
    kappas = [float(k) for k in kappas]
    if not kappas:
        raise ValueError("kappa grid is empty")
    seeds = np.random.SeedSequence(seed).spawn(len(kappas))
    rows = []
    for kappa, ss in zip(kappas, seeds):
        res = search(SearchSpace(n, kappa), restarts, budget,
                     seed=int(ss.generate_state(1)[0]), jobs=jobs, backend=backend)
        sk = float(np.sqrt(kappa))
        rows.append({"kappa": kappa, "sqrt_kappa": sk, "n": int(n), "best_value": res.value,
                     "ratio_to_sqrt_kappa": res.value / sk,
                     "bound": float(sensitivity_bound(n, kappa))})
    return rows


def write_scaling_csv(path, rows):
    write_csv(path, SCALING_COLUMNS, ([r[c] for c in SCALING_COLUMNS] for r in rows))
