"""DGD with local objectives that change between iterations.

Arrivals, departures and adversarial edits are all modelled as replacing an
agent's function by another member of the class; the agent count is fixed.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .bounds import gd_stability_radius, localization_radius
from .dgd import run, write_csv
from .functions import QuadraticFunction, random_quadratic_arrays, validate_membership
from .objective import _state, exact_minimizer_f

logger = logging.getLogger(__name__)

MODES = ("scripted", "periodic", "adversarial_random", "adversarial_worst")
OPEN_TRACE_COLUMNS = ("k", "norm_x", "dist_to_min", "F_rho", "consensus_residual",
                      "event_count", "inst_min_norm", "inside_ball")
BALL_ATOL = 1e-9


class ScheduleError(ValueError):
    """A schedule is malformed or uses a function outside the class."""


@dataclass(frozen=True)
class Event:
    k: int
    agent: int
    function: QuadraticFunction | None  # None: departure


def departure_placeholder(params):
    """Stand-in for an absent agent: ``alpha/2 ||x||^2``, a member of the class."""
    return QuadraticFunction(params.alpha * np.eye(params.dim), np.zeros(params.dim))


@dataclass(frozen=True)
class EventSchedule:
    """Iteration-indexed function replacements.

    ``scripted``: explicit ``events``.  ``periodic``: agent ``agent`` cycles
    through ``cycle`` every ``period`` steps starting at ``k = 0``.
    ``adversarial_random``: every agent gets a fresh random member every
    ``period`` steps (seeded).  ``adversarial_worst``: every agent greedily
    picks, each step, the function from a seeded pool that pushes its next
    iterate farthest out.
    """

    mode: str = "scripted"
    events: tuple = ()
    period: int = 1
    seed: int = 0
    spectrum: str = "loguniform"
    on_sphere: bool = False
    pool_size: int = 16
    agent: int = 0
    cycle: tuple = ()

    def __post_init__(self):
        if self.mode not in MODES:
            raise ScheduleError(f"unknown schedule mode {self.mode!r}; expected one of {MODES}")
        if int(self.period) < 1:
            raise ScheduleError(f"period must be >= 1, got {self.period}")
        events = tuple(sorted(self.events, key=lambda e: e.k))
        for e in events:
            if e.k < 0:
                raise ScheduleError(f"event iteration must be >= 0, got {e.k}")
        object.__setattr__(self, "events", events)
        if self.mode == "periodic" and not self.cycle:
            raise ScheduleError("periodic schedule needs a nonempty cycle of functions")

    @property
    def is_empty(self):
        return self.mode == "scripted" and not self.events

    def validate(self, inst):
        """Raise :class:`ScheduleError` unless every scripted function is a class member."""
        funcs = [(f"event {i} (k={e.k})", e.agent, e.function) for i, e in enumerate(self.events)]
        funcs += [(f"cycle[{i}]", self.agent, f) for i, f in enumerate(self.cycle)]
        for where, agent, f in funcs:
            if not 0 <= agent < inst.n:
                raise ScheduleError(f"{where}: agent {agent} out of range for n={inst.n}")
            if f is None:
                continue
            rep = validate_membership(f, inst.params)
            if not rep.ok:
                raise ScheduleError(
                    f"{where}: function not in the class (eigenvalues "
                    f"[{rep.min_eigenvalue:g}, {rep.max_eigenvalue:g}], "
                    f"minimizer norm {rep.minimizer_norm:g})"
                )

    def materialize(self, inst, iterations):
        """Event arrays ``(k, agent, H, C)`` for steps ``0..iterations``, sorted by ``k``."""
        d = inst.d
        if self.mode == "scripted":
            # a missing function is a departure
            gone = departure_placeholder(inst.params)
            evs = [e for e in self.events if e.k <= iterations]
            fs = [gone if e.function is None else e.function for e in evs]
            return (np.array([e.k for e in evs], dtype=np.int64),
                    np.array([e.agent for e in evs], dtype=np.int64),
                    np.array([f.hessian for f in fs]).reshape(-1, d, d),
                    np.array([f.minimizer for f in fs]).reshape(-1, d))
        if self.mode == "periodic":
            ks = np.arange(0, iterations + 1, self.period, dtype=np.int64)
            which = np.arange(ks.size) % len(self.cycle)
            Hs = np.array([f.hessian for f in self.cycle])
            Cs = np.array([f.minimizer for f in self.cycle])
            return ks, np.full(ks.size, self.agent, dtype=np.int64), Hs[which], Cs[which]
        if self.mode == "adversarial_random":
            ks = np.arange(0, iterations + 1, self.period, dtype=np.int64)
            rng = np.random.default_rng(self.seed)
            H, C = random_quadratic_arrays(rng, ks.size * inst.n, inst.params,
                                           spectrum=self.spectrum, on_sphere=self.on_sphere)
            return (np.repeat(ks, inst.n), np.tile(np.arange(inst.n, dtype=np.int64), ks.size),
                    H, C)
        raise ScheduleError(f"{self.mode} schedules are not event lists")

    def adversary_pool(self, params):
        """Hessian pool for the greedy adversary: ``alpha I``, ``beta I`` and random extremes."""
        rng = np.random.default_rng(self.seed)
        H, _ = random_quadratic_arrays(rng, self.pool_size, params, spectrum="extreme")
        eye = np.eye(params.dim)
        return np.concatenate([np.stack([params.alpha * eye, params.beta * eye]), H])


@dataclass(frozen=True)
class StabilityEnvelope:
    kappa: float
    kappa_rho: float
    n: int
    b: float
    R: float


def stability_radius(alpha, beta, rho, lambda_n, n):
    """Radius of the ball that DGD iterates never leave once inside."""
    if not alpha > 0 or not beta >= alpha or rho < 0 or lambda_n < 0 or n < 1:
        raise ValueError(
            f"invalid parameters alpha={alpha}, beta={beta}, rho={rho}, lambda_n={lambda_n}, n={n}"
        )
    kappa = beta / alpha
    kappa_rho = (beta + rho * lambda_n) / alpha
    b = np.sqrt(n) * localization_radius(kappa)
    return StabilityEnvelope(kappa=kappa, kappa_rho=kappa_rho, n=int(n), b=float(b),
                             R=float(gd_stability_radius(kappa_rho, b)))


def envelope_for(inst):
    p = inst.params
    return stability_radius(p.alpha, p.beta, inst.rho, inst.net.lambda_n, inst.n)


@dataclass
class OpenTrace:
    norm_x: np.ndarray
    dist_to_min: np.ndarray
    F_rho: np.ndarray
    consensus_residual: np.ndarray
    event_count: np.ndarray
    inst_min_norm: np.ndarray
    envelope: StabilityEnvelope
    f_minimizers: np.ndarray = None
    final_x: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return self.norm_x.size

    @property
    def inside_ball(self):
        return self.norm_x <= self.envelope.R + BALL_ATOL

    @property
    def entry_k(self):
        """First iteration inside the ball, or ``None``."""
        hits = np.flatnonzero(self.norm_x <= self.envelope.R)
        return int(hits[0]) if hits.size else None

    @property
    def post_entry_norms(self):
        k0 = self.entry_k
        return self.norm_x[k0:] if k0 is not None else self.norm_x[:0]

    @property
    def violations(self):
        return int(np.sum(self.post_entry_norms > self.envelope.R + BALL_ATOL))

    @property
    def max_post_entry_norm(self):
        tail = self.post_entry_norms
        return float(tail.max()) if tail.size else float("nan")

    def rows(self):
        inside = self.inside_ball
        for k in range(len(self)):
            yield (k, self.norm_x[k], self.dist_to_min[k], self.F_rho[k],
                   self.consensus_residual[k], int(self.event_count[k]),
                   self.inst_min_norm[k], int(inside[k]))

    def to_csv(self, path):
        write_csv(path, OPEN_TRACE_COLUMNS, self.rows())


def simulate_open(inst, x0, schedule, iterations, track_minimizer=True, backend=None):
    """Run DGD while ``schedule`` swaps local objectives.

    With ``track_minimizer`` the minimizers of the current ``F_rho^k`` and
    ``f^k`` are recomputed exactly whenever the function set changes.  The
    greedy adversary solves every step when tracking, so it is slower.
    """
    if not inst.eta_valid:
        logger.warning("eta=%g exceeds 1/(beta + rho*lambda_n)=%g; the stability ball "
                       "is not guaranteed", inst.eta, inst.default_eta)
    X0 = _state(inst, x0)
    env = envelope_for(inst)
    if schedule is None or schedule.is_empty:
        tr = run(inst, X0, iterations, backend=backend)
        fmin = None
        if track_minimizer:
            fmin = np.tile(exact_minimizer_f(inst.functions), (iterations + 1, 1))
        mnorm = np.full(iterations + 1, np.linalg.norm(tr.minimizer))
        return OpenTrace(tr.norm_x, tr.dist_to_min, tr.F_rho, tr.consensus_residual,
                         np.zeros(iterations + 1), mnorm, env, fmin)
    schedule.validate(inst)
    lap = inst.net.laplacian
    if schedule.mode == "adversarial_worst":
        pool = schedule.adversary_pool(inst.params)
        rec = kernels.greedy_trajectory(inst.hessians, inst.minimizers, lap, inst.rho,
                                        inst.eta, X0, iterations, pool,
                                        track=track_minimizer, backend=backend)
        fmin, xk = None, None
    else:
        events = schedule.materialize(inst, iterations)
        rec, fmin, _, xk = kernels.trajectory(inst.hessians, inst.minimizers, lap, inst.rho,
                                              inst.eta, X0, iterations, events=events,
                                              track=track_minimizer, backend=backend)
        if not track_minimizer:
            fmin = None
    return OpenTrace(
        norm_x=rec[:, kernels.REC_NORM_X],
        dist_to_min=rec[:, kernels.REC_DIST],
        F_rho=rec[:, kernels.REC_F_RHO],
        consensus_residual=rec[:, kernels.REC_CONSENSUS],
        event_count=rec[:, kernels.REC_EVENTS],
        inst_min_norm=rec[:, kernels.REC_MIN_NORM],
        envelope=env,
        f_minimizers=fmin,
        final_x=xk,
    )


@dataclass(frozen=True)
class ProbeResult:
    worst_norm: float
    R: float
    violations: int
    per_restart: tuple

    @property
    def ratio(self):
        """Tightness indicator ``max ||x^k|| / R`` over post-entry iterates."""
        return self.worst_norm / self.R


def adversarial_probe(inst, x0, iterations, restarts, seed=0,
                      modes=("adversarial_random", "adversarial_worst"), jobs=1,
                      backend=None):
    """Worst post-entry iterate norm over seeded adversarial schedules.

    Restart ``r`` uses mode ``modes[r % len(modes)]`` and its own seed drawn
    from ``SeedSequence(seed)``; results are reduced in restart order.
    """
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(restarts)]

    def one(r):
        mode = modes[r % len(modes)]
        sched = EventSchedule(mode=mode, seed=seeds[r], spectrum="extreme", on_sphere=True)
        tr = simulate_open(inst, x0, sched, iterations, track_minimizer=False, backend=backend)
        return tr.max_post_entry_norm, tr.violations

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, range(restarts)))
    else:
        results = [one(r) for r in range(restarts)]
    norms = tuple(r[0] for r in results)
    env = envelope_for(inst)
    return ProbeResult(worst_norm=float(np.nanmax(norms)) if norms else float("nan"),
                       R=env.R, violations=sum(r[1] for r in results), per_restart=norms)
