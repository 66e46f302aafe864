"""Closed-form bounds and their checks against exactly computed quantities.

A check passes when ``observed <= bound + 1e-9 * (1 + |bound|)``; margins are
reported as ``bound - observed``.
"""
import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .functions import (FunctionClassParams, QuadraticFunction, as_quadratic, infer_params,
                        random_quadratic_arrays, validate_membership)
from .network import GENERATORS
from .objective import ProblemInstance, batch_minimizers, exact_minimizer_F_rho, exact_minimizer_f

RTOL = 1e-9


def passes(observed, bound):
    return bool(observed <= bound + RTOL * (1 + abs(bound)))


# ---------------------------------------------------------------------------
# formulas
# ---------------------------------------------------------------------------

def localization_radius(kappa):
    """``1 + sqrt(kappa)``: every minimizer of a sum of class members lies in this ball."""
    return 1.0 + np.sqrt(kappa)


def sensitivity_terms(n, kappa):
    """The three terms bounding ``||x^a - x^b||`` when one of ``n`` functions is swapped."""
    sk = np.sqrt(kappa)
    return (4 + 4 * sk, (4 * sk + 2 * kappa) / np.sqrt(n - 1), (4 * kappa + 2 * kappa * sk) / n)


def sensitivity_bound(n, kappa):
    return min(sensitivity_terms(n, kappa))


def appendix_terms(n, kappa):
    """Terms bounding the move ``||x^* - x^-||`` caused by adding one function to ``n - 1``."""
    sk = np.sqrt(kappa)
    return (2 + 2 * sk, (2 * sk + kappa) / np.sqrt(n - 1), (2 * kappa + kappa * sk) / n)


def appendix_bound(n, kappa):
    return min(appendix_terms(n, kappa))


def two_function_bound(alpha1, alpha2, beta2, R1, R2):
    """Bound on ``||argmin(g1 + g2) - argmin g1||``."""
    return beta2 * (R1 + R2) / (alpha1 + alpha2)


def gd_stability_radius(kappa_bar, b):
    """Ball radius invariant under one gradient step when the minimizer norm is <= ``b``."""
    if kappa_bar >= 3:
        return (1 + np.sqrt(2 * kappa_bar)) * b
    return (1 + np.sqrt(6)) * b


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class CheckRecord:
    check: str
    observed: float
    bound: float
    margin: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        self.observed = float(self.observed)
        self.bound = float(self.bound)
        self.margin = self.bound - self.observed
        self.passed = passes(self.observed, self.bound)


@dataclass
class BoundsReport:
    records: list
    fingerprint: str = ""
    counts: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    @property
    def all_pass(self):
        return all(r.passed for r in self.records) and not any(self.failures.values())

    def __iter__(self):
        return iter(self.records)

    def get(self, check):
        return [r for r in self.records if r.check == check]

    def extend(self, other):
        self.records.extend(other.records)
        for k, v in other.counts.items():
            self.counts[k] = self.counts.get(k, 0) + v
        for k, v in other.failures.items():
            self.failures[k] = self.failures.get(k, 0) + v

    def to_json_list(self):
        out = []
        for r in self.records:
            row = asdict(r)
            row["instance"] = self.fingerprint
            if r.check in self.counts:
                row["count"] = self.counts[r.check]
                row["failures"] = self.failures.get(r.check, 0)
            out.append(row)
        return out

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_list(), fh, indent=2, sort_keys=True, allow_nan=True)
            fh.write("\n")

    def write_csv(self, path):
        from .dgd import write_csv

        write_csv(path, ("check", "observed", "bound", "margin", "pass"),
                  ((r.check, r.observed, r.bound, r.margin, int(r.passed)) for r in self.records))


def fingerprint(obj):
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# checks on explicit instances
# ---------------------------------------------------------------------------

def check_localization(functions, net=None, rho=None, params=None):
    """``||argmin f|| <= 1 + sqrt(kappa)`` and, given a network, the same per block of ``argmin F_rho``."""
    params = params or infer_params(functions)
    R = localization_radius(params.kappa)
    xstar = exact_minimizer_f(functions)
    records = [CheckRecord("localization_f", np.linalg.norm(xstar), R)]
    if net is not None and rho is not None:
        xr = exact_minimizer_F_rho(ProblemInstance(tuple(functions), net, rho, params=params))
        records.append(CheckRecord("localization_F_rho", np.linalg.norm(xr, axis=1).max(), R))
    return BoundsReport(records)


def check_sensitivity(common, fa, fb, params=None):
    """Swap ``fa`` for ``fb`` among ``n - 1`` common functions and check every bound involved."""
    common = [as_quadratic(f) for f in common]
    if not common:
        raise ValueError("need at least one common function (n >= 2)")
    fa, fb = as_quadratic(fa), as_quadratic(fb)
    params = params or infer_params(common + [fa, fb])
    n, kappa = len(common) + 1, params.kappa
    x_minus = exact_minimizer_f(common)
    xa = exact_minimizer_f(common + [fa])
    xb = exact_minimizer_f(common + [fb])
    obs = float(np.linalg.norm(xa - xb))
    da = float(np.linalg.norm(xa - x_minus))
    db = float(np.linalg.norm(xb - x_minus))
    t1, t2, t3 = sensitivity_terms(n, kappa)
    app = appendix_bound(n, kappa)
    prop6 = two_function_bound((n - 1) * params.alpha, params.alpha, params.beta,
                               localization_radius(kappa), 1.0)
    return BoundsReport([
        CheckRecord("sensitivity", obs, min(t1, t2, t3)),
        CheckRecord("sensitivity_uniform", obs, t1),
        CheckRecord("sensitivity_sqrt_n", obs, t2),
        CheckRecord("sensitivity_n", obs, t3),
        CheckRecord("appendix_a", da, app),
        CheckRecord("appendix_b", db, app),
        CheckRecord("triangle", obs, da + db),
        CheckRecord("two_function_a", da, prop6),
        CheckRecord("two_function_b", db, prop6),
    ])


def _constants_hold(q, alpha, beta, R):
    eig = q.eigenvalues
    return (eig[0] >= alpha * (1 - RTOL) and eig[-1] <= beta * (1 + RTOL)
            and np.linalg.norm(q.minimizer) <= R * (1 + RTOL) + 1e-12)


def check_two_function_bound(g1, g2, alpha1, beta1, R1, alpha2, beta2, R2):
    g1, g2 = as_quadratic(g1), as_quadratic(g2)
    if not _constants_hold(g1, alpha1, beta1, R1):
        raise ValueError("g1 does not satisfy the stated (alpha1, beta1, R1)")
    if not _constants_hold(g2, alpha2, beta2, R2):
        raise ValueError("g2 does not satisfy the stated (alpha2, beta2, R2)")
    x = exact_minimizer_f([g1, g2])
    return CheckRecord("two_function", np.linalg.norm(x - g1.minimizer),
                       two_function_bound(alpha1, alpha2, beta2, R1, R2))


def check_stability_envelope(trace, envelope=None):
    """Latched ball invariance: after the first ``||x^k|| <= R`` the norm never exceeds ``R``.

    A trace that never enters the ball is reported as a failure.
    """
    env = envelope or trace.envelope
    if trace.entry_k is None:
        return CheckRecord("stability", np.nan, env.R)
    return CheckRecord("stability", trace.max_post_entry_norm, env.R)


# ---------------------------------------------------------------------------
# randomized batches
# ---------------------------------------------------------------------------

DEFAULT_NS = tuple(range(2, 11))
DEFAULT_DS = (1, 2, 5)
DEFAULT_KAPPAS = (1.0, 10.0, 100.0, 1000.0)


def _draw(rng, m, params, hard):
    spectrum = "extreme" if hard else "loguniform"
    return random_quadratic_arrays(rng, m, params, spectrum=spectrum, on_sphere=hard)


class _Worst:
    """Keep, per check name, the record with the smallest margin and a count."""

    def __init__(self):
        self.best = {}
        self.counts = {}
        self.failures = {}

    def add(self, name, observed, bound):
        observed = np.asarray(observed, dtype=np.float64).ravel()
        bound = np.broadcast_to(np.asarray(bound, dtype=np.float64), observed.shape)
        if observed.size == 0:
            return
        margin = bound - observed
        i = int(np.argmin(margin))
        rec = CheckRecord(name, observed[i], bound[i])
        if name not in self.best or rec.margin < self.best[name].margin:
            self.best[name] = rec
        self.counts[name] = self.counts.get(name, 0) + observed.size
        bad = int(np.sum(observed > bound + RTOL * (1 + np.abs(bound))))
        self.failures[name] = self.failures.get(name, 0) + bad

    def report(self, fp):
        records = [self.best[k] for k in sorted(self.best)]
        return BoundsReport(records, fp, dict(self.counts), dict(self.failures))


def localization_batch(count, seed=0, ns=DEFAULT_NS, ds=DEFAULT_DS, kappas=DEFAULT_KAPPAS):
    """Random instances with random graphs and penalties; worst localization margins."""
    rng = np.random.default_rng(seed)
    worst = _Worst()
    kinds = sorted(GENERATORS)
    for t in range(count):
        n = int(rng.choice(ns))
        d = int(ds[t % len(ds)])
        kappa = float(kappas[(t // len(ds)) % len(kappas)])
        params = FunctionClassParams(1.0, kappa, d)
        H, C = _draw(rng, n, params, hard=bool(t % 2))
        funcs = [QuadraticFunction(h, c) for h, c in zip(H, C)]
        kind = kinds[int(rng.integers(len(kinds)))]
        if kind == "erdos_renyi":
            net = GENERATORS[kind](n, p=0.5, seed=int(rng.integers(2**31)))
        else:
            net = GENERATORS[kind](n)
        rho = float(10 ** rng.uniform(-2, 3))
        R = localization_radius(kappa)
        worst.add("localization_f", np.linalg.norm(exact_minimizer_f(funcs)), R)
        xr = exact_minimizer_F_rho(ProblemInstance(tuple(funcs), net, rho, params=params))
        worst.add("localization_F_rho", np.linalg.norm(xr, axis=1).max(), R)
    cfg = {"kind": "localization", "count": count, "seed": seed, "ns": list(ns),
           "ds": list(ds), "kappas": list(kappas)}
    return worst.report(fingerprint(cfg))


def sensitivity_batch(per_cell, seed=0, ns=DEFAULT_NS, ds=DEFAULT_DS, kappas=DEFAULT_KAPPAS):
    """``per_cell`` random swaps for every ``(n, kappa)``; dimensions cycle through ``ds``."""
    rng = np.random.default_rng(seed)
    worst = _Worst()
    for n in ns:
        for kappa in kappas:
            kappa = float(kappa)
            t1, t2, t3 = sensitivity_terms(n, kappa)
            app = appendix_bound(n, kappa)
            prop6 = two_function_bound((n - 1), 1.0, kappa, localization_radius(kappa), 1.0)
            sizes = np.bincount(np.arange(per_cell) % len(ds), minlength=len(ds))
            for d, m in zip(ds, sizes):
                if m == 0:
                    continue
                params = FunctionClassParams(1.0, kappa, int(d))
                for hard, mm in ((False, m // 2), (True, m - m // 2)):
                    if mm == 0:
                        continue
                    H, C = _draw(rng, mm * (n + 1), params, hard)
                    H = H.reshape(mm, n + 1, d, d)
                    C = C.reshape(mm, n + 1, d)
                    x_minus = batch_minimizers(H[:, :n - 1], C[:, :n - 1])
                    xa = batch_minimizers(H[:, :n], C[:, :n])
                    xb = batch_minimizers(np.concatenate([H[:, :n - 1], H[:, n:]], axis=1),
                                          np.concatenate([C[:, :n - 1], C[:, n:]], axis=1))
                    obs = np.linalg.norm(xa - xb, axis=1)
                    da = np.linalg.norm(xa - x_minus, axis=1)
                    db = np.linalg.norm(xb - x_minus, axis=1)
                    worst.add("sensitivity", obs, min(t1, t2, t3))
                    worst.add("sensitivity_uniform", obs, t1)
                    worst.add("sensitivity_sqrt_n", obs, t2)
                    worst.add("sensitivity_n", obs, t3)
                    worst.add("appendix_a", da, app)
                    worst.add("appendix_b", db, app)
                    worst.add("triangle", obs, da + db)
                    worst.add("two_function_a", da, prop6)
                    worst.add("two_function_b", db, prop6)
    cfg = {"kind": "sensitivity", "per_cell": per_cell, "seed": seed, "ns": list(ns),
           "ds": list(ds), "kappas": list(kappas)}
    return worst.report(fingerprint(cfg))


def two_function_batch(count, seed=0, ds=DEFAULT_DS):
    """Random pairs with heterogeneous ``(alpha_i, beta_i, R_i)``."""
    rng = np.random.default_rng(seed)
    worst = _Worst()
    for d, m in zip(ds, np.bincount(np.arange(count) % len(ds), minlength=len(ds))):
        if m == 0:
            continue
        d = int(d)
        for _ in range(int(m)):
            consts = []
            gs = []
            for _g in range(2):
                a = float(10 ** rng.uniform(-1, 1))
                b = a * float(10 ** rng.uniform(0, 3))
                R = float(10 ** rng.uniform(-1, 1))
                H, C = _draw(rng, 1, FunctionClassParams(a, b, d), hard=bool(rng.integers(2)))
                gs.append((H[0], C[0] * R))
                consts.append((a, b, R))
            (H1, c1), (H2, c2) = gs
            x = np.linalg.solve(H1 + H2, H1 @ c1 + H2 @ c2)
            (a1, _b1, R1), (a2, b2, R2) = consts
            worst.add("two_function", np.linalg.norm(x - c1), two_function_bound(a1, a2, b2, R1, R2))
    return worst.report(fingerprint({"kind": "two_function", "count": count, "seed": seed,
                                     "ds": list(ds)}))


def formula_identity_grid(ns=DEFAULT_NS, kappas=DEFAULT_KAPPAS):
    """Pairs ``(main, 2 * appendix)`` over the grid; they coincide term by term."""
    rows = []
    for n in ns:
        for kappa in kappas:
            main = sensitivity_terms(n, float(kappa))
            half = appendix_terms(n, float(kappa))
            rows.append((n, float(kappa), main, tuple(2 * h for h in half)))
    return rows


def verify_random(count=1000, seed=0, per_cell=None):
    """Full randomized batch used by the ``verify`` command."""
    ss = np.random.SeedSequence(seed).spawn(3)
    s_loc, s_sens, s_two = (int(s.generate_state(1)[0]) for s in ss)
    report = localization_batch(count, s_loc)
    report.extend(sensitivity_batch(per_cell or max(1, count // 10), s_sens))
    report.extend(two_function_batch(max(1, count // 2), s_two))
    report.fingerprint = fingerprint({"kind": "verify", "count": count, "seed": seed,
                                      "per_cell": per_cell})
    return report


def check_instance(inst, swap=None):
    """Membership, localization and (with a swap) sensitivity checks for one instance.

    ``swap`` is ``(agent, fb)``: agent's function plays ``fa`` and is swapped for ``fb``.
    """
    records = []
    for i, f in enumerate(inst.functions):
        rep = validate_membership(f, inst.params)
        records.append(CheckRecord(f"membership_eigen[{i}]", rep.max_eigenvalue, inst.params.beta))
        records.append(CheckRecord(f"membership_strong_convexity[{i}]", -rep.min_eigenvalue,
                                   -inst.params.alpha * (1 - RTOL)))
        records.append(CheckRecord(f"membership_ball[{i}]", rep.minimizer_norm, 1.0))
    report = BoundsReport(records)
    report.extend(check_localization(inst.functions, inst.net, inst.rho, inst.params))
    if swap is not None:
        agent, fb = swap
        common = [f for i, f in enumerate(inst.functions) if i != agent]
        report.extend(check_sensitivity(common, inst.functions[agent], fb, inst.params))
    return report
