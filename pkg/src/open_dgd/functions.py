"""Smooth strongly convex functions with a normalised minimizer.

Only quadratics ``f(x) = 1/2 (x - c)^T H (x - c)`` ship; they have exact
value, gradient and minimizer oracles, which is what the bound checks need.
"""
import abc
from dataclasses import dataclass, field

import numpy as np

from . import kernels

EIG_RTOL = 1e-9
BALL_ATOL = 1e-12


@dataclass(frozen=True)
class FunctionClassParams:
    """Strong convexity ``alpha``, smoothness ``beta`` and dimension ``dim``."""

    alpha: float
    beta: float
    dim: int = 2

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.beta >= self.alpha:
            raise ValueError(f"beta ({self.beta}) must be >= alpha ({self.alpha})")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")

    @property
    def kappa(self):
        return self.beta / self.alpha


class SmoothStronglyConvex(abc.ABC):
    """Interface every member of the function class exposes."""

    @property
    @abc.abstractmethod
    def dim(self) -> int: ...

    @property
    @abc.abstractmethod
    def minimizer(self) -> np.ndarray: ...

    @property
    @abc.abstractmethod
    def alpha(self) -> float: ...

    @property
    @abc.abstractmethod
    def beta(self) -> float: ...

    @abc.abstractmethod
    def value(self, x) -> float: ...

    @abc.abstractmethod
    def gradient(self, x) -> np.ndarray: ...


def _as_point(x, d):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape != (d,):
        raise ValueError(f"expected a point of dimension {d}, got shape {x.shape}")
    return x


class QuadraticFunction(SmoothStronglyConvex):
    """``1/2 (x - c)^T H (x - c)``; immutable after construction."""

    __slots__ = ("_H", "_c", "_eig")

    def __init__(self, hessian, minimizer):
        H = np.array(hessian, dtype=np.float64, ndmin=2)
        c = np.array(minimizer, dtype=np.float64, ndmin=1)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError(f"hessian must be square, got shape {H.shape}")
        if c.shape != (H.shape[0],):
            raise ValueError(
                f"minimizer has shape {c.shape}, hessian is {H.shape[0]}x{H.shape[0]}"
            )
        if not np.all(np.isfinite(H)) or not np.all(np.isfinite(c)):
            raise ValueError("hessian and minimizer must be finite")
        scale = max(1.0, float(np.max(np.abs(H))))
        if np.max(np.abs(H - H.T)) > 1e-12 * scale:
            raise ValueError("hessian must be symmetric")
        H = 0.5 * (H + H.T)
        eig = np.linalg.eigvalsh(H)
        if eig[0] <= 0:
            raise ValueError(f"hessian must be positive definite (min eigenvalue {eig[0]:g})")
        for arr in (H, c, eig):
            arr.setflags(write=False)
        self._H, self._c, self._eig = H, c, eig

    @property
    def hessian(self):
        return self._H

    @property
    def minimizer(self):
        return self._c

    @property
    def dim(self):
        return self._c.shape[0]

    @property
    def eigenvalues(self):
        return self._eig

    @property
    def alpha(self):
        return float(self._eig[0])

    @property
    def beta(self):
        return float(self._eig[-1])

    def value(self, x):
        r = _as_point(x, self.dim) - self._c
        return 0.5 * float(r @ self._H @ r)

    def gradient(self, x):
        return self._H @ (_as_point(x, self.dim) - self._c)

    def __repr__(self):
        return f"QuadraticFunction(hessian={self._H.tolist()}, minimizer={self._c.tolist()})"


def rotation2d(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class RotatedQuadratic2D:
    """``diag(beta, alpha)`` rotated by ``sign * phi`` and centred at ``minimizer``."""

    phi: float
    sign: int
    minimizer: tuple
    alpha: float
    beta: float
    _quad: QuadraticFunction = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        c = tuple(float(v) for v in np.asarray(self.minimizer, dtype=np.float64).ravel())
        if len(c) != 2:
            raise ValueError("a 2-D rotated quadratic needs a 2-D minimizer")
        object.__setattr__(self, "minimizer", c)
        R = rotation2d(self.sign * self.phi)
        H = R @ np.diag([self.beta, self.alpha]) @ R.T
        object.__setattr__(self, "_quad", QuadraticFunction(H, c))

    def to_quadratic(self):
        return self._quad


def evaluate(f, x):
    """Value of ``f`` at ``x``; raises ``ValueError`` on a dimension mismatch."""
    return f.value(x)


def gradient(f, x):
    return f.gradient(x)


def as_quadratic(f):
    if isinstance(f, RotatedQuadratic2D):
        return f.to_quadratic()
    if isinstance(f, QuadraticFunction):
        return f
    raise TypeError(f"expected a quadratic, got {type(f).__name__}")


def make_paper_pair(kappa):
    """The 2-D running example with ``alpha = 1`` and ``beta = kappa``.

    Returns ``(f1, f2, fb)``.  ``f1`` and ``f2`` are mirror-rotated by
    ``atan(1/sqrt(kappa))`` and centred at ``(-1, 0)`` and ``(1, 0)``, which
    puts the minimizer of their sum at ``(0, (kappa - 1) / (2 sqrt(kappa)))``.
    ``fb`` is ``f2`` turned by twice that angle about its own minimizer, i.e.
    ``f1``'s Hessian centred at ``(1, 0)``; ``f1 + fb`` is minimized at the
    origin.
    """
    kappa = float(kappa)
    if not kappa >= 1:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    phi = np.arctan(1.0 / np.sqrt(kappa))
    f1 = RotatedQuadratic2D(phi, -1, (-1.0, 0.0), 1.0, kappa).to_quadratic()
    f2 = RotatedQuadratic2D(phi, 1, (1.0, 0.0), 1.0, kappa).to_quadratic()
    fb = RotatedQuadratic2D(phi, -1, (1.0, 0.0), 1.0, kappa).to_quadratic()
    return f1, f2, fb


@dataclass(frozen=True)
class MembershipReport:
    eigen_ok: bool
    ball_ok: bool
    zero_min_ok: bool
    min_eigenvalue: float
    max_eigenvalue: float
    minimizer_norm: float

    @property
    def ok(self):
        return self.eigen_ok and self.ball_ok and self.zero_min_ok


def validate_membership(f, params):
    """Check spectrum within ``[alpha, beta]`` (relative slack 1e-9) and ``||c|| <= 1``."""
    q = as_quadratic(f)
    lo, hi = float(q.eigenvalues[0]), float(q.eigenvalues[-1])
    eigen_ok = (lo >= params.alpha * (1 - EIG_RTOL)) and (hi <= params.beta * (1 + EIG_RTOL))
    if q.dim != params.dim:
        eigen_ok = False
    cnorm = float(np.linalg.norm(q.minimizer))
    return MembershipReport(
        eigen_ok=bool(eigen_ok),
        ball_ok=bool(cnorm <= 1 + BALL_ATOL),
        zero_min_ok=q.value(q.minimizer) == 0.0,
        min_eigenvalue=lo,
        max_eigenvalue=hi,
        minimizer_norm=cnorm,
    )


def random_quadratic_arrays(rng, count, params, spectrum="loguniform",
                            on_sphere=False, backend=None):
    """Draw ``count`` class members as stacked ``(H, C)`` arrays.

    Hessians are ``Q diag(lam) Q^T`` with ``Q`` Haar-distributed and ``lam``
    log-uniform on ``[alpha, beta]`` (``spectrum="extreme"`` picks each
    eigenvalue from ``{alpha, beta}``).  Minimizers are uniform in the unit
    ball, or uniform on the unit sphere with ``on_sphere``.
    """
    if spectrum not in ("loguniform", "extreme"):
        raise ValueError(f"unknown spectrum {spectrum!r}")
    d = params.dim
    gauss = rng.standard_normal((count, d, d))
    eig_u = rng.random((count, d))
    dir_gauss = rng.standard_normal((count, d))
    rad_u = rng.random(count)
    return kernels.synthesize_quadratics(
        gauss, eig_u, dir_gauss, rad_u, params.alpha, params.beta,
        extreme=(spectrum == "extreme"), on_sphere=on_sphere, backend=backend,
    )


def random_quadratics(rng, count, params, **kwargs):
    H, C = random_quadratic_arrays(rng, count, params, **kwargs)
    return [QuadraticFunction(h, c) for h, c in zip(H, C)]


def stack(functions):
    """Stack a list of quadratics into ``(H, C)`` arrays of shape ``(n, d, d)``, ``(n, d)``."""
    qs = [as_quadratic(f) for f in functions]
    if not qs:
        raise ValueError("need at least one function")
    d = qs[0].dim
    if any(q.dim != d for q in qs):
        raise ValueError("all functions must share one dimension")
    return np.stack([q.hessian for q in qs]), np.stack([q.minimizer for q in qs])


def infer_params(functions):
    """Tightest class parameters containing every function in the list."""
    qs = [as_quadratic(f) for f in functions]
    return FunctionClassParams(
        alpha=min(q.alpha for q in qs), beta=max(q.beta for q in qs), dim=qs[0].dim
    )
