"""Penalized consensus objective ``F_rho(x) = sum_i f_i(x_i) + rho/2 x^T (L kron I) x``."""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .functions import FunctionClassParams, as_quadratic, infer_params, stack
from .network import Network, laplacian_quadratic_form

STATIONARITY_RTOL = 1e-9


@dataclass(frozen=True)
class ProblemInstance:
    """Local functions, graph, penalty ``rho`` and step size ``eta``.

    ``eta=None`` means the largest step covered by the convergence and
    stability results, ``1 / (beta + rho * lambda_n)``.  ``params`` defaults
    to the tightest class containing every function.
    """

    functions: tuple
    net: Network
    rho: float
    eta: float = None
    params: FunctionClassParams = None
    _stacked: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        funcs = tuple(as_quadratic(f) for f in self.functions)
        object.__setattr__(self, "functions", funcs)
        if len(funcs) != self.net.n:
            raise ValueError(f"{len(funcs)} functions for a network of {self.net.n} agents")
        if self.rho < 0:
            raise ValueError(f"rho must be nonnegative, got {self.rho}")
        object.__setattr__(self, "rho", float(self.rho))
        H, C = stack(funcs)
        H.setflags(write=False)
        C.setflags(write=False)
        object.__setattr__(self, "_stacked", (H, C))
        if self.params is None:
            object.__setattr__(self, "params", infer_params(funcs))
        elif self.params.dim != C.shape[1]:
            raise ValueError(f"params.dim={self.params.dim} but functions live in R^{C.shape[1]}")
        if self.eta is None:
            object.__setattr__(self, "eta", self.default_eta)
        elif not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        else:
            object.__setattr__(self, "eta", float(self.eta))

    @property
    def n(self):
        return self.net.n

    @property
    def d(self):
        return self._stacked[1].shape[1]

    @property
    def hessians(self):
        return self._stacked[0]

    @property
    def minimizers(self):
        return self._stacked[1]

    @property
    def smoothness(self):
        """Smoothness constant of ``F_rho``: ``beta + rho * lambda_n``."""
        return self.params.beta + self.rho * self.net.lambda_n

    @property
    def strong_convexity(self):
        return self.params.alpha

    @property
    def kappa_rho(self):
        return self.smoothness / self.params.alpha

    @property
    def default_eta(self):
        return 1.0 / self.smoothness

    @property
    def eta_valid(self):
        return self.eta <= self.default_eta * (1 + 1e-12)

    def with_functions(self, functions):
        return ProblemInstance(tuple(functions), self.net, self.rho, self.eta, self.params)

    def replace(self, **changes):
        kw = dict(functions=self.functions, net=self.net, rho=self.rho, eta=self.eta,
                  params=self.params)
        kw.update(changes)
        return ProblemInstance(**kw)

    @cached_property
    def system_matrix(self):
        """``blockdiag(H_1..H_n) + rho (L kron I_d)``."""
        return _system_matrix(self.hessians, self.net.laplacian, self.rho)


def _system_matrix(H, lap, rho):
    n, d, _ = H.shape
    M = rho * np.kron(lap, np.eye(d))
    for i in range(n):
        M[i * d:(i + 1) * d, i * d:(i + 1) * d] += H[i]
    return M


class StackedState(np.ndarray):
    """``(n, d)`` view of a stacked vector in ``R^{nd}``."""

    def __new__(cls, x, n=None):
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim == 1:
            if n is None or arr.size % n:
                raise ValueError(f"cannot split a length-{arr.size} vector into {n} blocks")
            arr = arr.reshape(n, -1)
        if arr.ndim != 2:
            raise ValueError(f"stacked state must be 2-D, got shape {arr.shape}")
        return arr.view(cls)

    @property
    def flat_vector(self):
        return np.asarray(self).ravel()

    def consensus_residual(self, net):
        return laplacian_quadratic_form(net, np.asarray(self))


def _state(inst, x):
    X = np.asarray(x, dtype=np.float64)
    if X.ndim == 1:
        if X.size != inst.n * inst.d:
            raise ValueError(f"expected a stacked vector of length {inst.n * inst.d}, got {X.size}")
        return X.reshape(inst.n, inst.d)
    if X.shape != (inst.n, inst.d):
        raise ValueError(f"expected shape {(inst.n, inst.d)}, got {X.shape}")
    return X


def F_value(inst, x):
    X = _state(inst, x)
    R = X - inst.minimizers
    return 0.5 * float(np.einsum("ia,iab,ib->", R, inst.hessians, R))


def F_rho_value(inst, x):
    X = _state(inst, x)
    return F_value(inst, X) + 0.5 * inst.rho * laplacian_quadratic_form(inst.net, X, cross_check=False)


def F_rho_gradient(inst, x):
    """Block ``i``: ``grad f_i(x_i) + rho * sum_j a_ij (x_i - x_j)``; keeps the input shape."""
    x = np.asarray(x, dtype=np.float64)
    X = _state(inst, x)
    G = np.einsum("iab,ib->ia", inst.hessians, X - inst.minimizers) + inst.rho * (inst.net.laplacian @ X)
    return G.reshape(x.shape)


def _spd_solve(M, b, residual_fn, max_refine=3):
    factor = scipy.linalg.cho_factor(M)
    x = scipy.linalg.cho_solve(factor, b)
    for _ in range(max_refine):
        r = residual_fn(x)
        if np.linalg.norm(r) <= STATIONARITY_RTOL * (1 + np.linalg.norm(x)):
            return x
        x = x - scipy.linalg.cho_solve(factor, r)
    r = residual_fn(x)
    if np.linalg.norm(r) > STATIONARITY_RTOL * (1 + np.linalg.norm(x)):
        raise np.linalg.LinAlgError(
            f"stationarity residual {np.linalg.norm(r):.3g} above tolerance after refinement"
        )
    return x


def exact_minimizer_F_rho(inst):
    """Solve ``(blockdiag(H) + rho L kron I) x = (H_i c_i)_i``; returns ``(n, d)``."""
    M = inst.system_matrix
    rhs = np.einsum("iab,ib->ia", inst.hessians, inst.minimizers).ravel()
    try:
        x = _spd_solve(M, rhs, lambda v: M @ v - rhs)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"penalized system is not SPD or ill-posed: {exc}") from exc
    return x.reshape(inst.n, inst.d)


def exact_minimizer_f(functions):
    """Minimizer of ``sum_i f_i`` via ``(sum H_i) x = sum H_i c_i``."""
    H, C = stack(functions)
    S = H.sum(axis=0)
    s = np.einsum("iab,ib->a", H, C)
    return _spd_solve(S, s, lambda v: S @ v - s)


def batch_minimizers(H, C):
    """Minimizers of ``sum_i f_i`` for a batch: ``H`` is ``(m, k, d, d)``, ``C`` is ``(m, k, d)``."""
    S = H.sum(axis=1)
    s = np.einsum("mkab,mkb->ma", H, C)
    return np.linalg.solve(S, s[..., None])[..., 0]
