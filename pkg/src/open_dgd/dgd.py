"""Decentralized gradient descent as gradient descent on ``F_rho``."""
import csv
import logging
from dataclasses import dataclass

import numpy as np

from . import kernels
from .objective import F_rho_gradient, _state, exact_minimizer_F_rho

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ("k", "norm_x", "dist_to_min", "F_rho", "consensus_residual")


def dgd_step(inst, x):
    """One step ``x - eta * grad F_rho(x)``."""
    x = np.asarray(x, dtype=np.float64)
    return x - inst.eta * F_rho_gradient(inst, x)


def mixing_matrix(inst):
    """Row-stochastic ``A~`` equivalent to the penalized step.

    Off-diagonal ``eta * rho * a_ij``; diagonal ``1 - eta * rho * sum_{j != i} a_ij``.
    Self-loop weights cancel in ``x_i - x_j`` and so never enter.
    """
    A = inst.net.adjacency
    off = inst.eta * inst.rho * (A - np.diag(np.diag(A)))
    W = off + np.diag(1.0 - off.sum(axis=1))
    if np.any(np.diag(W) < 0):
        raise ValueError(
            f"eta * rho = {inst.eta * inst.rho:g} too large: mixing matrix has a negative diagonal"
        )
    return W


def dgd_step_mixing(inst, x):
    """``x_i <- sum_j a~_ij x_j - eta * grad f_i(x_i)``."""
    x = np.asarray(x, dtype=np.float64)
    X = _state(inst, x)
    W = mixing_matrix(inst)
    local = np.einsum("iab,ib->ia", inst.hessians, X - inst.minimizers)
    return (W @ X - inst.eta * local).reshape(x.shape)


@dataclass
class DGDTrace:
    """Per-step scalars for ``x^0 .. x^K``; ``iterates`` only when requested."""

    norm_x: np.ndarray
    dist_to_min: np.ndarray
    F_rho: np.ndarray
    consensus_residual: np.ndarray
    minimizer: np.ndarray
    terminal_gradient_norm: float
    iterates: np.ndarray = None

    @property
    def k(self):
        return np.arange(self.norm_x.size)

    def __len__(self):
        return self.norm_x.size

    def rows(self):
        for k in range(len(self)):
            yield (k, self.norm_x[k], self.dist_to_min[k], self.F_rho[k],
                   self.consensus_residual[k])

    def to_csv(self, path):
        write_csv(path, TRACE_COLUMNS, self.rows())


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])


def contraction_violations(trace, alpha, eta, atol=1e-12):
    """Steps where ``||x^{k+1} - x^rho||^2 > (1 - eta*alpha) ||x^k - x^rho||^2 + atol``."""
    d2 = trace.dist_to_min ** 2
    return np.flatnonzero(d2[1:] > (1 - eta * alpha) * d2[:-1] + atol)


def run(inst, x0, iterations, store_iterates=False, backend=None):
    """Run DGD for a fixed budget and record the trace."""
    if not inst.eta_valid:
        logger.warning("eta=%g exceeds 1/(beta + rho*lambda_n)=%g; contraction not guaranteed",
                       inst.eta, inst.default_eta)
    X0 = _state(inst, x0)
    xstar = exact_minimizer_F_rho(inst)
    rec, _, its, xk = kernels.trajectory(
        inst.hessians, inst.minimizers, inst.net.laplacian, inst.rho, inst.eta,
        X0, iterations, xref=xstar, store=store_iterates, backend=backend,
    )
    return DGDTrace(
        norm_x=rec[:, kernels.REC_NORM_X],
        dist_to_min=rec[:, kernels.REC_DIST],
        F_rho=rec[:, kernels.REC_F_RHO],
        consensus_residual=rec[:, kernels.REC_CONSENSUS],
        minimizer=xstar,
        terminal_gradient_norm=float(np.linalg.norm(F_rho_gradient(inst, xk))),
        iterates=its if store_iterates else None,
    )
