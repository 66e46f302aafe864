"""Hot numeric kernels.

Every kernel exists twice: an explicit-loop version compiled with numba and
a vectorised numpy version.  ``_accel.BACKEND`` picks one; both consume the
same inputs (random draws are always produced by the caller) so they agree
to rounding error.

Array conventions: ``H`` is ``(n, d, d)``, ``C`` and ``x`` are ``(n, d)``,
``lap`` is the dense ``(n, n)`` graph Laplacian.
"""
import numpy as np

from . import _accel
from ._accel import njit

# Column layout of the per-step record matrix returned by the trajectory kernels.
REC_NORM_X = 0
REC_DIST = 1
REC_F_RHO = 2
REC_CONSENSUS = 3
REC_EVENTS = 4
REC_MIN_NORM = 5
N_REC = 6


# ---------------------------------------------------------------------------
# random quadratic synthesis
# ---------------------------------------------------------------------------

def _synthesize_loop(gauss, eig_u, dir_gauss, rad_u, alpha, beta, extreme, on_sphere):
    m, d, _ = gauss.shape
    H = np.empty((m, d, d))
    C = np.empty((m, d))
    q = np.empty((d, d))
    lam = np.empty(d)
    log_kappa = np.log(beta / alpha)
    for s in range(m):
        # modified Gram-Schmidt on columns == QR with positive diag(R) -> Haar
        for j in range(d):
            for i in range(d):
                q[i, j] = gauss[s, i, j]
            for p in range(j):
                dot = 0.0
                for i in range(d):
                    dot += q[i, p] * q[i, j]
                for i in range(d):
                    q[i, j] -= dot * q[i, p]
            nrm = 0.0
            for i in range(d):
                nrm += q[i, j] * q[i, j]
            nrm = np.sqrt(nrm)
            for i in range(d):
                q[i, j] /= nrm
        for j in range(d):
            if extreme:
                lam[j] = alpha if eig_u[s, j] < 0.5 else beta
            else:
                lam[j] = alpha * np.exp(eig_u[s, j] * log_kappa)
        for a in range(d):
            for b in range(a, d):
                acc = 0.0
                for j in range(d):
                    acc += q[a, j] * lam[j] * q[b, j]
                H[s, a, b] = acc
                H[s, b, a] = acc
        nrm = 0.0
        for i in range(d):
            nrm += dir_gauss[s, i] * dir_gauss[s, i]
        nrm = np.sqrt(nrm)
        r = 1.0 if on_sphere else rad_u[s] ** (1.0 / d)
        for i in range(d):
            C[s, i] = r * dir_gauss[s, i] / nrm
    return H, C


def _synthesize_numpy(gauss, eig_u, dir_gauss, rad_u, alpha, beta, extreme, on_sphere):
    d = gauss.shape[-1]
    q, r = np.linalg.qr(gauss)
    q = q * np.sign(np.diagonal(r, axis1=-2, axis2=-1))[:, None, :]
    if extreme:
        lam = np.where(eig_u < 0.5, alpha, beta)
    else:
        lam = alpha * np.exp(eig_u * np.log(beta / alpha))
    H = np.einsum("sij,sj,skj->sik", q, lam, q)
    H = 0.5 * (H + np.swapaxes(H, 1, 2))
    radius = np.ones_like(rad_u) if on_sphere else rad_u ** (1.0 / d)
    C = dir_gauss / np.linalg.norm(dir_gauss, axis=1)[:, None] * radius[:, None]
    return H, C


_synthesize_nb = njit(_synthesize_loop)


def synthesize_quadratics(gauss, eig_u, dir_gauss, rad_u, alpha, beta,
                          extreme=False, on_sphere=False, backend=None):
    """Turn raw random draws into Hessians ``Q diag(lam) Q^T`` and minimizers."""
    args = (np.ascontiguousarray(gauss, dtype=np.float64),
            np.ascontiguousarray(eig_u, dtype=np.float64),
            np.ascontiguousarray(dir_gauss, dtype=np.float64),
            np.ascontiguousarray(rad_u, dtype=np.float64),
            float(alpha), float(beta), bool(extreme), bool(on_sphere))
    if _accel.resolve(backend) == "numba":
        return _synthesize_nb(*args)
    return _synthesize_numpy(*args)


# ---------------------------------------------------------------------------
# exact minimizers (used inside the trajectory kernels)
# ---------------------------------------------------------------------------

def _penalized_minimizer_loop(H, C, lap, rho):
    n, d = C.shape
    nd = n * d
    M = np.zeros((nd, nd))
    rhs = np.zeros(nd)
    for i in range(n):
        for a in range(d):
            acc = 0.0
            for b in range(d):
                M[i * d + a, i * d + b] += H[i, a, b]
                acc += H[i, a, b] * C[i, b]
            rhs[i * d + a] = acc
            for j in range(n):
                M[i * d + a, j * d + a] += rho * lap[i, j]
    return np.linalg.solve(M, rhs).reshape((n, d))


def _consensus_minimizer_loop(H, C):
    n, d = C.shape
    S = np.zeros((d, d))
    s = np.zeros(d)
    for i in range(n):
        for a in range(d):
            for b in range(d):
                S[a, b] += H[i, a, b]
                s[a] += H[i, a, b] * C[i, b]
    return np.linalg.solve(S, s)


_penalized_minimizer_nb = njit(_penalized_minimizer_loop)
_consensus_minimizer_nb = njit(_consensus_minimizer_loop)


def _penalized_minimizer_numpy(H, C, lap, rho):
    n, d = C.shape
    M = np.zeros((n * d, n * d))
    for i in range(n):
        M[i * d:(i + 1) * d, i * d:(i + 1) * d] = H[i]
    M += rho * np.kron(lap, np.eye(d))
    rhs = np.einsum("iab,ib->ia", H, C).ravel()
    return np.linalg.solve(M, rhs).reshape(n, d)


def _consensus_minimizer_numpy(H, C):
    return np.linalg.solve(H.sum(axis=0), np.einsum("iab,ib->a", H, C))


# ---------------------------------------------------------------------------
# DGD trajectory with scheduled function replacements
# ---------------------------------------------------------------------------

def _trajectory_loop(H0, C0, lap, rho, eta, x0, iterations, ev_k, ev_agent,
                     ev_H, ev_C, xref0, track, store):
    n, d = C0.shape
    H = H0.copy()
    C = C0.copy()
    x = x0.copy()
    xref = xref0.copy()
    fm = np.full(d, np.nan)
    rec = np.empty((iterations + 1, 6))
    fmin = np.full((iterations + 1 if track else 1, d), np.nan)
    its = np.empty((iterations + 1 if store else 1, n, d))
    g = np.empty((n, d))
    lx = np.empty((n, d))
    m = ev_k.shape[0]
    p = 0
    for k in range(iterations + 1):
        count = 0
        while p < m and ev_k[p] <= k:
            if ev_k[p] == k:
                i = ev_agent[p]
                for a in range(d):
                    C[i, a] = ev_C[p, a]
                    for b in range(d):
                        H[i, a, b] = ev_H[p, a, b]
                count += 1
            p += 1
        if track and (k == 0 or count > 0):
            xref = _penalized_minimizer_nb(H, C, lap, rho)
            fm = _consensus_minimizer_nb(H, C)
        for i in range(n):
            for a in range(d):
                acc = 0.0
                for j in range(n):
                    acc += lap[i, j] * x[j, a]
                lx[i, a] = acc
        nx = 0.0
        dist = 0.0
        fval = 0.0
        cres = 0.0
        mnorm = 0.0
        for i in range(n):
            for a in range(d):
                nx += x[i, a] * x[i, a]
                diff = x[i, a] - xref[i, a]
                dist += diff * diff
                mnorm += xref[i, a] * xref[i, a]
                cres += x[i, a] * lx[i, a]
                acc = 0.0
                for b in range(d):
                    acc += H[i, a, b] * (x[i, b] - C[i, b])
                fval += 0.5 * (x[i, a] - C[i, a]) * acc
                g[i, a] = acc + rho * lx[i, a]
        rec[k, 0] = np.sqrt(nx)
        rec[k, 1] = np.sqrt(dist)
        rec[k, 2] = fval + 0.5 * rho * cres
        rec[k, 3] = cres
        rec[k, 4] = count
        rec[k, 5] = np.sqrt(mnorm)
        if store:
            for i in range(n):
                for a in range(d):
                    its[k, i, a] = x[i, a]
        if track:
            for a in range(d):
                fmin[k, a] = fm[a]
        if k < iterations:
            for i in range(n):
                for a in range(d):
                    x[i, a] -= eta * g[i, a]
    return rec, fmin, its, x


_trajectory_nb = njit(_trajectory_loop)


def _trajectory_numpy(H0, C0, lap, rho, eta, x0, iterations, ev_k, ev_agent,
                      ev_H, ev_C, xref0, track, store):
    n, d = C0.shape
    H = H0.copy()
    C = C0.copy()
    x = x0.copy()
    xref = xref0.copy()
    fm = np.full(d, np.nan)
    rec = np.empty((iterations + 1, N_REC))
    fmin = np.full((iterations + 1 if track else 1, d), np.nan)
    its = np.empty((iterations + 1 if store else 1, n, d))
    # events are sorted by k, so each step owns a contiguous slice
    starts = np.searchsorted(ev_k, np.arange(iterations + 2), side="left")
    for k in range(iterations + 1):
        lo, hi = starts[k], starts[k + 1]
        count = hi - lo
        if count:
            H[ev_agent[lo:hi]] = ev_H[lo:hi]
            C[ev_agent[lo:hi]] = ev_C[lo:hi]
        if track and (k == 0 or count > 0):
            xref = _penalized_minimizer_numpy(H, C, lap, rho)
            fm = _consensus_minimizer_numpy(H, C)
        lx = lap @ x
        local = np.einsum("iab,ib->ia", H, x - C)
        cres = float(np.sum(x * lx))
        rec[k, REC_NORM_X] = np.sqrt(np.sum(x * x))
        rec[k, REC_DIST] = np.sqrt(np.sum((x - xref) ** 2))
        rec[k, REC_F_RHO] = 0.5 * np.sum((x - C) * local) + 0.5 * rho * cres
        rec[k, REC_CONSENSUS] = cres
        rec[k, REC_EVENTS] = count
        rec[k, REC_MIN_NORM] = np.sqrt(np.sum(xref * xref))
        if store:
            its[k] = x
        if track:
            fmin[k] = fm
        if k < iterations:
            x = x - eta * (local + rho * lx)
    return rec, fmin, its, x


def trajectory(H, C, lap, rho, eta, x0, iterations, events=None, xref=None,
               track=False, store=False, backend=None):
    """Run DGD for ``iterations`` steps, applying function replacements.

    ``events`` is ``(k, agent, H_new, C_new)`` as arrays sorted by ``k``.  The
    replacement at ``k`` is the function used to compute ``x^{k+1}`` and is
    reflected in record row ``k``.  With ``track`` the exact minimizers are
    recomputed whenever the active function set changes; otherwise distances
    are measured to the fixed ``xref`` (NaN when unknown).

    Returns ``(records, f_minimizers, iterates, final_x)``.
    """
    H = np.ascontiguousarray(H, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.float64)
    n, d = C.shape
    if events is None:
        ev_k = np.zeros(0, dtype=np.int64)
        ev_agent = np.zeros(0, dtype=np.int64)
        ev_H = np.zeros((0, d, d))
        ev_C = np.zeros((0, d))
    else:
        ev_k, ev_agent, ev_H, ev_C = events
        ev_k = np.ascontiguousarray(ev_k, dtype=np.int64)
        ev_agent = np.ascontiguousarray(ev_agent, dtype=np.int64)
        ev_H = np.ascontiguousarray(ev_H, dtype=np.float64).reshape(-1, d, d)
        ev_C = np.ascontiguousarray(ev_C, dtype=np.float64).reshape(-1, d)
    if xref is None:
        xref = np.full((n, d), np.nan)
    args = (H, C, np.ascontiguousarray(lap, dtype=np.float64), float(rho),
            float(eta), np.ascontiguousarray(x0, dtype=np.float64).reshape(n, d),
            int(iterations), ev_k, ev_agent, ev_H, ev_C,
            np.ascontiguousarray(xref, dtype=np.float64).reshape(n, d),
            bool(track), bool(store))
    if _accel.resolve(backend) == "numba":
        return _trajectory_nb(*args)
    return _trajectory_numpy(*args)


# ---------------------------------------------------------------------------
# DGD against a greedy adversary
# ---------------------------------------------------------------------------

def _greedy_loop(H0, C0, lap, rho, eta, x0, iterations, pool, track):
    n, d = C0.shape
    npool = pool.shape[0]
    H = H0.copy()
    C = C0.copy()
    x = x0.copy()
    rec = np.empty((iterations + 1, 6))
    lx = np.empty((n, d))
    v = np.empty(d)
    hv = np.empty(d)
    best_c = np.empty(d)
    cand = np.empty(d)
    g = np.empty((n, d))
    xref = np.full((n, d), np.nan)
    for k in range(iterations + 1):
        for i in range(n):
            for a in range(d):
                acc = 0.0
                for j in range(n):
                    acc += lap[i, j] * x[j, a]
                lx[i, a] = acc
        # each agent picks the pool Hessian (and a matching minimizer) that
        # pushes its own next block farthest from the origin
        for i in range(n):
            best = -1.0
            best_h = 0
            for h in range(npool):
                for a in range(d):
                    acc = 0.0
                    for b in range(d):
                        acc += pool[h, a, b] * x[i, b]
                    v[a] = x[i, a] - eta * rho * lx[i, a] - eta * acc
                nrm = 0.0
                for a in range(d):
                    acc = 0.0
                    for b in range(d):
                        acc += pool[h, a, b] * v[b]
                    hv[a] = acc
                    nrm += acc * acc
                nrm = np.sqrt(nrm)
                for a in range(d):
                    cand[a] = hv[a] / nrm if nrm > 0.0 else (1.0 if a == 0 else 0.0)
                val = 0.0
                for a in range(d):
                    acc = 0.0
                    for b in range(d):
                        acc += pool[h, a, b] * cand[b]
                    t = v[a] + eta * acc
                    val += t * t
                if val > best:
                    best = val
                    best_h = h
                    for a in range(d):
                        best_c[a] = cand[a]
            for a in range(d):
                C[i, a] = best_c[a]
                for b in range(d):
                    H[i, a, b] = pool[best_h, a, b]
        if track:
            xref = _penalized_minimizer_nb(H, C, lap, rho)
        nx = 0.0
        dist = 0.0
        fval = 0.0
        cres = 0.0
        mnorm = 0.0
        for i in range(n):
            for a in range(d):
                nx += x[i, a] * x[i, a]
                diff = x[i, a] - xref[i, a]
                dist += diff * diff
                mnorm += xref[i, a] * xref[i, a]
                cres += x[i, a] * lx[i, a]
                acc = 0.0
                for b in range(d):
                    acc += H[i, a, b] * (x[i, b] - C[i, b])
                fval += 0.5 * (x[i, a] - C[i, a]) * acc
                g[i, a] = acc + rho * lx[i, a]
        rec[k, 0] = np.sqrt(nx)
        rec[k, 1] = np.sqrt(dist)
        rec[k, 2] = fval + 0.5 * rho * cres
        rec[k, 3] = cres
        rec[k, 4] = n
        rec[k, 5] = np.sqrt(mnorm)
        if k < iterations:
            for i in range(n):
                for a in range(d):
                    x[i, a] -= eta * g[i, a]
    return rec


_greedy_nb = njit(_greedy_loop)


def _greedy_numpy(H0, C0, lap, rho, eta, x0, iterations, pool, track):
    n, d = C0.shape
    x = x0.copy()
    H = H0.copy()
    C = C0.copy()
    rec = np.empty((iterations + 1, N_REC))
    xref = np.full((n, d), np.nan)
    fallback = np.zeros(d)
    fallback[0] = 1.0
    agents = np.arange(n)
    for k in range(iterations + 1):
        lx = lap @ x
        z = x - eta * rho * lx
        v = z[None, :, :] - eta * np.einsum("hab,ib->hia", pool, x)
        hv = np.einsum("hab,hib->hia", pool, v)
        nrm = np.linalg.norm(hv, axis=2, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            cand = np.where(nrm > 0.0, hv / nrm, fallback)
        out = v + eta * np.einsum("hab,hib->hia", pool, cand)
        val = np.sum(out * out, axis=2)
        best = np.argmax(val, axis=0)
        H = pool[best].copy()
        C = cand[best, agents]
        if track:
            xref = _penalized_minimizer_numpy(H, C, lap, rho)
        local = np.einsum("iab,ib->ia", H, x - C)
        cres = float(np.sum(x * lx))
        rec[k, REC_NORM_X] = np.sqrt(np.sum(x * x))
        rec[k, REC_DIST] = np.sqrt(np.sum((x - xref) ** 2))
        rec[k, REC_F_RHO] = 0.5 * np.sum((x - C) * local) + 0.5 * rho * cres
        rec[k, REC_CONSENSUS] = cres
        rec[k, REC_EVENTS] = n
        rec[k, REC_MIN_NORM] = np.sqrt(np.sum(xref * xref))
        if k < iterations:
            x = x - eta * (local + rho * lx)
    return rec


def greedy_trajectory(H, C, lap, rho, eta, x0, iterations, pool, track=False,
                      backend=None):
    """DGD where every agent re-picks its function each step from ``pool``.

    The adversary is greedy and separable: block ``i`` of the next iterate
    depends only on agent ``i``'s function, so maximising each block norm
    maximises the stacked norm for one step.
    """
    C = np.ascontiguousarray(C, dtype=np.float64)
    n, d = C.shape
    args = (np.ascontiguousarray(H, dtype=np.float64), C,
            np.ascontiguousarray(lap, dtype=np.float64), float(rho), float(eta),
            np.ascontiguousarray(x0, dtype=np.float64).reshape(n, d),
            int(iterations), np.ascontiguousarray(pool, dtype=np.float64),
            bool(track))
    if _accel.resolve(backend) == "numba":
        return _greedy_nb(*args)
    return _greedy_numpy(*args)


# ---------------------------------------------------------------------------
# worst-case search objective: ||x^a - x^b|| for 2-D rotated quadratics
# ---------------------------------------------------------------------------

def _pair_distance_loop(points, n_common, alpha, beta):
    m = points.shape[0]
    out = np.empty(m)
    for s in range(m):
        S00 = 0.0
        S01 = 0.0
        S11 = 0.0
        s0 = 0.0
        s1 = 0.0
        xa0 = 0.0
        xa1 = 0.0
        for f in range(n_common + 2):
            t = points[s, 3 * f]
            r = points[s, 3 * f + 1]
            th = points[s, 3 * f + 2]
            ct = np.cos(t)
            st = np.sin(t)
            h00 = beta * ct * ct + alpha * st * st
            h01 = (beta - alpha) * ct * st
            h11 = beta * st * st + alpha * ct * ct
            c0 = r * np.cos(th)
            c1 = r * np.sin(th)
            b0 = h00 * c0 + h01 * c1
            b1 = h01 * c0 + h11 * c1
            if f < n_common:
                S00 += h00
                S01 += h01
                S11 += h11
                s0 += b0
                s1 += b1
            else:
                A00 = S00 + h00
                A01 = S01 + h01
                A11 = S11 + h11
                r0 = s0 + b0
                r1 = s1 + b1
                det = A00 * A11 - A01 * A01
                y0 = (A11 * r0 - A01 * r1) / det
                y1 = (A00 * r1 - A01 * r0) / det
                if f == n_common:
                    xa0 = y0
                    xa1 = y1
                else:
                    out[s] = np.sqrt((xa0 - y0) ** 2 + (xa1 - y1) ** 2)
    return out


_pair_distance_nb = njit(_pair_distance_loop)


def _pair_distance_numpy(points, n_common, alpha, beta):
    m = points.shape[0]
    p = points.reshape(m, n_common + 2, 3)
    t, r, th = p[..., 0], p[..., 1], p[..., 2]
    ct, st = np.cos(t), np.sin(t)
    h00 = beta * ct * ct + alpha * st * st
    h01 = (beta - alpha) * ct * st
    h11 = beta * st * st + alpha * ct * ct
    c0, c1 = r * np.cos(th), r * np.sin(th)
    b0 = h00 * c0 + h01 * c1
    b1 = h01 * c0 + h11 * c1

    def solve(idx):
        A00 = h00[:, :n_common].sum(1) + h00[:, idx]
        A01 = h01[:, :n_common].sum(1) + h01[:, idx]
        A11 = h11[:, :n_common].sum(1) + h11[:, idx]
        r0 = b0[:, :n_common].sum(1) + b0[:, idx]
        r1 = b1[:, :n_common].sum(1) + b1[:, idx]
        det = A00 * A11 - A01 * A01
        return (A11 * r0 - A01 * r1) / det, (A00 * r1 - A01 * r0) / det

    a0, a1 = solve(n_common)
    z0, z1 = solve(n_common + 1)
    return np.sqrt((a0 - z0) ** 2 + (a1 - z1) ** 2)


def pair_distance(points, n_common, alpha, beta, backend=None):
    """Distance between the two swap minimizers for a batch of encoded points.

    Each row holds ``(angle, radius, polar_angle)`` triples for the
    ``n_common`` shared functions followed by ``f_a`` and ``f_b``.
    """
    points = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    args = (points, int(n_common), float(alpha), float(beta))
    if _accel.resolve(backend) == "numba":
        return _pair_distance_nb(*args)
    return _pair_distance_numpy(*args)
