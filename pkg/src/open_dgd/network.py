"""Communication graph: validation, Laplacian spectrum, stacked Laplacian action."""
from collections import deque

import numpy as np

ZERO_EIG_ATOL = 1e-9


class NetworkError(ValueError):
    """Adjacency matrix violates symmetry, positive diagonal or connectivity."""


def _connected(pattern):
    n = pattern.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(pattern[i] & ~seen):
            seen[j] = True
            queue.append(j)
    return bool(seen.all())


class Network:
    """Symmetric weighted adjacency with its Laplacian ``L = D - A``.

    Built through :func:`build_network`; immutable afterwards.
    """

    def __init__(self, adjacency):
        A = np.array(adjacency, dtype=np.float64, ndmin=2)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise NetworkError(f"adjacency must be square, got shape {A.shape}")
        if not np.all(np.isfinite(A)) or np.any(A < 0):
            raise NetworkError("adjacency entries must be finite and nonnegative")
        if not np.array_equal(A, A.T):
            raise NetworkError("adjacency must be symmetric")
        if np.any(np.diag(A) <= 0):
            bad = np.flatnonzero(np.diag(A) <= 0).tolist()
            raise NetworkError(f"diagonal entries must be positive (agents {bad})")
        if not _connected(A > 0):
            raise NetworkError("graph is disconnected")
        L = np.diag(A.sum(axis=1)) - A
        eig = np.linalg.eigvalsh(L)
        for arr in (A, L, eig):
            arr.setflags(write=False)
        self.adjacency = A
        self.laplacian = L
        self.eigenvalues = eig

    @property
    def n(self):
        return self.adjacency.shape[0]

    @property
    def degree(self):
        return self.adjacency.sum(axis=1)

    @property
    def lambda_2(self):
        return float(self.eigenvalues[1]) if self.n > 1 else float("nan")

    @property
    def lambda_n(self):
        return float(self.eigenvalues[-1])

    @property
    def spectrally_connected(self):
        return self.n == 1 or self.lambda_2 > ZERO_EIG_ATOL

    def __repr__(self):
        return f"Network(n={self.n}, lambda_2={self.lambda_2:.6g}, lambda_n={self.lambda_n:.6g})"


def build_network(adjacency):
    return Network(adjacency)


def complete(n, edge_weight=1.0, self_weight=1.0):
    A = np.full((n, n), float(edge_weight))
    np.fill_diagonal(A, self_weight)
    return Network(A)


def path(n, edge_weight=1.0, self_weight=1.0):
    A = np.eye(n) * self_weight
    idx = np.arange(n - 1)
    A[idx, idx + 1] = A[idx + 1, idx] = edge_weight
    return Network(A)


def cycle(n, edge_weight=1.0, self_weight=1.0):
    if n < 3:
        return path(n, edge_weight, self_weight)
    A = np.eye(n) * self_weight
    idx = np.arange(n)
    A[idx, (idx + 1) % n] = A[(idx + 1) % n, idx] = edge_weight
    return Network(A)


def erdos_renyi(n, p, seed=0, edge_weight=1.0, self_weight=1.0, max_tries=10_000):
    """G(n, p), redrawn until connected."""
    if not 0 < p <= 1:
        raise ValueError(f"p must be in (0, 1], got {p}")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        upper = np.triu(rng.random((n, n)) < p, k=1)
        mask = upper | upper.T
        A = np.where(mask, float(edge_weight), 0.0)
        np.fill_diagonal(A, self_weight)
        if _connected(A > 0):
            return Network(A)
    raise NetworkError(f"no connected G({n}, {p}) found in {max_tries} draws")


GENERATORS = {"complete": complete, "path": path, "cycle": cycle, "erdos_renyi": erdos_renyi}


def _blocks(net, x):
    x = np.asarray(x, dtype=np.float64)
    n = net.n
    if x.ndim == 1:
        if x.size % n:
            raise ValueError(f"stacked vector of length {x.size} is not a multiple of n={n}")
        return x.reshape(n, -1)
    if x.ndim != 2 or x.shape[0] != n:
        raise ValueError(f"expected {n} blocks, got shape {x.shape}")
    return x


def pairwise_disagreement(net, x):
    """``sum_i sum_{j>i} a_ij ||x_i - x_j||^2`` by explicit double sum."""
    X = _blocks(net, x)
    A = net.adjacency
    total = 0.0
    for i in range(net.n):
        for j in range(i + 1, net.n):
            if A[i, j]:
                diff = X[i] - X[j]
                total += A[i, j] * float(diff @ diff)
    return total


def laplacian_quadratic_form(net, x, cross_check=True):
    """``x^T (L kron I_d) x``.

    With ``cross_check`` the double-sum form is computed as well and the two
    must agree to 1e-10 relative.
    """
    X = _blocks(net, x)
    # (L kron I_d) x is L @ X on the block matrix
    value = float(np.sum(X * (net.laplacian @ X)))
    if cross_check:
        other = pairwise_disagreement(net, X)
        if abs(value - other) > 1e-10 * max(1.0, abs(value), abs(other)):
            raise ArithmeticError(
                f"Laplacian form mismatch: kron {value!r} vs pairwise {other!r}"
            )
    return value


def laplacian_apply(net, x):
    """Blocks ``sum_j a_ij (x_i - x_j)``, i.e. ``(L kron I_d) x``; keeps the input shape."""
    x = np.asarray(x, dtype=np.float64)
    X = _blocks(net, x)
    return (net.laplacian @ X).reshape(x.shape)
