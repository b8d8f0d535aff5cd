"""Dense linear algebra on multipartite Hilbert spaces.

States carry their subsystem dimensions so that partial traces and
Schmidt decompositions can be taken by subsystem index.  Fidelity uses
the squared convention ``F(rho, sigma) = (tr|sqrt(rho) sqrt(sigma)|)**2``,
so for pure states it equals ``|<psi|phi>|**2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-10


class StateError(ValueError):
    """Raised when an array does not satisfy a state invariant."""


def hermitianize(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2


def _as_dims(dims, size: int) -> tuple[int, ...]:
    if dims is None:
        return (size,)
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims) or int(np.prod(dims)) != size:
        raise StateError(f"dims {dims} do not match size {size}")
    return dims


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace matrix with subsystem dims.

    The constructor validates the invariants (Hermitian to 1e-10, eigenvalues
    >= -1e-10, trace 1 to 1e-10) and stores the Hermitian part.
    """

    data: np.ndarray
    dims: tuple[int, ...] = field(default=None)

    def __post_init__(self):
        a = np.array(self.data, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise StateError(f"density matrix must be square, got shape {a.shape}")
        object.__setattr__(self, "dims", _as_dims(self.dims, a.shape[0]))
        herm_err = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
        if herm_err > HERMITIAN_TOL:
            raise StateError(f"hermiticity violated: max |A - A^dag| = {herm_err:.3g}")
        a = hermitianize(a)
        tr = np.trace(a).real
        if abs(tr - 1) > TRACE_TOL:
            raise StateError(f"trace invariant violated: trace = {tr:.12g}")
        lam_min = np.linalg.eigvalsh(a)[0]
        if lam_min < -PSD_TOL:
            raise StateError(f"positivity violated: min eigenvalue = {lam_min:.3g}")
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


@dataclass(frozen=True)
class PureState:
    """Normalized state vector with subsystem dims."""

    amplitudes: np.ndarray
    dims: tuple[int, ...] = field(default=None)

    def __post_init__(self):
        v = np.array(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "dims", _as_dims(self.dims, v.shape[0]))
        norm2 = np.vdot(v, v).real
        if abs(norm2 - 1) > TRACE_TOL:
            raise StateError(f"normalization violated: squared norm = {norm2:.12g}")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def density(self) -> DensityMatrix:
        v = self.amplitudes
        return DensityMatrix(np.outer(v, v.conj()), self.dims)


@dataclass(frozen=True)
class KrausMap:
    """Completely positive map given by Kraus operators of shape (d_out, d_in)."""

    operators: tuple

    def __post_init__(self):
        ops = [np.array(k, dtype=complex) for k in self.operators]
        if not ops:
            raise StateError("a Kraus map needs at least one operator")
        shapes = {k.shape for k in ops}
        if len(shapes) != 1 or ops[0].ndim != 2:
            raise StateError(f"Kraus operators must share a 2-d shape, got {shapes}")
        gram = sum(k.conj().T @ k for k in ops)
        top = np.linalg.eigvalsh(hermitianize(gram))[-1]
        if top > 1 + 1e-10:
            raise StateError(f"map is not trace-nonincreasing: ||sum A^dag A|| = {top:.12g}")
        object.__setattr__(self, "operators", tuple(ops))

    @property
    def d_in(self) -> int:
        return self.operators[0].shape[1]

    @property
    def d_out(self) -> int:
        return self.operators[0].shape[0]

    @property
    def is_trace_preserving(self) -> bool:
        gram = sum(k.conj().T @ k for k in self.operators)
        return bool(np.max(np.abs(gram - np.eye(self.d_in))) <= 1e-10)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho)
        return sum(k @ rho @ k.conj().T for k in self.operators)

    def apply_on(self, rho: np.ndarray, dims: Sequence[int], site: int) -> np.ndarray:
        """Apply the map to subsystem ``site`` of a multipartite operator."""
        left = int(np.prod(dims[:site]))
        right = int(np.prod(dims[site + 1:]))
        res = 0
        for k in self.operators:
            big = np.kron(np.kron(np.eye(left), k), np.eye(right))
            res = res + big @ rho @ big.conj().T
        return res


def _data(x) -> np.ndarray:
    if isinstance(x, DensityMatrix):
        return x.data
    if isinstance(x, PureState):
        return x.amplitudes
    return np.asarray(x)


def tensor(a, b, *more):
    """Kronecker product of states of the same kind; dims are concatenated."""
    items = (a, b) + more
    if all(isinstance(x, PureState) for x in items):
        vec = reduce(np.kron, [x.amplitudes for x in items])
        return PureState(vec, sum((x.dims for x in items), ()))
    if all(isinstance(x, DensityMatrix) for x in items):
        mat = reduce(np.kron, [x.data for x in items])
        return DensityMatrix(mat, sum((x.dims for x in items), ()))
    raise TypeError("tensor() needs all PureState or all DensityMatrix arguments")


def _check_keep(keep, n: int) -> list[int]:
    keep = sorted({int(k) for k in np.atleast_1d(keep)})
    if not keep:
        raise ValueError("keep must be nonempty")
    if keep[0] < 0 or keep[-1] >= n:
        raise IndexError(f"subsystem index out of range for {n} subsystems: {keep}")
    return keep


def partial_trace_array(rho: np.ndarray, dims: Sequence[int], keep) -> np.ndarray:
    """Reduced operator on the subsystems ``keep`` (returned in ascending order)."""
    dims = list(dims)
    keep = _check_keep(keep, len(dims))
    gone = [i for i in range(len(dims)) if i not in keep]
    dk = int(np.prod([dims[i] for i in keep]))
    dg = int(np.prod([dims[i] for i in gone])) if gone else 1
    n = len(dims)
    t = np.asarray(rho).reshape(dims + dims)
    perm = keep + gone + [n + i for i in keep] + [n + i for i in gone]
    t = t.transpose(perm).reshape(dk, dg, dk, dg)
    return np.einsum("ajbj->ab", t)


def reduced_from_vector(psi: np.ndarray, dims: Sequence[int], keep) -> np.ndarray:
    """Reduced density operator of a pure state vector without forming |psi><psi|."""
    dims = list(dims)
    keep = _check_keep(keep, len(dims))
    gone = [i for i in range(len(dims)) if i not in keep]
    dk = int(np.prod([dims[i] for i in keep]))
    m = np.asarray(psi).reshape(dims).transpose(keep + gone).reshape(dk, -1)
    return m @ m.conj().T


def partial_trace(rho, keep, dims: Sequence[int] | None = None) -> DensityMatrix:
    """Marginal of ``rho`` on the subsystems listed in ``keep``.

    ``rho`` may be a DensityMatrix, a PureState, or a bare array with ``dims``.
    """
    if isinstance(rho, PureState):
        dims = rho.dims
        red = reduced_from_vector(rho.amplitudes, dims, keep)
    else:
        if isinstance(rho, DensityMatrix):
            dims = rho.dims
        elif dims is None:
            raise ValueError("dims are required for a bare array")
        red = partial_trace_array(_data(rho), dims, keep)
    keep = _check_keep(keep, len(dims))
    return DensityMatrix(red, tuple(dims[i] for i in keep))


def eig_hermitian(m, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and matching unitary of eigenvectors."""
    a = np.asarray(_data(m), dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("eig_hermitian needs a square matrix")
    if a.size and np.max(np.abs(a - a.conj().T)) > tol:
        raise ValueError("matrix is not Hermitian")
    w, v = np.linalg.eigh(hermitianize(a))
    return w[::-1].copy(), v[:, ::-1].copy()


def psd_sqrt(m) -> np.ndarray:
    """Square root of a positive semidefinite Hermitian matrix."""
    w, v = np.linalg.eigh(hermitianize(np.asarray(_data(m), dtype=complex)))
    w = np.where(w < 0, 0.0, w)
    return (v * np.sqrt(w)) @ v.conj().T


def _support_sqrt(m, rel: float = 1e-13) -> np.ndarray:
    """Square root with eigenvalues below rel * max dropped; rounding noise on
    the kernel would otherwise enter with its square root (~1e-8)."""
    w, v = np.linalg.eigh(hermitianize(np.asarray(m, dtype=complex)))
    w = np.where(w > rel * max(w[-1], 0.0), w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def psd_inv_sqrt(m, cutoff: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo-inverse square root and the support projector of a PSD matrix."""
    w, v = np.linalg.eigh(hermitianize(np.asarray(m, dtype=complex)))
    keep = w > cutoff * max(1.0, w[-1] if w.size else 1.0)
    vk = v[:, keep]
    return (vk / np.sqrt(w[keep])) @ vk.conj().T, vk @ vk.conj().T


def trace_norm(m) -> float:
    """Sum of singular values."""
    a = np.asarray(_data(m))
    if a.ndim == 2 and a.shape[0] == a.shape[1] and np.allclose(a, a.conj().T, atol=1e-13, rtol=0):
        return float(np.sum(np.abs(np.linalg.eigvalsh(hermitianize(a)))))
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def fidelity(rho, sigma) -> float:
    """Squared fidelity (tr|sqrt(rho) sqrt(sigma)|)^2 in [0, 1].

    PureState arguments are handled exactly via overlaps.
    """
    if isinstance(rho, PureState) and isinstance(sigma, PureState):
        if rho.dims != sigma.dims:
            raise ValueError("dimension mismatch")
        return float(min(1.0, abs(np.vdot(rho.amplitudes, sigma.amplitudes)) ** 2))
    if isinstance(rho, PureState):
        rho, sigma = sigma, rho
    if isinstance(sigma, PureState):
        if rho.dims != sigma.dims:
            raise ValueError("dimension mismatch")
        v = sigma.amplitudes
        return float(np.clip(np.vdot(v, rho.data @ v).real, 0.0, 1.0))
    a, b = _data(rho), _data(sigma)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if isinstance(rho, DensityMatrix) and isinstance(sigma, DensityMatrix) and rho.dims != sigma.dims:
        raise ValueError("dimension mismatch")
    s = np.linalg.svd(_support_sqrt(a) @ _support_sqrt(b), compute_uv=False)
    return float(np.clip(np.sum(s) ** 2, 0.0, 1.0))


def purify(rho: DensityMatrix, cutoff: float = 1e-12) -> PureState:
    """Canonical purification sum_i sqrt(lam_i)|v_i>|i> on dims + (rank,)."""
    lam, vec = eig_hermitian(rho.data)
    rank = max(1, int(np.sum(lam > cutoff)))
    lam = np.clip(lam[:rank], 0.0, None)
    lam = lam / lam.sum()
    psi = (vec[:, :rank] * np.sqrt(lam)).reshape(-1)
    return PureState(psi, rho.dims + (rank,))


@dataclass(frozen=True)
class Schmidt:
    weights: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return np.einsum("k,ik,jk->ij", np.sqrt(self.weights), self.left, self.right).reshape(-1)


def schmidt(psi: PureState, cut, cutoff: float = 1e-14) -> Schmidt:
    """Schmidt decomposition across ``cut`` (subsystems on the left side).

    Returns weights (descending, summing to one) and matrices whose columns
    are the left and right Schmidt vectors; only nonzero weights are kept.
    """
    dims = list(psi.dims)
    left_idx = _check_keep(cut, len(dims))
    right_idx = [i for i in range(len(dims)) if i not in left_idx]
    dl = int(np.prod([dims[i] for i in left_idx]))
    m = psi.amplitudes.reshape(dims).transpose(left_idx + right_idx).reshape(dl, -1)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    w = s ** 2
    keep = max(1, int(np.sum(w > cutoff)))
    w = w[:keep] / w[:keep].sum()
    return Schmidt(w, u[:, :keep], vh[:keep].T)


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Ginibre-distributed density matrix of the given rank."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return hermitianize(rho / np.trace(rho).real)


def random_pure(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def max_entangled(d: int) -> PureState:
    return PureState(np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d), (d, d))
