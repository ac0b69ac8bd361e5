"""Term-local application of few-site operators to vectors and matrices.

Applying a k-site operator to a D x D matrix costs O(D^2 d^k) by reshaping
the row (or column) multi-index instead of building the D x D embedding.
Contiguous-site operators reduce to flat GEMMs (with one transpose round trip
on the column side); a streaming numba path takes over for large arrays.
The numpy route is the reference; both are cross-checked in the test suite.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .linalg import DimensionError, TensorSpace

try:  # pragma: no cover - exercised implicitly via either path
    import numba as _nb

    # the default OpenMP/TBB layers can deadlock alongside BLAS thread pools;
    # the workqueue layer is fork-safe and has no such interaction
    _nb.config.THREADING_LAYER = "workqueue"
    _HAVE_NUMBA = True
except Exception:  # pragma: no cover
    _nb = None
    _HAVE_NUMBA = False

# below this many elements the numba launch overhead outweighs the win
_NUMBA_MIN_SIZE = 1 << 20


if _HAVE_NUMBA:

    @_nb.njit(parallel=True, fastmath=False, cache=True)
    def _left_kernel(x, op, out):
        # x, out: (A, d, C); out = op @ x along the middle axis
        A, d, C = x.shape
        for a in _nb.prange(A):
            xa = x[a]
            oa = out[a]
            for s in range(d):
                row = oa[s]
                for c in range(C):
                    row[c] = 0.0
                for t in range(d):
                    o = op[s, t]
                    if o != 0:
                        xt = xa[t]
                        for c in range(C):
                            row[c] += o * xt[c]

    @_nb.njit(parallel=True, fastmath=False, cache=True)
    def _right_kernel(x, op, out):
        # x, out: (R, d, B); out[r, v, b] = sum_u x[r, u, b] op[u, v]
        R, d, B = x.shape
        for r in _nb.prange(R):
            xr = x[r]
            orow = out[r]
            for v in range(d):
                ov = orow[v]
                for b in range(B):
                    ov[b] = 0.0
            for u in range(d):
                xu = xr[u]
                for v in range(d):
                    o = op[u, v]
                    if o != 0:
                        ov = orow[v]
                        for b in range(B):
                            ov[b] += o * xu[b]

    @_nb.njit(parallel=True, fastmath=False, cache=True)
    def _accum_hermitian_kernel(out, t1, q):
        # out += t1 - (q + q^dag)/2, one fused pass (q^dag read column-wise)
        n = out.shape[0]
        for i in _nb.prange(n):
            oi = out[i]
            ti = t1[i]
            qi = q[i]
            for j in range(n):
                oi[j] += ti[j] - 0.5 * (qi[j] + np.conj(q[j, i]))

    @_nb.njit(parallel=True, fastmath=False, cache=True)
    def _phase_accum_kernel(out, rho, h):
        # out += -1j (h_i - h_j) rho_ij
        n = out.shape[0]
        for i in _nb.prange(n):
            hi = h[i]
            oi = out[i]
            ri = rho[i]
            for j in range(n):
                oi[j] += -1j * (hi - h[j]) * ri[j]


def _axis_split(sites: Sequence[int], space: TensorSpace) -> tuple[int, int, int] | None:
    """(A, d, B) row-factorization when `sites` are consecutive and ascending."""
    sites = list(sites)
    if sites != sorted(sites):
        return None
    if any(b - a != 1 for a, b in zip(sites, sites[1:])):
        return None
    dims = space.site_dims
    A = int(np.prod(dims[: sites[0]], initial=1))
    d = int(np.prod([dims[s] for s in sites]))
    B = int(np.prod(dims[sites[-1] + 1:], initial=1))
    return A, d, B


def _check_op(op: np.ndarray, sites: Sequence[int], space: TensorSpace) -> np.ndarray:
    op = np.asarray(op, dtype=complex)
    dloc = int(np.prod([space.site_dims[space.check_site(s)] for s in sites]))
    if op.shape != (dloc, dloc):
        raise DimensionError(f"operator shape {op.shape} does not match sites {tuple(sites)}")
    return op


def _right_contract(x: np.ndarray, op: np.ndarray) -> np.ndarray:
    """y[r, u, b] = sum_v x[r, v, b] op[v, u] via one flat GEMM."""
    R, d, B = x.shape
    if B == 1:
        return (x.reshape(R, d) @ op).reshape(x.shape)
    xt = np.ascontiguousarray(x.swapaxes(1, 2)).reshape(R * B, d)
    y = (xt @ op).reshape(R, B, d).swapaxes(1, 2)
    return np.ascontiguousarray(y)


def _ascending_pair(op: np.ndarray, sites: Sequence[int], space: TensorSpace):
    """Two-site op reordered onto ascending sites, plus the (A, d0, B, d1, C) split."""
    s0, s1 = sites
    d0, d1 = space.site_dims[s0], space.site_dims[s1]
    if s0 > s1:
        op = op.reshape(d0, d1, d0, d1).transpose(1, 0, 3, 2).reshape(d0 * d1, d0 * d1)
        s0, s1, d0, d1 = s1, s0, d1, d0
    dims = space.site_dims
    A = int(np.prod(dims[:s0], initial=1))
    B = int(np.prod(dims[s0 + 1:s1], initial=1))
    C = int(np.prod(dims[s1 + 1:], initial=1))
    return op, (A, d0, B, d1, C)


def _left_pair(op2: np.ndarray, split, mat: np.ndarray, cols: int) -> np.ndarray:
    """Left-multiply by a two-site op on non-adjacent sites: gather, GEMM, scatter."""
    A, d0, B, d1, C = split
    x = mat.reshape(A, d0, B, d1, C * cols)
    xt = np.ascontiguousarray(x.transpose(1, 3, 0, 2, 4)).reshape(d0 * d1, -1)
    y = (op2 @ xt).reshape(d0, d1, A, B, C * cols).transpose(2, 0, 3, 1, 4)
    return np.ascontiguousarray(y).reshape(mat.shape)


def _right_pair(op2: np.ndarray, split, mat: np.ndarray) -> np.ndarray:
    """Right-multiply by a two-site op on non-adjacent column sites."""
    A, d0, B, d1, C = split
    rows = mat.shape[0]
    x = mat.reshape(rows * A, d0, B, d1, C)
    xt = np.ascontiguousarray(x.transpose(0, 2, 4, 1, 3)).reshape(-1, d0 * d1)
    y = (xt @ op2).reshape(rows * A, B, C, d0, d1).transpose(0, 3, 1, 4, 2)
    return np.ascontiguousarray(y).reshape(mat.shape)


def _left_generic(op: np.ndarray, sites: Sequence[int], mat: np.ndarray, space: TensorSpace) -> np.ndarray:
    cols = mat.shape[1]
    if len(sites) == 2:
        op2, split = _ascending_pair(op, sites, space)
        return _left_pair(op2, split, mat, cols)
    dims = space.site_dims
    n = space.n_sites
    t = mat.reshape(dims + (cols,))
    loc_dims = [dims[s] for s in sites]
    opt = op.reshape(loc_dims + loc_dims)
    t = np.tensordot(opt, t, axes=(list(range(len(sites), 2 * len(sites))), list(sites)))
    rest = [s for s in range(n) if s not in sites]
    perm = list(np.argsort(list(sites) + rest))
    return t.transpose(perm + [n]).reshape(mat.shape[0], cols)


def apply_left(op: np.ndarray, sites: Sequence[int], mat: np.ndarray, space: TensorSpace) -> np.ndarray:
    """(op embedded on sites) @ mat, without building the D x D embedding."""
    op = _check_op(op, sites, space)
    D = space.dim
    mat = np.asarray(mat, dtype=complex)
    if mat.shape[0] != D:
        raise DimensionError("matrix row dimension does not match the space")
    split = _axis_split(sites, space)
    cols = mat.shape[1] if mat.ndim == 2 else 1
    if split is not None:
        A, d, B = split
        x = np.ascontiguousarray(mat.reshape(A, d, B * cols))
        if _HAVE_NUMBA and x.size >= _NUMBA_MIN_SIZE:
            out = np.empty_like(x)
            _left_kernel(x, op, out)
        elif A == 1:
            out = op @ x.reshape(d, B * cols)
        else:
            out = np.matmul(op, x)
        return out.reshape(mat.shape)
    return _left_generic(op, sites, mat.reshape(D, -1), space).reshape(mat.shape)


def apply_right(op: np.ndarray, sites: Sequence[int], mat: np.ndarray, space: TensorSpace) -> np.ndarray:
    """mat @ (op embedded on sites)."""
    op = _check_op(op, sites, space)
    D = space.dim
    mat = np.asarray(mat, dtype=complex)
    if mat.ndim != 2 or mat.shape[1] != D:
        raise DimensionError("matrix column dimension does not match the space")
    split = _axis_split(sites, space)
    if split is not None:
        A, d, B = split
        x = np.ascontiguousarray(mat.reshape(mat.shape[0] * A, d, B))
        if _HAVE_NUMBA and x.size >= _NUMBA_MIN_SIZE:
            out = np.empty_like(x)
            _right_kernel(x, op, out)
            return out.reshape(mat.shape)
        return _right_contract(x, op).reshape(mat.shape)
    if len(sites) == 2:
        op2, splitp = _ascending_pair(op, sites, space)
        return _right_pair(op2, splitp, mat)
    return _left_generic(op.T, sites, mat.T.copy(), space).T.copy()


def expectation(op: np.ndarray, sites: Sequence[int], rho_or_psi: np.ndarray, space: TensorSpace) -> complex:
    """<op> on a density matrix (trace) or a state vector (sandwich)."""
    arr = np.asarray(rho_or_psi, dtype=complex)
    if arr.ndim == 1:
        shaped = arr.reshape(space.dim, 1)
        return complex(np.vdot(arr, apply_left(op, sites, shaped, space).reshape(-1)))
    return complex(np.trace(apply_left(op, sites, arr, space)))


def dissipator_apply(op: np.ndarray, opdag_op: np.ndarray, sites: Sequence[int],
                     rho: np.ndarray, space: TensorSpace, out: np.ndarray,
                     hermitian: bool = False) -> None:
    """out += O rho O^dag - (1/2){O^dag O, rho} with O local on `sites`.

    With hermitian=True the anticommutator is built from the left product
    alone (rho Q = (Q rho)^dag), valid only for Hermitian rho.
    """
    t1 = apply_right(op.conj().T, sites, apply_left(op, sites, rho, space), space)
    q_rho = apply_left(opdag_op, sites, rho, space)
    if hermitian:
        if _HAVE_NUMBA and out.size >= _NUMBA_MIN_SIZE:
            _accum_hermitian_kernel(out, t1, q_rho)
        else:
            out += t1
            out -= 0.5 * (q_rho + q_rho.conj().T)
    else:
        out += t1
        out -= 0.5 * q_rho
        out -= 0.5 * apply_right(opdag_op, sites, rho, space)


def adjoint_dissipator_apply(op: np.ndarray, opdag_op: np.ndarray, sites: Sequence[int],
                             a: np.ndarray, space: TensorSpace, out: np.ndarray) -> None:
    """out += O^dag A O - (1/2){O^dag O, A} (Heisenberg-picture dissipator)."""
    t1 = apply_right(op, sites, apply_left(op.conj().T, sites, a, space), space)
    out += t1
    out -= 0.5 * apply_left(opdag_op, sites, a, space)
    out -= 0.5 * apply_right(opdag_op, sites, a, space)


def phase_accumulate(out: np.ndarray, rho: np.ndarray, h: np.ndarray) -> None:
    """out += -i (h_i - h_j) rho_ij, the commutator with a diagonal Hamiltonian."""
    if _HAVE_NUMBA and out.size >= _NUMBA_MIN_SIZE:
        _phase_accum_kernel(out, rho, np.ascontiguousarray(h))
    else:
        out += (-1j) * (h[:, None] * rho - rho * h[None, :])
