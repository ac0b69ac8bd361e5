"""Dense complex linear algebra and tensor-space bookkeeping.

Conventions used throughout the package:

* Site 1 is the leftmost (most significant) tensor factor; internally sites
  are 0-based, reports are 1-based.
* The local basis of every site is ordered by descending occupation, so for
  spin-1/2 the basis is (|up>, |down>) with sigma_z|up> = +|up>, and a
  truncated boson site uses (|n_max>, ..., |1>, |0>).  With this choice the
  n_max = 1 boson coincides entry-wise with the spin under d <-> sigma^-.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

HERMITICITY_RTOL = 1e-12


class DimensionError(ValueError):
    """Operator/site dimensions are inconsistent."""


@dataclass(frozen=True)
class TensorSpace:
    """Ordered list of local dimensions of a tensor-product space."""

    site_dims: tuple[int, ...]

    def __post_init__(self):
        if len(self.site_dims) == 0:
            raise DimensionError("space needs at least one site")
        if any(d < 2 for d in self.site_dims):
            raise DimensionError(f"all local dimensions must be >= 2, got {self.site_dims}")
        object.__setattr__(self, "site_dims", tuple(int(d) for d in self.site_dims))

    @classmethod
    def spins(cls, n_sites: int) -> "TensorSpace":
        return cls((2,) * n_sites)

    @property
    def n_sites(self) -> int:
        return len(self.site_dims)

    @property
    def dim(self) -> int:
        return int(np.prod(self.site_dims))

    def check_site(self, site: int) -> int:
        if not 0 <= site < self.n_sites:
            raise DimensionError(f"site {site} out of range for {self.n_sites} sites")
        return site

    def basis_index(self, occupations: Sequence[int]) -> int:
        """Flat index of the product basis state with the given occupations.

        Occupation n on a site of dimension d sits at local index d - 1 - n
        (descending-occupation ordering).
        """
        if len(occupations) != self.n_sites:
            raise DimensionError("one occupation per site required")
        idx = 0
        for n, d in zip(occupations, self.site_dims):
            if not 0 <= n < d:
                raise DimensionError(f"occupation {n} outside local dimension {d}")
            idx = idx * d + (d - 1 - n)
        return idx


def as_complex_matrix(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {m.shape}")
    return m


def hermiticity_defect(m: np.ndarray) -> float:
    """max|M - M^dag|, the absolute deviation from Hermiticity."""
    return float(np.abs(m - m.conj().T).max())


def assert_hermitian(m: np.ndarray, rtol: float = HERMITICITY_RTOL) -> np.ndarray:
    m = as_complex_matrix(m)
    scale = max(float(np.abs(m).max()), 1.0)
    defect = hermiticity_defect(m)
    if defect > rtol * scale:
        raise ValueError(f"matrix is not Hermitian: max|M - M^dag| = {defect:.3e}")
    return m


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; dimensions multiply."""
    return np.kron(as_complex_matrix(a), as_complex_matrix(b))


def kron_all(mats: Iterable[np.ndarray]) -> np.ndarray:
    out = None
    for m in mats:
        out = as_complex_matrix(m) if out is None else np.kron(out, m)
    if out is None:
        raise DimensionError("empty operator list")
    return out


def embed(op: np.ndarray, site: int, space: TensorSpace) -> np.ndarray:
    """Embed a single-site operator: identity on every other site."""
    op = as_complex_matrix(op)
    space.check_site(site)
    d = space.site_dims[site]
    if op.shape != (d, d):
        raise DimensionError(f"operator shape {op.shape} does not match site dimension {d}")
    mats = [np.eye(dj, dtype=complex) for dj in space.site_dims]
    mats[site] = op
    return kron_all(mats)


def embed_sites(op: np.ndarray, sites: Sequence[int], space: TensorSpace) -> np.ndarray:
    """Embed an operator given on the listed sites (in that order) into the full space."""
    op = as_complex_matrix(op)
    sites = [space.check_site(s) for s in sites]
    if len(set(sites)) != len(sites):
        raise DimensionError(f"repeated sites in {sites}")
    dims_s = [space.site_dims[s] for s in sites]
    dloc = int(np.prod(dims_s))
    if op.shape != (dloc, dloc):
        raise DimensionError(f"operator shape {op.shape} does not match sites {sites}")
    n = space.n_sites
    D = space.dim
    rest = [s for s in range(n) if s not in sites]
    dims_r = [space.site_dims[s] for s in rest]
    big = np.kron(op, np.eye(int(np.prod(dims_r, initial=1)), dtype=complex))
    t = big.reshape(dims_s + dims_r + dims_s + dims_r)
    # axis i of each half currently carries site (sites + rest)[i]; sort to natural order
    perm = list(np.argsort(sites + rest))
    return t.transpose(perm + [n + p for p in perm]).reshape(D, D)


def partial_trace(rho: np.ndarray, keep: Sequence[int], space: TensorSpace) -> np.ndarray:
    """Trace out every site not in `keep`; preserves the trace."""
    rho = as_complex_matrix(rho)
    if rho.shape != (space.dim, space.dim):
        raise DimensionError("density matrix does not match the space")
    keep = sorted(space.check_site(s) for s in set(keep))
    if not keep:
        raise DimensionError("keep set must be nonempty")
    dims = space.site_dims
    n = space.n_sites
    t = rho.reshape(dims + dims)
    traced = [s for s in range(n) if s not in keep]
    for count, s in enumerate(traced):
        ax_row = s - count
        remaining = n - count
        t = np.trace(t, axis1=ax_row, axis2=ax_row + remaining)
    dkeep = int(np.prod([dims[s] for s in keep]))
    return t.reshape(dkeep, dkeep)


def partial_transpose(rho: np.ndarray, subsystem: Sequence[int], space: TensorSpace) -> np.ndarray:
    """Transpose the flagged subsystem's indices only."""
    rho = as_complex_matrix(rho)
    if rho.shape != (space.dim, space.dim):
        raise DimensionError("density matrix does not match the space")
    sub = sorted(space.check_site(s) for s in set(subsystem))
    n = space.n_sites
    if not sub or len(sub) == n:
        raise DimensionError("subsystem must be a strict nonempty subset of the sites")
    dims = space.site_dims
    t = rho.reshape(dims + dims)
    perm = list(range(2 * n))
    for s in sub:
        perm[s], perm[s + n] = perm[s + n], perm[s]
    return t.transpose(perm).reshape(space.dim, space.dim)


def hermitian_eigs(m: np.ndarray, rtol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Returns (eigenvalues, eigenvectors); eigenvectors are the columns.
    """
    m = as_complex_matrix(m)
    scale = max(float(np.abs(m).max()), 1.0)
    if hermiticity_defect(m) > max(rtol, HERMITICITY_RTOL) * scale * 10:
        raise ValueError("hermitian_eigs requires a Hermitian matrix")
    vals, vecs = np.linalg.eigh(m)
    return vals, vecs


def trace_norm_hermitian(m: np.ndarray) -> float:
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    vals, _ = hermitian_eigs(m)
    return float(np.abs(vals).sum())


def frobenius_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m))


def cyclic_permutation_matrix(space: TensorSpace, shift: int = 1) -> np.ndarray:
    """Unitary P sending site j to site j + shift (cyclically).

    All local dimensions must agree.  P (A_j embedded) P^dag equals A embedded
    at site j + shift.
    """
    dims = space.site_dims
    if len(set(dims)) != 1:
        raise DimensionError("cyclic permutation needs equal local dimensions")
    n = space.n_sites
    D = space.dim
    T = np.eye(D, dtype=complex).reshape(dims + (D,))
    axes = tuple((i - shift) % n for i in range(n))  # (P psi)[j_i] = psi[j_{i-shift}]
    return T.transpose(axes + (n,)).reshape(D, D)
