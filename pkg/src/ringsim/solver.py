"""Lindblad generator evaluation and steady-state solvers.

Two routes to the steady state:

* dense null space of the vectorized generator (D <= 64), column-stacking
  convention: the superoperator of D[O] is (O* x O) - (I x O^dag O)/2
  - ((O^dag O)* x I)/2;
* explicit 4th-order Runge-Kutta time evolution with step-halving error
  control, re-Hermitizing and renormalizing the trace each step.

The generator is applied term-locally for 1- and 2-site operators (cost
O(D^2 d^2) per term); dense D x D matmuls are refused above D = 4096.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .lattice import DissipationSpec, SiteTerm, coeff_map
from .linalg import DimensionError, TensorSpace, frobenius_norm

DENSE_MATMUL_LIMIT = 4096
NULLSPACE_LIMIT = 64
ZERO_EIGENVALUE_CUTOFF = 1e-8


class NotConverged(RuntimeError):
    """Time evolution hit t_max before reaching the residual target."""

    def __init__(self, t_max: float, residual: float):
        super().__init__(f"no steady state up to t_max = {t_max}: residual {residual:.3e}")
        self.t_max = t_max
        self.residual = residual


class TracelessKernelError(RuntimeError):
    """The null vector has (numerically) zero trace: non-unique or traceless kernel."""


@dataclass(frozen=True)
class DensityMatrix:
    """Trace-1 Hermitian positive-semidefinite matrix on a tensor-product space."""

    matrix: np.ndarray
    space: TensorSpace

    HERM_TOL = 1e-10
    TRACE_TOL = 1e-10
    POSITIVITY_TOL = -1e-8

    @classmethod
    def from_matrix(cls, m: np.ndarray, space: TensorSpace, validate: bool = True) -> "DensityMatrix":
        m = np.asarray(m, dtype=complex)
        if m.shape != (space.dim, space.dim):
            raise DimensionError("matrix does not match the space")
        if validate:
            herm = float(np.abs(m - m.conj().T).max())
            if herm > cls.HERM_TOL:
                raise ValueError(f"not Hermitian within tolerance: {herm:.2e}")
            tr = complex(np.trace(m))
            if abs(tr - 1.0) > cls.TRACE_TOL:
                raise ValueError(f"trace {tr} differs from 1")
            wmin = float(np.linalg.eigvalsh((m + m.conj().T) / 2).min())
            if wmin < cls.POSITIVITY_TOL:
                raise ValueError(f"negative eigenvalue {wmin:.2e}")
        return cls(m, space)

    @classmethod
    def maximally_mixed(cls, space: TensorSpace) -> "DensityMatrix":
        D = space.dim
        return cls(np.eye(D, dtype=complex) / D, space)

    @classmethod
    def pure(cls, psi: np.ndarray, space: TensorSpace) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), space)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix).min())

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)


@dataclass(frozen=True)
class SteadyStateResult:
    rho: DensityMatrix
    residual: float
    method: str
    iterations: int
    zero_eigen_degeneracy: int | None = None


@dataclass(frozen=True)
class EvolveOptions:
    """Explicit RK4 integration options; integrator_order is fixed at 4.

    `accelerate` enables geometric extrapolation of the slow mode between
    integration stretches; an extrapolated state is accepted only when it
    verifiably lowers the generator residual, so the convergence criterion
    is unchanged.
    """

    dt: float | None = None
    t_max: float = 400.0
    tol: float = 1e-9
    integrator_order: int = 4
    accelerate: bool = True

    def __post_init__(self):
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.integrator_order != 4:
            raise ValueError("only the classic 4th-order Runge-Kutta contract is provided")


def default_evolve_options(space: TensorSpace, diss: DissipationSpec, mu: float) -> EvolveOptions:
    """Tolerance/horizon defaults tied to the model's slowest rate."""
    c = coeff_map(diss)
    rates = [r for r in (c.Gamma_plus + c.Gamma_minus + diss.kappa, abs(mu)) if r > 0]
    t_max = 200.0 / min(rates) if rates else 400.0
    tol = 1e-9 if space.n_sites <= 6 else 1e-7
    return EvolveOptions(t_max=t_max, tol=tol)


class _Jump:
    __slots__ = ("term", "dense", "q_local", "q_dense")

    def __init__(self, op, space: TensorSpace):
        if isinstance(op, SiteTerm):
            self.term = op
            self.dense = None
            self.q_local = op.matrix.conj().T @ op.matrix
            self.q_dense = None
        else:
            m = np.asarray(op, dtype=complex)
            self.term = None
            self.dense = m
            self.q_local = None
            self.q_dense = m.conj().T @ m


class LindbladGenerator:
    """Precompiled Lindblad generator for one model.

    `hamiltonian` may be a dense matrix, a sequence of SiteTerm, or None;
    jump operators likewise (dense matrices and SiteTerm may be mixed).
    Diagonal Hamiltonian contributions are folded into a single diagonal.

    At D <= 64 local terms are embedded into dense matrices up front
    (python call overhead dominates term-local reshapes there); pass
    densify=False to force the term-local path, e.g. to test it.
    """

    def __init__(self, space: TensorSpace, hamiltonian=None, jumps: Sequence = (),
                 densify: bool | None = None):
        self.space = space
        D = space.dim
        if densify is None:
            densify = D <= NULLSPACE_LIMIT
        if densify and D <= DENSE_MATMUL_LIMIT:
            if hamiltonian is not None and not isinstance(hamiltonian, np.ndarray):
                acc = np.zeros((D, D), dtype=complex)
                for t in hamiltonian:
                    acc += t.embedded(space)
                hamiltonian = acc
            jumps = [op.embedded(space) if isinstance(op, SiteTerm) else op
                     for op in jumps]
        self._hdiag = np.zeros(D, dtype=complex)
        self._has_hdiag = False
        self._hterms: list[SiteTerm] = []
        self._hdense: np.ndarray | None = None

        if hamiltonian is None:
            terms: list[SiteTerm] = []
        elif isinstance(hamiltonian, np.ndarray):
            m = np.asarray(hamiltonian, dtype=complex)
            if m.shape != (D, D):
                raise DimensionError("Hamiltonian does not match the space")
            diag = np.diag(m)
            off = m - np.diag(diag)
            self._hdiag += diag
            self._has_hdiag = bool(np.abs(diag).max() > 0) if D else False
            if np.abs(off).max() > 0:
                self._check_dense(D)
                self._hdense = off
            terms = []
        else:
            terms = list(hamiltonian)

        for t in terms:
            if not isinstance(t, SiteTerm):
                raise TypeError("hamiltonian terms must be SiteTerm instances")
            if np.abs(t.matrix - np.diag(np.diag(t.matrix))).max() < 1e-30:
                self._fold_diagonal(t)
            else:
                self._hterms.append(t)

        self._jumps = [_Jump(op, space) for op in jumps]
        if any(j.dense is not None for j in self._jumps):
            self._check_dense(D)

    def _check_dense(self, D: int) -> None:
        if D > DENSE_MATMUL_LIMIT:
            raise DimensionError(
                f"dense D x D application refused for D = {D} > {DENSE_MATMUL_LIMIT}; "
                "pass SiteTerm operators instead")

    def _fold_diagonal(self, t: SiteTerm) -> None:
        dims = self.space.site_dims
        local = np.real_if_close(np.diag(t.matrix))
        shape = [1] * self.space.n_sites
        loc_dims = [dims[s] for s in t.sites]
        v = local.reshape(loc_dims)
        # broadcast the local diagonal over the untouched sites
        for ax, s in enumerate(t.sites):
            shape[s] = loc_dims[ax]
        order = np.argsort(t.sites)
        v = v.transpose(order).reshape([shape[i] for i in range(self.space.n_sites)])
        self._hdiag = self._hdiag + np.broadcast_to(v, dims).reshape(-1)
        self._has_hdiag = True

    # -- generator application ------------------------------------------------

    def apply(self, rho: np.ndarray, hermitian: bool = False) -> np.ndarray:
        """-i[H, rho] + sum_k D[O_k] rho, computed term-locally where possible.

        hermitian=True enables shortcuts (rho Q = (Q rho)^dag) that are valid
        only for Hermitian rho; the time-evolution loop uses it since its
        states are re-Hermitized every step.
        """
        rho = np.asarray(rho, dtype=complex)
        out = np.zeros_like(rho)
        h = self._hdiag
        if self._has_hdiag:
            kernels.phase_accumulate(out, rho, h)
        for t in self._hterms:
            out += (-1j) * (kernels.apply_left(t.matrix, t.sites, rho, self.space)
                            - kernels.apply_right(t.matrix, t.sites, rho, self.space))
        if self._hdense is not None:
            out += (-1j) * (self._hdense @ rho - rho @ self._hdense)
        for j in self._jumps:
            if j.term is not None:
                kernels.dissipator_apply(j.term.matrix, j.q_local, j.term.sites, rho,
                                         self.space, out, hermitian=hermitian)
            else:
                O, Q = j.dense, j.q_dense
                t1 = O @ rho
                out += t1 @ O.conj().T
                q_rho = Q @ rho
                if hermitian:
                    out -= 0.5 * (q_rho + q_rho.conj().T)
                else:
                    out -= 0.5 * (q_rho + rho @ Q)
        return out

    def apply_adjoint(self, a: np.ndarray) -> np.ndarray:
        """+i[H, A] + sum_k (O^dag A O - {O^dag O, A}/2), the Heisenberg derivative."""
        a = np.asarray(a, dtype=complex)
        out = np.zeros_like(a)
        h = self._hdiag
        if self._has_hdiag:
            out += 1j * (h[:, None] * a - a * h[None, :])
        for t in self._hterms:
            out += 1j * (kernels.apply_left(t.matrix, t.sites, a, self.space)
                         - kernels.apply_right(t.matrix, t.sites, a, self.space))
        if self._hdense is not None:
            out += 1j * (self._hdense @ a - a @ self._hdense)
        for j in self._jumps:
            if j.term is not None:
                kernels.adjoint_dissipator_apply(j.term.matrix, j.q_local, j.term.sites, a, self.space, out)
            else:
                O, Q = j.dense, j.q_dense
                out += O.conj().T @ a @ O
                out -= 0.5 * (Q @ a + a @ Q)
        return out

    # -- dense views -----------------------------------------------------------

    def dense_hamiltonian(self) -> np.ndarray:
        D = self.space.dim
        self._check_dense(D)
        H = np.diag(self._hdiag.astype(complex))
        for t in self._hterms:
            H += t.embedded(self.space)
        if self._hdense is not None:
            H += self._hdense
        return H

    def dense_jumps(self) -> list[np.ndarray]:
        self._check_dense(self.space.dim)
        out = []
        for j in self._jumps:
            out.append(j.dense if j.dense is not None else j.term.embedded(self.space))
        return out

    def superoperator(self) -> np.ndarray:
        """Column-stacking D^2 x D^2 matrix of the generator (D <= 64)."""
        D = self.space.dim
        if D > NULLSPACE_LIMIT:
            raise DimensionError(f"dense superoperator materialization needs D <= {NULLSPACE_LIMIT}")
        H = self.dense_hamiltonian()
        Id = np.eye(D, dtype=complex)
        S = -1j * (np.kron(Id, H) - np.kron(H.T, Id))
        for O in self.dense_jumps():
            Q = O.conj().T @ O
            S += np.kron(O.conj(), O) - 0.5 * np.kron(Id, Q) - 0.5 * np.kron(Q.T, Id)
        return S

    def residual(self, rho: np.ndarray, hermitian: bool = False) -> float:
        return frobenius_norm(self.apply(rho, hermitian=hermitian))


def _as_generator(hamiltonian, jumps, space: TensorSpace | None) -> LindbladGenerator:
    if isinstance(hamiltonian, LindbladGenerator):
        return hamiltonian
    if space is None:
        if isinstance(hamiltonian, np.ndarray):
            D = hamiltonian.shape[0]
            n = int(round(math.log2(D)))
            if 2 ** n != D:
                raise DimensionError("space must be given explicitly for non-qubit dimensions")
            space = TensorSpace((2,) * n)
        else:
            raise DimensionError("space is required when passing operator terms")
    return LindbladGenerator(space, hamiltonian, jumps)


def apply_liouvillian(hamiltonian, jumps, rho: np.ndarray, space: TensorSpace | None = None) -> np.ndarray:
    """d rho / dt for the Lindblad generator defined by `hamiltonian` and `jumps`."""
    return _as_generator(hamiltonian, jumps, space).apply(rho)


def apply_adjoint(hamiltonian, jumps, a: np.ndarray, space: TensorSpace | None = None) -> np.ndarray:
    """dA/dt in the Heisenberg picture for the same generator."""
    return _as_generator(hamiltonian, jumps, space).apply_adjoint(a)


def steady_state_nullspace(hamiltonian, jumps=None, space: TensorSpace | None = None) -> SteadyStateResult:
    """Steady state from the eigenvector of the superoperator closest to zero.

    Records how many eigenvalues fall below |lambda| < 1e-8 (kernel degeneracy
    diagnostic).  Raises TracelessKernelError when the selected null vector is
    traceless, signalling that the caller should fall back to time evolution.
    """
    gen = _as_generator(hamiltonian, jumps if jumps is not None else (), space)
    S = gen.superoperator()
    vals, vecs = np.linalg.eig(S)
    order = np.argsort(np.abs(vals))
    k = order[0]
    degeneracy = int(np.sum(np.abs(vals) < ZERO_EIGENVALUE_CUTOFF))
    D = gen.space.dim
    raw = vecs[:, k].reshape(D, D, order="F")
    raw = (raw + raw.conj().T) / 2.0
    tr = float(np.trace(raw).real)
    if abs(tr) < 1e-7 * max(frobenius_norm(raw), 1e-300):
        raise TracelessKernelError(
            f"null vector trace {tr:.2e} is numerically zero (degeneracy {degeneracy})")
    rho = raw / tr
    wmin = float(np.linalg.eigvalsh(rho).min())
    if wmin < DensityMatrix.POSITIVITY_TOL and degeneracy > 1:
        # degenerate kernels can hand back indefinite combinations; report as-is
        dm = DensityMatrix(rho, gen.space)
    else:
        dm = DensityMatrix.from_matrix(rho, gen.space)
    return SteadyStateResult(rho=dm, residual=gen.residual(rho), method="nullspace",
                             iterations=0, zero_eigen_degeneracy=degeneracy)


def _estimate_spectral_radius(gen: LindbladGenerator, iters: int = 20) -> float:
    """Power iteration on the generator (deterministic seed)."""
    D = gen.space.dim
    rng = np.random.default_rng(20260811)
    v = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
    v /= frobenius_norm(v)
    rad = 1.0
    for _ in range(iters):
        w = gen.apply(v)
        rad = frobenius_norm(w)
        if rad == 0.0:
            return 1.0
        v = w / rad
    return max(rad, 1e-12)


def _rk4_step(gen: LindbladGenerator, rho: np.ndarray, dt: float) -> np.ndarray:
    # all stage inputs stay Hermitian when rho is (the generator preserves it)
    k1 = gen.apply(rho, hermitian=True)
    k2 = gen.apply(rho + (dt / 2.0) * k1, hermitian=True)
    k3 = gen.apply(rho + (dt / 2.0) * k2, hermitian=True)
    k4 = gen.apply(rho + dt * k3, hermitian=True)
    return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _normalize(rho: np.ndarray) -> np.ndarray:
    rho = (rho + rho.conj().T) / 2.0
    return rho / np.trace(rho).real


def _geometric_extrapolation(trail: list[np.ndarray]) -> np.ndarray | None:
    """Aitken-style limit estimate from three equally spaced iterates.

    Valid once a single exponential mode dominates: successive differences
    are then parallel with a fixed ratio r < 1, and the limit is
    s2 + d2 r/(1-r).  Returns None while the differences are not geometric.
    """
    s0, s1, s2 = trail
    d1 = s1 - s0
    d2 = s2 - s1
    n1 = frobenius_norm(d1)
    n2 = frobenius_norm(d2)
    if n1 < 1e-300 or n2 < 1e-300:
        return None
    r = n2 / n1
    if not 0.02 < r < 0.97:
        return None
    align = abs(complex(np.vdot(d1, d2))) / (n1 * n2)
    if align < 0.95:
        return None
    return s2 + d2 * (r / (1.0 - r))


def steady_state_evolution(hamiltonian, jumps=None, rho0: DensityMatrix | np.ndarray | None = None,
                           opts: EvolveOptions | None = None,
                           space: TensorSpace | None = None) -> SteadyStateResult:
    """Integrate d rho/dt with RK4 until ||L(rho)||_F <= tol.

    The step starts at the stability estimate 2.5 / ||L|| (or opts.dt if
    smaller) and is halved whenever a Richardson probe or a growing residual
    signals error; it may be doubled back up to the stability cap.  The state
    is re-Hermitized and trace-renormalized after every step.  Raises
    NotConverged(t_max) carrying the last residual when t_max is reached.
    """
    gen = _as_generator(hamiltonian, jumps if jumps is not None else (), space)
    opts = opts or EvolveOptions()
    if rho0 is None:
        rho = DensityMatrix.maximally_mixed(gen.space).matrix.copy()
    elif isinstance(rho0, DensityMatrix):
        rho = rho0.matrix.astype(complex).copy()
    else:
        rho = np.asarray(rho0, dtype=complex).copy()

    rad = _estimate_spectral_radius(gen)
    dt_cap = 2.5 / rad
    dt = min(opts.dt, dt_cap) if opts.dt is not None else dt_cap
    check_every = 20
    t = 0.0
    steps = 0
    trail: list[np.ndarray] = []
    res_prev = math.inf
    residual = gen.residual(rho, hermitian=True)
    if residual <= opts.tol:
        return SteadyStateResult(DensityMatrix.from_matrix(rho, gen.space), residual,
                                 "evolution", 0)
    while t < opts.t_max:
        checkpoint, t0, steps0 = rho, t, steps
        # Richardson probe: one full step against two half steps
        full = _rk4_step(gen, rho, dt)
        half = _rk4_step(gen, _rk4_step(gen, rho, dt / 2.0), dt / 2.0)
        err = frobenius_norm(half - full) / 15.0
        scale = max(frobenius_norm(rho), 1e-300)
        if not np.isfinite(err) or err > 1e-6 * scale:
            dt /= 2.0
            if dt < 1e-12:
                raise NotConverged(opts.t_max, residual)
            continue
        rho = _normalize(half)
        t += dt
        steps += 2
        if err < 1e-10 * scale and 2.0 * dt <= dt_cap:
            dt *= 2.0
        for _ in range(check_every):
            if t >= opts.t_max:
                break
            rho = _normalize(_rk4_step(gen, rho, dt))
            t += dt
            steps += 1
        residual = gen.residual(rho, hermitian=True)
        if not np.isfinite(residual) or residual > 4.0 * res_prev:
            # window went unstable: rewind and halve the step
            rho, t, steps = checkpoint, t0, steps0
            trail.clear()
            dt /= 2.0
            if dt < 1e-12:
                raise NotConverged(opts.t_max, residual)
            continue
        if residual <= opts.tol:
            return SteadyStateResult(DensityMatrix.from_matrix(rho, gen.space), residual,
                                     "evolution", steps)
        if opts.accelerate:
            trail.append(rho)
            if len(trail) > 3:
                trail.pop(0)
            if len(trail) == 3:
                cand = _geometric_extrapolation(trail)
                if cand is not None:
                    cand = _normalize(cand)
                    r_cand = gen.residual(cand, hermitian=True)
                    if np.isfinite(r_cand) and r_cand < residual:
                        rho = cand
                        residual = r_cand
                        trail.clear()
                        if residual <= opts.tol:
                            return SteadyStateResult(
                                DensityMatrix.from_matrix(rho, gen.space),
                                residual, "evolution", steps)
        res_prev = residual
    raise NotConverged(opts.t_max, residual)


def steady_state(hamiltonian, jumps=None, space: TensorSpace | None = None,
                 method: str = "auto", opts: EvolveOptions | None = None,
                 rho0=None) -> SteadyStateResult:
    """Steady state with automatic method selection (nullspace for D <= 64)."""
    gen = _as_generator(hamiltonian, jumps if jumps is not None else (), space)
    if method not in ("auto", "nullspace", "evolution"):
        raise ValueError(f"unknown method {method!r}")
    if method == "nullspace" or (method == "auto" and gen.space.dim <= NULLSPACE_LIMIT):
        try:
            return steady_state_nullspace(gen)
        except TracelessKernelError:
            if method == "nullspace":
                raise
    return steady_state_evolution(gen, rho0=rho0, opts=opts)
