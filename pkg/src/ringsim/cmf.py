"""Two-site cluster mean-field fixed point for the minimal dissipative model.

The chain is tiled by two-site clusters; every generator term touching the
center cluster is kept, with the neighbor clusters frozen to the current
iterate (their single-site marginals are all that enters).  The projected
generator

    d rho_C / dt = Tr_env[ L(rho_env x rho_C x rho_env) ]

is linear and trace-preserving in rho_C for a frozen environment, so each
outer iteration solves a 4 x 4 steady state by dense null space and blends it
into the iterate.  Complete positivity of the projection is not guaranteed;
positivity of iterates is monitored, not assumed.

A closed-form X-structured candidate state and current are provided
verbatim (`analytic_state`, `analytic_current`); the numeric fixed point is
the oracle where the two disagree, and the test suite records the measured
relation between them (they match up to an overall factor -1/2 at weak
coupling and drift apart at strong coupling).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import (SIGMA_MINUS, SIGMA_PLUS, DissipationSpec,
                      HamiltonianParams, NUMBER_SPIN, coeff_map)
from .linalg import TensorSpace, embed, frobenius_norm, partial_trace
from .observables import current_eta
from .solver import DensityMatrix

CLUSTER_SPACE = TensorSpace((2, 2))


class DegenerateDenominator(ZeroDivisionError):
    """The closed-form current denominator vanishes (e.g. alpha = delta = 0)."""


class CmfNotConverged(RuntimeError):
    def __init__(self, iterations: int, residual: float, rho: np.ndarray):
        super().__init__(f"no fixed point after {iterations} iterations "
                         f"(last update distance {residual:.3e})")
        self.iterations = iterations
        self.residual = residual
        self.rho = rho


class NonPositiveIterate(RuntimeError):
    def __init__(self, iteration: int, min_eigenvalue: float, rho: np.ndarray):
        super().__init__(f"iterate {iteration} lost positivity "
                         f"(min eigenvalue {min_eigenvalue:.3e})")
        self.iteration = iteration
        self.min_eigenvalue = min_eigenvalue
        self.rho = rho


@dataclass(frozen=True)
class CmfOptions:
    mixing: float = 0.5
    tol: float = 1e-12
    max_iter: int = 5000

    def __post_init__(self):
        if not 0.0 < self.mixing <= 1.0:
            raise ValueError("mixing must lie in (0, 1]")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter >= 1")


@dataclass(frozen=True)
class AnalyticXState:
    """Closed-form X-structure entries, evaluated verbatim."""

    Z: float
    rho11: float
    rho22: float
    rho44: float
    rho23: float
    rho14: complex
    alpha: float
    delta: float
    mu: float

    def matrix_unnormalized(self) -> np.ndarray:
        return np.array([
            [self.rho11, 0, 0, self.rho14],
            [0, self.rho22, self.rho23, 0],
            [0, np.conj(self.rho23), self.rho22, 0],
            [np.conj(self.rho14), 0, 0, self.rho44]], dtype=complex)

    def trace_unnormalized(self) -> float:
        return self.rho11 + 2.0 * self.rho22 + self.rho44

    def z_consistency(self) -> float:
        """|Z - (rho11 + 2 rho22 + rho44)| / Z, the normalization mismatch."""
        return abs(self.Z - self.trace_unnormalized()) / abs(self.Z)

    def normalized(self) -> np.ndarray:
        """Unit-trace state (normalized by the actual trace, not by Z)."""
        return self.matrix_unnormalized() / self.trace_unnormalized()


@dataclass(frozen=True)
class CmfResult:
    rho: DensityMatrix
    current: float
    iterations: int
    converged: bool
    fixed_point_residual: float


def analytic_current(alpha: float, delta: float, mu: float) -> float:
    """Closed-form circulating current of the two-site ansatz.

    4 a^2 d^2 (d^2 - a^2)^3 / [ (a^2 - d^2)^2 (a^4 + d^4 + 3 a^2 d^2)
                                + mu^2 (a^2 + d^2)^2 ]
    """
    a2, d2 = float(alpha) ** 2, float(delta) ** 2
    den = (a2 - d2) ** 2 * (a2 ** 2 + d2 ** 2 + 3 * a2 * d2) + mu ** 2 * (a2 + d2) ** 2
    if den == 0.0:
        raise DegenerateDenominator("current denominator vanishes")
    return 4.0 * a2 * d2 * (d2 - a2) ** 3 / den


def analytic_state(alpha: float, delta: float, mu: float) -> AnalyticXState:
    """Closed-form X-structure steady-state entries (see module docstring)."""
    a2, d2 = float(alpha) ** 2, float(delta) ** 2
    Z = (a2 - d2) ** 2 * (a2 ** 2 + d2 ** 2 + 3 * a2 * d2) + mu ** 2 * (a2 + d2) ** 2
    if Z == 0.0:
        raise DegenerateDenominator("Z vanishes")
    return AnalyticXState(
        Z=Z,
        rho11=0.25 * d2 * ((4 * d2 + a2) * (a2 - d2) ** 2 + 4 * d2 * mu ** 2),
        rho22=0.25 * a2 * (a2 * d2 * (5 * (a2 - d2) + 4 * mu ** 2)),
        rho44=0.25 * a2 * ((4 * a2 + d2) * (a2 - d2) ** 2 + 4 * a2 * mu ** 2),
        rho23=a2 * d2 * (a2 - d2) ** 2,
        rho14=0.5 * (a2 + d2 + 1j * mu) * (d2 - a2) * alpha * delta,
        alpha=float(alpha), delta=float(delta), mu=float(mu),
    )


def _dissipator(O: np.ndarray, rho: np.ndarray) -> np.ndarray:
    Od = O.conj().T
    return O @ rho @ Od - 0.5 * (Od @ O @ rho + rho @ Od @ O)


def _vec(m: np.ndarray) -> np.ndarray:
    return m.reshape(-1, order="F")


def _basis_matrix(k: int, d: int) -> np.ndarray:
    E = np.zeros((d, d), dtype=complex)
    E[k % d, k // d] = 1.0
    return E


class _ProjectedGenerator:
    """Frozen-environment cluster generator, bilinear in (env marginal, rho_C)."""

    def __init__(self, diss: DissipationSpec, mu: float):
        a, b, g, dd = diss.alpha, diss.beta, diss.gamma, diss.delta
        pair = CLUSTER_SPACE
        triple = TensorSpace((2, 2, 2))

        def f_on(space: TensorSpace, lo: int, hi: int) -> np.ndarray:
            return (a * embed(SIGMA_MINUS, lo, space) + b * embed(SIGMA_PLUS, lo, space)
                    + g * embed(SIGMA_MINUS, hi, space) + dd * embed(SIGMA_PLUS, hi, space))

        h_c = mu * (embed(NUMBER_SPIN, 0, pair) + embed(NUMBER_SPIN, 1, pair))
        f_intra = f_on(pair, 0, 1)
        f_left = f_on(triple, 0, 1)    # (env site, c1)
        f_right = f_on(triple, 1, 2)   # (c2, env site)

        S_fixed = np.zeros((16, 16), dtype=complex)
        K_left = np.zeros((2, 2, 16, 16), dtype=complex)
        K_right = np.zeros((2, 2, 16, 16), dtype=complex)
        for k in range(16):
            E = _basis_matrix(k, 4)
            S_fixed[:, k] = _vec(-1j * (h_c @ E - E @ h_c) + _dissipator(f_intra, E))
            for ab in range(4):
                M = _basis_matrix(ab, 2)
                left = partial_trace(_dissipator(f_left, np.kron(M, E)), [1, 2], triple)
                right = partial_trace(_dissipator(f_right, np.kron(E, M)), [0, 1], triple)
                K_left[ab % 2, ab // 2, :, k] = _vec(left)
                K_right[ab % 2, ab // 2, :, k] = _vec(right)
        self._S_fixed = S_fixed
        self._K_left = K_left
        self._K_right = K_right

    def matrix(self, rho_env: np.ndarray) -> np.ndarray:
        """16 x 16 generator for the given frozen environment cluster state."""
        m_left = partial_trace(rho_env, [1], CLUSTER_SPACE)   # site facing the cluster
        m_right = partial_trace(rho_env, [0], CLUSTER_SPACE)
        return (self._S_fixed
                + np.einsum("ab,abxy->xy", m_left, self._K_left)
                + np.einsum("ab,abxy->xy", m_right, self._K_right))


def cmf_generator_matrix(diss: DissipationSpec, mu: float, rho_env: np.ndarray) -> np.ndarray:
    """Projected-generator matrix for tests and diagnostics (column-stacking)."""
    return _ProjectedGenerator(diss, mu).matrix(np.asarray(rho_env, dtype=complex))


def _trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh(a - b)).sum())


def _validate_minimal(params: HamiltonianParams, diss: DissipationSpec) -> None:
    if diss.range != 1:
        raise ValueError("cluster mean field is defined for nearest-neighbor dissipation")
    if params.J0 != 0 or params.lam != 0 or params.eps_x != 0 or params.eps_zz != 0:
        raise ValueError("cluster mean field covers the chemical-potential-only Hamiltonian")


def cmf_fixed_point(params: HamiltonianParams, diss: DissipationSpec,
                    opts: CmfOptions | None = None) -> CmfResult:
    """Self-consistent two-site fixed point, damped iteration from I/4.

    Each outer iteration solves the frozen-environment 4 x 4 steady state by
    dense null space and blends it in with the mixing weight; convergence is
    declared when the trace distance between successive iterates drops below
    opts.tol.  Raises CmfNotConverged or NonPositiveIterate on failure.
    """
    _validate_minimal(params, diss)
    opts = opts or CmfOptions()
    gen = _ProjectedGenerator(diss, params.mu)
    rho = np.eye(4, dtype=complex) / 4.0
    dist = np.inf
    for it in range(1, opts.max_iter + 1):
        S = gen.matrix(rho)
        vals, vecs = np.linalg.eig(S)
        cand = vecs[:, int(np.argmin(np.abs(vals)))].reshape(4, 4, order="F")
        cand = (cand + cand.conj().T) / 2.0
        tr = float(np.trace(cand).real)
        if abs(tr) < 1e-12:
            raise CmfNotConverged(it, float("nan"), rho)
        cand /= tr
        new = (1.0 - opts.mixing) * rho + opts.mixing * cand
        dist = _trace_distance(new, rho)
        rho = new
        wmin = float(np.linalg.eigvalsh(rho).min())
        if wmin < -1e-6:
            raise NonPositiveIterate(it, wmin, rho)
        if dist < opts.tol:
            residual = frobenius_norm(gen.matrix(rho) @ _vec(rho))
            eta = coeff_map(diss).eta
            cur = current_eta(rho, 2, eta, CLUSTER_SPACE)
            dm = DensityMatrix.from_matrix(rho, CLUSTER_SPACE, validate=False)
            return CmfResult(rho=dm, current=cur, iterations=it, converged=True,
                             fixed_point_residual=residual)
    raise CmfNotConverged(opts.max_iter, dist, rho)
