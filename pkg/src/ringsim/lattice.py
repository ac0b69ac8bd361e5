"""Model construction: Hamiltonians, jump operators, directionality coefficients.

Spin rings/chains with tunneling J = J0 e^{i phi / L}, pairing lam, chemical
potential mu, and optional uniform sigma^x / sigma^z sigma^z perturbations.
Truncated-boson variants (occupation cutoff n_max) mirror the spin model with
d / d^dag replacing sigma^- / sigma^+ and an on-site repulsion U n(n-1).

Dissipation: a local loss channel sqrt(kappa) sigma^-_j per site, plus one
engineered two-site channel per bond,

    f_j = alpha s^-_j + beta s^+_j + gamma s^-_{j+range} + delta s^+_{j+range},

with site-independent amplitudes.  The `minimal` flag enforces beta = conj(delta)
and gamma = conj(alpha) at construction.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .linalg import DimensionError, TensorSpace, embed_sites, kron

MAX_DIMENSION = 2 ** 20

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)   # |up><down|
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)  # |down><up|
NUMBER_SPIN = SIGMA_PLUS @ SIGMA_MINUS                           # diag(1, 0)


def boson_lowering(n_max: int) -> np.ndarray:
    """Truncated d with d|n> = sqrt(n)|n-1>, basis ordered by descending occupation."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    d = n_max + 1
    a = np.zeros((d, d), dtype=complex)
    for m in range(d - 1):
        a[m + 1, m] = math.sqrt(n_max - m)
    return a


def boson_number(n_max: int) -> np.ndarray:
    a = boson_lowering(n_max)
    return a.conj().T @ a


@dataclass(frozen=True)
class ModelSpec:
    """Lattice geometry: L sites on a ring (periodic) or open chain."""

    L: int
    boundary: Literal["periodic", "open"] = "periodic"
    kind: Literal["spin", "boson"] = "spin"
    n_max: int = 1

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("L must be >= 2")
        if self.boundary not in ("periodic", "open"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.kind not in ("spin", "boson"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == "boson" and self.n_max < 1:
            raise ValueError("boson kind needs n_max >= 1")
        if self.space().dim > MAX_DIMENSION:
            raise DimensionError(f"total dimension exceeds {MAX_DIMENSION}")

    def space(self) -> TensorSpace:
        d = 2 if self.kind == "spin" else self.n_max + 1
        return TensorSpace((d,) * self.L)

    def bonds(self, rng: int = 1) -> list[tuple[int, int]]:
        """0-based (j, j+rng) pairs; open boundary omits wrapping bonds."""
        if rng >= self.L:
            raise ValueError(f"bond range {rng} must be < L = {self.L}")
        if self.boundary == "periodic":
            return [(j, (j + rng) % self.L) for j in range(self.L)]
        return [(j, j + rng) for j in range(self.L - rng)]

    def lowering_op(self) -> np.ndarray:
        return SIGMA_MINUS if self.kind == "spin" else boson_lowering(self.n_max)

    def number_op(self) -> np.ndarray:
        return NUMBER_SPIN if self.kind == "spin" else boson_number(self.n_max)


@dataclass(frozen=True)
class HamiltonianParams:
    """Uniform couplings; the tunneling entering matrices is J = J0 e^{i phi/L}."""

    J0: float = 0.0
    phi: float = 0.0
    lam: complex = 0.0
    mu: float = 0.0
    U: float = 0.0
    eps_x: float = 0.0
    eps_zz: float = 0.0

    def __post_init__(self):
        if self.J0 < 0:
            raise ValueError("J0 must be >= 0")
        if self.U < 0:
            raise ValueError("U must be >= 0")

    def tunneling(self, L: int) -> complex:
        return self.J0 * cmath.exp(1j * self.phi / L)


@dataclass(frozen=True)
class DissipationSpec:
    """Local loss rate kappa plus correlated-bath amplitudes (units rate^(1/2))."""

    kappa: float = 0.0
    alpha: complex = 0.0
    beta: complex = 0.0
    gamma: complex = 0.0
    delta: complex = 0.0
    range: int = 1
    minimal: bool = False

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if self.range < 1:
            raise ValueError("range must be >= 1")
        if self.minimal:
            object.__setattr__(self, "beta", np.conj(self.delta))
            object.__setattr__(self, "gamma", np.conj(self.alpha))

    @classmethod
    def minimal_model(cls, alpha: complex, delta: complex, rng: int = 1) -> "DissipationSpec":
        return cls(alpha=alpha, delta=delta, range=rng, minimal=True)

    @property
    def has_bath(self) -> bool:
        return any(abs(x) > 0 for x in (self.alpha, self.beta, self.gamma, self.delta))


@dataclass(frozen=True)
class DirectionalityCoefficients:
    """Effective decay/coupling constants of the correlated bath."""

    Pi: float
    eta: complex
    xi: complex
    Gamma_plus: float
    Gamma_minus: float


def coeff_map(d: DissipationSpec) -> DirectionalityCoefficients:
    """Exact algebraic evaluation of Pi, eta, xi and the gain/loss rates.

    Pi     = (kappa + |alpha|^2 + |beta|^2 + |gamma|^2 + |delta|^2) / 2
    eta    = alpha gamma^* - delta beta^*
    xi     = alpha delta^* - gamma^* beta
    Gamma+ = |beta|^2 + |delta|^2      (incoherent gain)
    Gamma- = |alpha|^2 + |gamma|^2     (incoherent loss, excluding kappa)
    """
    a, b, g, dd = d.alpha, d.beta, d.gamma, d.delta
    return DirectionalityCoefficients(
        Pi=(d.kappa + abs(a) ** 2 + abs(b) ** 2 + abs(g) ** 2 + abs(dd) ** 2) / 2.0,
        eta=a * np.conj(g) - dd * np.conj(b),
        xi=a * np.conj(dd) - np.conj(g) * b,
        Gamma_plus=abs(b) ** 2 + abs(dd) ** 2,
        Gamma_minus=abs(a) ** 2 + abs(g) ** 2,
    )


def pairing_coefficient(d: DissipationSpec) -> complex:
    """Pairing-current coupling entering the magnetization equation of motion.

    This is alpha delta^* - gamma beta^*; it differs from `coeff_map(...).xi`
    by the conjugation on gamma.  The operator-identity test in the suite
    determines that this is the combination for which the equation of motion
    closes exactly (see observables.magnetization_eom_residual).
    """
    return d.alpha * np.conj(d.delta) - d.gamma * np.conj(d.beta)


@dataclass(frozen=True)
class SiteTerm:
    """A few-site operator: `matrix` acts on `sites` (listed order), identity elsewhere."""

    sites: tuple[int, ...]
    matrix: np.ndarray

    def embedded(self, space: TensorSpace) -> np.ndarray:
        return embed_sites(self.matrix, self.sites, space)


def _sorted_bond_term(j: int, k: int, op_jk: np.ndarray, d: int) -> SiteTerm:
    """Store a two-site term with ascending sites (swap tensor factors if needed)."""
    if j < k:
        return SiteTerm((j, k), op_jk)
    swapped = op_jk.reshape(d, d, d, d).transpose(1, 0, 3, 2).reshape(d * d, d * d)
    return SiteTerm((k, j), swapped)


def hamiltonian_terms(m: ModelSpec, p: HamiltonianParams) -> list[SiteTerm]:
    """Hamiltonian as a list of 1- and 2-site Hermitian terms."""
    if m.kind == "boson" and (p.eps_x != 0 or p.eps_zz != 0):
        raise ValueError("eps_x / eps_zz perturbations are defined for the spin model only")
    low = m.lowering_op()
    raise_ = low.conj().T
    num = m.number_op()
    d = low.shape[0]
    J = p.tunneling(m.L)
    terms: list[SiteTerm] = []

    hop = J * kron(raise_, low) + np.conj(J) * kron(low, raise_)
    pair = p.lam * kron(raise_, raise_) + np.conj(p.lam) * kron(low, low)
    two = hop + pair
    if p.eps_zz != 0:
        two = two + p.eps_zz * kron(SIGMA_Z, SIGMA_Z)
    if np.abs(two).max() > 0:
        for (j, k) in m.bonds():
            terms.append(_sorted_bond_term(j, k, two, d))

    one = p.mu * num
    if m.kind == "boson" and p.U != 0:
        one = one + p.U * (num @ num - num)
    if p.eps_x != 0:
        one = one + p.eps_x * SIGMA_X
    if np.abs(one).max() > 0:
        for j in range(m.L):
            terms.append(SiteTerm((j,), one.copy()))
    return terms


def build_hamiltonian(m: ModelSpec, p: HamiltonianParams) -> np.ndarray:
    """Dense Hamiltonian on the full tensor-product space."""
    space = m.space()
    H = np.zeros((space.dim, space.dim), dtype=complex)
    for term in hamiltonian_terms(m, p):
        H += term.embedded(space)
    return H


def jump_terms(m: ModelSpec, d: DissipationSpec) -> list[SiteTerm]:
    """Jump operators as local terms: local loss first, then the bond channels."""
    low = m.lowering_op()
    raise_ = low.conj().T
    dloc = low.shape[0]
    terms: list[SiteTerm] = []
    if d.kappa > 0:
        root = math.sqrt(d.kappa)
        for j in range(m.L):
            terms.append(SiteTerm((j,), root * low))
    if d.has_bath:
        ident = np.eye(dloc, dtype=complex)
        op = (d.alpha * kron(low, ident) + d.beta * kron(raise_, ident)
              + d.gamma * kron(ident, low) + d.delta * kron(ident, raise_))
        for (j, k) in m.bonds(d.range):
            terms.append(_sorted_bond_term(j, k, op, dloc))
    return terms


def build_jump_ops(m: ModelSpec, d: DissipationSpec) -> list[np.ndarray]:
    """Dense jump operators (one per site for kappa > 0, one per bond for the bath)."""
    space = m.space()
    return [t.embedded(space) for t in jump_terms(m, d)]


def check_directional(p: HamiltonianParams, d: DissipationSpec, L: int | None = None,
                      tol: float = 1e-12):
    """Check the directional tuning eta = 2iJ and xi = 2i lam.

    Returns (is_directional, |eta - 2iJ|, |xi - 2i lam|).  The complex J
    depends on L through the flux phase; L may be omitted when phi = 0.
    """
    if p.phi != 0.0 and L is None:
        raise ValueError("L is required to evaluate J = J0 exp(i phi / L) at nonzero phi")
    J = p.tunneling(L) if L is not None else complex(p.J0)
    c = coeff_map(d)
    res_eta = abs(c.eta - 2j * J)
    res_xi = abs(c.xi - 2j * complex(p.lam))
    return (res_eta <= tol and res_xi <= tol), float(res_eta), float(res_xi)


def with_polar(d: DissipationSpec, r: float, theta: float) -> DissipationSpec:
    """Minimal-model amplitudes from the polar parametrization (alpha, delta) = r (cos, sin)."""
    return replace(d, alpha=r * math.cos(theta), delta=r * math.sin(theta),
                   beta=r * math.sin(theta), gamma=r * math.cos(theta))
