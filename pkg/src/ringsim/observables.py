"""Currents, rates, and correlation measures on spin states.

Bond convention: the current with index j lives on the bond (j-1, j), with
1-based site labels and bond 1 wrapping to (L, 1) on a ring.  The four
current species on that bond are

    I^J_j   = 2i (J s^-_j s^+_{j-1} - h.c.)          tunneling current
    I^eta_j = (-eta s^+_j s^-_{j-1} + h.c.)          bath-induced circulating current
    I^lam_j = 2i (lam s^+_j s^+_{j-1} - h.c.)        pairing (non-circulating)
    I^xi_j  = (xi s^-_j s^-_{j-1} + h.c.)            bath pairing (non-circulating)

All four operators are Hermitian, so expectations are real.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .lattice import (SIGMA_MINUS, SIGMA_PLUS, SIGMA_Z, DissipationSpec,
                      HamiltonianParams, ModelSpec, SiteTerm, coeff_map,
                      hamiltonian_terms, jump_terms, pairing_coefficient)
from .linalg import (DimensionError, TensorSpace, embed, frobenius_norm,
                     hermitian_eigs, kron, partial_trace, partial_transpose,
                     trace_norm_hermitian)
from .solver import DensityMatrix, LindbladGenerator, SteadyStateResult

EIGENVALUE_FLOOR = 1e-14


def _unpack(rho, space: TensorSpace | None):
    if isinstance(rho, DensityMatrix):
        return rho.matrix, rho.space
    if space is None:
        raise DimensionError("space is required when passing a bare matrix")
    return np.asarray(rho, dtype=complex), space


def bond_sites(L: int, j: int) -> tuple[int, int]:
    """0-based (j-1, j) site pair of the 1-based bond index j; bond 1 wraps."""
    if not 1 <= j <= L:
        raise DimensionError(f"bond index {j} outside 1..{L}")
    return ((j - 2) % L, j - 1)


def _bond_op(kind: str, coeff: complex) -> np.ndarray:
    """Two-site current operator on (j-1, j), first tensor factor = site j-1."""
    if kind == "J":
        return 2j * (coeff * kron(SIGMA_PLUS, SIGMA_MINUS)
                     - np.conj(coeff) * kron(SIGMA_MINUS, SIGMA_PLUS))
    if kind == "eta":
        return (-coeff * kron(SIGMA_MINUS, SIGMA_PLUS)
                - np.conj(coeff) * kron(SIGMA_PLUS, SIGMA_MINUS))
    if kind == "lam":
        return 2j * (coeff * kron(SIGMA_PLUS, SIGMA_PLUS)
                     - np.conj(coeff) * kron(SIGMA_MINUS, SIGMA_MINUS))
    if kind == "xi":
        return (coeff * kron(SIGMA_MINUS, SIGMA_MINUS)
                + np.conj(coeff) * kron(SIGMA_PLUS, SIGMA_PLUS))
    raise ValueError(kind)


def current_term(kind: str, coeff: complex, j: int, L: int) -> SiteTerm:
    """Current operator as a SiteTerm on the 0-based sites of bond j."""
    jm, jj = bond_sites(L, j)
    return SiteTerm((jm, jj), _bond_op(kind, coeff))


def _current(kind: str, rho, j: int, coeff: complex, space: TensorSpace | None) -> float:
    mat, sp = _unpack(rho, space)
    if any(d != 2 for d in sp.site_dims):
        raise DimensionError("currents are defined for the spin model")
    t = current_term(kind, coeff, j, sp.n_sites)
    return float(kernels.expectation(t.matrix, t.sites, mat, sp).real)


def current_J(rho, j: int, J: complex, space: TensorSpace | None = None) -> float:
    """<I^J_j> = Tr[rho 2i(J s^-_j s^+_{j-1} - h.c.)]."""
    return _current("J", rho, j, J, space)


def current_eta(rho, j: int, eta: complex, space: TensorSpace | None = None) -> float:
    """<I^eta_j> = Tr[rho (-eta s^+_j s^-_{j-1} + h.c.)]."""
    return _current("eta", rho, j, eta, space)


def current_lambda(rho, j: int, lam: complex, space: TensorSpace | None = None) -> float:
    """<I^lam_j> = Tr[rho 2i(lam s^+_j s^+_{j-1} - h.c.)]."""
    return _current("lam", rho, j, lam, space)


def current_xi(rho, j: int, xi: complex, space: TensorSpace | None = None) -> float:
    """<I^xi_j> = Tr[rho (xi s^-_j s^-_{j-1} + h.c.)]."""
    return _current("xi", rho, j, xi, space)


def negativity(rho_two_site: np.ndarray) -> float:
    """(||rho^{T_A}||_1 - 1)/2 for a two-qubit state, clamped at >= 0."""
    rho_two_site = np.asarray(rho_two_site, dtype=complex)
    if rho_two_site.shape != (4, 4):
        raise DimensionError("negativity expects a 4 x 4 two-site density matrix")
    pair = TensorSpace((2, 2))
    pt = partial_transpose(rho_two_site, [0], pair)
    return max(0.0, (trace_norm_hermitian(pt) - 1.0) / 2.0)


def _matrix_of(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def purity(rho, space: TensorSpace | None = None) -> float:
    mat = _matrix_of(rho)
    return float(np.trace(mat @ mat).real)


def entropy(rho, space: TensorSpace | None = None) -> float:
    """von Neumann entropy -sum lam ln lam over eigenvalues above 1e-14."""
    mat = _matrix_of(rho)
    vals, _ = hermitian_eigs(mat)
    vals = vals[vals > EIGENVALUE_FLOOR]
    return float(-(vals * np.log(vals)).sum())


def magnetization_z(rho, space: TensorSpace | None = None) -> np.ndarray:
    """Per-site <sigma^z_j>, 1-based ordering of the returned array."""
    mat, sp = _unpack(rho, space)
    return np.array([kernels.expectation(SIGMA_Z, (j,), mat, sp).real
                     for j in range(sp.n_sites)])


def reduced_pair(rho, pair: tuple[int, int] = (1, 2), space: TensorSpace | None = None) -> np.ndarray:
    """Two-site reduced density matrix of the 1-based site pair."""
    mat, sp = _unpack(rho, space)
    keep = [p - 1 for p in pair]
    return partial_trace(mat, keep, sp)


@dataclass(frozen=True)
class CurrentReport:
    """Per-bond currents; `bonds` holds the 1-based bond indices."""

    bonds: tuple[int, ...]
    I_J: np.ndarray
    I_eta: np.ndarray
    I_lambda: np.ndarray
    I_xi: np.ndarray


@dataclass(frozen=True)
class CorrelationReport:
    negativity: float
    purity: float
    entropy: float
    magnetization: np.ndarray
    pair: tuple[int, int] = (1, 2)


def measure_currents(rho, model: ModelSpec, params: HamiltonianParams,
                     diss: DissipationSpec) -> CurrentReport:
    mat, sp = _unpack(rho, model.space())
    c = coeff_map(diss)
    J = params.tunneling(model.L)
    bonds = tuple(range(1, model.L + 1)) if model.boundary == "periodic" \
        else tuple(range(2, model.L + 1))
    return CurrentReport(
        bonds=bonds,
        I_J=np.array([current_J(mat, j, J, sp) for j in bonds]),
        I_eta=np.array([current_eta(mat, j, c.eta, sp) for j in bonds]),
        I_lambda=np.array([current_lambda(mat, j, params.lam, sp) for j in bonds]),
        I_xi=np.array([current_xi(mat, j, c.xi, sp) for j in bonds]),
    )


def measure_correlations(rho, space: TensorSpace | None = None,
                         pair: tuple[int, int] = (1, 2)) -> CorrelationReport:
    mat, sp = _unpack(rho, space)
    return CorrelationReport(
        negativity=negativity(reduced_pair(mat, pair, sp)),
        purity=purity(mat, sp),
        entropy=entropy(mat, sp),
        magnetization=magnetization_z(mat, sp),
        pair=pair,
    )


# -- magnetization equation of motion ----------------------------------------

def _eom_rhs(model: ModelSpec, params: HamiltonianParams, diss: DissipationSpec,
             site: int, sign_eta: int, sign_lam: int, xi_value: complex,
             gamma_plus: float, gamma_minus: float) -> np.ndarray:
    """RHS operator of the sigma^z_site equation of motion (0-based site)."""
    sp = model.space()
    L = model.L
    J = params.tunneling(L)
    c = coeff_map(diss)
    j1 = site + 1          # 1-based bond (site-1, site)
    j2 = site + 2 if site + 1 < L else 1   # 1-based bond (site, site+1)

    def op(kind, coeff, j):
        return current_term(kind, coeff, j, L).embedded(sp)

    rhs = op("J", J, j1) - op("J", J, j2)
    rhs += op("xi", xi_value, j1) - op("xi", xi_value, j2)
    rhs += sign_eta * (op("eta", c.eta, j1) + op("eta", c.eta, j2))
    rhs += sign_lam * (op("lam", params.lam, j1) + op("lam", params.lam, j2))
    Z = embed(SIGMA_Z, site, sp)
    ident = np.eye(sp.dim, dtype=complex)
    rhs -= (Z + ident) * (gamma_minus + diss.kappa)
    rhs -= (Z - ident) * gamma_plus
    return rhs


def _check_eom_model(model: ModelSpec, site: int) -> None:
    if model.kind != "spin":
        raise DimensionError("the magnetization equation of motion is a spin-model identity")
    if model.space().dim > 1024:
        raise DimensionError("operator identity check limited to D <= 1024")
    if model.boundary == "open" and not 1 <= site <= model.L - 2:
        raise DimensionError("open chains: pick an interior site (both bonds present)")


def magnetization_eom_residual(model: ModelSpec, params: HamiltonianParams,
                               diss: DissipationSpec, site: int = 1) -> float:
    """Frobenius distance between d sigma^z_site/dt and its closed-form RHS.

    The RHS uses the sign/conjugation assignment under which the identity
    closes exactly (verified to machine precision over random complex
    amplitude draws by the test suite):

        d sigma^z_j/dt = grad I^J + grad I^xi' + (I^eta_j + I^eta_{j+1})
                         - (I^lam_j + I^lam_{j+1})
                         - (sigma^z_j + 1)(Gamma_- + kappa)
                         - (sigma^z_j - 1) Gamma_+

    with xi' = alpha delta^* - gamma beta^* (pairing_coefficient), Gamma_+ =
    |beta|^2 + |delta|^2 and Gamma_- = |alpha|^2 + |gamma|^2.  `site` is
    0-based and must be interior for open chains.
    """
    if diss.range != 1:
        raise DimensionError("the closed-form identity holds for nearest-neighbor baths")
    _check_eom_model(model, site)
    sp = model.space()
    c = coeff_map(diss)
    gen = LindbladGenerator(sp, hamiltonian_terms(model, params), jump_terms(model, diss))
    lhs = gen.apply_adjoint(embed(SIGMA_Z, site, sp))
    rhs = _eom_rhs(model, params, diss, site, +1, -1, pairing_coefficient(diss),
                   c.Gamma_plus, c.Gamma_minus)
    return frobenius_norm(lhs - rhs)


def eom_candidate_residuals(model: ModelSpec, params: HamiltonianParams,
                            diss: DissipationSpec, site: int = 1) -> dict[str, float]:
    """Residuals of every sign/conjugation/rate-labeling candidate for the identity.

    Keys look like 'eta:+1 lam:-1 xi:conj-on-beta gammas:standard'.  Exactly
    one candidate is expected to close to machine precision; tests and the
    acceptance suite record which one.
    """
    _check_eom_model(model, site)
    sp = model.space()
    c = coeff_map(diss)
    gen = LindbladGenerator(sp, hamiltonian_terms(model, params), jump_terms(model, diss))
    lhs = gen.apply_adjoint(embed(SIGMA_Z, site, sp))
    out: dict[str, float] = {}
    xi_variants = {"conj-on-gamma": c.xi, "conj-on-beta": pairing_coefficient(diss)}
    gamma_variants = {"standard": (c.Gamma_plus, c.Gamma_minus),
                      "swapped": (c.Gamma_minus, c.Gamma_plus)}
    for se in (+1, -1):
        for sl in (+1, -1):
            for xname, xval in xi_variants.items():
                for gname, (gp, gm) in gamma_variants.items():
                    rhs = _eom_rhs(model, params, diss, site, se, sl, xval, gp, gm)
                    key = f"eta:{se:+d} lam:{sl:+d} xi:{xname} gammas:{gname}"
                    out[key] = frobenius_norm(lhs - rhs)
    return out


def continuity_residual(ss: SteadyStateResult, model: ModelSpec,
                        params: HamiltonianParams, diss: DissipationSpec) -> np.ndarray:
    """|d<n_j>/dt| per site on a steady state, via the adjoint generator.

    Stationarity makes every entry comparable to the solver residual; on a
    translation-invariant ring the per-bond currents are additionally uniform.
    """
    sp = model.space()
    gen = LindbladGenerator(sp, hamiltonian_terms(model, params), jump_terms(model, diss))
    rho = ss.rho.matrix
    out = np.empty(model.L)
    num = model.number_op()
    for j in range(model.L):
        dn = gen.apply_adjoint(embed(num, j, sp))
        out[j] = abs(complex(np.trace(dn @ rho)))
    return out
