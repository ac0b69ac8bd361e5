"""Dissipative ring-lattice simulator: engineered-bath persistent currents.

Builds spin-1/2 and truncated-boson ring/chain models with correlated two-site
dissipation, solves Lindblad steady states (dense null space or matrix-free
time evolution), measures currents and quantum correlations, and provides the
two-site cluster mean-field and closed-system free-fermion baselines, plus a
scenario CLI with deterministic CSV/SVG output.
"""

from .cmf import (AnalyticXState, CmfNotConverged, CmfOptions, CmfResult,
                  DegenerateDenominator, NonPositiveIterate, analytic_current,
                  analytic_state, cmf_fixed_point)
from .groundstate import (DispersionResult, DispersionSpectrum, GroundStateResult,
                          dispersion_current, dispersion_energy, ground_state_ed)
from .lattice import (DirectionalityCoefficients, DissipationSpec, HamiltonianParams,
                      ModelSpec, SiteTerm, build_hamiltonian, build_jump_ops,
                      check_directional, coeff_map, hamiltonian_terms, jump_terms,
                      pairing_coefficient, with_polar)
from .linalg import (TensorSpace, embed, embed_sites, hermitian_eigs, kron,
                     partial_trace, partial_transpose, trace_norm_hermitian)
from .observables import (CorrelationReport, CurrentReport, continuity_residual,
                          current_J, current_eta, current_lambda, current_xi,
                          eom_candidate_residuals, magnetization_eom_residual,
                          magnetization_z, measure_correlations, measure_currents,
                          negativity, purity, entropy, reduced_pair)
from .solver import (DensityMatrix, EvolveOptions, LindbladGenerator, NotConverged,
                     SteadyStateResult, TracelessKernelError, apply_adjoint,
                     apply_liouvillian, default_evolve_options, steady_state,
                     steady_state_evolution, steady_state_nullspace)
from .experiments import (ConfigError, ResultRow, RunReport, ScenarioConfig,
                          SolverConfig, SweepAxis, load_preset, preset_registry,
                          run_scenario, solve_steady_point, sweep, write_csv)

__version__ = "0.1.0"
