"""Disordered waveguide-QED spin-model simulator.

Effective spin models for chains of two-level atoms coupled through a
one-dimensional waveguide, with excitation-restricted exact dynamics
(closed, Lindblad and quantum-jump), Anderson transfer-matrix statistics,
eigenmode analysis, transport/entanglement observables and the ancilla
quantum-revival experiment. See README.md for the CLI and file formats.
"""

__version__ = "0.1.0"

from .basis import (
    DensityMatrix,
    RestrictedBasis,
    StateVector,
    apply_lowering,
    apply_transfer,
    build_basis,
    prepare_product,
    prepare_random_phase_superposition,
)
from .config import ExperimentConfig, load_config, preset_library
from .dynamics import (
    PropagationConfig,
    TrajectoryRecord,
    evolve_closed,
    evolve_effective,
    master_equation_evolve,
    quantum_jump_trajectory,
)
from .errors import CapacityError, ConfigError, DomainError, NumericalError
from .model import (
    AncillaSpec,
    DisorderSpec,
    Geometry,
    ModelMatrices,
    WaveguideVariant,
    attach_ancilla,
    build_model,
    jump_decomposition,
    sample_positions,
    sector_hamiltonian,
)
from .observables import (
    ancilla_population,
    half_chain_entropy,
    half_imbalance,
    memory_parameter,
    site_populations,
    total_population,
)
from .revival import (
    RevivalConfig,
    count_revivals,
    interacting_dof,
    revival_experiment,
    revival_rate_ensemble,
)
from .scattering import (
    anderson_statistics,
    chain_transmittance,
    n_loc_linear,
    n_loc_saturated,
    single_atom_rt,
    steady_state_bloch,
)
from .spectral import (
    delocalized_fraction,
    disorder_averaged_spectrum,
    mode_profile_map,
    overlap_matrix,
    participation_ratio,
    single_excitation_modes,
)
