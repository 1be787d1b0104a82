"""Adiabatic response of gapped lattice fermions: exact-diagonalization toolkit.

Lattices and fermionic Fock spaces, interactions with weighted norms, the
inverse Liouvillian built from a band-limited weight, quasi-local conditional
expectations, time evolution with Lieb-Robinson diagnostics, and order-n
dressed ground states for slowly driven Hamiltonians.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .dynamics import (FrozenHamiltonian, HamiltonianFamily, Propagator, evolve_state, heisenberg,
                       lieb_robinson_velocity, lr_commutator_scan, propagate, volume_convergence)
from .fock import (DensityState, FockSpace, LocalOperator, ParityError, annihilation, creation, embed,
                   ground_state, number_operator, op_norm)
from .interactions import (Interaction, InteractionFamily, LipschitzPotential, WeightProfile,
                           bulk_norm, interaction_norm, lipschitz_commutator_bound, rapid_tdl_report)
from .lattice import DomainError, Lattice, SiteSet, fatten
from .liouvillian import (GapError, SpectralLiouvillian, WeightFunction, build_weight,
                          inverse_liouvillian_quadrature, inverse_liouvillian_spectral)
from .models import Ramp, Schedule, chain_model
from .neass import (NeassBundle, OperatorSeries, adiabatic_defect, build_A1, build_bundle,
                    conjugation_series)
from .quasilocality import (DecayFunction, LocalizationProfile, conditional_expectation,
                            cone_decomposition, f_norm, localization_profile)
