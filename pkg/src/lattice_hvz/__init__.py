"""Essential spectra of lattice N-particle Schrödinger fiber operators."""

__version__ = "0.1.0"

from .clusters import (ClusterDecomposition, enumerate_partitions, is_refinement, pair_split,
                       two_cluster_decompositions)
from .model import (DispersionFunction, ModelError, ModelSpec, OffGridError, PairPotential, TorusGrid,
                    contact_potential, exponential_tail_potential, load_model, model_from_dict,
                    model_l1, model_l2, model_to_dict, nearest_neighbor_dispersion, save_model,
                    symbol_eval, validate_model)
from .operators import (HermitianOperator, build_cluster_fiber, build_fiber_coordinate,
                        build_fiber_momentum, build_subsystem)
from .spectra import (BandStructure, GridParams, SpectrumSet, band_structure, classify_levels,
                      cluster_samples, cluster_spectrum, default_merge_eps, discrete_spectrum, hvz_spectrum,
                      minkowski_sum, multi_cluster_union, spectrum_from_samples)
from .verify import (BoxTooSmallError, CutoffSpec, commutator_bound_check, cutoff_rho,
                     potential_cutoff_check, weyl_transplant)
from .wvw import (FiberContext, WvWGraph, WvWString, assemble, assemble_D, assemble_I, check_wvw_identity,
                  cluster_of_graph, commutant_check, enumerate_strings, is_connected,
                  string_census, string_of_graph, term_matrix)
