"""Perturbation determinants and spectral shift functions for boundary-triplet extensions."""
from .errors import *  # noqa: F401,F403
from .odeprop import Interval, HalfLine, PotentialSpec, fundamental_solutions, jost
from .weyl import (FreeHalfLineWeyl, IntervalWeyl, JostHalfLineWeyl, TabulatedWeyl,
                   gamma_field, herglotz_report)
from .triplets import (BoundaryOperator, ExtensionPair, characteristic_function,
                       krein_correction, transform_triplet)
from .pdet import eval_path, log_derivative, pdet_quotient, pdet_ratio, pdet_regularized
from .spectra import (Contour, complex_shift, dissipative_decomposition, functional_trace,
                      locate_eigenvalues, spectral_shift, trace_formula_residual, winding_number)
from .oracle import accumulative_identities, additive_pdet, discretize, matrix_ssf, resolvent_trace_diff

__version__ = "0.1.0"
