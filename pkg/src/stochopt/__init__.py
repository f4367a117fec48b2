"""Composable first-order optimisation for imaging inverse problems."""
from . import algorithms, estimators, functions, operators, sampling, tuning
from .algorithms import APGD, FISTA, GD, ISTA, PD3O, PDHG, PGD
from .errors import (CallbackError, CapabilityError, ConfigurationError, DimensionError,
                     DomainError, NumericalError)
from .estimators import (FullGradientFunction, LSVRGFunction, SAGAFunction, SAGFunction,
                         SGFunction, SVRGFunction, make_estimator)
from .functions import (IndicatorBox, KullbackLeibler, L1Norm, LeastSquares, MixedL21Norm,
                        OperatorCompositionFunction, RelativeDifferencePrior, SumFunction,
                        TotalVariation, ZeroFunction, fgp_tv)
from .operators import (BlockOperator, GradientOperator, IdentityOperator, LinearOperator,
                        MatrixOperator, ToyRadon, dot_test, power_method)
from .sampling import Sampler

__version__ = "0.1.0"
