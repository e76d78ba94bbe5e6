"""weightsep: doubling weight pairs separating scalar and quadratic
Muckenhoupt conditions, with certified Riesz-transform testing numerics.

Submodules
----------
dyadic          exact dyadic intervals, step weights, Haar tables
seed            logarithmic seed densities and truncated seed pairs
smallstep       first-passage disarrangement (dense and exact-evaluator forms)
remodel         deterministic level-k disarrangement with transition cells
characteristics scalar/quadratic/offset/two-tailed/rectangular functionals
riesz           closed-form planar Riesz transform of rectangles and testing
maximal         dyadic maximal operator and vector inequality spot checks
pipeline        end-to-end construction driver and report emission
cli             command-line entry points
"""

from .dyadic import DyadicInterval, StepWeight1D, HaarCoefficientTable, doubling_ratio

__version__ = "0.1.0"

__all__ = [
    "DyadicInterval",
    "StepWeight1D",
    "HaarCoefficientTable",
    "doubling_ratio",
    "__version__",
]
