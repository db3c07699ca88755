"""Operator learning with an exactly ReLU-assembled, learnable hat-function basis.

Subpackages/modules:

* ``hat_basis``       -- hat functions, their ReLU assembly and subgradients
* ``dense_nets``      -- small dense networks with hand-written backprop
* ``operator_models`` -- FERN, DeepONet and POD operator models
* ``pod``             -- snapshot POD for the fixed-basis baseline
* ``pde_lab``         -- the seven 1D benchmark generators and solvers
* ``trainer``         -- deterministic Adam training with cosine annealing
* ``evalkit``         -- relative-L2 reports, adaptivity diagnostics, sweeps
* ``cli``             -- the ``fern`` command-line pipeline
"""

from . import artifacts, dense_nets, evalkit, hat_basis, operator_models, pde_lab, pod, trainer
from .errors import GridMismatchError, SchemaError, SolverError, TrainingError

__all__ = [
    "artifacts",
    "dense_nets",
    "evalkit",
    "hat_basis",
    "operator_models",
    "pde_lab",
    "pod",
    "trainer",
    "GridMismatchError",
    "SchemaError",
    "SolverError",
    "TrainingError",
]

__version__ = "0.1.0"
