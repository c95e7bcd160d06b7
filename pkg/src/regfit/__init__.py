"""regfit: regression and physics-constrained fitting over CSV datasets.

Subpackages by concern:

* ``data``       dataset container, CSV I/O, splits, synthetic generator
* ``losses``     cost functions and their (sub)gradients
* ``linear``     polynomial/RBF features, ridge and lasso solvers
* ``kernels``    interpolation, kNN, kernel ridge, Gaussian-process posterior
* ``network``    feed-forward networks, backprop
* ``optim``      first-order update rules, mini-batch training
* ``resampling`` bootstrap ensembles, bagging, K-fold cross-validation
* ``physics``    RBF collocation for 1-D boundary-value problems
* ``symreg``     genetic-programming symbolic regression
* ``cli``        the ``regfit`` command-line front end
"""

from .data import Dataset, SplitIndices, generate_fig2_like, load_csv, save_csv, train_test_split
from .errors import NumericalError, ValidationError

__all__ = [
    "Dataset",
    "SplitIndices",
    "generate_fig2_like",
    "load_csv",
    "save_csv",
    "train_test_split",
    "NumericalError",
    "ValidationError",
]

__version__ = "0.1.0"
