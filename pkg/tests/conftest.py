import numpy as np

from esds.regression import RbfRidgeRegressor


def random_rbf_field(seed, n_centers=25, coef_range=10.0, bandwidth=5.0,
                     box=40.0, dim=2):
    """Hand-assembled RBF field with seeded centers and coefficients.

    Coefficients are uniform in [-coef_range, coef_range]; centers uniform
    in the centered box. Used as an arbitrary smooth test field.
    """
    rng = np.random.default_rng(seed)
    model = RbfRidgeRegressor(n_centers=n_centers, bandwidth=bandwidth)
    model.dim_ = dim
    model.centers_ = rng.uniform(-box, box, size=(n_centers, dim))
    model.bandwidth_ = float(bandwidth)
    model.coef_ = rng.uniform(-coef_range, coef_range, size=(n_centers, dim))
    return model


class ZeroField:
    """Field that vanishes everywhere; the dynamics reduce to -x."""

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        return np.zeros_like(X)


class LinearField:
    """Field f(x) = A x (row-wise for batches)."""

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=float)

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        return X @ self.matrix.T
