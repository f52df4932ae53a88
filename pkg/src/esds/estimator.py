"""Scikit-learn style front end: fit demonstrations, generate stable motions."""

from __future__ import annotations

import time

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .dynamics import Rollout, StabilizedDS, integrate
from .gains import GainParams, radial_gate
from .regression import GmrRegressor, GpRegressor, RbfRidgeRegressor
from .training import Demonstration, build_training_pairs, estimate_storage_cap, preprocess


class EsdsModel(BaseEstimator):
    """Goal-convergent motion generator learned from demonstrations.

    ``fit`` ingests demonstrations of one motion, trains the chosen
    regression backend on the transformed input/output pairs, and sizes the
    energy tank from the training data. ``predict`` evaluates the stabilized
    velocity field (with a full tank) at arbitrary states and ``rollout``
    integrates a trajectory to the goal.

    Parameters
    ----------
    backend : 'gmr', 'rbf', or 'gp'.
    n_components : mixture components for the GMR backend.
    n_centers : RBF centers for the rbf backend.
    bandwidth, ridge, kernel_scale, noise : backend hyperparameters;
        ``None`` selects data-driven defaults.
    storage_cap : fixed tank cap; ``None`` estimates it from the data.
    storage_scale : multiplier on the estimated cap.
    gate_sharpness, power_band, tank_lo, tank_hi, charge_max : gain shape
        parameters, see :class:`esds.gains.GainParams`.
    seed : seed for backend initialization.
    """

    def __init__(self, backend: str = "gmr", n_components: int = 5,
                 n_centers: int = 25, bandwidth: float | None = None,
                 ridge: float = 1e-6, kernel_scale: float | None = None,
                 noise: float | None = None, storage_cap: float | None = None,
                 storage_scale: float = 1.0, gate_sharpness: float = 0.1,
                 power_band: float = 0.01, tank_lo: float = 0.1,
                 tank_hi: float = 0.9, charge_max: float = 0.99,
                 seed: int = 0, em_max_iter: int = 200, em_tol: float = 1e-6):
        self.backend = backend
        self.n_components = n_components
        self.n_centers = n_centers
        self.bandwidth = bandwidth
        self.ridge = ridge
        self.kernel_scale = kernel_scale
        self.noise = noise
        self.storage_cap = storage_cap
        self.storage_scale = storage_scale
        self.gate_sharpness = gate_sharpness
        self.power_band = power_band
        self.tank_lo = tank_lo
        self.tank_hi = tank_hi
        self.charge_max = charge_max
        self.seed = seed
        self.em_max_iter = em_max_iter
        self.em_tol = em_tol

    def _gain_params(self) -> GainParams:
        return GainParams(
            sharpness=self.gate_sharpness,
            power_band=self.power_band,
            lo_frac=self.tank_lo,
            hi_frac=self.tank_hi,
            charge_max=self.charge_max,
        )

    def _make_backend(self):
        if self.backend == "gmr":
            return GmrRegressor(n_components=self.n_components, seed=self.seed,
                                max_iter=self.em_max_iter, tol=self.em_tol)
        if self.backend == "rbf":
            return RbfRidgeRegressor(n_centers=self.n_centers,
                                     bandwidth=self.bandwidth,
                                     ridge=self.ridge, seed=self.seed)
        if self.backend == "gp":
            return GpRegressor(kernel_scale=self.kernel_scale,
                               bandwidth=self.bandwidth, noise=self.noise)
        raise ValueError(f"unknown backend {self.backend!r}")

    def fit(self, demos, goal=None):
        """Fit from a sequence of :class:`Demonstration` objects.

        ``goal`` is the attractor in the demonstrations' raw coordinates;
        demonstrations that already carry a goal are used as-is.
        """
        demos = [preprocess(d, goal) for d in demos]
        goals = {tuple(d.goal) for d in demos}
        if len(goals) != 1:
            raise ValueError(f"demonstrations disagree on the goal: {goals}")
        params = self._gain_params()
        pairs = build_training_pairs(demos, params)
        regressor = self._make_backend()
        start = time.perf_counter()
        regressor.fit(pairs)
        self.fit_time_ = time.perf_counter() - start
        if self.storage_cap is not None:
            cap = float(self.storage_cap)
        else:
            cap = estimate_storage_cap(demos, regressor, params)
        cap *= self.storage_scale
        self.dim_ = pairs.dim
        self.goal_ = np.asarray(goals.pop(), dtype=float)
        self.regressor_ = regressor
        self.storage_cap_ = cap
        self.ds_ = StabilizedDS(model=regressor, capacity=cap, params=params,
                                goal=self.goal_, dim=self.dim_)
        return self

    def predict(self, X):
        """Stabilized velocity at states ``X``, evaluated with a full tank."""
        check_is_fitted(self, "ds_")
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        pts = np.atleast_2d(X)
        if pts.shape[1] != self.dim_:
            raise ValueError(f"expected dim {self.dim_}, got {pts.shape[1]}")
        ys = pts - self.goal_
        f_vals = np.atleast_2d(self.regressor_.predict(ys))
        gates = np.array(
            [radial_gate(float(np.linalg.norm(y)), self.gate_sharpness)
             for y in ys]
        )
        out = -ys + gates[:, None] * f_vals
        return out[0] if single else out

    def rollout(self, x0, dt: float = 0.01, max_steps: int = 100_000,
                conv_tol: float = 1e-3) -> Rollout:
        """Integrate a trajectory from ``x0`` (raw coordinates) to the goal."""
        check_is_fitted(self, "ds_")
        return integrate(self.ds_, x0, dt=dt, max_steps=max_steps,
                         conv_tol=conv_tol)
