"""Pluggable regressors mapping a state x to the nonlinear field value f(x).

Three interchangeable backends share the sklearn fit/predict surface:

* :class:`GmrRegressor` -- conditional mean of a joint Gaussian mixture
  fitted by EM (the benchmark default),
* :class:`RbfRidgeRegressor` -- ridge regression on Gaussian RBF features,
* :class:`GpRegressor` -- exact Gaussian process regression.

Fitted models are immutable in practice and safe to share across threads;
refitting builds fresh state. ``predict`` accepts a single vector or an
(N, n) batch and mirrors the input shape.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.linalg import LinAlgError, cho_factor, cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import pdist
from scipy.special import logsumexp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

SERIALIZATION_VERSION = 1


class SingularModelError(RuntimeError):
    """A covariance or kernel matrix lost positive definiteness."""


@dataclass(frozen=True)
class TrainingSet:
    """Paired states and field observations used to fit a backend."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)
        if inputs.shape != targets.shape:
            raise ValueError(
                f"inputs {inputs.shape} and targets {targets.shape} must match"
            )
        if inputs.shape[0] < 2:
            raise ValueError("need at least 2 training pairs")
        if not (np.isfinite(inputs).all() and np.isfinite(targets).all()):
            raise ValueError("training data contains non-finite entries")

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def count(self) -> int:
        return self.inputs.shape[0]


def _as_xy(X, Y=None):
    """Accept (TrainingSet,) or (X, Y) arrays; return float 2-D arrays."""
    if isinstance(X, TrainingSet):
        return X.inputs, X.targets
    ts = TrainingSet(X, Y)
    return ts.inputs, ts.targets


def _median_distance(X: np.ndarray) -> float:
    d = pdist(X)
    med = float(np.median(d)) if d.size else 0.0
    return med if med > 0 else 1.0


def _seeded_kmeans(data: np.ndarray, k: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # empty-cluster warnings; handled by caller
        return kmeans2(data, k, minit="++", rng=np.random.default_rng(seed))


class GmrRegressor(BaseEstimator):
    """Gaussian mixture regression through a joint model over (x, f(x)).

    A K-component Gaussian mixture is fitted by EM on the concatenated
    input/target vectors, starting from a seeded k-means partition.
    Prediction returns the standard conditional mean given the input slice,
    weighted by the per-component marginal responsibilities.

    Parameters
    ----------
    n_components : number of mixture components K.
    seed : seed for the k-means initialization, recorded for reproducibility.
    max_iter : EM iteration cap.
    tol : EM stops once the log-likelihood improves by less than this.
    """

    def __init__(self, n_components: int = 5, seed: int = 0,
                 max_iter: int = 200, tol: float = 1e-6,
                 reg_factor: float = 1e-10):
        self.n_components = n_components
        self.seed = seed
        self.max_iter = max_iter
        self.tol = tol
        self.reg_factor = reg_factor

    def fit(self, X, Y=None):
        X, Y = _as_xy(X, Y)
        n = X.shape[1]
        joint = np.hstack([X, Y])
        count, d = joint.shape
        k = self.n_components
        if k < 1:
            raise ValueError(f"n_components must be >= 1, got {k}")
        if k > count:
            raise ValueError(f"n_components={k} exceeds {count} training pairs")

        # diagonal floor keeps near-duplicate samples from collapsing a
        # component; small enough that K=1 conditioning still matches the
        # unregularized least-squares solution to ~1e-9
        reg = self.reg_factor * float(np.mean(np.var(joint, axis=0))) + 1e-12

        weights, means, covs = self._init_from_kmeans(joint, k, reg)
        lls: list[float] = []
        prev = -np.inf
        for _ in range(self.max_iter):
            log_resp, ll = self._e_step(joint, weights, means, covs)
            lls.append(ll)
            if ll - prev < self.tol and len(lls) > 1:
                break
            prev = ll
            weights, means, covs = self._m_step(joint, log_resp, reg)

        self.dim_ = n
        self.weights_ = weights
        self.means_ = means
        self.covariances_ = covs
        self.log_likelihoods_ = np.array(lls)
        self._prepare_conditionals()
        return self

    def _init_from_kmeans(self, joint, k, reg):
        count, d = joint.shape
        centroids, labels = _seeded_kmeans(joint, k, self.seed)
        global_cov = np.cov(joint, rowvar=False).reshape(d, d)
        weights = np.empty(k)
        means = np.empty((k, d))
        covs = np.empty((k, d, d))
        for i in range(k):
            members = joint[labels == i]
            weights[i] = max(len(members), 1)
            means[i] = members.mean(axis=0) if len(members) else centroids[i]
            if len(members) > d:
                diff = members - means[i]
                covs[i] = diff.T @ diff / len(members)
            else:
                covs[i] = global_cov
            covs[i] += reg * np.eye(d)
        weights /= weights.sum()
        return weights, means, covs

    def _e_step(self, joint, weights, means, covs):
        count = joint.shape[0]
        k = len(weights)
        log_prob = np.empty((count, k))
        for i in range(k):
            log_prob[:, i] = _gaussian_logpdf(joint, means[i], covs[i])
        log_prob += np.log(weights)
        norm = logsumexp(log_prob, axis=1)
        return log_prob - norm[:, None], float(norm.sum())

    def _m_step(self, joint, log_resp, reg):
        count, d = joint.shape
        resp = np.exp(log_resp)
        nk = resp.sum(axis=0) + 10 * np.finfo(float).tiny
        weights = nk / count
        means = resp.T @ joint / nk[:, None]
        covs = np.empty((len(nk), d, d))
        for i in range(len(nk)):
            diff = joint - means[i]
            covs[i] = (resp[:, i, None] * diff).T @ diff / nk[i]
            covs[i] = 0.5 * (covs[i] + covs[i].T) + reg * np.eye(d)
        return weights, means, covs

    def _prepare_conditionals(self):
        n = self.dim_
        k = len(self.weights_)
        self._mu_x = self.means_[:, :n]
        self._mu_y = self.means_[:, n:]
        self._gain = np.empty((k, n, n))
        self._xx_chol = np.empty((k, n, n))
        self._xx_logdet = np.empty(k)
        for i in range(k):
            sxx = self.covariances_[i, :n, :n]
            sxy = self.covariances_[i, :n, n:]
            try:
                low = cholesky(sxx, lower=True)
            except LinAlgError as exc:
                raise SingularModelError(
                    f"component {i} input covariance is singular"
                ) from exc
            self._xx_chol[i] = low
            self._xx_logdet[i] = 2.0 * np.log(np.diag(low)).sum()
            # gain = Sigma_yx Sigma_xx^-1, via two triangular solves
            half = solve_triangular(low, sxy, lower=True)
            self._gain[i] = solve_triangular(low.T, half, lower=False).T

    def predict(self, X):
        check_is_fitted(self, "weights_")
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        pts = X[None, :] if single else X
        if pts.shape[1] != self.dim_:
            raise ValueError(f"expected dim {self.dim_}, got {pts.shape[1]}")
        k, n = self._gain.shape[:2]
        log_w = np.empty((pts.shape[0], k))
        cond = np.empty((k, pts.shape[0], n))
        for i in range(k):
            diff = pts - self._mu_x[i]
            sol = solve_triangular(self._xx_chol[i], diff.T, lower=True)
            maha = np.sum(sol * sol, axis=0)
            log_w[:, i] = (
                np.log(self.weights_[i])
                - 0.5 * (maha + self._xx_logdet[i] + n * np.log(2 * np.pi))
            )
            cond[i] = self._mu_y[i] + diff @ self._gain[i].T
        resp = np.exp(log_w - logsumexp(log_w, axis=1)[:, None])
        out = np.einsum("nk,knd->nd", resp, cond)
        return out[0] if single else out


def _gaussian_logpdf(pts: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    d = len(mean)
    try:
        low = cholesky(cov, lower=True)
    except LinAlgError as exc:
        raise SingularModelError("covariance collapsed during EM") from exc
    sol = solve_triangular(low, (pts - mean).T, lower=True)
    return -0.5 * (
        np.sum(sol * sol, axis=0)
        + 2.0 * np.log(np.diag(low)).sum()
        + d * np.log(2 * np.pi)
    )


class RbfRidgeRegressor(BaseEstimator):
    """Ridge regression on Gaussian RBF features exp(-||x - c||^2 / b^2).

    Centers come from a seeded k-means on the inputs; the coefficient matrix
    solves the ridge-regularized normal equations exactly.
    """

    def __init__(self, n_centers: int = 25, bandwidth: float | None = None,
                 ridge: float = 1e-6, seed: int = 0):
        self.n_centers = n_centers
        self.bandwidth = bandwidth
        self.ridge = ridge
        self.seed = seed

    def fit(self, X, Y=None):
        X, Y = _as_xy(X, Y)
        m = self.n_centers
        if m < 1:
            raise ValueError(f"n_centers must be >= 1, got {m}")
        if m > X.shape[0]:
            raise ValueError(f"n_centers={m} exceeds {X.shape[0]} training pairs")
        if self.ridge <= 0:
            raise ValueError(f"ridge must be > 0, got {self.ridge}")
        if m == X.shape[0]:
            centers = X.copy()
        else:
            centers, _ = _seeded_kmeans(X, m, self.seed)
        bw = self.bandwidth if self.bandwidth is not None else _median_distance(X)
        if bw <= 0:
            raise ValueError(f"bandwidth must be > 0, got {bw}")

        phi = _rbf_features(X, centers, bw)
        gram = phi.T @ phi + self.ridge * np.eye(m)
        try:
            factor = cho_factor(gram)
        except LinAlgError as exc:  # cannot occur for ridge > 0, guarded anyway
            raise SingularModelError("RBF normal equations are singular") from exc
        self.dim_ = X.shape[1]
        self.centers_ = centers
        self.bandwidth_ = float(bw)
        self.coef_ = cho_solve(factor, phi.T @ Y)
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        pts = X[None, :] if single else X
        if pts.shape[1] != self.dim_:
            raise ValueError(f"expected dim {self.dim_}, got {pts.shape[1]}")
        out = _rbf_features(pts, self.centers_, self.bandwidth_) @ self.coef_
        return out[0] if single else out


def _rbf_features(pts: np.ndarray, centers: np.ndarray, bandwidth: float) -> np.ndarray:
    sq = np.sum((pts[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    return np.exp(-sq / (bandwidth * bandwidth))


class GpRegressor(BaseEstimator):
    """Exact Gaussian process regression with a squared-exponential kernel.

    k(x, x') = scale^2 exp(-||x - x'||^2 / (2 b^2)). The dual coefficients
    solve (K + noise I) alpha = Y through a Cholesky factorization, so the
    training set is capped at 5000 points.

    Unset hyperparameters fall back to data-driven defaults: bandwidth from
    the median pairwise distance, scale from the target spread, and noise
    from 1e-4 times the target variance.
    """

    MAX_EXACT = 5000

    def __init__(self, kernel_scale: float | None = None,
                 bandwidth: float | None = None, noise: float | None = None):
        self.kernel_scale = kernel_scale
        self.bandwidth = bandwidth
        self.noise = noise

    def fit(self, X, Y=None):
        X, Y = _as_xy(X, Y)
        if X.shape[0] > self.MAX_EXACT:
            raise ValueError(
                f"exact GP solve is limited to {self.MAX_EXACT} points, "
                f"got {X.shape[0]}"
            )
        bw = self.bandwidth if self.bandwidth is not None else _median_distance(X)
        if bw <= 0:
            raise ValueError(f"bandwidth must be > 0, got {bw}")
        target_var = float(np.mean(np.var(Y, axis=0)))
        scale = self.kernel_scale
        if scale is None:
            scale = np.sqrt(target_var) if target_var > 0 else 1.0
        if scale <= 0:
            raise ValueError(f"kernel_scale must be > 0, got {scale}")
        noise = self.noise if self.noise is not None else 1e-4 * target_var
        noise = max(float(noise), 1e-10 * scale * scale)

        gram = _sq_exp_kernel(X, X, scale, bw)
        gram[np.diag_indices_from(gram)] += noise
        try:
            factor = cho_factor(gram)
        except LinAlgError as exc:
            raise SingularModelError(
                f"Gram matrix plus noise*I is not positive definite "
                f"(noise={noise:g}, bandwidth={bw:g}); raise the noise level"
            ) from exc
        self.dim_ = X.shape[1]
        self.train_inputs_ = X.copy()
        self.kernel_scale_ = float(scale)
        self.bandwidth_ = float(bw)
        self.noise_ = float(noise)
        self.dual_coef_ = cho_solve(factor, Y)
        return self

    def predict(self, X):
        check_is_fitted(self, "dual_coef_")
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        pts = X[None, :] if single else X
        if pts.shape[1] != self.dim_:
            raise ValueError(f"expected dim {self.dim_}, got {pts.shape[1]}")
        kvec = _sq_exp_kernel(pts, self.train_inputs_, self.kernel_scale_,
                              self.bandwidth_)
        out = kvec @ self.dual_coef_
        return out[0] if single else out


def _sq_exp_kernel(a: np.ndarray, b: np.ndarray, scale: float,
                   bandwidth: float) -> np.ndarray:
    sq = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2)
    return scale * scale * np.exp(-sq / (2.0 * bandwidth * bandwidth))


# --- model serialization -------------------------------------------------

_BACKEND_NAMES = {GmrRegressor: "gmr", RbfRidgeRegressor: "rbf", GpRegressor: "gp"}


def to_document(model) -> dict:
    """Serialize a fitted backend to a versioned JSON-compatible dict."""
    name = _BACKEND_NAMES.get(type(model))
    if name is None:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    check_is_fitted(model)
    if name == "gmr":
        params = {
            "n_components": int(model.n_components),
            "seed": int(model.seed),
            "weights": model.weights_.tolist(),
            "means": model.means_.tolist(),
            "covariances": model.covariances_.tolist(),
        }
    elif name == "rbf":
        params = {
            "centers": model.centers_.tolist(),
            "bandwidth": model.bandwidth_,
            "ridge": float(model.ridge),
            "coefficients": model.coef_.tolist(),
        }
    else:
        params = {
            "train_inputs": model.train_inputs_.tolist(),
            "kernel_scale": model.kernel_scale_,
            "bandwidth": model.bandwidth_,
            "noise": model.noise_,
            "dual_coefficients": model.dual_coef_.tolist(),
        }
    return {
        "backend": name,
        "version": SERIALIZATION_VERSION,
        "dim": int(model.dim_),
        "params": params,
    }


def from_document(doc: dict):
    """Rebuild a fitted backend from :func:`to_document` output."""
    if doc.get("version") != SERIALIZATION_VERSION:
        raise ValueError(f"unsupported model document version {doc.get('version')}")
    name = doc["backend"]
    dim = int(doc["dim"])
    params = doc["params"]
    if name == "gmr":
        model = GmrRegressor(n_components=params["n_components"],
                             seed=params["seed"])
        model.dim_ = dim
        model.weights_ = np.asarray(params["weights"], dtype=float)
        model.means_ = np.asarray(params["means"], dtype=float)
        model.covariances_ = np.asarray(params["covariances"], dtype=float)
        model.log_likelihoods_ = np.array([])
        model._prepare_conditionals()
    elif name == "rbf":
        model = RbfRidgeRegressor(ridge=params["ridge"])
        model.dim_ = dim
        model.centers_ = np.asarray(params["centers"], dtype=float)
        model.bandwidth_ = float(params["bandwidth"])
        model.coef_ = np.asarray(params["coefficients"], dtype=float)
    elif name == "gp":
        model = GpRegressor()
        model.dim_ = dim
        model.train_inputs_ = np.asarray(params["train_inputs"], dtype=float)
        model.kernel_scale_ = float(params["kernel_scale"])
        model.bandwidth_ = float(params["bandwidth"])
        model.noise_ = float(params["noise"])
        model.dual_coef_ = np.asarray(params["dual_coefficients"], dtype=float)
    else:
        raise ValueError(f"unknown backend {name!r}")
    return model


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(to_document(model)), encoding="utf-8")


def load_model(path):
    return from_document(json.loads(Path(path).read_text(encoding="utf-8")))


def make_backend(name: str, *, seed: int = 0, **hyper):
    """Construct an unfitted backend by name ('gmr', 'rbf', or 'gp')."""
    if name == "gmr":
        return GmrRegressor(seed=seed, **hyper)
    if name == "rbf":
        return RbfRidgeRegressor(seed=seed, **hyper)
    if name == "gp":
        return GpRegressor(**hyper)
    raise ValueError(f"unknown backend {name!r}; expected gmr, rbf, or gp")
