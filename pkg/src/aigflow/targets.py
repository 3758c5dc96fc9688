"""Target densities rho* ~ exp(-f): potentials, gradients and reference samples."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import expit, logsumexp

from aigflow.core import ConfigurationError, RngLike, as_generator
from aigflow.kernels import as_points

GradFn = Callable[[np.ndarray], np.ndarray]


@dataclass
class TargetModel:
    """Potential f = -log rho* (up to a constant) and its gradient.

    ``grad_f`` and ``f`` act row-wise on an (N, d) array.  ``stochastic_grad``
    (when present) takes ``(X, rng)`` and returns an unbiased minibatch
    estimate of ``grad_f(X)``.  ``mean``/``cov`` are filled in for Gaussian
    targets only.
    """

    dim: int
    grad_f: GradFn
    f: Optional[Callable[[np.ndarray], np.ndarray]] = None
    sampler: Optional[Callable[[int, np.random.Generator], np.ndarray]] = None
    stochastic_grad: Optional[Callable[[np.ndarray, np.random.Generator], np.ndarray]] = None
    batch_grad: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    beta: Optional[float] = None
    mean: Optional[np.ndarray] = None
    cov: Optional[np.ndarray] = None
    dataset: Optional["LogisticDataset"] = None
    name: str = "custom"
    support: Optional[tuple] = None

    def grad(self, X, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """Full gradient, or the minibatch estimate when ``rng`` is given."""
        X = as_points(X)
        if rng is not None and self.stochastic_grad is not None:
            return self.stochastic_grad(X, rng)
        return self.grad_f(X)

    def log_density_unnorm(self, X) -> np.ndarray:
        if self.f is None:
            raise NotImplementedError(f"target {self.name!r} has no potential")
        return -self.f(as_points(X))

    @property
    def is_gaussian(self) -> bool:
        return self.mean is not None and self.cov is not None


def gaussian_target(mean, covariance) -> TargetModel:
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    d = mean.shape[0]
    cov = np.atleast_2d(np.asarray(covariance, dtype=float))
    if cov.shape != (d, d) or not np.allclose(cov, cov.T):
        raise ConfigurationError("target covariance must be a symmetric d x d matrix", "target_cov")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ConfigurationError("target covariance must be positive definite", "target_cov") from None
    prec = np.linalg.inv(cov)
    prec = 0.5 * (prec + prec.T)

    def grad_f(X):
        return (as_points(X) - mean) @ prec

    def f(X):
        Y = as_points(X) - mean
        return 0.5 * np.einsum("ij,jk,ik->i", Y, prec, Y)

    def sampler(n, rng):
        return mean + as_generator(rng).standard_normal((n, d)) @ chol.T

    return TargetModel(
        dim=d, grad_f=grad_f, f=f, sampler=sampler,
        beta=float(np.linalg.eigvalsh(prec).min()),
        mean=mean, cov=cov, name="gaussian",
    )


def bimodal_ring_target() -> TargetModel:
    """rho*(x) ~ exp(-2(|x| - 3)^2) (exp(-2(x1 - 3)^2) + exp(-2(x1 + 3)^2)) in 2-D."""

    def f(X):
        X = as_points(X)
        r = np.linalg.norm(X, axis=1)
        mix = np.stack([-2.0 * (X[:, 0] - 3.0) ** 2, -2.0 * (X[:, 0] + 3.0) ** 2])
        return 2.0 * (r - 3.0) ** 2 - logsumexp(mix, axis=0)

    def grad_f(X):
        X = as_points(X)
        r = np.linalg.norm(X, axis=1)
        safe = np.where(r > 0, r, 1.0)
        # subgradient 0 for the ring term at the origin
        ring = np.where(r[:, None] > 0, (4.0 * (r - 3.0) / safe)[:, None] * X, 0.0)
        a = -2.0 * (X[:, 0] - 3.0) ** 2
        b = -2.0 * (X[:, 0] + 3.0) ** 2
        w_plus = expit(a - b)
        g = ring.copy()
        g[:, 0] += 4.0 * (X[:, 0] - 3.0 * w_plus + 3.0 * (1.0 - w_plus))
        return g

    return TargetModel(dim=2, grad_f=grad_f, f=f, name="bimodal", support=(-6.0, 6.0))


@dataclass
class LogisticDataset:
    """Binary classification data for Bayesian logistic regression.

    ``features``/``labels`` are the training split; the optional test split
    is only used for reporting accuracy and log-likelihood.
    """

    features: np.ndarray
    labels: np.ndarray
    batch_size: int = 100
    prior_var: float = 10.0
    test_features: Optional[np.ndarray] = None
    test_labels: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float).ravel()
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise ConfigurationError("features must be n x d with one label per row", "dataset")
        if len(self.labels) == 0:
            raise ConfigurationError("dataset is empty", "dataset")
        if not np.isin(self.labels, (0.0, 1.0)).all():
            raise ConfigurationError("labels must be 0/1", "dataset")
        if not 1 <= self.batch_size <= len(self.labels):
            raise ConfigurationError(
                f"batch size {self.batch_size} must lie in [1, {len(self.labels)}]", "batch_size")
        if not self.prior_var > 0:
            raise ConfigurationError("prior variance must be positive", "prior_var")

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def d(self) -> int:
        return self.features.shape[1]


def make_logistic_dataset(n: int = 2000, d: int = 5, rng: RngLike = 0, *, test_fraction: float = 0.2,
                          correlation: float = 0.9, batch_size: int = 100,
                          prior_var: float = 10.0, w_true=None) -> LogisticDataset:
    """Synthetic logistic-regression data with equicorrelated features.

    Features share a common factor (pairwise correlation ``correlation``),
    which makes the posterior ill-conditioned.  Data are split into train and
    test sets after standardization.
    """
    g = as_generator(rng)
    common = g.standard_normal((n, 1))
    X = math.sqrt(correlation) * common + math.sqrt(1.0 - correlation) * g.standard_normal((n, d))
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    if w_true is None:
        w_true = np.linspace(1.0, -1.0, d) * 1.5
    w_true = np.asarray(w_true, dtype=float)
    y = (g.random(n) < expit(X @ w_true)).astype(float)
    n_test = int(round(test_fraction * n))
    perm = g.permutation(n)
    test, train = perm[:n_test], perm[n_test:]
    return LogisticDataset(X[train], y[train], batch_size=batch_size, prior_var=prior_var,
                           test_features=X[test] if n_test else None,
                           test_labels=y[test] if n_test else None,
                           meta={"w_true": w_true.tolist(), "correlation": correlation})


def load_logistic_csv(path, *, batch_size: int = 100, prior_var: float = 10.0,
                      test_fraction: float = 0.2, rng: RngLike = 0) -> LogisticDataset:
    """Read a CSV with a header row, label column ``y`` and numeric feature columns.

    Features are standardized to zero mean and unit variance.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "y" not in reader.fieldnames:
            raise ConfigurationError(f"{path}: CSV needs a header with a 'y' column", "dataset")
        cols = [c for c in reader.fieldnames if c != "y"]
        rows = list(reader)
    X = np.array([[float(r[c]) for c in cols] for r in rows], dtype=float)
    y = np.array([float(r["y"]) for r in rows], dtype=float)
    sd = X.std(axis=0)
    X = (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    n_test = int(round(test_fraction * len(y)))
    perm = as_generator(rng).permutation(len(y))
    test, train = perm[:n_test], perm[n_test:]
    return LogisticDataset(X[train], y[train], batch_size=batch_size, prior_var=prior_var,
                           test_features=X[test] if n_test else None,
                           test_labels=y[test] if n_test else None,
                           meta={"path": str(path), "columns": cols})


def _logistic_data_grad(W, X, y):
    # sum_i (sigmoid(w.x_i) - y_i) x_i for each particle row w of W
    return (expit(W @ X.T) - y) @ X


def blr_target(dataset: LogisticDataset, rng: RngLike = None) -> TargetModel:
    """Posterior of logistic regression weights under a N(0, prior_var I) prior.

    ``rng`` seeds nothing here; minibatches are drawn from the generator
    passed to :meth:`TargetModel.grad` so each run owns its stream.
    """
    X, y = dataset.features, dataset.labels
    n, b = dataset.n, dataset.batch_size
    if b > n:
        raise ConfigurationError("minibatch larger than dataset", "batch_size")
    inv_prior = 1.0 / dataset.prior_var

    def grad_f(W):
        W = as_points(W)
        return _logistic_data_grad(W, X, y) + inv_prior * W

    def f(W):
        W = as_points(W)
        z = W @ X.T
        # -log p(y | z) = log(1 + e^z) - y z
        nll = (np.logaddexp(0.0, z) - y * z).sum(axis=1)
        return nll + 0.5 * inv_prior * (W * W).sum(axis=1)

    def batch_grad(W, idx):
        W = as_points(W)
        return (n / len(idx)) * _logistic_data_grad(W, X[idx], y[idx]) + inv_prior * W

    def stochastic_grad(W, g):
        idx = g.choice(n, size=b, replace=False)
        return batch_grad(W, idx)

    return TargetModel(dim=dataset.d, grad_f=grad_f, f=f, stochastic_grad=stochastic_grad,
                       batch_grad=batch_grad, dataset=dataset, name="blr")


def predictive_probability(W, features) -> np.ndarray:
    """Posterior predictive P(y = 1 | x), averaged over particle weights ``W``."""
    return expit(as_points(W) @ np.asarray(features, dtype=float).T).mean(axis=0)


def predictive_accuracy(W, dataset: LogisticDataset) -> float:
    if dataset.test_features is None:
        raise ValueError("dataset has no test split")
    p = predictive_probability(W, dataset.test_features)
    return float(((p > 0.5) == (dataset.test_labels > 0.5)).mean())


def predictive_log_likelihood(W, dataset: LogisticDataset) -> float:
    if dataset.test_features is None:
        raise ValueError("dataset has no test split")
    p = np.clip(predictive_probability(W, dataset.test_features), 1e-12, 1 - 1e-12)
    t = dataset.test_labels
    return float(np.mean(t * np.log(p) + (1 - t) * np.log1p(-p)))


def langevin_chains(target: TargetModel, x0, n_iter: int, tau: float, rng: RngLike, *,
                    burn_in: int = 0, keep: int = 1, stochastic: bool = False) -> np.ndarray:
    """Run parallel unadjusted Langevin chains from the rows of ``x0``.

    Returns ``keep`` evenly spaced post-burn-in states per chain, shaped
    (keep * n_chains, d) with chains varying fastest.
    """
    g = as_generator(rng)
    X = np.array(as_points(x0), dtype=float)
    noise = math.sqrt(2.0 * tau)
    marks = set(burn_in + (np.arange(1, keep + 1) * n_iter) // keep) if keep else set()
    out = []
    for it in range(1, burn_in + n_iter + 1):
        grad = target.grad(X, g if stochastic else None)
        X = X - tau * grad + noise * g.standard_normal(X.shape)
        if it in marks:
            out.append(X.copy())
    return np.concatenate(out, axis=0) if out else np.empty((0, X.shape[1]))


def reference_samples(target: TargetModel, n: int, rng: RngLike, *, n_iter: int = 100_000,
                      burn_in: int = 10_000, tau: float = 0.01, chains: int = 1000,
                      init_scale: float = 1.0) -> np.ndarray:
    """``n`` reference draws: exact when the target has a sampler, else Langevin MCMC.

    MCMC runs ``min(chains, n)`` independent chains from N(0, init_scale^2 I)
    for ``burn_in + n_iter`` steps and thins each to an even share of ``n``.
    """
    if n < 1:
        raise ValueError("need n >= 1 reference samples")
    g = as_generator(rng)
    if target.sampler is not None:
        return target.sampler(n, g)
    n_chains = min(chains, n)
    keep = -(-n // n_chains)
    x0 = init_scale * g.standard_normal((n_chains, target.dim))
    samples = langevin_chains(target, x0, n_iter, tau, g, burn_in=burn_in, keep=keep)
    return samples[:n]
