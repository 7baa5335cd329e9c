"""Core model objects: clustered data, exponential-family spec, priors, variational state.

Observations are stored grouped by cluster.  ``X`` is the n x (p+1)
fixed-effect design whose column 0 is the intercept (all ones, never
penalized); ``Z_blocks[i]`` is the n_i x u random-effect design of cluster i,
i.e. one block of the conceptual block-diagonal Z.  Random-effect dimension u
is expected to be small (1-5), so per-cluster matrices are kept dense.

The cumulant ``zeta`` and its derivatives define each family:

    Gaussian        zeta(eta) = eta^2 / 2      (canonical form: zeta' = mean)
    Poisson         zeta(eta) = exp(eta)
    Bernoulli-logit zeta(eta) = log(1 + exp(eta))
"""

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import digamma, expit

from .errors import (
    DimensionMismatchError,
    EmptyClusterError,
    InvalidResponseError,
    MissingInterceptError,
    PredictorOverflowError,
)

# exp() overflows for arguments just above 709; stay on the safe side
POISSON_ETA_MAX = 700.0


class Family(enum.Enum):
    GAUSSIAN = "gaussian"
    POISSON = "poisson"
    BERNOULLI_LOGIT = "binomial"


@dataclass(frozen=True)
class FamilySpec:
    """Choice of exponential family plus family-specific knobs.

    ``taylor_order_K`` is the (even) order of the Taylor expansion used to
    evaluate the logistic-normal integral for the Bernoulli-logit family;
    it is ignored by the other families.  Dispersion is known (phi = 1) for
    Poisson and Bernoulli-logit and unknown (phi = sigma^2) for Gaussian.
    """

    kind: Family
    taylor_order_K: int = 2

    def __post_init__(self):
        if self.taylor_order_K < 2 or self.taylor_order_K % 2 != 0:
            raise ValueError("taylor_order_K must be an even integer >= 2")

    @property
    def dispersion_known(self) -> bool:
        return self.kind is not Family.GAUSSIAN


def zeta(eta, family: FamilySpec):
    """Cumulant function, applied elementwise."""
    eta = np.asarray(eta, dtype=float)
    if family.kind is Family.GAUSSIAN:
        return 0.5 * eta**2
    if family.kind is Family.POISSON:
        _check_poisson_overflow(eta)
        return np.exp(eta)
    # stable softplus: max(eta, 0) + log1p(exp(-|eta|))
    return np.logaddexp(0.0, eta)


def zeta_dot(eta, family: FamilySpec):
    """First derivative of the cumulant: the conditional mean g^{-1}(eta)."""
    eta = np.asarray(eta, dtype=float)
    if family.kind is Family.GAUSSIAN:
        return eta.copy()
    if family.kind is Family.POISSON:
        _check_poisson_overflow(eta)
        return np.exp(eta)
    return expit(eta)


def zeta_ddot(eta, family: FamilySpec):
    """Second derivative of the cumulant (variance function, >= 0)."""
    eta = np.asarray(eta, dtype=float)
    if family.kind is Family.GAUSSIAN:
        return np.ones_like(eta)
    if family.kind is Family.POISSON:
        _check_poisson_overflow(eta)
        return np.exp(eta)
    p = expit(eta)
    return p * (1.0 - p)


def _check_poisson_overflow(eta):
    if np.any(eta > POISSON_ETA_MAX):
        idx = int(np.argmax(np.asarray(eta) > POISSON_ETA_MAX))
        raise PredictorOverflowError(
            f"Poisson linear predictor {np.asarray(eta).ravel()[idx]:.3g} "
            f"overflows exp() (observation {idx})",
            observation=idx,
        )


@dataclass(frozen=True)
class Dataset:
    """Clustered responses with fixed- and random-effect designs.

    Rows are ordered by cluster: rows ``cluster_offsets[i]`` to
    ``cluster_offsets[i+1]`` belong to cluster i and match ``Z_blocks[i]``.
    """

    y: np.ndarray
    X: np.ndarray
    Z_blocks: tuple
    n_i: np.ndarray

    @classmethod
    def from_blocks(cls, y, X, Z_blocks) -> "Dataset":
        y = np.asarray(y, dtype=float)
        X = np.asarray(X, dtype=float)
        blocks = tuple(np.asarray(Z, dtype=float) for Z in Z_blocks)
        n_i = np.array([Z.shape[0] for Z in blocks], dtype=int)
        return cls(y=y, X=X, Z_blocks=blocks, n_i=n_i)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def m(self) -> int:
        return len(self.Z_blocks)

    @property
    def p(self) -> int:
        return self.X.shape[1] - 1

    @property
    def u(self) -> int:
        return self.Z_blocks[0].shape[1]

    @cached_property
    def cluster_offsets(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.n_i)))

    def cluster_slice(self, i: int) -> slice:
        off = self.cluster_offsets
        return slice(int(off[i]), int(off[i + 1]))


def validate_dataset(data: Dataset, family: FamilySpec) -> Dataset:
    """Check all structural and family invariants, returning the dataset.

    Raises:
        DimensionMismatchError: row counts, block shapes or lengths disagree.
        EmptyClusterError: some cluster has no rows.
        MissingInterceptError: X[:, 0] is not identically 1.
        InvalidResponseError: responses do not fit the family (non-finite
            anywhere, non-{0,1} for Bernoulli, negative or non-integer counts
            for Poisson).
    """
    if data.m == 0:
        raise DimensionMismatchError("dataset has no clusters")
    if data.y.ndim != 1 or data.X.ndim != 2:
        raise DimensionMismatchError("y must be 1-d and X 2-d")
    n = data.y.shape[0]
    if data.X.shape[0] != n:
        raise DimensionMismatchError(
            f"X has {data.X.shape[0]} rows but y has {n} entries"
        )
    if data.X.shape[1] < 1:
        raise DimensionMismatchError("X must have at least the intercept column")
    if len(data.n_i) != data.m:
        raise DimensionMismatchError("n_i length differs from the block count")
    u = data.Z_blocks[0].shape[1]
    for i, Z in enumerate(data.Z_blocks):
        if Z.ndim != 2 or Z.shape[1] != u:
            raise DimensionMismatchError(f"Z block {i} is not n_i x u with u={u}")
        if Z.shape[0] != data.n_i[i]:
            raise DimensionMismatchError(f"Z block {i} row count differs from n_i")
        if Z.shape[0] == 0:
            raise EmptyClusterError(f"cluster {i} has no observations")
    if int(np.sum(data.n_i)) != n:
        raise DimensionMismatchError("sum of cluster sizes differs from len(y)")
    if not np.all(np.isfinite(data.X)) or not np.all(np.isfinite(data.y)):
        raise InvalidResponseError("dataset contains non-finite values")
    for Z in data.Z_blocks:
        if not np.all(np.isfinite(Z)):
            raise InvalidResponseError("random-effect design contains non-finite values")
    if not np.all(data.X[:, 0] == 1.0):
        raise MissingInterceptError("X[:, 0] must be an all-ones intercept column")

    if family.kind is Family.BERNOULLI_LOGIT:
        if not np.all((data.y == 0.0) | (data.y == 1.0)):
            bad = data.y[(data.y != 0.0) & (data.y != 1.0)][0]
            raise InvalidResponseError(f"Bernoulli response must be 0 or 1, got {bad}")
    elif family.kind is Family.POISSON:
        if np.any(data.y < 0) or np.any(data.y != np.floor(data.y)):
            raise InvalidResponseError("Poisson response must be non-negative integers")
    return data


@dataclass(frozen=True)
class Hyperparams:
    """Prior constants.

    ``S0``/``nu0`` set the Wishart prior on the random-effect precision,
    ``r``/``s`` the Gamma prior on the per-coefficient shrinkage parameters
    (flat defaults: r = 0, s = 1e-5), the inverse-Gamma pair the prior on
    sigma^2 (Gaussian family only) and the last Gamma pair the prior on r when
    it is learned empirically.
    """

    S0: np.ndarray
    nu0: float
    r: float = 0.0
    s: float = 1e-5
    alpha_sigma0: float = 0.01
    beta_sigma0: float = 0.01
    alpha_r0: float = 1.0
    beta_r0: float = 1.0

    def __post_init__(self):
        S0 = np.asarray(self.S0, dtype=float)
        object.__setattr__(self, "S0", S0)
        u = S0.shape[0]
        if S0.shape != (u, u) or not np.allclose(S0, S0.T):
            raise ValueError("S0 must be a symmetric square matrix")
        if np.any(np.linalg.eigvalsh(S0) <= 0):
            raise ValueError("S0 must be positive definite")
        if not self.nu0 > u - 1:
            raise ValueError("nu0 must exceed u - 1")
        if self.s <= 0:
            raise ValueError("s must be positive")
        if self.r < 0:
            raise ValueError("r must be non-negative")

    @classmethod
    def defaults(cls, u: int, **kwargs) -> "Hyperparams":
        """Flat priors: S0 = 1e4 I, nu0 = u + 1, r = 0, s = 1e-5."""
        return cls(S0=1e4 * np.eye(u), nu0=float(u + 1), **kwargs)


@dataclass(frozen=True)
class VBState:
    """All variational parameters at one point of the outer loop.

    ``beta_q`` is the point-mass location for the coefficients; ``mu_b`` /
    ``Sigma_b`` the per-cluster Gaussian factors ((m, u) and (m, u, u));
    ``nu_q`` / ``S_q`` the Wishart factor for the precision; the Gamma pairs
    the shrinkage factors; the remaining scalars the sigma^2 factor (Gaussian
    family) and the Gamma factor for r (empirical-Bayes mode).
    """

    beta_q: np.ndarray
    mu_b: np.ndarray
    Sigma_b: np.ndarray
    nu_q: float
    S_q: np.ndarray
    lambda_shape: np.ndarray
    lambda_rate: np.ndarray
    sigma2_shape: float | None = None
    sigma2_scale: float | None = None
    r_shape: float | None = None
    r_rate: float | None = None

    def Q_mean(self) -> np.ndarray:
        """E[Q] = nu_q * S_q."""
        return self.nu_q * self.S_q

    def lambda_means(self) -> np.ndarray:
        """E[lambda_j] = shape_j / rate_j."""
        return self.lambda_shape / self.lambda_rate

    def lambda_log_means(self) -> np.ndarray:
        """E[log lambda_j] = digamma(shape_j) - log(rate_j)."""
        return digamma(self.lambda_shape) - np.log(self.lambda_rate)

    def inv_phi_mean(self) -> float:
        """E[1/phi]: 1 when dispersion is known, else E[1/sigma^2]."""
        if self.sigma2_shape is None:
            return 1.0
        return self.sigma2_shape / self.sigma2_scale

    def r_mean(self) -> float:
        if self.r_shape is None:
            raise ValueError("state carries no Gamma factor for r")
        return self.r_shape / self.r_rate
