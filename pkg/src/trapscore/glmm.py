"""Spatial logistic mixed model with Matérn-correlated site effects.

The model is a binomial GLMM:

    logit P(response = 1) = x'beta + b(site),   b ~ N(0, Sigma)

with x = (1, pool_size, test_positive, risk, week, year) and Sigma built
from the Matérn correlation

    corr(d) = d^nu K_nu(d) / (2^(nu-1) Gamma(nu)),

evaluated at scaled great-circle distances d/rho between unique trap
locations, as Sigma = sigma2 * C + nugget * I. Fitting maximizes a Laplace
approximation of the marginal likelihood: an inner Newton solve (analytic
derivatives) finds the mode of the site effects, an outer quasi-Newton
(finite-difference gradients) moves (beta, log sigma2, log rho).
"""

from __future__ import annotations

import dataclasses
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit, gamma as gamma_fn, kv

from .data_model import Dataset, TrapSite
from .geo import haversine_km, pairwise_km

COVARIATE_FIELDS = ("pool_size", "test_positive", "risk", "week", "year")
NU_GRID = (0.5, 1.5, 2.5)

SEPARATION_BOUND = 50.0
INNER_TOL = 1e-9
INNER_MAX_ITER = 100


class GlmmError(Exception):
    """Base class for model-fitting failures."""


class DegenerateDataError(GlmmError):
    """The data cannot identify the model (one response class, one location...)."""


class SeparationError(GlmmError):
    """Complete separation: a standardized coefficient diverged past 50."""


class ConvergenceError(GlmmError):
    def __init__(self, message: str, objective: float, grad_norm: float):
        super().__init__(f"{message} (objective={objective:.6g}, grad_norm={grad_norm:.3g})")
        self.objective = objective
        self.grad_norm = grad_norm


class ConditioningError(GlmmError):
    def __init__(self, message: str, min_eigenvalue: float):
        super().__init__(f"{message} (smallest eigenvalue ~ {min_eigenvalue:.3g})")
        self.min_eigenvalue = min_eigenvalue


class MissingCovariateError(GlmmError):
    def __init__(self, field_name: str):
        super().__init__(f"pool is missing covariate '{field_name}'")
        self.field_name = field_name


@dataclass(frozen=True)
class MaternParams:
    """Kernel hyperparameters; distances enter the kernel as d/rho."""

    nu: float
    rho: float
    sigma2: float
    nugget: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.nu) and self.nu > 0):
            raise ValueError("nu must be finite and positive")
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise ValueError("rho must be finite and positive")
        if not (np.isfinite(self.sigma2) and self.sigma2 >= 0):
            raise ValueError("sigma2 must be finite and non-negative")
        if not (np.isfinite(self.nugget) and self.nugget >= 0):
            raise ValueError("nugget must be finite and non-negative")


@dataclass(frozen=True)
class GlmmCoefficients:
    """Fixed effects, on the original covariate scale."""

    intercept: float
    pool_size: float
    test_positive: float
    risk: float
    week: float
    year: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.intercept, self.pool_size, self.test_positive, self.risk, self.week, self.year]
        )

    @staticmethod
    def from_array(a) -> "GlmmCoefficients":
        a = np.asarray(a, dtype=float)
        return GlmmCoefficients(*(float(v) for v in a))


@dataclass(frozen=True)
class FitConfig:
    nu: float = 0.5
    profile_nu: bool = False  # try each value in NU_GRID, keep the best objective
    random_effects: bool = True
    standardize: bool = True
    nugget_factor: float = 1e-6  # nugget = nugget_factor * sigma2
    max_evals: int = 500
    rel_tol: float = 1e-6


@dataclass(frozen=True)
class Standardization:
    """Per-covariate affine transform applied internally: z = (x - offset) / scale.

    Covariates that are constant in the training data are dropped from the
    design (``active`` false); their coefficient is reported as 0.
    """

    offsets: np.ndarray
    scales: np.ndarray
    active: np.ndarray


@dataclass(frozen=True)
class FittedGlmm:
    coefficients: GlmmCoefficients
    coef_se: GlmmCoefficients
    matern: MaternParams
    training_locations: tuple[tuple[float, float], ...]
    site_effect_modes: np.ndarray
    site_effect_vars: np.ndarray
    standardization: Standardization
    log_likelihood: float
    nu_profiled: bool = False
    n_evals: int = 0

    @property
    def site_effects(self) -> dict[tuple[float, float], tuple[float, float]]:
        """Map location -> (posterior mode, conditional variance)."""
        return {
            loc: (float(m), float(v))
            for loc, m, v in zip(self.training_locations, self.site_effect_modes, self.site_effect_vars)
        }


def matern_correlation(d, nu: float):
    """Matérn correlation at scaled distance ``d`` with smoothness ``nu``.

    Equals 1 at d = 0 (by continuity) and decreases strictly in d. Accepts
    scalars or arrays.
    """
    if not (np.isfinite(nu) and nu > 0):
        raise ValueError("nu must be finite and positive")
    arr = np.asarray(d, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("distances must be finite")
    if np.any(arr < 0):
        raise ValueError("distances must be non-negative")

    out = np.ones_like(arr)
    # d of 700+ underflows K_nu; below 1e-10 the correlation is 1 to machine precision
    mid = (arr > 1e-10) & (arr < 700.0)
    dm = arr[mid]
    out[mid] = dm**nu * kv(nu, dm) / (2.0 ** (nu - 1.0) * gamma_fn(nu))
    out[arr >= 700.0] = 0.0
    return float(out) if np.ndim(d) == 0 else out


def build_correlation_matrix(
    locations, matern: MaternParams, warn_on_escalation: bool = True
) -> np.ndarray:
    """Covariance matrix sigma2 * C + nugget * I over (lat, lon) locations.

    The returned matrix passes a Cholesky factorization. If the requested
    nugget is positive but too small, it is escalated by factors of 10 (up
    to 1000x) with a warning; a zero nugget is never escalated. Failure
    raises :class:`ConditioningError` with the smallest-eigenvalue estimate.
    """
    locations = list(locations)
    if not locations:
        raise ValueError("need at least one location")
    lats = [loc[0] for loc in locations]
    lons = [loc[1] for loc in locations]
    dist = pairwise_km(lats, lons)
    corr = matern_correlation(dist / matern.rho, matern.nu)
    eye = np.eye(len(locations))

    for factor in (1.0, 10.0, 100.0, 1000.0):
        cov = matern.sigma2 * corr + matern.nugget * factor * eye
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            if matern.nugget == 0.0:
                break
            continue
        if factor > 1.0 and warn_on_escalation:
            warnings.warn(
                f"covariance ill-conditioned; nugget escalated {factor:g}x", stacklevel=2
            )
        return cov

    base = matern.sigma2 * corr + matern.nugget * eye
    min_eig = float(np.linalg.eigvalsh(base)[0])
    raise ConditioningError("covariance matrix is not positive definite", min_eig)


# ---------------------------------------------------------------------------
# design construction


def _raw_design(pools) -> np.ndarray:
    rows = np.empty((len(pools), 6))
    for i, p in enumerate(pools):
        if p.risk is None:
            raise MissingCovariateError("risk")
        rows[i] = (1.0, p.pool_size, float(p.test_positive), p.risk, p.week, p.year)
    return rows


def _responses(pools) -> np.ndarray:
    y = np.empty(len(pools))
    for i, p in enumerate(pools):
        if p.response is None:
            raise MissingCovariateError("response")
        y[i] = float(p.response)
    return y


def _standardize(x_raw: np.ndarray, enabled: bool) -> tuple[np.ndarray, Standardization]:
    cov = x_raw[:, 1:]
    offsets = cov.mean(axis=0)
    scales = cov.std(axis=0)
    active = scales > 1e-12 * np.maximum(1.0, np.abs(offsets))
    if not enabled:
        offsets = np.zeros_like(offsets)
        scales = np.ones_like(scales)
    else:
        offsets = np.where(active, offsets, 0.0)
        scales = np.where(active, scales, 1.0)
    z = (cov[:, active] - offsets[active]) / scales[active]
    design = np.column_stack([np.ones(len(x_raw)), z])
    return design, Standardization(offsets=offsets, scales=scales, active=active)


def _to_original_scale(beta_std: np.ndarray, cov_std: np.ndarray, std: Standardization):
    """Map standardized coefficients and their covariance back to raw covariates."""
    k = int(np.sum(std.active))
    a = np.zeros((6, 1 + k))
    a[0, 0] = 1.0
    col = 1
    for j in range(5):
        if std.active[j]:
            a[j + 1, col] = 1.0 / std.scales[j]
            a[0, col] = -std.offsets[j] / std.scales[j]
            col += 1
    beta = a @ beta_std
    cov = a @ cov_std @ a.T
    se = np.sqrt(np.clip(np.diag(cov), 0.0, np.inf))
    se[1:][~std.active] = np.nan
    return beta, se


# ---------------------------------------------------------------------------
# likelihood pieces


def joint_log_density(beta, b, design, y, site_idx, sigma):
    """Penalized joint log-density of (responses, site effects) and its gradient.

    ``design`` has the intercept column first; ``site_idx`` maps each row to
    its site-effect index; ``sigma`` is the site-effect covariance. Returns
    ``(value, grad)`` with the gradient concatenated over (beta, b).
    """
    beta = np.asarray(beta, dtype=float)
    b = np.asarray(b, dtype=float)
    q = len(b)
    chol = cho_factor(sigma, lower=True)
    sinv_b = cho_solve(chol, b)
    logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))

    eta = design @ beta + b[site_idx]
    loglik = float(y @ eta - np.logaddexp(0.0, eta).sum())
    value = loglik - 0.5 * float(b @ sinv_b) - 0.5 * logdet - 0.5 * q * np.log(2.0 * np.pi)

    resid = y - expit(eta)
    grad_beta = design.T @ resid
    grad_b = np.bincount(site_idx, weights=resid, minlength=q) - sinv_b
    return value, np.concatenate([grad_beta, grad_b])


def _site_modes(beta, design, y, site_idx, sigma_inv, b0):
    """Newton ascent to the mode of the site effects given fixed effects."""
    q = sigma_inv.shape[0]
    b = b0.copy()
    xb = design @ beta

    def value(bv):
        eta = xb + bv[site_idx]
        return float(y @ eta - np.logaddexp(0.0, eta).sum()) - 0.5 * float(bv @ sigma_inv @ bv)

    cur = value(b)
    for _ in range(INNER_MAX_ITER):
        eta = xb + b[site_idx]
        p = expit(eta)
        grad = np.bincount(site_idx, weights=y - p, minlength=q) - sigma_inv @ b
        if np.max(np.abs(grad)) < INNER_TOL:
            break
        w = np.bincount(site_idx, weights=p * (1.0 - p), minlength=q)
        hess = sigma_inv + np.diag(w)
        step = cho_solve(cho_factor(hess, lower=True), grad)
        scale = 1.0
        for _ in range(30):
            cand = b + scale * step
            new = value(cand)
            if new >= cur:
                b, cur = cand, new
                break
            scale *= 0.5
        else:
            break
    return b


def _plain_logistic(design, y):
    """Newton fit of a logistic regression; separation-guarded.

    Separation is flagged either by a coefficient passing the 50 bound
    during iteration or, since float saturation can stall the gradient
    first, by a perfectly-classifying fit with saturated margins.
    """
    beta = np.zeros(design.shape[1])
    n_iter = 0
    for n_iter in range(1, 101):
        eta = design @ beta
        p = expit(eta)
        grad = design.T @ (y - p)
        if np.max(np.abs(beta)) > SEPARATION_BOUND:
            raise SeparationError("complete separation: coefficient magnitude exceeded 50")
        if np.max(np.abs(grad)) < 1e-10:
            break
        w = np.clip(p * (1.0 - p), 1e-12, None)
        hess = (design * w[:, None]).T @ design
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as err:
            raise DegenerateDataError(f"singular information matrix: {err}") from err
        beta = beta + step
    else:
        eta = design @ beta
        grad = design.T @ (y - expit(eta))
        loglik = float(y @ eta - np.logaddexp(0.0, eta).sum())
        raise ConvergenceError("logistic fit did not converge", -loglik, float(np.max(np.abs(grad))))

    eta = design @ beta
    if np.max(np.abs(eta)) > 20.0 and np.all((eta > 0) == y.astype(bool)):
        raise SeparationError(
            "complete separation: fit classifies perfectly with saturated margins"
        )
    return beta, n_iter


def _loglik_bernoulli(eta, y) -> float:
    return float(y @ eta - np.logaddexp(0.0, eta).sum())


# ---------------------------------------------------------------------------
# fitting


def _pool_locations(dataset: Dataset, pools) -> tuple[list[tuple[float, float]], np.ndarray]:
    site_by_id = dataset.site_by_id
    locs: list[tuple[float, float]] = []
    index: dict[tuple[float, float], int] = {}
    site_idx = np.empty(len(pools), dtype=int)
    for i, p in enumerate(pools):
        site = site_by_id.get(p.trap_id)
        if site is None:
            raise DegenerateDataError(f"pool references unknown trap_id {p.trap_id!r}")
        loc = (site.latitude, site.longitude)
        if loc not in index:
            index[loc] = len(locs)
            locs.append(loc)
        site_idx[i] = index[loc]
    return locs, site_idx


def fit(dataset: Dataset, config: FitConfig = FitConfig()) -> FittedGlmm:
    """Fit the spatial mixed model on a labelled, risk-annotated dataset."""
    pools = dataset.pools
    if not pools:
        raise DegenerateDataError("no pools to fit")
    y = _responses(pools)
    if y.min() == y.max():
        raise DegenerateDataError(
            f"all responses are {int(y[0])}: both classes are required to fit"
        )
    x_raw = _raw_design(pools)
    locs, site_idx = _pool_locations(dataset, pools)
    if len(locs) < 2:
        raise DegenerateDataError("need at least 2 distinct trap locations")
    design, std = _standardize(x_raw, config.standardize)

    if not config.random_effects:
        return _fit_fixed_only(design, y, std, locs, config)

    if config.profile_nu:
        best = None
        for nu in NU_GRID:
            cand = _fit_spatial(design, y, site_idx, std, locs, config, nu)
            if best is None or cand.log_likelihood > best.log_likelihood:
                best = cand
        return dataclasses.replace(best, nu_profiled=True)
    return _fit_spatial(design, y, site_idx, std, locs, config, config.nu)


def _fit_fixed_only(design, y, std, locs, config) -> FittedGlmm:
    beta_std, n_iter = _plain_logistic(design, y)
    p = expit(design @ beta_std)
    w = p * (1.0 - p)
    info = (design * w[:, None]).T @ design
    cov_std = np.linalg.inv(info)
    beta, se = _to_original_scale(beta_std, cov_std, std)
    loglik = _loglik_bernoulli(design @ beta_std, y)
    return FittedGlmm(
        coefficients=GlmmCoefficients.from_array(beta),
        coef_se=GlmmCoefficients.from_array(se),
        matern=MaternParams(nu=config.nu, rho=1.0, sigma2=0.0, nugget=0.0),
        training_locations=tuple(locs),
        site_effect_modes=np.zeros(len(locs)),
        site_effect_vars=np.zeros(len(locs)),
        standardization=std,
        log_likelihood=loglik,
        n_evals=n_iter,
    )


def _make_laplace_objective(design, y, site_idx, dist, nu, nugget_factor):
    """Closure mapping (beta_std..., log sigma2, log rho) -> negative Laplace objective."""
    n_beta = design.shape[1]
    q = dist.shape[0]
    eye = np.eye(q)
    warm = {"b": np.zeros(q)}

    def sigma_pieces(sigma2, rho):
        corr = matern_correlation(dist / rho, nu)
        nugget = max(nugget_factor * sigma2, 1e-12)
        sigma = sigma2 * corr + nugget * eye
        for jitter in (0.0, 1e-10, 1e-8, 1e-6):
            try:
                chol = cho_factor(sigma + jitter * eye, lower=True)
                return sigma + jitter * eye, chol
            except np.linalg.LinAlgError:
                continue
        return None, None

    def objective(theta):
        beta = theta[:n_beta]
        if np.max(np.abs(beta)) > SEPARATION_BOUND:
            raise SeparationError("complete separation: coefficient magnitude exceeded 50")
        sigma2 = float(np.exp(theta[n_beta]))
        rho = float(np.exp(theta[n_beta + 1]))
        sigma, chol = sigma_pieces(sigma2, rho)
        if sigma is None:
            return 1e12
        sigma_inv = cho_solve(chol, eye)
        b = _site_modes(beta, design, y, site_idx, sigma_inv, warm["b"])
        warm["b"] = b
        eta = design @ beta + b[site_idx]
        p = expit(eta)
        w = np.bincount(site_idx, weights=p * (1.0 - p), minlength=q)
        hess = sigma_inv + np.diag(w)
        logdet_sigma = 2.0 * np.sum(np.log(np.diag(chol[0])))
        logdet_hess = 2.0 * np.sum(np.log(np.diag(np.linalg.cholesky(hess))))
        value = (
            _loglik_bernoulli(eta, y)
            - 0.5 * float(b @ sigma_inv @ b)
            - 0.5 * logdet_sigma
            - 0.5 * logdet_hess
        )
        return -value

    objective.sigma_pieces = sigma_pieces
    return objective


def laplace_objective(dataset: Dataset, config: FitConfig = FitConfig()):
    """Negative Laplace objective for a dataset, as a callable over
    (standardized coefficients..., log sigma2, log rho). Test/diagnostic hook.
    """
    pools = dataset.pools
    y = _responses(pools)
    x_raw = _raw_design(pools)
    locs, site_idx = _pool_locations(dataset, pools)
    design, _ = _standardize(x_raw, config.standardize)
    dist = pairwise_km([l[0] for l in locs], [l[1] for l in locs])
    return _make_laplace_objective(design, y, site_idx, dist, config.nu, config.nugget_factor)


def _fit_spatial(design, y, site_idx, std, locs, config, nu) -> FittedGlmm:
    n_beta = design.shape[1]
    q = len(locs)
    dist = pairwise_km([l[0] for l in locs], [l[1] for l in locs])
    d_pos = dist[dist > 0]
    rho0 = float(np.median(d_pos))
    eye = np.eye(q)

    beta0, _ = _plain_logistic(design, y)
    x0 = np.concatenate([beta0, [0.0, np.log(rho0)]])
    bounds = [(None, None)] * n_beta + [
        (-12.0, 6.0),
        (np.log(max(1e-3, 1e-2 * rho0)), np.log(1e2 * float(d_pos.max()))),
    ]

    objective = _make_laplace_objective(design, y, site_idx, dist, nu, config.nugget_factor)
    sigma_pieces = objective.sigma_pieces

    res = optimize.minimize(
        objective,
        x0,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxfun": config.max_evals, "ftol": config.rel_tol, "eps": 1e-6},
    )
    grad_norm = float(np.max(np.abs(res.jac)))
    if not res.success and grad_norm > 0.05:
        raise ConvergenceError(f"outer optimization failed: {res.message}", float(res.fun), grad_norm)

    beta_std = res.x[:n_beta]
    sigma2 = float(np.exp(res.x[n_beta]))
    rho = float(np.exp(res.x[n_beta + 1]))
    nugget = max(config.nugget_factor * sigma2, 1e-12)
    sigma, chol = sigma_pieces(sigma2, rho)
    sigma_inv = cho_solve(chol, eye)
    b = _site_modes(beta_std, design, y, site_idx, sigma_inv, np.zeros(q))

    eta = design @ beta_std + b[site_idx]
    p = expit(eta)
    w = p * (1.0 - p)
    wsum = np.bincount(site_idx, weights=w, minlength=q)
    hess_b = sigma_inv + np.diag(wsum)
    hess_b_inv = np.linalg.inv(hess_b)
    # beta covariance: invert the site-effect-profiled information
    info_bb = (design * w[:, None]).T @ design
    cross = np.zeros((q, n_beta))
    np.add.at(cross, site_idx, design * w[:, None])
    info = info_bb - cross.T @ hess_b_inv @ cross
    cov_std = np.linalg.inv(info)
    beta, se = _to_original_scale(beta_std, cov_std, std)

    return FittedGlmm(
        coefficients=GlmmCoefficients.from_array(beta),
        coef_se=GlmmCoefficients.from_array(se),
        matern=MaternParams(nu=nu, rho=rho, sigma2=sigma2, nugget=nugget),
        training_locations=tuple(locs),
        site_effect_modes=b,
        site_effect_vars=np.diag(hess_b_inv).copy(),
        standardization=std,
        log_likelihood=-float(res.fun),
        n_evals=int(res.nfev),
    )


# ---------------------------------------------------------------------------
# prediction


def _site_table(sites) -> dict[str, TrapSite]:
    if isinstance(sites, Dataset):
        return sites.site_by_id
    if isinstance(sites, dict):
        return sites
    return {s.trap_id: s for s in sites}


def predict_prob(model: FittedGlmm, pools, sites) -> np.ndarray:
    """Predicted case probability for each pool.

    Pools at training locations reuse that location's posterior-mode site
    effect; new locations get the conditional (kriging) mean of the effect
    given the training modes. ``sites`` supplies trap coordinates (a
    Dataset, a list of TrapSite, or a dict by trap_id).
    """
    table = _site_table(sites)
    x_raw = _raw_design(pools)
    beta = model.coefficients.as_array()

    train_index = {loc: i for i, loc in enumerate(model.training_locations)}
    modes = np.asarray(model.site_effect_modes, dtype=float)
    m = model.matern

    krig_weights = None
    if m.sigma2 > 0 and len(model.training_locations) > 0:
        sigma = build_correlation_matrix(model.training_locations, m, warn_on_escalation=False)
        krig_weights = cho_solve(cho_factor(sigma, lower=True), modes)
    train_lats = np.array([loc[0] for loc in model.training_locations])
    train_lons = np.array([loc[1] for loc in model.training_locations])

    b = np.zeros(len(pools))
    cache: dict[tuple[float, float], float] = {}
    for i, p in enumerate(pools):
        site = table.get(p.trap_id)
        if site is None:
            raise GlmmError(f"unknown trap_id {p.trap_id!r}: no coordinates available")
        loc = (site.latitude, site.longitude)
        if loc in train_index:
            b[i] = modes[train_index[loc]]
        elif m.sigma2 == 0 or krig_weights is None:
            b[i] = 0.0
        else:
            if loc not in cache:
                d = haversine_km(loc[0], loc[1], train_lats, train_lons)
                k = m.sigma2 * matern_correlation(d / m.rho, m.nu)
                cache[loc] = float(k @ krig_weights)
            b[i] = cache[loc]

    return expit(x_raw @ beta + b)


# ---------------------------------------------------------------------------
# serialization

MODEL_FORMAT_VERSION = 1


def model_to_dict(model: FittedGlmm) -> dict:
    return {
        "version": MODEL_FORMAT_VERSION,
        "coefficients": model.coefficients.__dict__,
        "coef_se": model.coef_se.__dict__,
        "matern": model.matern.__dict__,
        "training_locations": [list(loc) for loc in model.training_locations],
        "site_effect_modes": list(map(float, model.site_effect_modes)),
        "site_effect_vars": list(map(float, model.site_effect_vars)),
        "standardization": {
            "offsets": list(map(float, model.standardization.offsets)),
            "scales": list(map(float, model.standardization.scales)),
            "active": [bool(a) for a in model.standardization.active],
        },
        "log_likelihood": model.log_likelihood,
        "nu_profiled": model.nu_profiled,
        "n_evals": model.n_evals,
    }


def model_from_dict(doc: dict) -> FittedGlmm:
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model document version: {doc.get('version')!r}")
    std = doc["standardization"]
    return FittedGlmm(
        coefficients=GlmmCoefficients(**doc["coefficients"]),
        coef_se=GlmmCoefficients(**doc["coef_se"]),
        matern=MaternParams(**doc["matern"]),
        training_locations=tuple(tuple(loc) for loc in doc["training_locations"]),
        site_effect_modes=np.array(doc["site_effect_modes"], dtype=float),
        site_effect_vars=np.array(doc["site_effect_vars"], dtype=float),
        standardization=Standardization(
            offsets=np.array(std["offsets"], dtype=float),
            scales=np.array(std["scales"], dtype=float),
            active=np.array(std["active"], dtype=bool),
        ),
        log_likelihood=float(doc["log_likelihood"]),
        nu_profiled=bool(doc.get("nu_profiled", False)),
        n_evals=int(doc.get("n_evals", 0)),
    )


def save_model(model: FittedGlmm, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2, sort_keys=True))


def load_model(path: str | Path) -> FittedGlmm:
    return model_from_dict(json.loads(Path(path).read_text()))
