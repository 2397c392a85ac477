"""Maximum-likelihood estimation of MNL, panel mixed logit (simulated
likelihood over Halton draws) and latent class models.

All likelihoods return analytic gradients; standard errors are
respondent-clustered sandwich estimates built from a finite-difference
Hessian of the analytic gradient.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np
from scipy.stats import norm

from . import modelspec as ms
from .dataset import ChoiceDataset
from .draws import DEFAULT_R, DrawSet, halton_draws
from .errors import NonFiniteUtility, SingularHessian
from .modelspec import DesignMatrix, ModelSpecification, design_matrix
from .optimize import finite_difference_hessian, maximize

LOG_THIRD = float(np.log(1.0 / 3.0))


@dataclass
class EstimationOptions:
    draws: int = DEFAULT_R
    n_starts: int = 5
    seed: int = 0
    max_iter: int = 500
    grad_tol: float = 1e-6


@dataclass
class EstimationResult:
    spec_key: str
    family: int
    param_names: list
    estimates: np.ndarray
    robust_se: np.ndarray
    t_stat: np.ndarray
    p_value: np.ndarray
    ll_null: float
    ll_init: float
    ll_final: float
    gradient_norm: float
    hessian: np.ndarray
    robust_covariance: np.ndarray
    n_obs: int
    n_individuals: int
    n_params: int
    draws_used: int
    n_starts: int
    converged: bool
    wall_time: float
    singular_hessian: bool = False
    boundary_class_share: bool = False
    class_shares: list = field(default_factory=list)
    #: distribution markers for random coefficients, e.g. "lognormal_cost"
    dist_tags: tuple = ()

    @property
    def misspecified(self) -> bool:
        return (not self.converged) or self.singular_hessian or self.boundary_class_share

    def to_dict(self) -> dict:
        """Serializable form.  Wall time is a run diagnostic and is kept out
        of persisted/compared payloads so replayed estimations match."""
        return {
            "spec_key": self.spec_key,
            "family": self.family,
            "param_names": list(self.param_names),
            "estimates": [float(v) for v in self.estimates],
            "robust_se": [float(v) for v in self.robust_se],
            "t_stat": [float(v) for v in self.t_stat],
            "p_value": [float(v) for v in self.p_value],
            "ll_null": self.ll_null,
            "ll_init": self.ll_init,
            "ll_final": self.ll_final,
            "gradient_norm": self.gradient_norm,
            "n_obs": self.n_obs,
            "n_individuals": self.n_individuals,
            "n_params": self.n_params,
            "draws_used": self.draws_used,
            "n_starts": self.n_starts,
            "converged": self.converged,
            "singular_hessian": self.singular_hessian,
            "boundary_class_share": self.boundary_class_share,
            "class_shares": [float(v) for v in self.class_shares],
            "dist_tags": list(self.dist_tags),
        }


# ---------------------------------------------------------------------------
# MNL


def _boxcox_value(x, lam):
    if abs(lam) < 1e-8:
        return np.log(x)
    return (np.power(x, lam) - 1.0) / lam


def _boxcox_dlambda(x, lam):
    logx = np.log(x)
    if abs(lam) < 1e-8:
        return 0.5 * logx ** 2
    xl = np.power(x, lam)
    return (lam * xl * logx - (xl - 1.0)) / lam ** 2


def _utilities(params, dm: DesignMatrix) -> np.ndarray:
    theta = np.asarray(params, dtype=float)
    v = dm.x_linear @ theta
    for g in dm.boxcox:
        bcx = _boxcox_value(g.x, theta[g.lambda_index])
        for beta_idx, w in g.terms:
            v += theta[beta_idx] * w * bcx
    if not np.all(np.isfinite(v)):
        raise NonFiniteUtility("non-finite systematic utility")
    return v


def _log_probs(v: np.ndarray) -> np.ndarray:
    shifted = v - v.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def mnl_loglik(params, dm: DesignMatrix):
    """Multinomial logit log-likelihood and analytic gradient."""
    ll, _, grad = _mnl_parts(params, dm)
    return ll, grad


def _mnl_parts(params, dm: DesignMatrix):
    theta = np.asarray(params, dtype=float)
    v = _utilities(theta, dm)
    logp = _log_probs(v)
    rows = np.arange(dm.n_rows)
    ll = float(logp[rows, dm.choice].sum())
    resid = -np.exp(logp)
    resid[rows, dm.choice] += 1.0
    grad = np.einsum("ra,rak->k", resid, dm.x_linear)
    for g in dm.boxcox:
        lam = theta[g.lambda_index]
        bcx = _boxcox_value(g.x, lam)
        dbc = _boxcox_dlambda(g.x, lam)
        for beta_idx, w in g.terms:
            grad[beta_idx] += float((resid * w * bcx).sum())
            grad[g.lambda_index] += theta[beta_idx] * float((resid * w * dbc).sum())
    return ll, resid, grad


def mnl_scores(params, dm: DesignMatrix) -> np.ndarray:
    """Per-respondent score vectors (for clustered sandwich covariance)."""
    theta = np.asarray(params, dtype=float)
    _, resid, _ = _mnl_parts(theta, dm)
    row_scores = np.einsum("ra,rak->rk", resid, dm.x_linear)
    for g in dm.boxcox:
        lam = theta[g.lambda_index]
        bcx = _boxcox_value(g.x, lam)
        dbc = _boxcox_dlambda(g.x, lam)
        for beta_idx, w in g.terms:
            row_scores[:, beta_idx] += (resid * w * bcx).sum(axis=1)
            row_scores[:, g.lambda_index] += theta[beta_idx] * (resid * w * dbc).sum(axis=1)
    scores = np.zeros((dm.n_individuals, dm.n_params))
    np.add.at(scores, dm.individual_index, row_scores)
    return scores


# ---------------------------------------------------------------------------
# panel mixed logit


def _random_betas(params, dm: DesignMatrix, draws: DrawSet):
    """Per-individual coefficient draws and their mu/sigma derivatives."""
    theta = np.asarray(params, dtype=float)
    betas, dmu, dsigma = [], [], []
    for d, rc in enumerate(dm.random_coefs):
        xi = draws.values[:, :, d]
        mu, sigma = theta[rc.mu_index], theta[rc.sigma_index]
        if rc.lognormal:
            b = rc.sign * np.exp(mu + sigma * xi)
            betas.append(b)
            dmu.append(b)
            dsigma.append(b * xi)
        else:
            betas.append(mu + sigma * xi)
            dmu.append(np.ones_like(xi))
            dsigma.append(xi)
    return betas, dmu, dsigma


def _mmnl_parts(params, dm: DesignMatrix, draws: DrawSet):
    theta = np.asarray(params, dtype=float)
    r = draws.r
    theta_fixed = theta.copy()
    for rc in dm.random_coefs:
        theta_fixed[rc.mu_index] = 0.0
        theta_fixed[rc.sigma_index] = 0.0
    v_fixed = dm.x_linear @ theta_fixed            # (rows, 3)
    betas, dmu, dsigma = _random_betas(theta, dm, draws)
    v = np.repeat(v_fixed[:, None, :], r, axis=1)  # (rows, R, 3)
    for rc, b in zip(dm.random_coefs, betas):
        v += b[dm.individual_index][:, :, None] * rc.x[:, None, :]
    if not np.all(np.isfinite(v)):
        raise NonFiniteUtility("non-finite systematic utility")
    logp = _log_probs(v)
    rows = np.arange(dm.n_rows)
    chosen = logp[rows, :, dm.choice]              # (rows, R)
    log_l = np.zeros((dm.n_individuals, r))
    np.add.at(log_l, dm.individual_index, chosen)
    m = log_l.max(axis=1, keepdims=True)
    ll_n = (m[:, 0] + np.log(np.exp(log_l - m).sum(axis=1))) - np.log(r)
    ll = float(ll_n.sum())
    # simulator weights: w_nr = L_nr / (R * S_n), rows of w sum to one
    w = np.exp(log_l - ll_n[:, None] - np.log(r))
    resid = -np.exp(logp)
    resid[rows, :, dm.choice] += 1.0               # (rows, R, 3)
    wresid = w[dm.individual_index][:, :, None] * resid
    return theta, ll, ll_n, wresid, betas, dmu, dsigma


def mmnl_simulated_loglik(params, dm: DesignMatrix, draws: DrawSet):
    """Panel simulated log-likelihood and analytic gradient."""
    theta, ll, _, wresid, _, dmu, dsigma = _mmnl_parts(params, dm, draws)
    grad = np.einsum("tra,tak->k", wresid, dm.x_linear)
    for rc, dm_mu, dm_sigma in zip(dm.random_coefs, dmu, dsigma):
        grad[rc.mu_index] = float(np.einsum(
            "tra,ta,tr->", wresid, rc.x, dm_mu[dm.individual_index]))
        grad[rc.sigma_index] = float(np.einsum(
            "tra,ta,tr->", wresid, rc.x, dm_sigma[dm.individual_index]))
    return ll, grad


def mmnl_scores(params, dm: DesignMatrix, draws: DrawSet) -> np.ndarray:
    theta, _, _, wresid, _, dmu, dsigma = _mmnl_parts(params, dm, draws)
    row_scores = np.einsum("tra,tak->tk", wresid, dm.x_linear)
    for rc, dm_mu, dm_sigma in zip(dm.random_coefs, dmu, dsigma):
        row_scores[:, rc.mu_index] = np.einsum(
            "tra,ta,tr->t", wresid, rc.x, dm_mu[dm.individual_index])
        row_scores[:, rc.sigma_index] = np.einsum(
            "tra,ta,tr->t", wresid, rc.x, dm_sigma[dm.individual_index])
    scores = np.zeros((dm.n_individuals, dm.n_params))
    np.add.at(scores, dm.individual_index, row_scores)
    return scores


# ---------------------------------------------------------------------------
# latent class


def _lc_split(params, dm: DesignMatrix):
    theta = np.asarray(params, dtype=float)
    c, k = dm.n_class, dm.k_class
    class_params = [theta[i * k:(i + 1) * k] for i in range(c)]
    m = dm.membership_z.shape[1]
    gammas = [theta[c * k + (i - 2) * m: c * k + (i - 1) * m] for i in range(2, c + 1)]
    return class_params, gammas


def _lc_parts(params, dm: DesignMatrix):
    class_params, gammas = _lc_split(params, dm)
    c = dm.n_class
    rows = np.arange(dm.n_rows)
    log_l = np.zeros((dm.n_individuals, c))
    resids = []
    for ci, theta_c in enumerate(class_params):
        v = dm.x_linear @ theta_c
        if not np.all(np.isfinite(v)):
            raise NonFiniteUtility("non-finite systematic utility")
        logp = _log_probs(v)
        np.add.at(log_l[:, ci], dm.individual_index, logp[rows, dm.choice])
        resid = -np.exp(logp)
        resid[rows, dm.choice] += 1.0
        resids.append(resid)
    u = np.zeros((dm.n_individuals, c))
    for ci, gamma in enumerate(gammas, start=1):
        u[:, ci] = dm.membership_z @ gamma
    log_pi = _log_probs(u)
    joint = log_pi + log_l
    m = joint.max(axis=1, keepdims=True)
    ll_n = m[:, 0] + np.log(np.exp(joint - m).sum(axis=1))
    ll = float(ll_n.sum())
    post = np.exp(joint - ll_n[:, None])          # (n_ind, C), rows sum to 1
    pi = np.exp(log_pi)
    return ll, resids, post, pi


def lc_loglik(params, dm: DesignMatrix):
    """Latent class mixture log-likelihood and analytic gradient."""
    ll, resids, post, pi = _lc_parts(params, dm)
    c, k = dm.n_class, dm.k_class
    m = dm.membership_z.shape[1]
    grad = np.zeros(dm.n_params)
    for ci in range(c):
        h_rows = post[dm.individual_index, ci]
        grad[ci * k:(ci + 1) * k] = np.einsum(
            "t,ta,tak->k", h_rows, resids[ci], dm.x_linear)
    for ci in range(1, c):
        delta = post[:, ci] - pi[:, ci]
        grad[c * k + (ci - 1) * m: c * k + ci * m] = delta @ dm.membership_z
    return ll, grad


def lc_scores(params, dm: DesignMatrix) -> np.ndarray:
    _, resids, post, pi = _lc_parts(params, dm)
    c, k = dm.n_class, dm.k_class
    m = dm.membership_z.shape[1]
    scores = np.zeros((dm.n_individuals, dm.n_params))
    for ci in range(c):
        row = np.einsum("ta,tak->tk", resids[ci], dm.x_linear)
        block = np.zeros((dm.n_individuals, k))
        np.add.at(block, dm.individual_index, row)
        scores[:, ci * k:(ci + 1) * k] = post[:, ci:ci + 1] * block
    for ci in range(1, c):
        delta = (post[:, ci] - pi[:, ci])[:, None]
        scores[:, c * k + (ci - 1) * m: c * k + ci * m] = delta * dm.membership_z
    return scores


def lc_class_shares(params, dm: DesignMatrix) -> np.ndarray:
    _, _, _, pi = _lc_parts(params, dm)
    return pi.mean(axis=0)


def _relabel_lc(params, dm: DesignMatrix) -> np.ndarray:
    """Reorder classes by ascending cost coefficient to pin label switching."""
    class_params, gammas = _lc_split(params, dm)
    base_names = [n[:-len("_c1")] for n in dm.param_names[:dm.k_class]]
    cost_idx = base_names.index("b_cost")
    order = np.argsort([cp[cost_idx] for cp in class_params], kind="stable")
    if np.array_equal(order, np.arange(dm.n_class)):
        return np.asarray(params, dtype=float).copy()
    m = dm.membership_z.shape[1]
    utilities = [np.zeros(m)] + list(gammas)      # class membership utilities
    new = [class_params[i] for i in order]
    ref = utilities[order[0]]
    new_gammas = [utilities[i] - ref for i in order[1:]]
    return np.concatenate(new + new_gammas)


# ---------------------------------------------------------------------------
# covariance and result assembly


def robust_covariance(hessian: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Respondent-clustered sandwich: H^-1 (sum_n g_n g_n') H^-1."""
    hessian = np.asarray(hessian, dtype=float)
    n = hessian.shape[0]
    cond = np.linalg.cond(hessian)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularHessian(f"hessian condition number {cond:.3g}")
    try:
        h_inv = np.linalg.inv(hessian)
    except np.linalg.LinAlgError as exc:
        raise SingularHessian(str(exc))
    bread = np.asarray(scores, dtype=float)
    meat = bread.T @ bread
    cov = h_inv @ meat @ h_inv
    return 0.5 * (cov + cov.T)


def null_loglik(n_rows: int) -> float:
    return n_rows * LOG_THIRD


def _finalize(spec, dm, objective, scores_func, x0, opts, draws_used, n_starts,
              presolved=None):
    start = time.perf_counter()
    ll_init, _ = objective(x0)
    if presolved is None:
        x, ll_final, grad, diag = maximize(
            objective, x0, grad_tol=opts.grad_tol, max_iter=opts.max_iter,
            bounds=dm.bounds or None)
    else:
        x, ll_final, grad, diag = presolved
    hessian = finite_difference_hessian(lambda p: objective(p)[1], x)
    singular = False
    k = dm.n_params
    try:
        cov = robust_covariance(hessian, scores_func(x))
    except SingularHessian:
        singular = True
        cov = np.full((k, k), np.nan)
    diag_var = np.clip(np.diag(cov), 0.0, None)
    se = np.sqrt(diag_var)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, x / se, np.nan)
    p = 2.0 * norm.sf(np.abs(t))
    return EstimationResult(
        spec_key=ms.canonical_key(spec),
        family=spec.family,
        param_names=list(dm.param_names),
        estimates=x,
        robust_se=se,
        t_stat=t,
        p_value=p,
        ll_null=null_loglik(dm.n_rows),
        ll_init=float(ll_init),
        ll_final=float(ll_final),
        gradient_norm=float(np.max(np.abs(grad))) if k else 0.0,
        hessian=hessian,
        robust_covariance=cov,
        n_obs=dm.n_rows,
        n_individuals=dm.n_individuals,
        n_params=k,
        draws_used=draws_used,
        n_starts=n_starts,
        converged=diag.converged,
        wall_time=time.perf_counter() - start,
        singular_hessian=singular,
    )


def estimate_mnl(spec: ModelSpecification, ds: ChoiceDataset,
                 opts: EstimationOptions | None = None) -> EstimationResult:
    opts = opts or EstimationOptions()
    dm = design_matrix(spec, ds)
    x0 = np.zeros(dm.n_params)
    for idx, _, _ in dm.bounds:  # box-cox lambdas start at 1
        x0[idx] = 1.0
    return _finalize(spec, dm, lambda p: mnl_loglik(p, dm),
                     lambda p: mnl_scores(p, dm), x0, opts,
                     draws_used=0, n_starts=1)


def _matching_mnl_spec(spec: ModelSpecification) -> ModelSpecification:
    return dc_replace(spec, family=ms.MNL, dist=(ms.DIST_FIXED,) * 6,
                      n_class=0, membership=(False,) * 6)


def estimate_mmnl(spec: ModelSpecification, ds: ChoiceDataset,
                  opts: EstimationOptions | None = None,
                  draws: DrawSet | None = None) -> EstimationResult:
    """Panel mixed logit, warm-started from the matching fixed-coefficient
    MNL with sigmas at 0.1."""
    opts = opts or EstimationOptions()
    dm = design_matrix(spec, ds)
    if draws is None:
        draws = halton_draws(dm.n_individuals, opts.draws, dims=len(dm.random_coefs))
    mnl_res = estimate_mnl(_matching_mnl_spec(spec), ds, opts)
    x0 = np.zeros(dm.n_params)
    x0[:len(mnl_res.estimates)] = mnl_res.estimates
    for rc in dm.random_coefs:
        if rc.lognormal:
            x0[rc.mu_index] = np.log(max(abs(mnl_res.estimates[rc.mu_index]), 1e-3))
        x0[rc.sigma_index] = 0.1
    objective = lambda p: mmnl_simulated_loglik(p, dm, draws)
    solved = maximize(objective, x0, grad_tol=opts.grad_tol, max_iter=opts.max_iter)
    x = solved[0].copy()
    # the likelihood is symmetric in sigma; report the positive branch
    for rc in dm.random_coefs:
        x[rc.sigma_index] = abs(x[rc.sigma_index])
    ll, grad = objective(x)
    res = _finalize(spec, dm, objective,
                    lambda p: mmnl_scores(p, dm, draws), x0, opts,
                    draws_used=draws.r, n_starts=1,
                    presolved=(x, ll, grad, solved[3]))
    res.dist_tags = tuple(
        ("lognormal_" if rc.lognormal else "normal_") + rc.name.lower()
        for rc in dm.random_coefs)
    return res


def estimate_lc(spec: ModelSpecification, ds: ChoiceDataset,
                opts: EstimationOptions | None = None) -> EstimationResult:
    """Latent class mixture: best of ``n_starts`` seeded random starts around
    the MNL warm start; classes relabelled by ascending cost coefficient."""
    opts = opts or EstimationOptions()
    dm = design_matrix(spec, ds)
    mnl_res = estimate_mnl(_matching_mnl_spec(spec), ds, opts)
    warm = np.zeros(dm.n_params)
    for c in range(dm.n_class):
        warm[c * dm.k_class:(c + 1) * dm.k_class] = mnl_res.estimates
    objective = lambda p: lc_loglik(p, dm)

    # Uniform[-0.5, 0.5] start noise, scaled per parameter so a perturbation
    # moves utilities by O(0.5) regardless of the attribute's raw units
    # (cost codes are two orders of magnitude larger than the ordinal ones).
    scale = np.ones(dm.n_params)
    diff = dm.x_linear - dm.x_linear[:, :1, :]
    col_sd = diff.reshape(-1, dm.k_class).std(axis=0) if dm.k_class else np.ones(0)
    for c in range(dm.n_class):
        block = slice(c * dm.k_class, (c + 1) * dm.k_class)
        scale[block] = 1.0 / np.maximum(col_sd, 1.0)

    best = None
    for s in range(opts.n_starts):
        rng = np.random.default_rng(opts.seed + s)
        x0 = warm + rng.uniform(-0.5, 0.5, size=dm.n_params) * scale
        solved = maximize(objective, x0, grad_tol=opts.grad_tol,
                          max_iter=opts.max_iter)
        if best is None or solved[1] > best[0][1]:
            best = (solved, x0)
    solved, x0_best = best
    x = _relabel_lc(solved[0], dm)
    ll, grad = objective(x)
    presolved = (x, ll, grad, solved[3])
    res = _finalize(spec, dm, objective, lambda p: lc_scores(p, dm), x0_best,
                    opts, draws_used=0, n_starts=opts.n_starts,
                    presolved=presolved)
    shares = lc_class_shares(x, dm)
    res.class_shares = [float(v) for v in shares]
    res.boundary_class_share = bool(np.any(shares < 0.01))
    return res
