"""Streaming CCA engine with exponential forgetting.

Per sample the engine runs a two-phase update.  The metric phase restores
feasibility under the rank-one-updated covariance constraints while
preserving the span, by moving inside the generalized orthogonal groups of
the compressed p x p metrics.  The cost phase then ascends the weighted
trace objective on the generalized Stiefel manifolds proper, using a
closed-form polar retraction that never touches an n x n Gram matrix.

All public operations are pure: they take a state value and return a new
one.  A single engine stream is sequential; independent streams can run in
parallel freely.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .batch import BatchSolution, BrockettWeights, default_weights, solve_batch
from .manifold import RankDeficientError, _gs_columns, spd_inv_sqrt_rank_one

INV_DRIFT_TOL = 1e-6
INIT_REG_EPS = 1e-8


class DegenerateUpdateError(ValueError):
    """A rank-one update denominator collapsed; inputs are corrupted."""


@dataclass(frozen=True)
class CovarianceState:
    """Forgetting-factor covariance estimates with maintained inverses."""

    Cx: np.ndarray
    Cy: np.ndarray
    Cxy: np.ndarray
    Cx_inv: np.ndarray
    Cy_inv: np.ndarray
    mu_x: np.ndarray
    mu_y: np.ndarray
    beta: float
    t: int


@dataclass(frozen=True)
class SubspacePair:
    """Current bases with the cached compressed cross-covariance L = U^T Cxy V."""

    U: np.ndarray
    V: np.ndarray
    L: np.ndarray


@dataclass(frozen=True)
class CompressedQuantities:
    """Per-sample projections, residuals and compressed p x p metrics."""

    z_x: np.ndarray
    z_y: np.ndarray
    f_x: np.ndarray
    f_y: np.ndarray
    Gx: np.ndarray
    Gy: np.ndarray


@dataclass(frozen=True)
class LineSearchConfig:
    initial_step: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    max_trials: int = 20

    def __post_init__(self):
        if self.initial_step <= 0:
            raise ValueError("initial step must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink factor must lie in (0, 1)")
        if self.armijo < 0:
            raise ValueError("sufficient-increase constant must be nonnegative")
        if self.max_trials < 1:
            raise ValueError("need at least one line-search trial")


@dataclass(frozen=True)
class StepConfig:
    """Per-sample update policy: weights, iteration counts, line search."""

    weights: BrockettWeights
    line_search: LineSearchConfig = LineSearchConfig()
    metric_steps: int = 1
    cost_steps: int = 1
    inv_refresh_period: int = 500
    mean_mode: str = "paper"

    def __post_init__(self):
        if self.metric_steps < 0 or self.cost_steps < 0:
            raise ValueError("iteration counts must be nonnegative")
        if self.inv_refresh_period < 1:
            raise ValueError("inverse refresh period must be >= 1")
        if self.mean_mode not in ("paper", "ewma"):
            raise ValueError(f"unknown mean mode {self.mean_mode!r}")

    @classmethod
    def default(cls, p: int) -> "StepConfig":
        return cls(weights=default_weights(p))


@dataclass
class StepDiagnostics:
    """Counters for line-search outcomes across a run."""

    samples: int = 0
    metric_zero_steps: int = 0
    cost_zero_steps: int = 0


def update_mean(mu: np.ndarray, w: np.ndarray, t: int, beta: float,
                mode: str = "paper") -> np.ndarray:
    """Running-mean update for sample t (1-based).

    The default recursion is mu_t = ((t-1)/t) beta mu_{t-1}
    + (w_t + mu_{t-1})/t; "ewma" selects the conventional exponentially
    weighted mean beta*mu + (1-beta)*w instead.
    """
    if t < 1:
        raise ValueError("time index must be >= 1")
    if mode == "paper":
        return ((t - 1) / t) * beta * mu + (w + mu) / t
    if mode == "ewma":
        return beta * mu + (1.0 - beta) * w
    raise ValueError(f"unknown mean mode {mode!r}")


def smw_update(Cinv: np.ndarray, x: np.ndarray, beta: float) -> np.ndarray:
    """Inverse of beta*C + x x^T from the inverse of C (Sherman-Morrison)."""
    Cx = Cinv @ x
    denom = beta + x @ Cx
    if denom <= np.finfo(float).tiny:
        raise DegenerateUpdateError(f"rank-one denominator {denom:.3e} <= 0")
    return (Cinv - np.outer(Cx, Cx) / denom) / beta


def _drift(Cinv: np.ndarray, C: np.ndarray) -> float:
    return float(np.linalg.norm(Cinv @ C - np.eye(C.shape[0])))


def _maintained_inverse(prev_inv: np.ndarray, C_new: np.ndarray, x: np.ndarray,
                        beta: float, t: int, period: int) -> np.ndarray:
    inv = smw_update(prev_inv, x, beta)
    if t % period == 0 or _drift(inv, C_new) > INV_DRIFT_TOL:
        inv = np.linalg.inv(C_new)
    return inv


def update_covariances(state: CovarianceState, x: np.ndarray, y: np.ndarray,
                       config: StepConfig | None = None) -> CovarianceState:
    """Forgetting update of all three covariances for a centered sample pair."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("sample contains non-finite entries")
    beta, t = state.beta, state.t + 1
    period = config.inv_refresh_period if config is not None else 500
    Cx = beta * state.Cx + np.outer(x, x)
    Cy = beta * state.Cy + np.outer(y, y)
    Cxy = beta * state.Cxy + np.outer(x, y)
    return replace(
        state,
        Cx=Cx, Cy=Cy, Cxy=Cxy,
        Cx_inv=_maintained_inverse(state.Cx_inv, Cx, x, beta, t, period),
        Cy_inv=_maintained_inverse(state.Cy_inv, Cy, y, beta, t, period),
        t=t,
    )


def compress(U: np.ndarray, V: np.ndarray, x: np.ndarray, y: np.ndarray,
             Cx_inv: np.ndarray, Cy_inv: np.ndarray, beta: float) -> CompressedQuantities:
    """Project a sample into subspace coordinates and form the residuals.

    z = W^T s is the compressed sample, f = C^{-1} s - W z the part of the
    whitened sample the subspace does not explain, and G = beta*I + z z^T
    the compressed metric of the feasibility-restoration subproblem.
    """
    z_x = U.T @ x
    z_y = V.T @ y
    p = z_x.shape[0]
    return CompressedQuantities(
        z_x=z_x,
        z_y=z_y,
        f_x=Cx_inv @ x - U @ z_x,
        f_y=Cy_inv @ y - V @ z_y,
        Gx=beta * np.eye(p) + np.outer(z_x, z_x),
        Gy=beta * np.eye(p) + np.outer(z_y, z_y),
    )


def _rank_one_inverse(beta: float, z: np.ndarray) -> np.ndarray:
    """(beta*I + z z^T)^{-1} in closed form."""
    p = z.shape[0]
    return (np.eye(p) - np.outer(z, z) / (beta + z @ z)) / beta


def _backtrack(evaluate, f0: float, slope: float, ls: LineSearchConfig):
    """Backtracking search for an Armijo sufficient-increase step.

    Returns (zeta, payload) with zeta = 0 and payload None when no trial
    is accepted (nonpositive slope included).
    """
    if slope <= 0:
        return 0.0, None
    zeta = ls.initial_step
    for _ in range(ls.max_trials):
        value, payload = evaluate(zeta)
        if value >= f0 + ls.armijo * zeta * slope:
            return zeta, payload
        zeta *= ls.shrink
    return 0.0, None


def metric_phase(U: np.ndarray, V: np.ndarray, L: np.ndarray,
                 z_x: np.ndarray, z_y: np.ndarray, beta: float,
                 N: BrockettWeights, config: StepConfig,
                 diag: StepDiagnostics | None = None):
    """Restore feasibility under the rank-one-updated metrics, span preserved.

    Starts from the closed-form inverse square roots of the compressed
    metrics (which alone restore the constraints exactly), then runs
    gradient ascent of tr(Ou^T L Ov N) over the two generalized orthogonal
    groups with an oblique QR retraction and a shared backtracked step.
    Returns (U', V', L') = (U Ou, V Ov, Ou^T L Ov).
    """
    p = U.shape[1]
    w = N.w
    Ou = spd_inv_sqrt_rank_one(beta, z_x)
    Ov = spd_inv_sqrt_rank_one(beta, z_y)
    if config.metric_steps > 0:
        Gx = beta * np.eye(p) + np.outer(z_x, z_x)
        Gy = beta * np.eye(p) + np.outer(z_y, z_y)
        Gx_inv = _rank_one_inverse(beta, z_x)
        Gy_inv = _rank_one_inverse(beta, z_y)
        for _ in range(config.metric_steps):
            M = Ou.T @ L @ Ov
            xi_u = Gx_inv @ ((L @ Ov) * w) - 0.5 * Ou @ (M * w) - 0.5 * Ou @ (w[:, None] * M.T)
            xi_v = Gy_inv @ ((L.T @ Ou) * w) - 0.5 * Ov @ (M.T * w) - 0.5 * Ov @ (w[:, None] * M)
            f0 = float(np.diagonal(M) @ w)
            slope = float(np.diagonal(xi_u.T @ L @ Ov) @ w
                          + np.diagonal(Ou.T @ L @ xi_v) @ w)

            def evaluate(zeta):
                Qu = _gs_columns(Ou + zeta * xi_u, Gx)
                Qv = _gs_columns(Ov + zeta * xi_v, Gy)
                return float(np.diagonal(Qu.T @ L @ Qv) @ w), (Qu, Qv)

            zeta, payload = _backtrack(evaluate, f0, slope, config.line_search)
            if payload is None:
                if diag is not None:
                    diag.metric_zero_steps += 1
                break
            Ou, Ov = payload
    return U @ Ou, V @ Ov, Ou.T @ L @ Ov


def stiefel_gradient(U: np.ndarray, f_x: np.ndarray, z_x: np.ndarray,
                     z_y: np.ndarray, N: BrockettWeights) -> np.ndarray:
    """Ascent direction for the rank-one cost increment at a feasible U.

    f_x z_y^T N + (1/2) U (z_x z_y^T N - N z_y z_x^T); the residual term is
    metric-orthogonal to U and the bracket is skew, so the result is
    tangent by construction.
    """
    a = N.w * z_y
    return np.outer(f_x, a) + 0.5 * (U @ (np.outer(z_x, a) - np.outer(a, z_x)))


def efficient_polar_update(U: np.ndarray, f_x: np.ndarray, z_x: np.ndarray,
                           z_y: np.ndarray, N: BrockettWeights, zeta: float,
                           Cx_quadform: float) -> np.ndarray:
    """Polar retraction of the stiefel_gradient step in O(np) flops.

    Exploits that the step's Gram matrix is supported on the two orthogonal
    directions N z_y and the deflated zbar = z_x - proj_{N z_y}(z_x), so the
    inverse square root reduces to two rank-one corrections.  Needs the
    scalar f_x^T Cx f_x but never a dense xi^T Cx xi product.  Equals
    polar_retract(U, stiefel_gradient(...), zeta) exactly.
    """
    if zeta < 0:
        raise ValueError("step must be nonnegative")
    w = N.w
    a = w * z_y
    aa = float(a @ a)
    if aa <= np.finfo(float).tiny:
        # zero gradient: the retraction reduces to the identity
        return U.copy()
    gamma = float(z_x @ a) / aa
    zbar = z_x - gamma * a
    zz = float(zbar @ zbar)
    zeta2 = zeta * zeta
    Ua = U @ a
    if np.sqrt(zz) <= 1e-12 * np.linalg.norm(z_x):
        # z_x collinear with N z_y: the deflated projector vanishes
        alpha = Cx_quadform * aa * zeta2
        rho = 1.0 - 1.0 / np.sqrt(1.0 + alpha)
        return U - (rho / aa) * np.outer(Ua, a) + (zeta * (1.0 - rho)) * np.outer(f_x, a)
    alpha = (Cx_quadform + 0.25 * zz) * aa * zeta2
    alpha_bar = 0.25 * zz * aa * zeta2
    rho = 1.0 - 1.0 / np.sqrt(1.0 + alpha)
    rho_bar = 1.0 - 1.0 / np.sqrt(1.0 + alpha_bar)
    Uz = U @ zbar
    return (U
            - (rho / aa) * np.outer(Ua, a)
            - (rho_bar / zz) * np.outer(Uz, zbar)
            + (zeta * (1.0 - rho)) * np.outer(f_x, a)
            + (0.5 * zeta * (1.0 - rho)) * np.outer(Uz, a)
            - (0.5 * zeta * (1.0 - rho_bar)) * np.outer(Ua, zbar))


def _cost_phase(U, V, Cx, Cy, Cx_inv, Cy_inv, Cxy_new, x, y, config, diag=None):
    """Shared-step gradient ascent of tr(U^T Cxy_new V N) on both manifolds."""
    N = config.weights
    w = N.w
    for _ in range(config.cost_steps):
        z_x, z_y = U.T @ x, V.T @ y
        f_x = Cx_inv @ x - U @ z_x
        f_y = Cy_inv @ y - V @ z_y
        xi_u = stiefel_gradient(U, f_x, z_x, z_y, N)
        xi_v = stiefel_gradient(V, f_y, z_y, z_x, N)
        CV = Cxy_new @ V
        f0 = float(np.diagonal(U.T @ CV) @ w)
        slope = float(np.diagonal(xi_u.T @ CV) @ w
                      + np.diagonal(U.T @ Cxy_new @ xi_v) @ w)
        qx = float(f_x @ Cx @ f_x)
        qy = float(f_y @ Cy @ f_y)

        def evaluate(zeta):
            Uc = efficient_polar_update(U, f_x, z_x, z_y, N, zeta, qx)
            Vc = efficient_polar_update(V, f_y, z_y, z_x, N, zeta, qy)
            return float(np.diagonal(Uc.T @ Cxy_new @ Vc) @ w), (Uc, Vc)

        zeta, payload = _backtrack(evaluate, f0, slope, config.line_search)
        if payload is None:
            if diag is not None:
                diag.cost_zero_steps += 1
            break
        U, V = payload
    return U, V, U.T @ Cxy_new @ V


def cost_phase(U: np.ndarray, V: np.ndarray, state: CovarianceState,
               x: np.ndarray, y: np.ndarray, config: StepConfig,
               diag: StepDiagnostics | None = None):
    """Cost ascent against the forgetting-updated cross-covariance.

    `state` must carry the already-updated auto-covariances and inverses
    (the metric phase ran first); the cross-covariance update
    beta*Cxy + x y^T is formed here as the ascent target.  Returns
    (U_next, V_next, L_next) with L_next consistent with that target.
    """
    Cxy_new = state.beta * state.Cxy + np.outer(x, y)
    return _cost_phase(U, V, state.Cx, state.Cy, state.Cx_inv, state.Cy_inv,
                       Cxy_new, x, y, config, diag)


def step(state: CovarianceState, subspaces: SubspacePair,
         x_raw: np.ndarray, y_raw: np.ndarray, config: StepConfig,
         diag: StepDiagnostics | None = None):
    """Process one raw sample pair; returns the new (state, subspaces).

    Sequence: center with the running means, update the means, restore
    feasibility (metric phase), update auto-covariances and their
    inverses, recompute compressed samples and residuals, ascend the cost
    (cost phase), update the cross-covariance and the cached L.
    """
    x = np.asarray(x_raw, dtype=float) - state.mu_x
    y = np.asarray(y_raw, dtype=float) - state.mu_y
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("sample contains non-finite entries")
    beta = state.beta
    t_new = state.t + 1
    mu_x = update_mean(state.mu_x, np.asarray(x_raw, dtype=float), t_new, beta, config.mean_mode)
    mu_y = update_mean(state.mu_y, np.asarray(y_raw, dtype=float), t_new, beta, config.mean_mode)

    z_x = subspaces.U.T @ x
    z_y = subspaces.V.T @ y
    U1, V1, L1 = metric_phase(subspaces.U, subspaces.V, subspaces.L,
                              z_x, z_y, beta, config.weights, config, diag)

    Cx = beta * state.Cx + np.outer(x, x)
    Cy = beta * state.Cy + np.outer(y, y)
    Cx_inv = _maintained_inverse(state.Cx_inv, Cx, x, beta, t_new, config.inv_refresh_period)
    Cy_inv = _maintained_inverse(state.Cy_inv, Cy, y, beta, t_new, config.inv_refresh_period)

    Cxy = beta * state.Cxy + np.outer(x, y)
    U2, V2, L2 = _cost_phase(U1, V1, Cx, Cy, Cx_inv, Cy_inv, Cxy, x, y, config, diag)

    if diag is not None:
        diag.samples += 1
    new_state = CovarianceState(Cx=Cx, Cy=Cy, Cxy=Cxy, Cx_inv=Cx_inv, Cy_inv=Cy_inv,
                                mu_x=mu_x, mu_y=mu_y, beta=beta, t=t_new)
    return new_state, SubspacePair(U=U2, V=V2, L=L2)


def _regularized(C: np.ndarray, name: str) -> np.ndarray:
    """Nudge a window covariance to SPD; raise if that is not enough."""
    try:
        np.linalg.cholesky(C)
        return C
    except np.linalg.LinAlgError:
        pass
    d = C.shape[0]
    Creg = C + INIT_REG_EPS * (np.trace(C) / d) * np.eye(d)
    try:
        np.linalg.cholesky(Creg)
    except np.linalg.LinAlgError as exc:
        raise RankDeficientError(f"{name} window covariance rank-deficient") from exc
    return Creg


def init_from_window(samples_x: np.ndarray, samples_y: np.ndarray, p: int,
                     beta: float, N: BrockettWeights | None = None,
                     mean_mode: str = "paper"):
    """Warm start: accumulate a window with forgetting, solve it exactly.

    Returns a (CovarianceState, SubspacePair) ready for step(); the
    subspaces come from the batch solver on the windowed covariances, so
    they are feasible and L is diagonal.
    """
    X = np.atleast_2d(np.asarray(samples_x, dtype=float))
    Y = np.atleast_2d(np.asarray(samples_y, dtype=float))
    W = X.shape[0]
    if Y.shape[0] != W:
        raise ValueError("view windows differ in length")
    if W < p:
        raise ValueError(f"window length {W} shorter than rank {p}")
    n, m = X.shape[1], Y.shape[1]
    mu_x, mu_y = np.zeros(n), np.zeros(m)
    Cx, Cy, Cxy = np.zeros((n, n)), np.zeros((m, m)), np.zeros((n, m))
    for i in range(W):
        xc = X[i] - mu_x
        yc = Y[i] - mu_y
        mu_x = update_mean(mu_x, X[i], i + 1, beta, mean_mode)
        mu_y = update_mean(mu_y, Y[i], i + 1, beta, mean_mode)
        Cx = beta * Cx + np.outer(xc, xc)
        Cy = beta * Cy + np.outer(yc, yc)
        Cxy = beta * Cxy + np.outer(xc, yc)
    Cx = _regularized(Cx, "x")
    Cy = _regularized(Cy, "y")
    sol: BatchSolution = solve_batch(Cx, Cy, Cxy, p)
    state = CovarianceState(Cx=Cx, Cy=Cy, Cxy=Cxy,
                            Cx_inv=np.linalg.inv(Cx), Cy_inv=np.linalg.inv(Cy),
                            mu_x=mu_x, mu_y=mu_y, beta=beta, t=W)
    return state, SubspacePair(U=sol.U, V=sol.V, L=sol.L)


def init_random(n: int, m: int, p: int, beta: float, rng: np.random.Generator,
                scale: float = 1.0):
    """Cold start: identity-scaled covariances and random feasible bases."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    Cx = scale * np.eye(n)
    Cy = scale * np.eye(m)
    U = _gs_columns(rng.standard_normal((n, p)), Cx)
    V = _gs_columns(rng.standard_normal((m, p)), Cy)
    state = CovarianceState(Cx=Cx, Cy=Cy, Cxy=np.zeros((n, m)),
                            Cx_inv=np.eye(n) / scale, Cy_inv=np.eye(m) / scale,
                            mu_x=np.zeros(n), mu_y=np.zeros(m), beta=beta, t=0)
    return state, SubspacePair(U=U, V=V, L=np.zeros((p, p)))
