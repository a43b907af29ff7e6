"""Structured correlation matrix factorization solved by multiplicative updates.

Minimizes

    α‖X − VQ‖² + β‖Y − VB‖² + γ‖R_w − QᵀB‖² + δ‖XQᵀ − YBᵀ‖² + ε‖QᵀB‖₂,₁ + ‖V‖²

over non-negative V (n×k), Q (k×d) and B (k×c). The ℓ2,1 term is handled through
the reweighting matrix D with D_ii = 1 / (2·sqrt(‖W_i‖² + c)), W = QᵀB.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from config import logger

DENOMINATOR_GUARD = 1e-12


class DivergenceError(ArithmeticError):
    """Raised when the objective becomes non-finite."""

    def __init__(self, iteration, value):
        self.iteration = iteration
        self.value = value
        super().__init__(f"Objective became non-finite ({value}) at iteration {iteration}")


@dataclass(frozen=True)
class Hyperparams:
    alpha: float = 0.5
    beta: float = 0.5
    gamma: float = 0.5
    delta: float = 0.5
    epsilon: float = 0.5
    k: int = None
    max_iter: int = 300
    tol: float = 1e-5
    d_smoothing: float = 1e-8
    abs_tol: float = None

    def __post_init__(self):
        for name in ('alpha', 'beta', 'gamma', 'delta', 'epsilon'):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.k is not None and self.k < 1:
            raise ValueError(f"k must be at least 1, got {self.k}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if not self.d_smoothing > 0:
            raise ValueError(f"d_smoothing must be positive, got {self.d_smoothing}")
        if self.abs_tol is not None and not self.abs_tol > 0:
            raise ValueError(f"abs_tol must be positive when set, got {self.abs_tol}")

    def resolve_k(self, n, d, c):
        """Latent dimension: the configured k (or min(c, 10)) clipped to min(d, c, n)."""
        k = self.k if self.k is not None else min(c, 10)
        limit = min(d, c, n)
        if k > limit:
            logger.warning(f"k={k} exceeds min(d, c, n)={limit}; clipping")
            k = limit
        return k


@dataclass(eq=False)
class FactorizationState:
    V: np.ndarray
    Q: np.ndarray
    B: np.ndarray
    D: np.ndarray
    objective_trace: list = field(default_factory=list)
    initial_objective: float = None
    converged: bool = False

    @property
    def W(self):
        return self.Q.T @ self.B

    @property
    def D_matrix(self):
        return np.diag(self.D)


def ablation_variant(hp, drop):
    """Hyperparameters with one component switched off.

    drop='RW' zeroes γ (the pipeline also replaces R_w by the normalized MI and
    skips the walk); drop='FLA' zeroes δ.
    """
    drop = drop.upper()
    if drop == 'RW':
        return replace(hp, gamma=0.0)
    if drop == 'FLA':
        return replace(hp, delta=0.0)
    raise ValueError(f"Unknown ablation component '{drop}', expected 'RW' or 'FLA'")


def _check_shapes(X, Y, R_w, state):
    n, d = X.shape
    c = Y.shape[1]
    k = state.V.shape[1]
    expected = {
        'Y': (Y.shape, (n, c)),
        'R_w': (R_w.shape, (d, c)),
        'V': (state.V.shape, (n, k)),
        'Q': (state.Q.shape, (k, d)),
        'B': (state.B.shape, (k, c)),
        'D': (state.D.shape, (d,)),
    }
    for name, (actual, wanted) in expected.items():
        if actual != wanted:
            raise ValueError(f"Shape mismatch for {name}: expected {wanted}, got {actual}")


def l21_norm(M):
    return float(np.linalg.norm(M, axis=1).sum())


def objective(X, Y, R_w, state, hp):
    """Value of the six-term objective at `state`."""
    _check_shapes(X, Y, R_w, state)
    V, Q, B = state.V, state.Q, state.B
    W = Q.T @ B
    return float(
        hp.alpha * np.sum((X - V @ Q) ** 2)
        + hp.beta * np.sum((Y - V @ B) ** 2)
        + hp.gamma * np.sum((R_w - W) ** 2)
        + hp.delta * np.sum((X @ Q.T - Y @ B.T) ** 2)
        + hp.epsilon * l21_norm(W)
        + np.sum(V ** 2)
    )


def update_D(Q, B, c):
    """Diagonal of D with D_ii = 1 / (2·sqrt(‖(QᵀB)_i‖² + c))."""
    W = Q.T @ B
    return 1.0 / (2.0 * np.sqrt(np.sum(W ** 2, axis=1) + c))


def _multiplicative(Z, curvature, linear, signed_curvature=None):
    """One majorize-minimize step for a block whose half-gradient is
    curvature + signed_curvature − linear.

    `curvature` is the product of Z with the non-negative quadratic coefficients,
    `signed_curvature` the product with a coefficient that may hold negative
    entries, and `linear` the (possibly signed) constant part. Negative mass of
    the signed parts moves to the numerator:

        Z ← Z ⊙ (linear⁺ + 2·S⁻) / (curvature + S⁺ + S⁻ + linear⁻)

    where S = signed_curvature = S⁺ − S⁻. With non-negative inputs this is the
    plain Z ⊙ linear / curvature rule.
    """
    up = np.maximum(linear, 0)
    down = curvature + np.maximum(-linear, 0)
    if signed_curvature is not None:
        positive, negative = signed_curvature
        up = up + 2.0 * negative
        down = down + positive + negative
    return Z * up / (down + DENOMINATOR_GUARD)


def _split(M):
    return np.maximum(M, 0), np.maximum(-M, 0)


def update_V(state, X, Y, hp):
    """V ← V ⊙ (αXQᵀ + βYBᵀ) / (αVQQᵀ + βVBBᵀ + V)."""
    V, Q, B = state.V, state.Q, state.B
    linear = hp.alpha * X @ Q.T + hp.beta * Y @ B.T
    curvature = hp.alpha * V @ (Q @ Q.T) + hp.beta * V @ (B @ B.T) + V
    return _multiplicative(V, curvature, linear)


def update_Q(state, X, Y, R_w, hp):
    """Q ← Q ⊙ (αVᵀX + γBR_wᵀ + δBYᵀX) / (αVᵀVQ + γBBᵀQ + εBBᵀQD + δQXᵀX).

    D is recomputed from the current Q and B before use. XᵀX is split into
    its positive and negative parts, each multiplied by Q on its own.
    """
    V, Q, B = state.V, state.Q, state.B
    D = update_D(Q, B, hp.d_smoothing)
    BBt = B @ B.T
    linear = hp.alpha * V.T @ X + hp.gamma * B @ R_w.T + hp.delta * B @ (Y.T @ X)
    curvature = hp.alpha * (V.T @ V) @ Q + hp.gamma * BBt @ Q + hp.epsilon * (BBt @ Q) * D[None, :]
    gram_pos, gram_neg = _split(X.T @ X)
    signed = (hp.delta * Q @ gram_pos, hp.delta * Q @ gram_neg)
    return _multiplicative(Q, curvature, linear, signed)


def update_B(state, X, Y, R_w, hp):
    """B ← B ⊙ (βVᵀY + γQR_w + δQXᵀY) / (βVᵀVB + γQQᵀB + εQDQᵀB + δBYᵀY).

    D is recomputed from the current Q and B before use.
    """
    V, Q, B = state.V, state.Q, state.B
    D = update_D(Q, B, hp.d_smoothing)
    linear = hp.beta * V.T @ Y + hp.gamma * Q @ R_w + hp.delta * Q @ (X.T @ Y)
    curvature = (hp.beta * (V.T @ V) @ B + hp.gamma * (Q @ Q.T) @ B
                 + hp.epsilon * ((Q * D[None, :]) @ Q.T) @ B + hp.delta * B @ (Y.T @ Y))
    return _multiplicative(B, curvature, linear)


def kkt_residuals(state, X, Y, R_w, hp):
    """Max-norm of (gradient factor ∘ variable) for V, Q and B.

    Values near zero indicate a stationary point of the constrained problem.
    """
    V, Q, B = state.V, state.Q, state.B
    D = update_D(Q, B, hp.d_smoothing)
    grad_V = (hp.alpha * V @ Q @ Q.T + hp.beta * V @ B @ B.T + V
              - hp.alpha * X @ Q.T - hp.beta * Y @ B.T)
    grad_Q = (hp.alpha * V.T @ V @ Q + hp.gamma * B @ B.T @ Q + hp.epsilon * (B @ B.T @ Q) * D[None, :]
              + hp.delta * Q @ X.T @ X - hp.alpha * V.T @ X - hp.gamma * B @ R_w.T - hp.delta * B @ Y.T @ X)
    grad_B = (hp.beta * V.T @ V @ B + hp.gamma * Q @ Q.T @ B + hp.epsilon * (Q * D[None, :]) @ Q.T @ B
              + hp.delta * B @ Y.T @ Y - hp.beta * V.T @ Y - hp.gamma * Q @ R_w - hp.delta * Q @ X.T @ Y)
    return {
        'V': float(np.abs(grad_V * V).max()),
        'Q': float(np.abs(grad_Q * Q).max()),
        'B': float(np.abs(grad_B * B).max()),
    }


def initial_state(n, d, c, k, seed):
    """Seeded uniform(0, 1)/sqrt(k) factors."""
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(k)
    V = rng.random((n, k)) * scale
    Q = rng.random((k, d)) * scale
    B = rng.random((k, c)) * scale
    return FactorizationState(V=V, Q=Q, B=B, D=np.ones(d))


def fit(X, Y, R_w, hp, seed=0, state=None):
    """Alternate the V, Q and B updates until the objective settles.

    Args:
        X (ndarray): n×d features.
        Y (ndarray): n×c binary labels.
        R_w (ndarray): d×c association matrix.
        hp (Hyperparams): Weights and stopping settings.
        seed (int): Seed for the factor initialization.
        state (FactorizationState, optional): Starting factors; overrides the seeded init.

    Returns:
        FactorizationState: Final factors, D and the per-iteration objective trace.

    Raises:
        DivergenceError: If the objective becomes NaN or infinite.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    R_w = np.asarray(R_w, dtype=np.float64)
    n, d = X.shape
    c = Y.shape[1]

    if state is None:
        state = initial_state(n, d, c, hp.resolve_k(n, d, c), seed)
    else:
        state = FactorizationState(V=state.V.copy(), Q=state.Q.copy(), B=state.B.copy(), D=state.D.copy())
    state.D = update_D(state.Q, state.B, hp.d_smoothing)
    _check_shapes(X, Y, R_w, state)

    previous = objective(X, Y, R_w, state, hp)
    state.initial_objective = previous
    logger.info(f"Fitting factorization: n={n}, d={d}, c={c}, k={state.V.shape[1]}, initial objective {previous:.6g}")

    for iteration in range(1, hp.max_iter + 1):
        state.V = update_V(state, X, Y, hp)
        state.D = update_D(state.Q, state.B, hp.d_smoothing)
        state.Q = update_Q(state, X, Y, R_w, hp)
        state.D = update_D(state.Q, state.B, hp.d_smoothing)
        state.B = update_B(state, X, Y, R_w, hp)

        current = objective(X, Y, R_w, state, hp)
        if not np.isfinite(current):
            logger.error(f"Objective diverged at iteration {iteration}")
            raise DivergenceError(iteration, current)
        state.objective_trace.append(current)

        change = abs(current - previous)
        relative = change / max(abs(previous), np.finfo(float).tiny)
        logger.debug(f"Iteration {iteration}: objective={current:.10g}, relative change={relative:.3e}")
        if relative < hp.tol or (hp.abs_tol is not None and change < hp.abs_tol):
            state.converged = True
            break
        previous = current

    state.D = update_D(state.Q, state.B, hp.d_smoothing)
    residuals = kkt_residuals(state, X, Y, R_w, hp)
    logger.info(
        f"Factorization {'converged' if state.converged else 'stopped'} after {len(state.objective_trace)} "
        f"iterations, objective {state.objective_trace[-1]:.6g}, "
        f"KKT residuals V={residuals['V']:.2e} Q={residuals['Q']:.2e} B={residuals['B']:.2e}")
    return state


def feature_scores(state):
    """Euclidean norm of each row of QᵀB."""
    return np.linalg.norm(state.Q.T @ state.B, axis=1)


def relative_changes(state):
    """Relative objective change per recorded iteration (first one against the initial value)."""
    values = [state.initial_objective] + list(state.objective_trace)
    return [abs(b - a) / max(abs(a), np.finfo(float).tiny) for a, b in zip(values, values[1:])]
