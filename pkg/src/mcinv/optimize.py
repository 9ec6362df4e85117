"""First-order minimization: momentum descent wrapped in a backtracking line search."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError

__all__ = ["OptimizerConfig", "MinimizeResult", "minimize"]


@dataclass(frozen=True)
class OptimizerConfig:
    step_size: float = 0.5
    max_iterations: int = 5000
    gradient_tolerance: float = 1e-8
    momentum: float = 0.9
    armijo_constant: float = 1e-4
    step_growth: float = 1.25
    min_step: float = 1e-20
    seed: int = 0
    log_every: int = 1

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError(f"step size must be positive, got {self.step_size}")
        if self.max_iterations < 1:
            raise ValueError(f"max iterations must be at least 1, got {self.max_iterations}")
        if self.gradient_tolerance <= 0:
            raise ValueError(f"gradient tolerance must be positive, got {self.gradient_tolerance}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.log_every < 1:
            raise ValueError(f"log_every must be at least 1, got {self.log_every}")


@dataclass
class MinimizeResult:
    theta: np.ndarray
    converged: bool
    iterations: int
    final_loss: float
    final_gradient_norm: float
    trace: list = field(default_factory=list)  # (iteration, loss, gradient norm) tuples


def _backtrack(objective, theta, loss, direction, slope, step, config):
    """Halve the step until the Armijo condition holds; None when exhausted."""
    t = step
    while t >= config.min_step:
        candidate = theta + t * direction
        value = objective.loss(candidate)
        # strict decrease keeps the loop from spinning once c*t*slope underflows
        # against the loss value
        if np.isfinite(value) and value < loss and value <= loss + config.armijo_constant * t * slope:
            return t, candidate, value
        t *= 0.5
    return None


def _conjugate_polish(objective, theta, gradient, tolerance):
    """Conjugate-direction endgame once loss differences hit roundoff.

    Backtracking stalls near a minimum because the Armijo decrease c*t*slope
    falls below the floating granularity of the loss (gradient norms around
    sqrt(eps * loss)).  Line steps driven by directional derivatives work at
    the gradient's own scale instead; with conjugate direction updates the
    polish reaches machine-level gradient norms on quadratics.  Returns the
    best iterate seen by gradient norm.
    """
    g = gradient
    direction = -g
    best_norm, best_theta = float(np.linalg.norm(g)), theta
    for _ in range(3 * theta.size + 30):
        slope = float(g @ direction)
        if slope >= 0.0:
            direction = -g
            slope = -float(g @ g)
        if slope == 0.0:
            break
        probe_slope = float(objective.gradient(theta + direction) @ direction)
        if probe_slope == slope:
            break
        t = -slope / (probe_slope - slope)
        if not np.isfinite(t) or t <= 0:
            break
        theta = theta + t * direction
        g_next = objective.gradient(theta)
        if not np.all(np.isfinite(g_next)):
            break
        norm = float(np.linalg.norm(g_next))
        if norm < best_norm:
            best_norm, best_theta = norm, theta
        if norm <= tolerance:
            break
        direction = -g_next + (float(g_next @ g_next) / float(g @ g)) * direction
        g = g_next
    return best_theta, best_norm


def minimize(objective, theta0, config=None):
    """Descend ``objective`` from ``theta0`` until the gradient norm tolerance.

    The search direction accumulates momentum; steps are accepted under a
    backtracking Armijo test, so the recorded loss is non-increasing up to
    floating roundoff.  When loss differences fall below double-precision
    granularity a conjugate-direction polish finishes the job at the
    gradient's scale.  Raises DivergenceError when the loss is non-finite at
    the start.
    """
    config = config if config is not None else OptimizerConfig()
    theta = np.array(theta0, dtype=float)
    loss = objective.loss(theta)
    trace = []
    if not np.isfinite(loss):
        raise DivergenceError("loss is non-finite at the initial point", trace)
    gradient = objective.gradient(theta)
    grad_norm = float(np.linalg.norm(gradient))
    trace.append((0, loss, grad_norm))

    velocity = np.zeros_like(theta)
    step = config.step_size
    iteration = 0
    for iteration in range(1, config.max_iterations + 1):
        if grad_norm <= config.gradient_tolerance:
            iteration -= 1
            break
        velocity = config.momentum * velocity - gradient
        slope = float(gradient @ velocity)
        if slope >= 0.0:
            velocity = -gradient
            slope = -grad_norm ** 2
        accepted = _backtrack(objective, theta, loss, velocity, slope, step, config)
        if accepted is None:
            velocity = -gradient
            accepted = _backtrack(objective, theta, loss, velocity, -grad_norm ** 2, step, config)
        if accepted is None:
            theta, grad_norm = _conjugate_polish(objective, theta, gradient,
                                                 config.gradient_tolerance)
            loss = objective.loss(theta)
            trace.append((iteration, loss, grad_norm))
            break
        taken, theta, loss = accepted
        step = taken * config.step_growth
        gradient = objective.gradient(theta)
        grad_norm = float(np.linalg.norm(gradient))
        if iteration % config.log_every == 0 or grad_norm <= config.gradient_tolerance:
            trace.append((iteration, loss, grad_norm))

    if not trace or trace[-1][0] != iteration:
        trace.append((iteration, loss, grad_norm))
    return MinimizeResult(
        theta=theta,
        converged=grad_norm <= config.gradient_tolerance,
        iterations=iteration,
        final_loss=loss,
        final_gradient_norm=grad_norm,
        trace=trace,
    )
