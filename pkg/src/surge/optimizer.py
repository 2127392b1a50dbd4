"""Guided optimization loop: base SGD/Adam/AdamW steps scaled by a target-driven factor."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .series_core import InvalidInputError, TargetSet


class AbortStep(RuntimeError):
    """Raised when a step cannot be taken; parameters are left unchanged."""


@dataclass
class BaseOptimizerState:
    kind: str = "sgd"
    eta: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    t: int = 0
    m: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("sgd", "adam", "adamw"):
            raise InvalidInputError(f"unknown optimizer {self.kind!r}")


@dataclass
class GuidanceState:
    targets: TargetSet = field(default_factory=TargetSet)
    lam: float = 1.0
    max_norm: float = np.inf
    current_target: Optional[float] = None
    exhausted: bool = False
    alpha_history: List[float] = field(default_factory=list)


def select_target(targets, current_loss: float) -> Optional[float]:
    """Largest target strictly below the current loss, or None."""
    below = [z for z in targets if z < current_loss]
    return max(below) if below else None


def guidance_factor(current_loss: float, target: Optional[float], lam: float) -> float:
    """1 + lam * min(|(L - target) / L|, 1); exactly 1 without a target."""
    if not current_loss > 0:
        raise InvalidInputError("current loss must be positive")
    if target is None:
        return 1.0
    return 1.0 + lam * min(abs((current_loss - target) / current_loss), 1.0)


def base_update(state: BaseOptimizerState, grad, params=None) -> np.ndarray:
    """Raw step direction (to be multiplied by eta).  Advances the optimizer state."""
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise InvalidInputError("gradient is not finite")
    if state.kind == "sgd":
        state.t += 1
        return -grad
    if state.m is None:
        state.m = np.zeros_like(grad)
        state.v = np.zeros_like(grad)
    if state.m.shape != grad.shape:
        raise InvalidInputError("gradient shape does not match optimizer state")
    state.t += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1 - state.beta2) * grad * grad
    m_hat = state.m / (1 - state.beta1**state.t)
    v_hat = state.v / (1 - state.beta2**state.t)
    step = -m_hat / (np.sqrt(v_hat) + state.eps)
    if state.kind == "adamw" and state.weight_decay != 0.0:
        if params is None:
            raise InvalidInputError("adamw needs the current parameters")
        step = step - state.weight_decay * np.asarray(params, dtype=float)
    return step


def clip(delta, max_norm: float):
    norm = float(np.linalg.norm(delta))
    if norm > max_norm:
        return delta * (max_norm / norm)
    return delta


def surge_step(params, grad, base: BaseOptimizerState, guide: Optional[GuidanceState], current_loss: float):
    """One guided step.  Returns (new_params, alpha).

    Without a guide the factor is 1 and no clipping is applied, which is the
    bare base optimizer.
    """
    if not np.isfinite(current_loss):
        raise AbortStep("loss is not finite")
    params = np.asarray(params, dtype=float)
    if guide is None:
        return params + base.eta * base_update(base, grad, params), 1.0
    target = None if guide.exhausted else select_target(guide.targets, current_loss)
    if target is None and len(guide.targets):
        # below every target: no guidance left
        guide.exhausted = True
    guide.current_target = target
    alpha = guidance_factor(current_loss, target, guide.lam) if current_loss > 0 else 1.0
    delta = clip(base.eta * alpha * base_update(base, grad, params), guide.max_norm)
    guide.alpha_history.append(alpha)
    return params + delta, alpha


@dataclass
class Trajectory:
    losses: List[float] = field(default_factory=list)
    alphas: List[float] = field(default_factory=list)
    targets: List[Optional[float]] = field(default_factory=list)
    grad_norms: List[float] = field(default_factory=list)
    params: Optional[np.ndarray] = None
    diagnostics: List[str] = field(default_factory=list)
    final: Optional[float] = None

    @property
    def final_loss(self) -> float:
        """Loss at the final parameters (after the last update)."""
        if self.final is not None:
            return self.final
        return self.losses[-1] if self.losses else float("nan")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "loss", "alpha", "target", "grad_norm"])
            for i, (L, a, z, gn) in enumerate(zip(self.losses, self.alphas, self.targets, self.grad_norms)):
                w.writerow([i, format(L, ".17g"), format(a, ".17g"),
                            "" if z is None else format(z, ".17g"), format(gn, ".17g")])


def make_base(kind="sgd", eta=1e-2, weight_decay=0.0, **kw) -> BaseOptimizerState:
    return BaseOptimizerState(kind=kind, eta=eta, weight_decay=weight_decay, **kw)


def train(objective, theta0, steps: int, base: Optional[BaseOptimizerState] = None, lam: float = 1.0,
          max_norm: Optional[float] = None, targets: Optional[TargetSet] = None, analysis_config=None,
          guided: bool = True, reanalyze_every: int = 0) -> Trajectory:
    """Full-batch training loop recording loss, alpha, target and gradient norm.

    With ``guided=False`` this is the bare optimizer (alpha = 1, same
    clipping).  Otherwise targets come from `targets`, or from a Borel
    analysis at theta0 when not given.  max_norm defaults to 10 * eta.  ``reanalyze_every`` > 0 reruns the
    analysis at the current parameters every that many steps.
    """
    base = base or make_base()
    theta = np.array(theta0, dtype=float)
    traj = Trajectory()
    max_norm = 10 * base.eta if max_norm is None else max_norm
    if guided:
        if targets is None:
            from .partition_estimator import analyze
            report = analyze(objective, theta, analysis_config)
            targets = report.targets
            traj.diagnostics.extend(report.diagnostics)
        if not len(targets):
            traj.diagnostics.append("empty target set: running the bare optimizer")
        guide = GuidanceState(targets, lam, max_norm)
    else:
        # bare run: alpha is 1 throughout, same clipping as the guided run
        guide = GuidanceState(TargetSet(), 0.0, max_norm)
    for step in range(steps):
        if guided and reanalyze_every and step and step % reanalyze_every == 0:
            from .partition_estimator import analyze
            guide.targets = analyze(objective, theta, analysis_config).targets
            guide.exhausted = False
        loss = objective.value(theta)
        grad = objective.grad(theta)
        if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
            traj.diagnostics.append(f"aborted at step {step}: non-finite loss or gradient")
            break
        try:
            theta, alpha = surge_step(theta, grad, base, guide, loss)
        except (AbortStep, InvalidInputError) as exc:
            traj.diagnostics.append(f"aborted at step {step}: {exc}")
            break
        traj.losses.append(float(loss))
        traj.alphas.append(float(alpha))
        traj.targets.append(guide.current_target)
        traj.grad_norms.append(float(np.linalg.norm(grad)))
    traj.params = theta
    traj.final = float(objective.value(theta))
    return traj
