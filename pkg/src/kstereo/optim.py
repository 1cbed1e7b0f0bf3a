"""Riemannian SGD with momentum and learnable curvature.

The optimizer owns one coordinate block per manifold factor. Depending on the
strategy the block holds points on the factor (Riemannian strategies) or
unconstrained tangent vectors at the origin that are pushed through
``exp_map_origin`` before every loss evaluation (tangent reparametrisation).

Curvature updates are plain momentum SGD on the scalar ``k``. After any
curvature change the factor's points are projected back inside the ball.
Momentum buffers are carried over unchanged when ``k`` moves.
"""

import enum
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import stereographic as st
from .autodiff import Tape
from .errors import PoleError, SingularityError

log = logging.getLogger(__name__)


class Strategy(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    JOINT = "joint"
    JOINT_KAPPA_FIRST = "joint-kappa-first"
    ALTERNATING = "alternating"
    TANGENT = "tangent"
    WARMSTART = "warmstart"


GRAD_CLIP = 0.1
# boundary-pinned points can make dL/dk grow without bound while k runs away
KAPPA_CLIP = 1.0
KAPPA_LR_RATIO = 10


@dataclass
class OptimConfig:
    """Optimizer hyperparameters.

    ``grad_clip`` bounds the metric norm of every per-point gradient before it
    enters the momentum buffer; ``kappa_clip`` bounds ``|dL/dk|``. ``None``
    disables either. ``lr_kappa`` defaults to ``lr_points / 10``.
    """

    lr_points: float = 0.01
    lr_kappa: Optional[float] = None
    momentum: float = 0.9
    strategy: Strategy = Strategy.JOINT
    switch_iter: int = 0
    seed: int = 0
    grad_clip: Optional[float] = GRAD_CLIP
    kappa_clip: Optional[float] = KAPPA_CLIP

    def __post_init__(self):
        self.strategy = Strategy(self.strategy)
        if self.lr_points <= 0:
            raise ValueError("lr_points must be positive")
        if self.lr_kappa is not None and self.lr_kappa < 0:
            raise ValueError("lr_kappa must be non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        for name in ("grad_clip", "kappa_clip"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive or None")

    @property
    def kappa_lr(self):
        return self.lr_points / KAPPA_LR_RATIO if self.lr_kappa is None else self.lr_kappa


class StepRejected(RuntimeError):
    """A step hit a pole (even at half rate) or a singular Mobius sum; state is unchanged."""


def riemannian_grad(euclid_grad, x, kappa):
    """Rescale a Euclidean gradient by the inverse conformal metric ``1/lambda^2``."""
    lam = st._lambda(np.asarray(x), kappa)
    return euclid_grad / (lam * lam)


@dataclass
class ParamState:
    """Momentum for one factor: a buffer for the coordinates and one for ``k``."""

    momentum: np.ndarray
    kappa_momentum: float = 0.0


class RiemannianSGD:
    """Momentum SGD over a list of factors and their coordinate blocks.

    Parameters
    ----------
    factors : list of Factor
        Factors whose ``curvature`` objects are updated in place.
    params : list of ndarray
        One ``(num_points, factor.dim)`` block per factor. Points for the
        Riemannian strategies, tangent vectors at the origin for
        ``Strategy.TANGENT``.
    config : OptimConfig
    """

    def __init__(self, factors, params, config):
        self.factors = list(factors)
        self.params = [np.array(p, dtype=np.float64) for p in params]
        self.config = config
        self.state = [ParamState(np.zeros_like(p)) for p in self.params]
        self.iteration = 0
        self.last_transport_error = 0.0
        if config.strategy in (Strategy.EUCLIDEAN, Strategy.WARMSTART):
            for f in self.factors:
                f.curvature.value = 0.0
        if config.strategy is Strategy.EUCLIDEAN:
            for f in self.factors:
                f.curvature.frozen = True

    @property
    def tangent(self):
        return self.config.strategy is Strategy.TANGENT

    def points(self):
        """Current points on each factor."""
        if not self.tangent:
            return [p.copy() for p in self.params]
        return [st.exp_map_origin(p, f.kappa) for p, f in zip(self.params, self.factors)]

    def _mode(self):
        s = self.config.strategy
        if s is Strategy.WARMSTART:
            return "euclidean" if self.iteration < self.config.switch_iter else "joint"
        if s is Strategy.ALTERNATING:
            return "alt-points" if self.iteration % 2 == 0 else "alt-kappa"
        return s.value

    def _kappa_grad(self, factor):
        g = factor.curvature.grad
        c = self.config.kappa_clip
        return g if c is None else float(np.clip(g, -c, c))

    def _kappa_learnable(self, factor, mode):
        return (mode not in ("euclidean", "alt-points") and not factor.curvature.frozen
                and self.config.kappa_lr > 0)

    def step(self, loss_fn):
        """Run one iteration.

        ``loss_fn(points, kappas)`` receives one point block and one curvature
        per factor (either may be a tape ``Var``) and returns a scalar.
        Returns the loss value before the update.
        """
        mode = self._mode()
        tape = Tape()
        learn = [self._kappa_learnable(f, mode) for f in self.factors]
        kvars = [tape.lift(f.kappa) if lk else f.kappa for f, lk in zip(self.factors, learn)]
        pvars = [tape.lift(p) for p in self.params]
        if self.tangent:
            pts = [st.exp_map_origin(v, k) for v, k in zip(pvars, kvars)]
        else:
            pts = pvars
        loss = loss_fn(pts, kvars)
        grads = tape.backward(loss)
        pgrads = [grads[v] for v in pvars]
        for f, kv, lk in zip(self.factors, kvars, learn):
            f.curvature.grad = float(grads[kv]) if lk else 0.0

        snapshot = self._snapshot()
        try:
            if mode == "tangent":
                self._tangent_step(pgrads, learn)
            elif mode in ("euclidean", "joint", "alt-points"):
                self.step_points(pgrads)
                if mode == "joint":
                    self.step_kappa(learn)
            elif mode == "joint-kappa-first":
                self.step_kappa(learn)
                self.step_points(pgrads)
            elif mode == "alt-kappa":
                self.step_kappa(learn)
        except StepRejected:
            self._restore(snapshot)
            raise
        except SingularityError as exc:
            self._restore(snapshot)
            raise StepRejected(str(exc)) from exc
        finally:
            self.iteration += 1
        return float(loss.value)

    def _snapshot(self):
        return ([p.copy() for p in self.params],
                [(s.momentum.copy(), s.kappa_momentum) for s in self.state],
                [f.curvature.value for f in self.factors])

    def _restore(self, snapshot):
        params, state, kappas = snapshot
        self.params = params
        for s, (m, km) in zip(self.state, state):
            s.momentum, s.kappa_momentum = m, km
        for f, k in zip(self.factors, kappas):
            f.curvature.value = k

    def step_points(self, grads):
        """Momentum update along geodesics, momentum re-based by parallel transport."""
        beta, lr = self.config.momentum, self.config.lr_points
        new_params, new_moms = [], []
        for p, g, s, f in zip(self.params, grads, self.state, self.factors):
            k = f.kappa
            rg = riemannian_grad(g, p, k)
            if self.config.grad_clip is not None:
                rg = _clip_rows(rg, self.config.grad_clip, st._lambda(p, k))
            m = beta * s.momentum + rg
            for attempt, rate in enumerate((lr, lr / 2)):
                try:
                    p_new = st.exp_map(p, -rate * m, k)
                    break
                except PoleError:
                    if attempt == 1:
                        raise StepRejected("pole crossed in point update") from None
                    log.debug("pole in point update, retrying with lr/2")
            m_new = st.parallel_transport(p, p_new, m, k)
            self.last_transport_error = max(
                self.last_transport_error if beta > 0 else 0.0,
                _transport_defect(p, p_new, m, m_new, k),
            )
            new_params.append(st.project_to_domain(p_new, k))
            new_moms.append(m_new)
        self.params = new_params
        for s, m in zip(self.state, new_moms):
            s.momentum = m

    def step_kappa(self, learn=None):
        """Momentum SGD on each learnable curvature, then re-project its points."""
        beta, lr = self.config.momentum, self.config.kappa_lr
        for i, (f, s) in enumerate(zip(self.factors, self.state)):
            if f.curvature.frozen or (learn is not None and not learn[i]):
                continue
            s.kappa_momentum = beta * s.kappa_momentum + self._kappa_grad(f)
            f.curvature.value = f.curvature.value - lr * s.kappa_momentum
            if not self.tangent:
                self.params[i] = st.project_to_domain(self.params[i], f.kappa)

    def _tangent_step(self, grads, learn):
        beta = self.config.momentum
        for i, (f, s, g) in enumerate(zip(self.factors, self.state, grads)):
            if self.config.grad_clip is not None:
                g = _clip_rows(g, self.config.grad_clip)
            m = beta * s.momentum + g
            km = beta * s.kappa_momentum + self._kappa_grad(f) if learn[i] else s.kappa_momentum
            for attempt, scale in enumerate((1.0, 0.5)):
                p_new = self.params[i] - scale * self.config.lr_points * m
                k_new = f.kappa - scale * self.config.kappa_lr * km if learn[i] else f.kappa
                if not _crosses_pole(p_new, k_new):
                    break
                if attempt == 1:
                    raise StepRejected("tangent update reaches a pole")
                log.debug("pole in tangent update, retrying with lr/2")
            self.params[i] = p_new
            s.momentum = m
            if learn[i]:
                s.kappa_momentum = km
                f.curvature.value = float(k_new)


def _clip_rows(g, limit, scale=1.0):
    """Shrink every row whose (scaled) norm exceeds ``limit``."""
    n = scale * np.linalg.norm(g, axis=-1, keepdims=True)
    return g * np.minimum(1.0, limit / np.maximum(n, 1e-300))


def _crosses_pole(tangent, kappa):
    if kappa <= 0:
        return False
    n = np.linalg.norm(tangent, axis=-1)
    return bool(np.any(n * np.sqrt(kappa) >= np.pi / 2 - 1e-12))


def _transport_defect(p, p_new, m, m_new, kappa):
    lam_old = 2.0 / (1.0 + kappa * np.sum(p * p, axis=-1))
    lam_new = 2.0 / (1.0 + kappa * np.sum(p_new * p_new, axis=-1))
    before = lam_old * np.linalg.norm(m, axis=-1)
    after = lam_new * np.linalg.norm(m_new, axis=-1)
    if before.size == 0:
        return 0.0
    return float(np.max(np.abs(after - before) / np.maximum(before, 1.0)))
