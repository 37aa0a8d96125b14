"""Relative localization from ranges and self-displacements.

Each extended edge ``(i, j)`` carries an :class:`EdgeEstimator` that tracks
``p_ij = p_i - p_j``. The regressor is the relative displacement ``v_ij`` and
the scalar observation is the cosine-law quantity ``zeta`` built from two
consecutive ranges.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .core import Vec2, as_vec2


@dataclass(frozen=True)
class Measurement:
    d_now: float
    d_next: float
    v: Vec2

    @classmethod
    def from_positions(cls, pi_now, pj_now, pi_next, pj_next) -> "Measurement":
        """Noiseless synthesis from true positions at ``k`` and ``k+1``."""
        pi_now, pj_now = as_vec2(pi_now), as_vec2(pj_now)
        pi_next, pj_next = as_vec2(pi_next), as_vec2(pj_next)
        v = (pi_next - pi_now) - (pj_next - pj_now)
        return cls(float(np.linalg.norm(pi_now - pj_now)), float(np.linalg.norm(pi_next - pj_next)), v)


def zeta(m: Measurement) -> float:
    """``0.5 * (d_next^2 - d_now^2 - |v|^2)``, equal to ``v . p_ij(k)`` without noise."""
    return 0.5 * (m.d_next * m.d_next - m.d_now * m.d_now - float(m.v @ m.v))


def _check_pd(gamma: NDArray[np.float64]) -> None:
    if not (gamma[0, 0] > 0 and gamma[0, 0] * gamma[1, 1] - gamma[0, 1] * gamma[1, 0] > 0):
        raise ValueError(f"estimator gain matrix is not positive definite: {gamma.tolist()}")


@dataclass(frozen=True)
class EdgeEstimator:
    p_hat: Vec2 = field(default_factory=lambda: np.zeros(2))
    gamma: NDArray[np.float64] = field(default_factory=lambda: np.eye(2))
    beta_f: float = 0.7

    def __post_init__(self):
        if not 0.0 < self.beta_f < 1.0:
            raise ValueError(f"forgetting factor must lie in (0, 1), got {self.beta_f}")


def rlse_update(est: EdgeEstimator, m: Measurement) -> EdgeEstimator:
    """One forgetting-factor RLS step; returns the estimate for the next step.

    The prediction ``p_hat + v`` accounts for the known motion of the pair,
    and the innovation ``zeta - v . p_hat`` corrects it along ``v``.
    """
    g = est.gamma
    _check_pd(g)
    b = est.beta_f
    v = m.v
    eps = zeta(m) - float(v @ est.p_hat)
    gv = g @ v
    g_next = (g - np.outer(gv, gv) / (b + float(v @ gv))) / b
    g_next = 0.5 * (g_next + g_next.T)
    p_next = est.p_hat + v + (g_next @ v) * eps
    return EdgeEstimator(p_next, g_next, b)


def batch_oracle(history: Sequence[Measurement], p_hat0, gamma0, beta_f: float) -> Vec2:
    """Direct minimizer of the exponentially weighted least-squares cost.

    After ``k`` measurements the unknown is the *current* relative position
    ``x``; measurement ``l`` constrains ``x - s_l`` (its position at step
    ``l``, with ``s_l`` the displacement accumulated since) and is weighted by
    ``beta_f**(k-1-l)``. The prior on the initial guess carries weight
    ``beta_f**k``. The 2x2 normal equations are assembled and solved as-is.
    """
    p0 = as_vec2(p_hat0)
    g0_inv = np.linalg.inv(np.asarray(gamma0, dtype=np.float64))
    k = len(history)
    vs = np.array([m.v for m in history]).reshape(k, 2)
    zs = np.array([zeta(m) for m in history])
    # s_l = sum_{q=l}^{k-1} v_q
    s = np.cumsum(vs[::-1], axis=0)[::-1] if k else np.zeros((0, 2))
    w = beta_f ** np.arange(k - 1, -1, -1, dtype=np.float64)
    prior_w = beta_f ** k
    shift0 = s[0] if k else np.zeros(2)

    normal = prior_w * g0_inv + np.einsum("l,li,lj->ij", w, vs, vs)
    rhs = prior_w * (g0_inv @ (shift0 + p0)) + np.einsum("l,li->i", w * (zs + np.einsum("li,li->l", vs, s)), vs)
    if np.linalg.cond(normal) > 1e14:
        raise np.linalg.LinAlgError("normal matrix is numerically singular")
    return np.linalg.solve(normal, rhs)
