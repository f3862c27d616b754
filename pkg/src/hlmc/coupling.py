"""Twisted phase-space metric, contraction constants, accuracy budgets, and
the synchronous-coupling contraction experiment.

The metric is the quadratic form
    rho((x,v), (x',v'))^2 = sum_j  a_j z_j^2 + 2 b z_j w_j + c w_j^2,
    z = x - x', w = v - v',
with per-dimension blocks
    a_j = k_j / gamma^2 + (1 - 2 tau)^2 / 2,
    b   = (1 - 2 tau) / (2 gamma),
    c   = 1 / gamma^2,
    tau = min(1/8, kappa / (4 gamma^2)).
Note the 1/gamma in b: the variant without it is indefinite already for
kappa = 1, gamma = 2, while this one is what the one-step contraction
computation actually uses; positive definiteness is re-checked numerically
for every constructed metric.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .potential import PhaseState, PotentialModel
from .samplers import (NoiseDraw, SchemeConfig, draw_noise, make_stepper,
                       stream_generator)

Array = np.ndarray


@dataclass(frozen=True)
class TwistedMetric:
    tau: float
    a_block: Array      # (d,)
    b_block: float
    c_block: float

    def __post_init__(self):
        a = np.asarray(self.a_block, dtype=float)
        a.setflags(write=False)
        object.__setattr__(self, "a_block", a)
        det = a * self.c_block - self.b_block**2
        if not (np.all(det > 0) and np.all(a + self.c_block > 0)):
            raise ValueError("twisted metric is not positive definite")

    @classmethod
    def from_k(cls, k: Array, gamma: float) -> "TwistedMetric":
        k = np.atleast_1d(np.asarray(k, dtype=float))
        kappa = float(k.min())
        tau = min(0.125, 0.25 * kappa / gamma**2)
        return cls(tau=tau,
                   a_block=k / gamma**2 + 0.5 * (1.0 - 2.0 * tau) ** 2,
                   b_block=(1.0 - 2.0 * tau) / (2.0 * gamma),
                   c_block=1.0 / gamma**2)

    @classmethod
    def from_model(cls, model: PotentialModel, gamma: float) -> "TwistedMetric":
        return cls.from_k(model.k, gamma)

    def block(self, j: int) -> Array:
        return np.array([[self.a_block[j], self.b_block],
                         [self.b_block, self.c_block]])


def rho_sq_diff(metric: TwistedMetric, z: Array, w: Array) -> Array:
    """Quadratic form applied to a difference (z, w); batched over (..., d)."""
    return np.sum(metric.a_block * z * z + 2.0 * metric.b_block * z * w
                  + metric.c_block * w * w, axis=-1)


def rho_distance(metric: TwistedMetric, s1: PhaseState, s2: PhaseState) -> Array:
    if s1.x.shape != s2.x.shape:
        raise ValueError("phase states have mismatched shapes")
    return np.sqrt(rho_sq_diff(metric, s1.x - s2.x, s1.v - s2.v))


@dataclass(frozen=True)
class ContractionConstants:
    tau: float
    c: float
    m1: float
    m2: float


def contraction_constants(kappa: float, gamma: float, l_k: float) -> ContractionConstants:
    """The four scalars of the contraction theory:

    tau = min(1/8, kappa gamma^-2 / 4)
    c   = min(gamma/8, kappa gamma^-1 / 4)           (decay rate)
    m1  = sqrt(max(l_k g^-2 + 1, 1.5 g^-2) / min(g^-2/4, 9/128 + kappa g^-2))
    m2  = max(2 gamma, (9/128 + kappa gamma^-2)^{-1/2})
    """
    if kappa <= 0 or gamma <= 0 or l_k <= 0:
        raise ValueError("kappa, gamma, l_k must be positive")
    g2 = gamma * gamma
    tau = min(0.125, 0.25 * kappa / g2)
    c = min(gamma / 8.0, 0.25 * kappa / gamma)
    lower = min(0.25 / g2, 9.0 / 128.0 + kappa / g2)
    upper = max(l_k / g2 + 1.0, 1.5 / g2)
    m1 = math.sqrt(upper / lower)
    m2 = max(2.0 * gamma, 1.0 / math.sqrt(9.0 / 128.0 + kappa / g2))
    return ContractionConstants(tau=tau, c=c, m1=m1, m2=m2)


@dataclass(frozen=True)
class EpsilonBudget:
    """Step-size and step-count budget for eps-accuracy of the first-order
    scheme, under the rate-optimal friction convention gamma^2 = 2 kappa.
    Diagnostic only."""

    eps: float
    gamma_star: float
    h_max: float
    k_min: int
    unbounded: bool
    gamma_matches_convention: bool


def epsilon_budget(model: PotentialModel, gamma: float, eps: float,
                   w2_init: float) -> EpsilonBudget:
    """h_max from  1/h >= 64 sqrt(d) (l_g/kappa) sqrt(5 l_k/kappa) / eps  and
    k_min from  k >= (1/h) (8/sqrt(2 kappa)) log(2 m1 w2_init / eps).

    A pure-quadratic target (l_g = 0) has no step-size bias, reported as
    unbounded h.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    kappa = model.kappa
    gamma_star = math.sqrt(2.0 * kappa)
    matches = math.isclose(gamma, gamma_star, rel_tol=1e-12)
    if model.l_g == 0.0:
        return EpsilonBudget(eps=eps, gamma_star=gamma_star, h_max=math.inf,
                             k_min=0, unbounded=True, gamma_matches_convention=matches)
    inv_h = 64.0 * math.sqrt(model.d) * (model.l_g / kappa) \
        * math.sqrt(5.0 * model.l_k / kappa) / eps
    h_max = 1.0 / inv_h
    m1 = contraction_constants(kappa, gamma_star, model.l_k).m1
    k_min = math.ceil(inv_h * (8.0 / math.sqrt(2.0 * kappa))
                      * math.log(2.0 * m1 * w2_init / eps))
    return EpsilonBudget(eps=eps, gamma_star=gamma_star, h_max=h_max,
                         k_min=max(k_min, 0), unbounded=False,
                         gamma_matches_convention=matches)


# ---------------------------------------------------------------------------
# synchronous-coupling experiment

@dataclass(frozen=True)
class CoupleResult:
    """Per-step distance statistics averaged over replicas."""

    scheme: str
    steps: Array
    times: Array
    mean_rho: Array
    se_rho: Array
    mean_euclid: Array
    se_euclid: Array
    replicas: int


CHUNK = 2048


def couple_run(model: PotentialModel, config: SchemeConfig, init_a: PhaseState,
               init_b: PhaseState, n_steps: int, replicas: int) -> CoupleResult:
    """Run ``replicas`` pairs of chains; within a pair both chains consume
    identical noise (synchronous coupling).  Replica r draws from the
    counter-based stream (seed, r), so results do not depend on scheduling.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    d = model.d
    if init_a.d != d or init_b.d != d:
        raise ValueError("initial state dimension mismatch")
    metric = TwistedMetric.from_model(model, config.gamma)
    step_fn = make_stepper(model, config)

    ones = np.ones((replicas, 1))
    state_a = PhaseState(ones * init_a.x, ones * init_a.v)
    state_b = PhaseState(ones * init_b.x, ones * init_b.v)

    rho = np.empty((n_steps + 1, replicas))
    euc = np.empty((n_steps + 1, replicas))

    def record(i: int) -> None:
        z = state_a.x - state_b.x
        w = state_a.v - state_b.v
        rho[i] = np.sqrt(rho_sq_diff(metric, z, w))
        euc[i] = np.sqrt(np.sum(z * z + w * w, axis=-1))

    record(0)
    gens = [stream_generator(config.seed, r) for r in range(replicas)]
    k = 0
    while k < n_steps:
        span = min(CHUNK, n_steps - k)
        # (span, replicas, 2d); per-replica blocks keep each stream contiguous
        block = np.stack([draw_noise(g, span, d) for g in gens], axis=1)
        for j in range(span):
            noise = NoiseDraw(block[j, :, :d], block[j, :, d:])
            state_a = step_fn(state_a, noise)
            state_b = step_fn(state_b, noise)
            k += 1
            record(k)
    steps = np.arange(n_steps + 1)
    se_denom = math.sqrt(replicas)
    se_rho = rho.std(axis=1, ddof=1) / se_denom if replicas > 1 else np.zeros(n_steps + 1)
    se_euc = euc.std(axis=1, ddof=1) / se_denom if replicas > 1 else np.zeros(n_steps + 1)
    return CoupleResult(scheme=config.scheme.value, steps=steps,
                        times=steps * config.h, mean_rho=rho.mean(axis=1),
                        se_rho=se_rho, mean_euclid=euc.mean(axis=1),
                        se_euclid=se_euc, replicas=replicas)


# columnar time-series record emitted by the couple experiment
ExperimentRecord = CoupleResult


@dataclass(frozen=True)
class RateFit:
    rate: float
    r_squared: float
    n_points: int


def fit_rate(times: Array, mean_distance: Array, drop_first: int = 5,
             floor_rel: float = 1e-10) -> RateFit:
    """Least-squares slope of log mean-distance over time, negated.

    The first ``drop_first`` points (transient) and every point at or below
    ``floor_rel`` times the initial distance (float noise) are excluded.
    A constant series fits exactly with rate 0 and r^2 = 1.
    """
    times = np.asarray(times, dtype=float)
    dist = np.asarray(mean_distance, dtype=float)
    if times.shape != dist.shape:
        raise ValueError("times and distances must have equal length")
    idx = np.arange(dist.size)
    mask = (idx >= drop_first) & (dist > floor_rel * dist[0]) & (dist > 0)
    if mask.sum() < 10:
        raise ValueError(f"only {int(mask.sum())} usable points; need >= 10")
    t = times[mask]
    y = np.log(dist[mask])
    design = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    # a numerically constant series has ss_tot at rounding scale; that is a
    # perfect fit, not an undefined one
    degenerate = ss_tot <= y.size * (16 * np.finfo(float).eps * (1.0 + abs(y.mean()))) ** 2
    r2 = 1.0 if degenerate else 1.0 - ss_res / ss_tot
    return RateFit(rate=float(-coef[0]), r_squared=r2, n_points=int(mask.sum()))
