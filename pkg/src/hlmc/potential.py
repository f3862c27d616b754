"""Target potentials of the form U(x) = (1/2) x^T K x + G(x).

K = diag(k_1, ..., k_d) with k_j > 0 and G is a convex perturbation with
Lipschitz-continuous gradient.  The quadratic part is handled exactly by the
harmonic flow; G enters only through gradient kicks, so models carry analytic
gradients.  The scalar G is kept alongside for quadrature references and
finite-difference checks.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

Array = np.ndarray

MODEL_NAMES = ("oscillation", "logistic", "gaussian")


@dataclass(frozen=True)
class PotentialModel:
    """Immutable description of one target potential.

    ``k`` holds the diagonal of K.  ``grad_g`` and ``g`` must broadcast over
    leading batch dimensions, i.e. accept arrays of shape (..., d).  ``l_g``
    is a Lipschitz bound for grad G (an upper bound is acceptable), ``l_h``
    an optional third-derivative bound carried as metadata only.
    ``hess_g0`` is the diagonal of the G-Hessian at the origin; it defines
    the exactly solvable quadratic companion used for variance reduction.
    """

    name: str
    k: Array
    grad_g: Callable[[Array], Array]
    g: Callable[[Array], Array]
    l_g: float
    l_h: float | None = None
    hess_g0: Array | None = None

    def __post_init__(self):
        k = np.atleast_1d(np.asarray(self.k, dtype=float))
        if k.ndim != 1 or k.size == 0:
            raise ValueError("k must be a non-empty vector")
        if not np.all(k > 0):
            raise ValueError("all diagonal entries k_j must be positive")
        if self.l_g < 0:
            raise ValueError("l_g must be nonnegative")
        k.setflags(write=False)
        object.__setattr__(self, "k", k)
        if self.hess_g0 is not None:
            h0 = np.asarray(self.hess_g0, dtype=float)
            h0.setflags(write=False)
            object.__setattr__(self, "hess_g0", h0)

    @property
    def d(self) -> int:
        return self.k.size

    @property
    def kappa(self) -> float:
        """Smallest eigenvalue of K (strong-convexity constant)."""
        return float(self.k.min())

    @property
    def l_k(self) -> float:
        """Lipschitz constant of x -> Kx (largest eigenvalue of K)."""
        return float(self.k.max())


@dataclass(frozen=True)
class PhaseState:
    """Position/velocity pair; both arrays share shape (..., d)."""

    x: Array
    v: Array

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if x.shape != v.shape:
            raise ValueError(f"x and v shapes differ: {x.shape} vs {v.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @property
    def d(self) -> int:
        return self.x.shape[-1]


def _check_dim(model: PotentialModel, x: Array) -> Array:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.d:
        raise ValueError(f"dimension mismatch: model d={model.d}, got {x.shape[-1]}")
    return x


def grad_u(model: PotentialModel, x: Array) -> Array:
    """Full potential gradient K x + grad G(x)."""
    x = _check_dim(model, x)
    return model.k * x + model.grad_g(x)


def u_value(model: PotentialModel, x: Array) -> Array:
    """Potential value U(x) = (1/2) x^T K x + G(x)."""
    x = _check_dim(model, x)
    return 0.5 * np.sum(model.k * x * x, axis=-1) + model.g(x)


def gaussian_model(k) -> PotentialModel:
    """Pure quadratic target (G = 0); the samplers are exact for it."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if not np.all(k > 0):
        raise ValueError("gaussian_model requires positive k_j")

    def grad_g(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def g(x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1])

    return PotentialModel(name="gaussian", k=k, grad_g=grad_g, g=g, l_g=0.0,
                          l_h=0.0, hess_g0=np.zeros_like(k))


def oscillation_model() -> PotentialModel:
    """K = diag(1, 10) with G(x) = (1/4)(|x1|^2/2 + |x2|^2/2 + sin(x1+x2)/2).

    G is convex with l_g = 1/2.  grad G(x) = x/4 + cos(x1+x2)/8 * (1, 1).
    """

    def g(x):
        x = np.asarray(x, dtype=float)
        s = x[..., 0] + x[..., 1]
        return 0.25 * (0.5 * x[..., 0] ** 2 + 0.5 * x[..., 1] ** 2 + 0.5 * np.sin(s))

    def grad_g(x):
        x = np.asarray(x, dtype=float)
        s = x[..., 0] + x[..., 1]
        return 0.25 * x + 0.125 * np.cos(s)[..., None]

    # |d^3 G [v, w]| <= (1/8) |v1+v2| |w1+w2| |(1,1)| <= 2^{3/2}/8 |v||w|
    return PotentialModel(name="oscillation", k=np.array([1.0, 10.0]),
                          grad_g=grad_g, g=g, l_g=0.5, l_h=2.0 ** 1.5 / 8.0,
                          hess_g0=np.array([0.25, 0.25]))


_LOGI_A = np.array([[1.0, 0.0], [0.0, 2.0]])


def logistic_model() -> PotentialModel:
    """K = diag(1, 10) with G(x) = (1/10) sum_i log(1 + exp(a_i.x)),
    a_1 = (1, 0), a_2 = (0, 2).  Convex with l_g <= 2/5.
    """

    def g(x):
        x = np.asarray(x, dtype=float)
        t = x @ _LOGI_A.T
        return 0.1 * np.sum(np.logaddexp(0.0, t), axis=-1)

    def grad_g(x):
        x = np.asarray(x, dtype=float)
        t = x @ _LOGI_A.T
        return 0.1 * (expit(t) @ _LOGI_A)

    # sigma'' is bounded by 1/(6 sqrt(3)); sum_i |a_i|^3 = 9
    return PotentialModel(name="logistic", k=np.array([1.0, 10.0]),
                          grad_g=grad_g, g=g, l_g=0.4, l_h=9.0 / (60.0 * np.sqrt(3.0)),
                          hess_g0=np.array([1.0 / 40.0, 1.0 / 10.0]))


def model_by_name(name: str, k=None) -> PotentialModel:
    """CLI-facing model lookup.  ``k`` applies to the gaussian model only."""
    if name == "oscillation":
        return oscillation_model()
    if name == "logistic":
        return logistic_model()
    if name == "gaussian":
        return gaussian_model(np.array([1.0, 10.0]) if k is None else k)
    raise ValueError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    satisfied: bool
    bound: float
    value: float


@dataclass(frozen=True)
class StepValidityReport:
    """Outcome of the sufficient step-size conditions for one scheme.

    The conditions are sufficient, not necessary: a failing report is a
    warning, never an abort.
    """

    scheme: str
    gamma: float
    h: float
    conditions: tuple[ConditionCheck, ...]
    h_max: float
    binding: str
    notes: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return all(c.satisfied for c in self.conditions)


def validate_step(model: PotentialModel, gamma: float, h: float, scheme: str) -> StepValidityReport:
    """Check the contraction-theory step conditions for ``pg`` or ``pgp``.

    pg requires  l_g/gamma^2 <= 1/2 and h <= min(1/(2 gamma), gamma/(2 l_k));
    pgp tightens the h bounds by a factor of two.
    """
    if gamma <= 0 or h <= 0:
        raise ValueError("gamma and h must be positive")
    scheme = scheme.lower()
    if scheme not in ("pg", "pgp"):
        raise ValueError(f"validity conditions exist for 'pg'/'pgp', not {scheme!r}")
    fac = 2.0 if scheme == "pg" else 4.0
    bound_friction = 1.0 / (fac * gamma)
    bound_stiffness = gamma / (fac * model.l_k)
    lg_ratio = model.l_g / gamma**2
    conditions = (
        ConditionCheck("l_g_over_gamma_sq <= 1/2", lg_ratio <= 0.5, 0.5, lg_ratio),
        ConditionCheck(f"h <= 1/({fac:g}*gamma)", h <= bound_friction, bound_friction, h),
        ConditionCheck(f"h <= gamma/({fac:g}*l_k)", h <= bound_stiffness, bound_stiffness, h),
    )
    binding = (f"h <= 1/({fac:g}*gamma)" if bound_friction <= bound_stiffness
               else f"h <= gamma/({fac:g}*l_k)")
    notes = []
    g0 = np.linalg.norm(model.grad_g(np.zeros(model.d)))
    if g0 > 0:
        notes.append(f"grad G(0) is nonzero (|grad G(0)|={g0:.3g}); "
                     "bias constants shift but contraction is unaffected")
    return StepValidityReport(scheme=scheme, gamma=gamma, h=h, conditions=conditions,
                              h_max=min(bound_friction, bound_stiffness),
                              binding=binding, notes=tuple(notes))
