"""Splitting-scheme samplers: gradient kick, PG/PGP compositions, OBABO
baseline, and a reproducible chain runner.

The dynamics splits into the perturbation kick (velocity update by grad G,
exactly integrable since x is frozen) and the harmonic flow (exactly
integrable via :func:`hlmc.harmonic.g_step`).  Every scheme consumes exactly
one :class:`NoiseDraw` (2d standard normals) per step, so chains of
different schemes driven by the same stream are synchronously coupled.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .harmonic import CoeffSet, NoiseDraw, g_step
from .potential import PhaseState, PotentialModel, grad_u

Array = np.ndarray


class Scheme(str, enum.Enum):
    PG = "pg"
    PGP = "pgp"
    OBABO = "obabo"


@dataclass(frozen=True)
class SchemeConfig:
    scheme: Scheme
    gamma: float
    h: float
    seed: int

    def __post_init__(self):
        if self.gamma <= 0 or self.h <= 0:
            raise ValueError("gamma and h must be positive")
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "seed", int(self.seed))


class NumericalAbort(RuntimeError):
    """Raised when a chain state stops being finite; carries the step index."""

    def __init__(self, step: int):
        super().__init__(f"non-finite state at step {step}")
        self.step = step


def stream_generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for (seed, stream).

    Distinct streams are statistically independent (Philox keyed through a
    spawned SeedSequence), which makes replica ensembles embarrassingly
    parallel without overlap.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def draw_noise(gen: np.random.Generator, n_steps: int, d: int,
               batch: int | None = None) -> Array:
    """Noise block of shape (n_steps, 2d) or (n_steps, batch, 2d).

    Row k holds (xi_k, zeta_k).  The generator is consumed value-by-value in
    C order, so blocked and per-step draws yield identical streams.
    """
    shape = (n_steps, 2 * d) if batch is None else (n_steps, batch, 2 * d)
    return gen.standard_normal(shape)


def p_step(model: PotentialModel, state: PhaseState, t: float) -> PhaseState:
    """Perturbation kick over time t: x unchanged, v -> v - t grad G(x)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0.0:
        return state
    return PhaseState(x=state.x, v=state.v - t * model.grad_g(state.x))


def pg_step(model: PotentialModel, coeffs: CoeffSet, state: PhaseState,
            noise: NoiseDraw) -> PhaseState:
    """First-order composition: harmonic flow, then a full kick."""
    return p_step(model, g_step(model, coeffs, state, noise), coeffs.h)


def pgp_step(model: PotentialModel, coeffs: CoeffSet, state: PhaseState,
             noise: NoiseDraw) -> PhaseState:
    """Symmetric composition: half kick, harmonic flow, half kick.

    The two half kicks are never fused across steps; emitted states are the
    chain's own states.
    """
    half = 0.5 * coeffs.h
    state = p_step(model, state, half)
    state = g_step(model, coeffs, state, noise)
    return p_step(model, state, half)


def obabo_step(model: PotentialModel, gamma: float, h: float, state: PhaseState,
               noise: NoiseDraw) -> PhaseState:
    """Standard OBABO baseline step (two grad U evaluations).

    O: v -> eta v + sqrt(1 - eta^2) n with eta = exp(-gamma h / 2);
    B: v -> v - (h/2) grad U(x);  A: x -> x + h v.
    The first O half-step uses xi, the second zeta.
    """
    eta = np.exp(-0.5 * gamma * h)
    sig = np.sqrt(-np.expm1(-gamma * h))  # sqrt(1 - eta^2)
    x, v = state.x, state.v
    v = eta * v + sig * noise.xi
    v = v - 0.5 * h * grad_u(model, x)
    x = x + h * v
    v = v - 0.5 * h * grad_u(model, x)
    v = eta * v + sig * noise.zeta
    return PhaseState(x=x, v=v)


def make_stepper(model: PotentialModel, config: SchemeConfig):
    """Bind (model, config) into a pure callable(state, noise) -> state."""
    if config.scheme is Scheme.OBABO:
        def step(state: PhaseState, noise: NoiseDraw) -> PhaseState:
            return obabo_step(model, config.gamma, config.h, state, noise)
        return step
    coeffs = CoeffSet.for_model(model, config.gamma, config.h)
    if config.scheme is Scheme.PG:
        def step(state: PhaseState, noise: NoiseDraw) -> PhaseState:
            return pg_step(model, coeffs, state, noise)
    else:
        def step(state: PhaseState, noise: NoiseDraw) -> PhaseState:
            return pgp_step(model, coeffs, state, noise)
    return step


@dataclass(frozen=True)
class ChainOutput:
    """Thinned trajectory plus the provenance needed to reproduce it."""

    steps: Array          # step indices of the stored states (starts at 0)
    xs: Array             # (n_stored, d)
    vs: Array             # (n_stored, d)
    n_steps: int
    seed: int
    stream: int
    scheme: str


CHUNK = 4096


def run_chain(model: PotentialModel, config: SchemeConfig, initial: PhaseState,
              n_steps: int, thin: int = 1, stream: int = 0) -> ChainOutput:
    """Iterate the configured scheme from ``initial``; store every thin-th
    state (including step 0).  Deterministic in (model, config, initial).

    Raises :class:`NumericalAbort` with the offending step index if the
    state stops being finite.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if thin < 1:
        raise ValueError("thin must be >= 1")
    if initial.d != model.d:
        raise ValueError("initial state dimension mismatch")
    step_fn = make_stepper(model, config)
    gen = stream_generator(config.seed, stream)
    d = model.d
    state = PhaseState(np.array(initial.x, dtype=float), np.array(initial.v, dtype=float))

    stored_steps = list(range(0, n_steps + 1, thin))
    xs = np.empty((len(stored_steps), d))
    vs = np.empty((len(stored_steps), d))
    xs[0], vs[0] = state.x, state.v
    out_idx = 1

    k = 0
    # divergence is detected and reported via NumericalAbort; the transient
    # overflow warnings on the way there are noise
    with np.errstate(over="ignore", invalid="ignore"):
        while k < n_steps:
            span = min(CHUNK, n_steps - k)
            block = draw_noise(gen, span, d)
            chunk_start = state
            for j in range(span):
                state = step_fn(state, NoiseDraw(block[j, :d], block[j, d:]))
                k += 1
                if k % thin == 0:
                    xs[out_idx], vs[out_idx] = state.x, state.v
                    out_idx += 1
            if not (np.all(np.isfinite(state.x)) and np.all(np.isfinite(state.v))):
                # replay the chunk to locate the first bad step exactly
                state = chunk_start
                for j in range(span):
                    state = step_fn(state, NoiseDraw(block[j, :d], block[j, d:]))
                    if not (np.all(np.isfinite(state.x)) and np.all(np.isfinite(state.v))):
                        raise NumericalAbort(k - span + j + 1)
    return ChainOutput(steps=np.array(stored_steps[:out_idx]), xs=xs[:out_idx],
                       vs=vs[:out_idx], n_steps=n_steps, seed=config.seed,
                       stream=stream, scheme=config.scheme.value)
