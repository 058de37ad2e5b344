"""Quantum capacity of the qubit amplitude damping channel.

Inputs are parameterised as ``rho = [[1 - a, conj(b)], [b, a]]`` where ``a`` is
the excited-state population and ``b`` the coherence; ``|b|^2 <= a (1 - a)``.
(The matrix ``[[a, b], [conj(b), 1 - a]]`` used for the channel action elsewhere
swaps the roles: there ``a`` is the ground-state population.)

For ``gamma <= 1/2`` the channel is degradable and its capacity is the maximal
coherent information, attained on diagonal inputs. For ``gamma > 1/2`` the
single-letter formula is not claimed and the capacity is reported as zero
with ``degradable=False``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .quantum import (KrausChannel, apply_channel, complementary_channel, spectrum,
                      entropy_of_spectrum)

INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class ADChannel:
    gamma: float

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")

    def kraus(self) -> KrausChannel:
        return KrausChannel.amplitude_damping(self.gamma)


@dataclass(frozen=True)
class CapacityPoint:
    gamma: float
    q: float
    a_star: float
    degradable: bool
    max_coherent_info: float


def input_state(a: float, b: complex = 0.0) -> np.ndarray:
    _check_input(a, b)
    return np.array([[1 - a, np.conj(b)], [b, a]], dtype=complex)


def _check_input(a: float, b: complex) -> None:
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"population a must lie in [0, 1], got {a}")
    if abs(b) ** 2 > a * (1 - a) + 1e-12:
        raise ValueError(f"|b|^2 = {abs(b) ** 2} exceeds a(1-a) = {a * (1 - a)}")


def _h2(x):
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    out = np.zeros_like(x)
    m = (x > 0) & (x < 1)
    xm = x[m]
    out[m] = -xm * np.log2(xm) - (1 - xm) * np.log2(1 - xm)
    return out


def bob_eigenvalues(gamma: float, a: float, b: complex = 0.0) -> tuple[float, float]:
    """Spectrum of the channel output."""
    disc = (1 + 2 * a * (gamma - 1)) ** 2 - 4 * abs(b) ** 2 * (gamma - 1)
    root = math.sqrt(max(disc, 0.0))
    return 0.5 * (1 + root), 0.5 * (1 - root)


def eve_eigenvalues(gamma: float, a: float, b: complex = 0.0) -> tuple[float, float]:
    """Spectrum of the environment output."""
    disc = (1 - 2 * a * gamma) ** 2 + 4 * abs(b) ** 2 * gamma
    root = math.sqrt(max(disc, 0.0))
    return 0.5 * (1 + root), 0.5 * (1 - root)


def coherent_information(gamma: float, a: float, b: complex = 0.0) -> float:
    """``I(A>B) = H(N(rho)) - H(N^c(rho))`` from the closed-form spectra."""
    ADChannel(gamma)
    _check_input(a, b)
    hb = float(_h2(bob_eigenvalues(gamma, a, b)[1]))
    he = float(_h2(eve_eigenvalues(gamma, a, b)[1]))
    return hb - he


def coherent_information_diagonal(gamma: float, a):
    """Vectorised ``h((1 - gamma) a) - h(gamma a)`` for diagonal inputs."""
    a = np.asarray(a, dtype=float)
    return _h2((1 - gamma) * a) - _h2(gamma * a)


def coherent_information_numeric(gamma: float, a: float, b: complex = 0.0) -> float:
    """Same quantity through explicit channel and complementary-channel outputs."""
    ch = KrausChannel.amplitude_damping(gamma)
    rho = input_state(a, b)
    hb = entropy_of_spectrum(np.clip(spectrum(apply_channel(ch, rho)), 0, 1))
    he = entropy_of_spectrum(np.clip(spectrum(complementary_channel(ch, rho)), 0, 1))
    return hb - he


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-10) -> tuple[float, float]:
    """Maximiser of a unimodal ``f`` on ``[lo, hi]`` by golden-section search."""
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + INV_PHI * (hi - lo)
            fd = f(d)
    x = 0.5 * (lo + hi)
    return x, f(x)


def maximize_coherent_information(gamma: float) -> CapacityPoint:
    """Capacity point at ``gamma``; golden-section search over diagonal inputs."""
    ADChannel(gamma)
    if gamma < 0.5:
        a_star, q = golden_section_max(
            lambda a: float(coherent_information_diagonal(gamma, a)), 0.0, 1.0)
        return CapacityPoint(gamma, max(q, 0.0), a_star, True, q)
    # I(a) <= 0 here, with equality at a = 0
    grid = np.linspace(0.0, 1.0, 2001)
    vals = coherent_information_diagonal(gamma, grid)
    i = int(np.argmax(vals))
    return CapacityPoint(gamma, 0.0, 0.0, gamma == 0.5, float(vals[i]))


def capacity_sweep(gamma_grid) -> list[CapacityPoint]:
    return [maximize_coherent_information(float(g)) for g in gamma_grid]


def coherent_info_curve(gamma: float, a_grid) -> list[tuple[float, float]]:
    a_grid = np.asarray(a_grid, dtype=float)
    vals = coherent_information_diagonal(gamma, a_grid)
    return [(float(a), float(v)) for a, v in zip(a_grid, vals)]


def verify_diagonal_optimality(gamma: float, trials: int, rng: np.random.Generator,
                               *, boundary: bool = False) -> float:
    """Largest observed ``I(a, b) - I(a, 0)`` over random coherent inputs.

    With ``boundary=True`` the coherence sits on the pure-state boundary
    ``|b|^2 = a (1 - a)``.
    """
    if gamma >= 0.5:
        raise ValueError("diagonal optimality is checked only for gamma < 1/2")
    worst = -np.inf
    a = rng.uniform(0.0, 1.0, trials)
    radius = np.sqrt(a * (1 - a))
    if not boundary:
        radius = radius * np.sqrt(rng.uniform(0.0, 1.0, trials))
    phase = rng.uniform(0.0, 2 * np.pi, trials)
    b = radius * np.exp(1j * phase)
    for ai, bi in zip(a, b):
        worst = max(worst, coherent_information(gamma, ai, bi) - coherent_information(gamma, ai))
    return float(worst)


def degrading_parameter(gamma: float) -> float:
    """``gamma'`` with ``AD(gamma') o AD(gamma) = AD(gamma)^c`` (needs gamma <= 1/2)."""
    if not 0.0 <= gamma <= 0.5:
        raise ValueError("amplitude damping is degradable only for gamma <= 1/2")
    return (1 - 2 * gamma) / (1 - gamma)


def composition_residual(gamma: float, gamma_prime: float, states) -> float:
    """Max entrywise gap between ``AD(gamma') o AD(gamma)`` and the complementary channel."""
    ch = KrausChannel.amplitude_damping(gamma)
    deg = KrausChannel.amplitude_damping(gamma_prime)
    return max(float(np.abs(apply_channel(deg, apply_channel(ch, rho))
                            - complementary_channel(ch, rho)).max()) for rho in states)


def _random_inputs(count: int, rng: np.random.Generator) -> list:
    out = []
    for _ in range(count):
        a = rng.uniform()
        b = np.sqrt(a * (1 - a) * rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
        out.append(input_state(a, b))
    return out


def is_degradable_ad(gamma: float, *, rng: np.random.Generator | None = None,
                     samples: int = 20, tol: float = 1e-8) -> bool:
    """``gamma <= 1/2``, confirmed numerically by fitting the degrading damping map."""
    ADChannel(gamma)
    if gamma > 0.5:
        return False
    rng = rng or np.random.default_rng(0)
    states = _random_inputs(samples, rng)
    fit = minimize_scalar(lambda g: composition_residual(gamma, g, states) ** 2,
                          bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12})
    best = min((fit.x, degrading_parameter(gamma)),
               key=lambda g: composition_residual(gamma, g, states))
    residual = composition_residual(gamma, best, states)
    if residual > tol:
        raise AssertionError(f"degrading map residual {residual:.3g} exceeds {tol}")
    return True
