"""Classical and small quantum entropies, in bits.

Distributions are 1-d arrays of probabilities, joint distributions are 2-d
arrays indexed ``[x, y]``. Quantum states are density matrices as in
:mod:`qkdfinite.quantum`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .quantum import density_matrix, hermitian_part

NORM_TOL = 1e-12
INF = float("inf")

_PAULIS = np.array(
    [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex
)


def distribution(p, *, subnormalised: bool = False, tol: float = 1e-9) -> np.ndarray:
    """Validate a probability vector (or matrix) and return it as floats."""
    p = np.asarray(p, dtype=float)
    if p.size == 0:
        raise ValueError("empty distribution")
    if np.any(p < -tol) or np.any(p > 1 + tol):
        raise ValueError("probabilities must lie in [0, 1]")
    total = p.sum()
    if subnormalised:
        if total > 1 + tol:
            raise ValueError(f"total mass {total} exceeds one")
    elif abs(total - 1) > tol:
        raise ValueError(f"distribution is not normalised (sum {total})")
    return np.clip(p, 0.0, 1.0)


def _xlogx(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    mask = p > 0
    out[mask] = p[mask] * np.log2(p[mask])
    return out


def surprisal(prob: float) -> float:
    """Information content ``-log P`` of an event."""
    if not 0 < prob <= 1:
        raise ValueError("event probability must lie in (0, 1]")
    return float(-np.log2(prob))


def shannon_entropy(p) -> float:
    p = distribution(p)
    return float(max(0.0, -_xlogx(p).sum()))


def joint_entropy(pxy) -> float:
    return shannon_entropy(np.ravel(distribution(pxy)))


def conditional_entropy(pxy) -> float:
    """``H(X|Y) = -sum P(x,y) log P(x|y)`` for a joint indexed ``[x, y]``."""
    pxy = distribution(pxy)
    if pxy.ndim != 2:
        raise ValueError("joint distribution must be 2-d")
    py = pxy.sum(axis=0)
    h = 0.0
    for y in np.flatnonzero(py > 0):
        col = pxy[:, y]
        mask = col > 0
        h -= float(np.sum(col[mask] * np.log2(col[mask] / py[y])))
    return max(0.0, h)


def relative_entropy(p, q) -> float:
    """``D(P||Q)``; returns ``inf`` when the support of P is not inside that of Q."""
    p = distribution(p)
    q = distribution(q)
    if p.shape != q.shape:
        raise ValueError(f"alphabet mismatch: {p.shape} vs {q.shape}")
    mask = p > 0
    if np.any(q[mask] == 0):
        return INF
    return float(max(0.0, np.sum(p[mask] * np.log2(p[mask] / q[mask]))))


def mutual_information(pxy) -> float:
    """``H(X:Y)`` as the relative entropy between the joint and the product of marginals."""
    pxy = distribution(pxy)
    if pxy.ndim != 2:
        raise ValueError("joint distribution must be 2-d")
    product = np.outer(pxy.sum(axis=1), pxy.sum(axis=0))
    return relative_entropy(pxy.ravel(), product.ravel())


def min_entropy(p) -> float:
    p = distribution(p)
    return float(max(0.0, -np.log2(p.max())))


def max_entropy(p) -> float:
    p = distribution(p)
    return float(max(0.0, 2 * np.log2(np.sqrt(p).sum())))


def _check_eps(eps: float) -> None:
    if not 0 <= eps < 1:
        raise ValueError(f"smoothing parameter must lie in [0, 1), got {eps}")


def smooth_min_distribution(p, eps: float) -> np.ndarray:
    """Distribution within statistical distance ``eps`` of ``p`` with the smallest peak.

    Mass ``eps`` is shaved off the largest atoms down to a common cap and
    poured into the smallest atoms, never lifting them above the cap.
    """
    p = distribution(p)
    _check_eps(eps)
    d = p.size
    order = np.argsort(-p, kind="stable")
    s = p[order]
    csum = np.cumsum(s)
    cap = s[0]
    for j in range(1, d + 1):
        c = (csum[j - 1] - eps) / j
        nxt = s[j] if j < d else -np.inf
        if c >= nxt:
            cap = c
            break
    cap = max(cap, 1.0 / d)
    q = np.minimum(s, cap)
    spare = 1.0 - q.sum()
    # water-fill from the bottom
    for i in range(d - 1, -1, -1):
        if spare <= 0:
            break
        add = min(cap - q[i], spare)
        q[i] += add
        spare -= add
    out = np.empty(d)
    out[order] = q
    return out


def smooth_max_distribution(p, eps: float) -> np.ndarray:
    """Distribution within statistical distance ``eps`` of ``p`` with the smallest
    ``(sum sqrt Q)^2``: the lightest atoms are removed and their mass moved onto
    the heaviest atom."""
    p = distribution(p)
    _check_eps(eps)
    order = np.argsort(p, kind="stable")
    q = p[order].copy()
    budget = min(eps, 1.0 - q[-1])
    moved = 0.0
    for i in range(q.size - 1):
        left = budget - moved
        if left <= 0:
            break
        # an atom within rounding of the remaining budget is removed whole
        take = q[i] if q[i] <= left + 1e-15 else left
        q[i] -= take
        moved += take
    q[-1] += moved
    out = np.empty_like(q)
    out[order] = q
    return out


def smooth_min_entropy_classical(p, eps: float) -> float:
    return min_entropy(smooth_min_distribution(p, eps))


def smooth_max_entropy_classical(p, eps: float) -> float:
    return max_entropy(smooth_max_distribution(p, eps))


def guessing_probability(pxy) -> float:
    """Optimal probability of guessing X from Y, ``sum_y max_x P(x, y)``."""
    pxy = distribution(pxy)
    if pxy.ndim != 2:
        raise ValueError("joint distribution must be 2-d")
    return float(pxy.max(axis=0).sum())


def conditional_min_entropy_classical(pxy) -> float:
    return float(max(0.0, -np.log2(guessing_probability(pxy))))


def gallagher_bound(p, eps1: float, eps2: float) -> float:
    """Upper bound ``H_max^eps1(X) + log(1/eps2) + 1`` on the minimal code length."""
    if eps1 < 0 or eps2 <= 0:
        raise ValueError("need eps1 >= 0 and eps2 > 0")
    return smooth_max_entropy_classical(p, eps1) + float(np.log2(1.0 / eps2)) + 1.0


# -- quantum conditional entropies over a qubit side system ------------------

def _bloch_vectors(r, theta, phi) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return np.stack(
        [r * np.sin(theta) * np.cos(phi), r * np.sin(theta) * np.sin(phi), r * np.cos(theta)],
        axis=-1,
    )


def _qubit_power(vec: np.ndarray, power: float) -> np.ndarray:
    """``sigma**power`` for qubit states ``sigma = (I + vec.pauli)/2`` (batched)."""
    vec = np.atleast_2d(vec)
    r = np.linalg.norm(vec, axis=-1)
    if power < 0:
        # stay strictly inside the Bloch ball so the inverse exists
        cap = 1 - 1e-15
        vec = vec * np.where(r > cap, cap / np.where(r > 0, r, 1), 1.0)[:, None]
        r = np.minimum(r, cap)
    lp = ((1 + r) / 2) ** power
    lm = np.clip((1 - r) / 2, 0.0, None) ** power
    alpha = (lp + lm) / 2
    beta = (lp - lm) / 2
    with np.errstate(invalid="ignore", divide="ignore"):
        n = np.where(r[:, None] > 0, vec / np.where(r > 0, r, 1)[:, None], 0.0)
    return alpha[:, None, None] * np.eye(2) + beta[:, None, None] * np.einsum(
        "ki,ijl->kjl", n, _PAULIS
    )


def _search_bloch(objective: Callable[[np.ndarray], np.ndarray], grid: int, seed: int,
                  maximise: bool) -> float:
    """Optimise ``objective`` over qubit states: coarse (r, theta, phi) grid then
    Nelder-Mead from the best grid points."""
    sign = -1.0 if maximise else 1.0
    rs = 1 - np.geomspace(1.0, 1e-4, grid)
    rs[0] = 0.0
    thetas = np.linspace(0, np.pi, grid)
    phis = np.linspace(0, 2 * np.pi, grid, endpoint=False)
    R, T, P = np.meshgrid(rs, thetas, phis, indexing="ij")
    vecs = _bloch_vectors(R.ravel(), T.ravel(), P.ravel())
    vals = sign * objective(vecs)
    order = np.argsort(vals)
    rng = np.random.default_rng(seed)

    def f(x):
        r = 1 / (1 + np.exp(-x[0]))
        v = _bloch_vectors(r, x[1], x[2])[None, :]
        return float(sign * objective(v)[0])

    best = float(vals[order[0]])
    starts = [order[i] for i in range(min(3, order.size))]
    for idx in starts:
        r0 = np.clip(R.ravel()[idx], 1e-3, 1 - 1e-6)
        x0 = np.array([np.log(r0 / (1 - r0)), T.ravel()[idx], P.ravel()[idx]])
        x0 += rng.normal(scale=1e-3, size=3)
        res = minimize(f, x0, method="Nelder-Mead",
                       options={"xatol": 1e-8, "fatol": 1e-12, "maxiter": 4000})
        best = min(best, float(res.fun))
    return sign * best


def quantum_conditional_min_entropy(rho_ab, dim_a: int, dim_b: int, *, grid: int = 32,
                                    seed: int = 0) -> float:
    """``H_min(A|B) = max_sigma -log ||(1 (x) sigma^-1/2) rho (1 (x) sigma^-1/2)||_inf``.

    The side system must be at most a qubit; ``sigma`` is searched over the
    Bloch ball (open interior, approaching the surface in the limit).
    """
    rho = density_matrix(rho_ab)
    if rho.shape[0] != dim_a * dim_b:
        raise ValueError(f"state dimension {rho.shape[0]} != {dim_a} x {dim_b}")
    if dim_b > 2:
        raise ValueError("side information larger than a qubit is not supported")
    if dim_b == 1:
        return float(-np.log2(np.linalg.eigvalsh(hermitian_part(rho)).max()))
    eye_a = np.eye(dim_a)

    def norm(vecs):
        s = _qubit_power(vecs, -0.5)
        k = np.einsum("ij,nkl->nikjl", eye_a, s).reshape(-1, 2 * dim_a, 2 * dim_a)
        m = k @ rho @ k
        lam = np.linalg.eigvalsh(hermitian_part(m))[:, -1]
        return np.log2(np.where(np.isfinite(lam), lam, np.inf))

    return float(-_search_bloch(norm, grid, seed, maximise=False))


def quantum_conditional_max_entropy(rho_ab, dim_a: int, dim_b: int, *, grid: int = 32,
                                    seed: int = 0) -> float:
    """``H_max(A|B) = 2 log max_sigma ||sqrt(rho) (1 (x) sqrt(sigma))||_1`` for a qubit B."""
    rho = density_matrix(rho_ab)
    if rho.shape[0] != dim_a * dim_b:
        raise ValueError(f"state dimension {rho.shape[0]} != {dim_a} x {dim_b}")
    if dim_b > 2:
        raise ValueError("side information larger than a qubit is not supported")
    evals, evecs = np.linalg.eigh(hermitian_part(rho))
    sqrt_rho = (evecs * np.sqrt(np.clip(evals, 0, None))) @ evecs.conj().T
    if dim_b == 1:
        return float(2 * np.log2(np.linalg.svd(sqrt_rho, compute_uv=False).sum()))
    eye_a = np.eye(dim_a)

    def log_fid(vecs):
        s = _qubit_power(vecs, 0.5)
        k = np.einsum("ij,nkl->nikjl", eye_a, s).reshape(-1, 2 * dim_a, 2 * dim_a)
        sv = np.linalg.svd(sqrt_rho @ k, compute_uv=False).sum(axis=-1)
        return np.log2(sv)

    return float(2 * _search_bloch(log_fid, grid, seed, maximise=True))


def classical_state(pxy) -> np.ndarray:
    """Embed a joint distribution as the diagonal state ``sum P(x,y)|x><x| (x) |y><y|``."""
    pxy = distribution(pxy)
    return np.diag(pxy.ravel()).astype(complex)


# -- entropic uncertainty overlap --------------------------------------------

@dataclass(frozen=True)
class MeasurementFamily:
    """Generalised measurements ``{F^{p,x}}_x``, one list of operators per setting ``p``."""

    settings: tuple

    def __post_init__(self):
        settings = tuple(tuple(np.array(f, dtype=complex) for f in s) for s in self.settings)
        for p, ops in enumerate(settings):
            dim = ops[0].shape[1]
            total = sum(f.conj().T @ f for f in ops)
            if not np.allclose(total, np.eye(dim), atol=1e-10, rtol=0):
                raise ValueError(f"setting {p} is not a complete measurement")
        object.__setattr__(self, "settings", settings)

    @classmethod
    def from_bases(cls, bases: Sequence[np.ndarray]) -> MeasurementFamily:
        """Projective measurements in the columns of each unitary in ``bases``."""
        settings = []
        for u in bases:
            u = np.asarray(u, dtype=complex)
            settings.append([np.outer(u[:, x], u[:, x].conj()) for x in range(u.shape[1])])
        return cls(tuple(settings))

    @classmethod
    def bb84(cls) -> MeasurementFamily:
        hadamard = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
        return cls.from_bases([np.eye(2), hadamard])


def eur_overlap(mf: MeasurementFamily, symmetry) -> tuple[float, float]:
    """Overlap ``c_q = max_p max_{x,z} ||F^{q(p),x} (F^{p,z})^dag||_inf^2``.

    Args:
        mf: the measurement family.
        symmetry: the bijection ``q`` on setting indices, as a sequence,
            mapping or callable.

    Returns:
        ``(c_q, log(1/c_q))``.
    """
    n = len(mf.settings)
    if callable(symmetry):
        q = [symmetry(p) for p in range(n)]
    elif isinstance(symmetry, Mapping):
        q = [symmetry[p] for p in range(n)]
    else:
        q = list(symmetry)
    if sorted(q) != list(range(n)):
        raise ValueError("symmetry must be a bijection on the settings")
    c = 0.0
    for p in range(n):
        for fx in mf.settings[q[p]]:
            for fz in mf.settings[p]:
                c = max(c, float(np.linalg.norm(fx @ fz.conj().T, 2)) ** 2)
    return c, float(-np.log2(c))
