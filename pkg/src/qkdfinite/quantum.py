"""Small-dimension quantum states, channels and distance measures.

States are plain ``numpy`` arrays: a density matrix is a ``(d, d)`` complex
Hermitian positive semi-definite array with trace in ``[0, 1]`` (sub-normalised
states are allowed), a pure state is a length-``d`` amplitude vector.
Channels are stored as a tuple of Kraus operators in :class:`KrausChannel`.

All logarithms are base two.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-12
EIG_CLAMP = 1e-12


def density_matrix(rho, *, normalised: bool = False, tol: float = 1e-9) -> np.ndarray:
    """Validate and return ``rho`` as a complex density matrix.

    Args:
        rho: square array-like.
        normalised: also require unit trace.
        tol: tolerance used for the Hermiticity, positivity and trace checks.

    Raises:
        ValueError: if ``rho`` is not a (sub-)normalised state.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if not np.allclose(rho, rho.conj().T, atol=max(tol, HERMITIAN_TOL), rtol=0):
        raise ValueError("density matrix is not Hermitian")
    evals = np.linalg.eigvalsh(hermitian_part(rho))
    if evals.min() < -max(tol, PSD_TOL):
        raise ValueError(f"density matrix is not positive (min eigenvalue {evals.min():.3g})")
    tr = float(np.real(np.trace(rho)))
    if tr > 1 + max(tol, TRACE_TOL):
        raise ValueError(f"trace {tr} exceeds one")
    if normalised and abs(tr - 1) > tol:
        raise ValueError(f"state is not normalised (trace {tr})")
    return rho


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def ket(*amplitudes) -> np.ndarray:
    return np.asarray(amplitudes, dtype=complex)


def projector(psi) -> np.ndarray:
    """Outer product ``|psi><psi|``."""
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def _check_same_dim(rho: np.ndarray, tau: np.ndarray) -> None:
    if rho.shape != tau.shape:
        raise ValueError(f"dimension mismatch: {rho.shape} vs {tau.shape}")


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(hermitian_part(rho))
    evals[evals < EIG_CLAMP] = 0.0
    return (evecs * np.sqrt(evals)) @ evecs.conj().T


def spectrum(rho) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix, with tiny values clamped to zero."""
    evals = np.linalg.eigvalsh(hermitian_part(np.asarray(rho, dtype=complex)))
    evals[np.abs(evals) < EIG_CLAMP] = 0.0
    return evals


def trace_norm(a) -> float:
    return float(np.sum(np.linalg.svd(np.asarray(a, dtype=complex), compute_uv=False)))


def trace_distance(rho, tau) -> float:
    """Generalised trace distance ``max(Tr{rho - tau}_+, Tr{tau - rho}_+)``."""
    rho = np.asarray(rho, dtype=complex)
    tau = np.asarray(tau, dtype=complex)
    _check_same_dim(rho, tau)
    evals = np.linalg.eigvalsh(hermitian_part(rho - tau))
    pos = float(evals[evals > 0].sum())
    neg = float(-evals[evals < 0].sum())
    return max(pos, neg)


def fidelity_norm(rho, tau) -> float:
    """``||sqrt(rho) sqrt(tau)||_1`` as the sum of singular values.

    The SVD is used instead of eigenvalues of the Gram matrix: squaring the
    product turns rounding noise of 1e-16 into spurious singular values of
    order 1e-8 for pure states.
    """
    rho = np.asarray(rho, dtype=complex)
    tau = np.asarray(tau, dtype=complex)
    _check_same_dim(rho, tau)
    # fixed argument order makes the result exactly symmetric
    if rho.tobytes() > tau.tobytes():
        rho, tau = tau, rho
    return trace_norm(_psd_sqrt(rho) @ _psd_sqrt(tau))


def _deficit(rho: np.ndarray) -> float:
    # rounding noise in a unit trace must not leak into the square root
    d = 1.0 - float(np.real(np.trace(rho)))
    return d if d > TRACE_TOL else 0.0


def generalized_fidelity(rho, tau) -> float:
    """Fidelity between sub-normalised states.

    Evaluated as ``||sqrt(rho) sqrt(tau)||_1 + sqrt((1 - Tr rho)(1 - Tr tau))``,
    which reduces to the usual fidelity when either state has unit trace.
    """
    rho = np.asarray(rho, dtype=complex)
    tau = np.asarray(tau, dtype=complex)
    _check_same_dim(rho, tau)
    deficit_rho = _deficit(rho)
    deficit_tau = _deficit(tau)
    f = fidelity_norm(rho, tau) + np.sqrt(deficit_rho * deficit_tau)
    return float(min(f, 1.0))


def purified_distance(rho, tau) -> float:
    """``sqrt(1 - F(rho, tau)^2)`` with the generalised fidelity."""
    f = generalized_fidelity(rho, tau)
    return float(np.sqrt(max(0.0, 1.0 - f * f)))


def partial_trace(rho, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every subsystem of ``rho`` not listed in ``keep``.

    Args:
        rho: density matrix on the tensor product of ``dims``.
        dims: subsystem dimensions, in kron order.
        keep: indices of the subsystems to retain (kept in the given order).
    """
    rho = np.asarray(rho, dtype=complex)
    dims = list(dims)
    n = len(dims)
    total = int(np.prod(dims))
    if rho.shape != (total, total):
        raise ValueError(f"state of shape {rho.shape} does not match dims {dims}")
    keep = list(keep)
    tensor = rho.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # einsum with repeated labels for the traced systems
    row = list(range(n))
    col = [n + i for i in range(n)]
    for i in traced:
        col[i] = row[i]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    kept_dim = int(np.prod([dims[i] for i in keep])) if keep else 1
    return np.einsum(tensor, row + col, out).reshape(kept_dim, kept_dim)


def purify(rho) -> np.ndarray:
    """Canonical purification ``sum_i |i>_R (x) sqrt(rho) |i>_A``.

    For a diagonal ``rho`` this is ``sum_x sqrt(p_x) |x>_R |x>_A``. The
    reference system comes first, so ``partial_trace(psi psi^dag, (d, d),
    keep=[1])`` recovers ``rho``.
    """
    rho = density_matrix(rho, normalised=True)
    # psi[i, a] = sqrt(rho)[a, i]
    return _psd_sqrt(rho).T.reshape(-1).copy()


def von_neumann_entropy(rho) -> float:
    """``-Tr(rho log rho)`` in bits; requires a normalised state."""
    rho = density_matrix(rho, normalised=True)
    evals = np.clip(spectrum(rho), 0.0, 1.0)
    return entropy_of_spectrum(evals)


def entropy_of_spectrum(evals) -> float:
    p = np.asarray(evals, dtype=float)
    p = p[p > 0]
    return float(max(0.0, -np.sum(p * np.log2(p))))


@dataclass(frozen=True)
class KrausChannel:
    """A CPTP map given by Kraus operators ``E_j`` of shape ``(out_dim, in_dim)``."""

    kraus_ops: tuple

    def __post_init__(self):
        ops = tuple(np.array(e, dtype=complex) for e in self.kraus_ops)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        shape = ops[0].shape
        if any(e.shape != shape or e.ndim != 2 for e in ops):
            raise ValueError("Kraus operators must share one 2-d shape")
        for e in ops:
            e.setflags(write=False)
        completeness = sum(e.conj().T @ e for e in ops)
        if not np.allclose(completeness, np.eye(shape[1]), atol=1e-10, rtol=0):
            raise ValueError("Kraus operators are not trace preserving")
        object.__setattr__(self, "kraus_ops", ops)

    @property
    def in_dim(self) -> int:
        return self.kraus_ops[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.kraus_ops[0].shape[0]

    @property
    def env_dim(self) -> int:
        return len(self.kraus_ops)

    @classmethod
    def identity(cls, dim: int = 2) -> KrausChannel:
        return cls((np.eye(dim),))

    @classmethod
    def amplitude_damping(cls, gamma: float) -> KrausChannel:
        """Qubit decay ``|1> -> |0>`` with probability ``gamma``."""
        if not 0.0 <= gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
        e0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - gamma)]])
        e1 = np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]])
        return cls((e0, e1))

    @classmethod
    def depolarizing(cls, p: float) -> KrausChannel:
        """``rho -> (1 - p) rho + p I/2`` on a qubit."""
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {p}")
        paulis = (
            np.eye(2),
            np.array([[0, 1], [1, 0]]),
            np.array([[0, -1j], [1j, 0]]),
            np.array([[1, 0], [0, -1]]),
        )
        weights = (1 - 3 * p / 4, p / 4, p / 4, p / 4)
        return cls(tuple(np.sqrt(w) * s for w, s in zip(weights, paulis)))

    def __call__(self, rho) -> np.ndarray:
        return apply_channel(self, rho)

    def compose(self, first: KrausChannel) -> KrausChannel:
        """The channel ``self o first``."""
        if first.out_dim != self.in_dim:
            raise ValueError("dimension mismatch in composition")
        return KrausChannel(tuple(a @ b for a in self.kraus_ops for b in first.kraus_ops))


def apply_channel(ch: KrausChannel, rho) -> np.ndarray:
    """``sum_j E_j rho E_j^dag``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (ch.in_dim, ch.in_dim):
        raise ValueError(f"channel expects dimension {ch.in_dim}, got {rho.shape}")
    out = sum(e @ rho @ e.conj().T for e in ch.kraus_ops)
    return hermitian_part(out)


def isometric_extension(ch: KrausChannel) -> np.ndarray:
    """Stinespring isometry ``U = sum_j E_j (x) |j>_E`` with rows ordered B (x) E."""
    env = ch.env_dim
    u = np.zeros((ch.out_dim * env, ch.in_dim), dtype=complex)
    for j, e in enumerate(ch.kraus_ops):
        basis = np.zeros((env, 1))
        basis[j, 0] = 1.0
        u += np.kron(e, basis)
    return u


def complementary_channel(ch: KrausChannel, rho) -> np.ndarray:
    """Environment output ``Tr_B(U rho U^dag)``; entries are ``Tr(E_j rho E_k^dag)``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (ch.in_dim, ch.in_dim):
        raise ValueError(f"channel expects dimension {ch.in_dim}, got {rho.shape}")
    u = isometric_extension(ch)
    joint = u @ rho @ u.conj().T
    return hermitian_part(partial_trace(joint, (ch.out_dim, ch.env_dim), keep=[1]))


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density_matrix(dim: int, rng: np.random.Generator, *, rank: int | None = None,
                          trace: float = 1.0) -> np.ndarray:
    """Random state from a Ginibre ensemble, scaled to the requested trace."""
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return hermitian_part(trace * rho / np.real(np.trace(rho)))


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return psi / np.linalg.norm(psi)
