"""Prepare-and-measure BB84 with classical post-processing.

Signals are simulated one qubit at a time as 2x2 density matrices (the channel
acts independently on every signal), batched over numpy arrays. Bit strings
are ``uint8`` arrays of zeros and ones. Bob's outcomes use ``-1`` for an
inconclusive result.

Randomness: every phase of a run draws from its own Philox stream derived
from ``(seed, phase)``, so a run is a pure function of its configuration.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np
from scipy.linalg import toeplitz
from scipy.signal import fftconvolve

from .entropy import conditional_min_entropy_classical
from .quantum import KrausChannel
from .security import (SecurityBudget, RateParams, binary_entropy, max_key_length,
                       sampling_deviation, secrecy_distance_toy, solve_nu_star)

INCONCLUSIVE = -1
PHASES = ("prepare", "transmit", "measure", "estimate", "reconcile", "verify", "amplify")
_S = 1 / math.sqrt(2)
# BB84_KETS[bit, basis]; basis 0 is computational, basis 1 is Hadamard
BB84_KETS = np.array([[[1, 0], [_S, _S]], [[0, 1], [_S, -_S]]], dtype=complex)


class Flag(str, enum.Enum):
    PASS = "pass"
    ABORT = "abort"


def phase_rng(seed: int, phase: str) -> np.random.Generator:
    """Counter-based generator for one protocol phase."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(PHASES.index(phase),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class ChannelModel:
    """Quantum channel between Alice and Bob.

    ``kind`` is one of ``ideal``, ``depolarizing`` (parameter ``p``),
    ``amplitude_damping`` (``gamma``) or ``intercept_resend`` (``fraction``
    of signals that Eve measures in a random basis and re-sends).
    """

    kind: str = "ideal"
    param: float = 0.0

    KINDS = {"ideal": None, "depolarizing": "p", "amplitude_damping": "gamma",
             "intercept_resend": "fraction"}

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if not 0.0 <= self.param <= 1.0:
            raise ValueError(f"channel parameter must lie in [0, 1], got {self.param}")

    @classmethod
    def from_dict(cls, d: dict) -> ChannelModel:
        d = dict(d)
        kind = d.pop("kind", "ideal")
        if kind not in cls.KINDS:
            raise ValueError(f"unknown channel kind {kind!r}")
        name = cls.KINDS[kind]
        param = float(d.pop(name, 0.0)) if name else 0.0
        if d:
            raise ValueError(f"unknown channel fields: {sorted(d)}")
        return cls(kind, param)

    def to_dict(self) -> dict:
        name = self.KINDS[self.kind]
        return {"kind": self.kind, **({name: self.param} if name else {})}


@dataclass(frozen=True)
class ProtocolConfig:
    """Run parameters.

    Attributes:
        M: number of transmitted signals.
        delta: QBER abort threshold of parameter estimation.
        k: number of sifted bits sacrificed for parameter estimation.
        t: verification hash length in bits.
        cascade_passes: number of Cascade passes.
        loss_prob: probability of an inconclusive outcome.
        seed: run seed.
        m: sifted bits required; by default five standard deviations below
            the expected number of matching conclusive signals.
        reconciliation: ``cascade`` (interactive, exact leak count) or
            ``model`` (leak charged as ``f_ec * n * h(qber)``).
        f_ec: reconciliation efficiency of the model mode.
        c_bar: measurement quality used for the key-length bound.
    """

    M: int
    delta: float = 0.05
    k: int = 1000
    t: int = 32
    cascade_passes: int = 4
    loss_prob: float = 0.0
    seed: int = 0
    m: int | None = None
    reconciliation: str = "cascade"
    f_ec: float = 1.1
    c_bar: float = 0.5

    def __post_init__(self):
        if self.M <= 0:
            raise ValueError("M must be positive")
        if not 0 < self.k < self.M:
            raise ValueError(f"need 0 < k < M, got k={self.k}, M={self.M}")
        if not 0.0 <= self.delta <= 0.5:
            raise ValueError(f"delta must lie in [0, 0.5], got {self.delta}")
        if self.t < 1:
            raise ValueError("t must be at least 1")
        if self.cascade_passes < 2:
            raise ValueError("cascade_passes must be at least 2")
        if not 0.0 <= self.loss_prob < 1.0:
            raise ValueError(f"loss_prob must lie in [0, 1), got {self.loss_prob}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.reconciliation not in ("cascade", "model"):
            raise ValueError(f"unknown reconciliation mode {self.reconciliation!r}")
        if self.m is not None and not self.k < self.m <= self.M:
            raise ValueError(f"need k < m <= M, got m={self.m}")

    @property
    def sifted_length(self) -> int:
        if self.m is not None:
            return self.m
        q = (1 - self.loss_prob) / 2
        return max(0, math.floor(self.M * q - 5 * math.sqrt(self.M * q * (1 - q))))


# -- quantum phase ------------------------------------------------------------

def prepare_states(config: ProtocolConfig, rng: np.random.Generator):
    """Random bits ``r`` and bases ``phi_a`` and the encoded kets, shape ``(M, 2)``."""
    r = rng.integers(0, 2, config.M, dtype=np.uint8)
    phi_a = rng.integers(0, 2, config.M, dtype=np.uint8)
    return r, phi_a, BB84_KETS[r, phi_a]


def _as_density(states) -> np.ndarray:
    states = np.asarray(states, dtype=complex)
    if states.ndim == 2:
        return np.einsum("mi,mj->mij", states, states.conj())
    return states


def _sample_basis(rhos: np.ndarray, basis: np.ndarray, rng: np.random.Generator):
    """Born-rule outcomes of measuring each state in its basis (0 or 1)."""
    v0 = BB84_KETS[0, basis]
    p0 = np.einsum("mi,mij,mj->m", v0.conj(), rhos, v0).real
    return (rng.random(len(rhos)) >= p0).astype(np.uint8)


def transmit(channel: ChannelModel, states, rng: np.random.Generator) -> np.ndarray:
    """Send every signal through ``channel``; returns density matrices ``(M, 2, 2)``."""
    rhos = _as_density(states).copy()
    if channel.kind == "ideal":
        return rhos
    if channel.kind == "depolarizing":
        p = channel.param
        return (1 - p) * rhos + p * np.eye(2) / 2
    if channel.kind == "amplitude_damping":
        ops = KrausChannel.amplitude_damping(channel.param).kraus_ops
        return sum(e @ rhos @ e.conj().T for e in ops)
    # intercept-resend
    m = len(rhos)
    hit = rng.random(m) < channel.param
    basis = rng.integers(0, 2, m, dtype=np.uint8)
    idx = np.flatnonzero(hit)
    outcome = _sample_basis(rhos[idx], basis[idx], rng)
    rhos[idx] = _as_density(BB84_KETS[outcome, basis[idx]])
    return rhos


def measure(states, config: ProtocolConfig, rng: np.random.Generator):
    """Bob's random bases, outcomes ``T`` (``-1`` if inconclusive) and conclusive set."""
    rhos = _as_density(states)
    m = len(rhos)
    phi_b = rng.integers(0, 2, m, dtype=np.uint8)
    outcome = _sample_basis(rhos, phi_b, rng).astype(np.int8)
    lost = rng.random(m) < config.loss_prob
    outcome[lost] = INCONCLUSIVE
    omega = np.flatnonzero(~lost)
    return phi_b, outcome, omega


# -- classical post-processing --------------------------------------------------

def sift(phi_a, phi_b, omega, m_required: int):
    """First ``m_required`` conclusive indices where the bases agree.

    Returns ``(Sigma, flag)``; ``Sigma`` is empty when the flag aborts.
    """
    phi_a = np.asarray(phi_a)
    phi_b = np.asarray(phi_b)
    omega = np.asarray(omega, dtype=np.int64)
    match = omega[phi_a[omega] == phi_b[omega]]
    if len(match) < m_required:
        return np.empty(0, dtype=np.int64), Flag.ABORT
    return match[:m_required], Flag.PASS


@dataclass(frozen=True)
class Estimate:
    qber: float
    flag: Flag
    sample: np.ndarray
    key_a: np.ndarray
    key_b: np.ndarray


def estimate_parameters(x_a, x_b, k: int, delta: float, rng: np.random.Generator) -> Estimate:
    """QBER on a uniformly random ``k``-subset, which is then discarded from the keys."""
    x_a = np.asarray(x_a, dtype=np.uint8)
    x_b = np.asarray(x_b, dtype=np.uint8)
    if len(x_a) != len(x_b):
        raise ValueError("strings differ in length")
    if k > len(x_a):
        raise ValueError(f"sample size {k} exceeds the {len(x_a)} available bits")
    sample = np.sort(rng.permutation(len(x_a))[:k])
    qber = float(np.mean(x_a[sample] != x_b[sample])) if k else 0.0
    keep = np.ones(len(x_a), dtype=bool)
    keep[sample] = False
    flag = Flag.ABORT if qber > delta else Flag.PASS
    return Estimate(qber, flag, sample, x_a[keep], x_b[keep])


def reconcile_cascade(x_a, x_b, initial_qber: float, passes: int,
                      rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Cascade error correction of Bob's string towards Alice's.

    Block size starts at ``ceil(0.73 / qber)`` and doubles every pass. Each
    pass uses a fresh shared permutation; every correction is propagated back
    to the blocks of all passes run so far. Returns Bob's corrected string and
    the number of parity bits disclosed.
    """
    a = np.asarray(x_a, dtype=np.uint8)
    b = np.asarray(x_b, dtype=np.uint8).copy()
    n = len(a)
    if len(b) != n:
        raise ValueError("strings differ in length")
    if n == 0 or not 0 < initial_qber < 0.5:
        return b, 0
    leak = 0
    size0 = math.ceil(0.73 / initial_qber)
    perms, positions, sizes, diffs = [], [], [], []

    def search(p: int, blk: int) -> int:
        nonlocal leak
        idx = perms[p][blk * sizes[p]:(blk + 1) * sizes[p]]
        while len(idx) > 1:
            half = (len(idx) + 1) // 2
            leak += 1
            left = idx[:half]
            if (int(a[left].sum()) + int(b[left].sum())) % 2:
                idx = left
            else:
                idx = idx[half:]
        return int(idx[0])

    for p in range(passes):
        size = min(size0 * 2 ** p, n)
        perm = rng.permutation(n)
        pos = np.empty(n, dtype=np.int64)
        pos[perm] = np.arange(n)
        starts = np.arange(0, n, size)
        diff = ((np.add.reduceat(a[perm], starts) + np.add.reduceat(b[perm], starts)) % 2)
        diff = diff.astype(np.uint8)
        leak += len(starts)
        perms.append(perm)
        positions.append(pos)
        sizes.append(size)
        diffs.append(diff)
        queue = [(p, int(blk)) for blk in np.flatnonzero(diff)]
        while queue:
            qp, blk = queue.pop()
            if not diffs[qp][blk]:
                continue
            i = search(qp, blk)
            b[i] ^= 1
            for j in range(p + 1):
                bj = int(positions[j][i] // sizes[j])
                diffs[j][bj] ^= 1
                if diffs[j][bj]:
                    queue.append((j, bj))
    return b, leak


def model_leak(n: int, qber: float, f_ec: float = 1.1) -> int:
    """Leak of a one-way code at efficiency ``f_ec``: ``ceil(f_ec n h(qber))``."""
    return math.ceil(f_ec * n * binary_entropy(min(qber, 0.5)))


@dataclass(frozen=True)
class ToeplitzHash:
    """Two-universal hash ``x -> T x`` over GF(2) with a Toeplitz matrix ``T``.

    ``T[i, j] = seed[i - j + n_in - 1]``, so the seed holds ``n_in + n_out - 1``
    bits.
    """

    n_in: int
    n_out: int
    seed: np.ndarray = field(repr=False)

    def __post_init__(self):
        seed = np.asarray(self.seed, dtype=np.uint8)
        if not 0 <= self.n_out <= self.n_in:
            raise ValueError(f"need 0 <= n_out <= n_in, got {self.n_out} > {self.n_in}")
        if len(seed) != max(self.n_in + self.n_out - 1, 0):
            raise ValueError("seed must hold n_in + n_out - 1 bits")
        object.__setattr__(self, "seed", seed)

    @classmethod
    def random(cls, n_in: int, n_out: int, rng: np.random.Generator) -> ToeplitzHash:
        return cls(n_in, n_out, rng.integers(0, 2, max(n_in + n_out - 1, 0), dtype=np.uint8))

    @property
    def seed_bits(self) -> int:
        return len(self.seed)

    def matrix(self) -> np.ndarray:
        col = self.seed[self.n_in - 1:]
        row = self.seed[self.n_in - 1::-1]
        return toeplitz(col, row).astype(np.uint8)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.uint8)
        if len(x) != self.n_in:
            raise ValueError(f"hash expects {self.n_in} bits, got {len(x)}")
        if self.n_out == 0:
            return np.zeros(0, dtype=np.uint8)
        lo, hi = self.n_in - 1, self.n_in - 1 + self.n_out
        if self.n_in * self.n_out <= 1 << 20:
            full = np.convolve(self.seed.astype(np.int64), x.astype(np.int64))
        else:
            full = np.rint(fftconvolve(self.seed.astype(float), x.astype(float))).astype(np.int64)
        return (full[lo:hi] % 2).astype(np.uint8)


def verify_hash(x_a, x_b, t: int, rng: np.random.Generator) -> Flag:
    """Compare ``t``-bit Toeplitz hashes of both strings under a fresh shared seed."""
    x_a = np.asarray(x_a, dtype=np.uint8)
    x_b = np.asarray(x_b, dtype=np.uint8)
    if len(x_a) != len(x_b):
        raise ValueError("strings differ in length")
    n_in = max(len(x_a), t)
    pad = np.zeros(n_in - len(x_a), dtype=np.uint8)
    h = ToeplitzHash.random(n_in, t, rng)
    same = np.array_equal(h(np.concatenate([x_a, pad])), h(np.concatenate([x_b, pad])))
    return Flag.PASS if same else Flag.ABORT


def privacy_amplification(x, l: int, rng: np.random.Generator):
    """Compress ``x`` to ``l`` bits with a random Toeplitz hash.

    Returns ``(key, hash)``; the hash (its seed) is public.
    """
    x = np.asarray(x, dtype=np.uint8)
    if not 0 <= l <= len(x):
        raise ValueError(f"key length {l} must lie in [0, {len(x)}]")
    h = ToeplitzHash.random(len(x), l, rng)
    return h(x), h


def leftover_hash_toy(n_in: int = 8, l: int = 2, side_info=None) -> tuple[float, float]:
    """Exact distance from ideal of Toeplitz-hashed keys with classical side information.

    Enumerates every input ``x`` and every Toeplitz seed. ``side_info`` is the
    joint distribution ``P[x, e]`` of a uniform-or-not input and Eve's
    register; by default ``x`` is uniform and Eve holds its parity.

    Returns:
        ``(||omega_KSE - chi_K (x) omega_SE||_1, 2**(-(H_min(X|E) - l)/2))``.
    """
    xs = ((np.arange(2 ** n_in)[:, None] >> np.arange(n_in)) & 1).astype(np.int64)
    if side_info is None:
        side_info = np.zeros((2 ** n_in, 2))
        side_info[np.arange(2 ** n_in), xs.sum(axis=1) % 2] = 2.0 ** -n_in
    pxe = np.asarray(side_info, dtype=float)
    d_e = pxe.shape[1]
    n_seed = n_in + l - 1
    seeds = ((np.arange(2 ** n_seed)[:, None] >> np.arange(n_seed)) & 1).astype(np.uint8)
    weights = 1 << np.arange(l)
    total = 0.0
    for s in seeds:
        mat = ToeplitzHash(n_in, l, s).matrix().astype(np.int64)
        keys = ((xs @ mat.T) % 2) @ weights
        pke = np.zeros((2 ** l, d_e))
        np.add.at(pke, keys, pxe)
        total += secrecy_distance_toy(np.diag(pke.ravel()), l)
    distance = 2 * total / len(seeds)
    hmin = conditional_min_entropy_classical(pxe)
    return float(distance), float(2.0 ** (-(hmin - l) / 2))


# -- full run -------------------------------------------------------------------

def _hex_bits(bits) -> str:
    bits = np.asarray(bits, dtype=np.uint8)
    return np.packbits(bits).tobytes().hex()


def _hex_set(indices, size: int) -> str:
    mask = np.zeros(size, dtype=np.uint8)
    mask[np.asarray(indices, dtype=np.int64)] = 1
    return _hex_bits(mask)


@dataclass
class ProtocolRun:
    """Transcript of one protocol execution. Keys are ``None`` after any abort."""

    config: ProtocolConfig
    channel: ChannelModel
    r: np.ndarray
    phi_a: np.ndarray
    phi_b: np.ndarray
    T: np.ndarray
    Omega: np.ndarray
    Sigma: np.ndarray
    qber_estimate: float | None = None
    flags: dict = field(default_factory=lambda: {"sift": None, "pe": None, "ec": None})
    leak_ec_bits: int = 0
    # simulation diagnostic, not part of the protocol: bits still wrong after reconciliation
    residual_errors: int | None = None
    key_a: np.ndarray | None = None
    key_b: np.ndarray | None = None
    transcript: dict = field(default_factory=dict)
    security: dict = field(default_factory=dict)

    @property
    def transcript_bits(self) -> int:
        return int(sum(self.transcript.values()))

    @property
    def aborted(self) -> bool:
        return any(f is not Flag.PASS for f in self.flags.values())

    @property
    def key_length(self) -> int:
        return 0 if self.key_a is None else len(self.key_a)

    def summary(self) -> str:
        flags = ",".join(f"{k}:{'-' if v is None else v.value}" for k, v in self.flags.items())
        qber = "nan" if self.qber_estimate is None else f"{self.qber_estimate:.6g}"
        return (f"flags={flags} qber={qber} leak={self.leak_ec_bits} "
                f"l={self.key_length} M={self.config.M}")

    def to_dict(self) -> dict[str, Any]:
        cfg = {f.name: getattr(self.config, f.name) for f in fields(self.config)}
        t_str = "".join("-" if v == INCONCLUSIVE else str(int(v)) for v in self.T)
        return {
            "config": cfg,
            "channel": self.channel.to_dict(),
            "r": _hex_bits(self.r),
            "phi_a": _hex_bits(self.phi_a),
            "phi_b": _hex_bits(self.phi_b),
            "T": t_str,
            "Omega": _hex_set(self.Omega, self.config.M),
            "Sigma": _hex_set(self.Sigma, self.config.M),
            "qber_estimate": self.qber_estimate,
            "flags": {k: None if v is None else v.value for k, v in self.flags.items()},
            "leak_ec_bits": self.leak_ec_bits,
            "residual_errors": self.residual_errors,
            "key_length": self.key_length,
            "key_a": None if self.key_a is None else _hex_bits(self.key_a),
            "key_b": None if self.key_b is None else _hex_bits(self.key_b),
            "transcript": dict(self.transcript),
            "transcript_bits": self.transcript_bits,
            "security": dict(self.security),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def run_protocol(config: ProtocolConfig, channel: ChannelModel,
                 security_budget: SecurityBudget | None = None) -> ProtocolRun:
    """prepare, transmit, measure, sift, estimate, reconcile, verify, amplify.

    A failed check stops the run with the corresponding flag set to abort;
    later flags stay ``None`` and no keys are produced.
    """
    budget = security_budget or SecurityBudget()
    m = config.sifted_length
    if m <= config.k:
        raise ValueError(f"sifted length {m} leaves no raw key after k={config.k} samples")
    seed = config.seed

    r, phi_a, kets = prepare_states(config, phase_rng(seed, "prepare"))
    rhos = transmit(channel, kets, phase_rng(seed, "transmit"))
    phi_b, outcomes, omega = measure(rhos, config, phase_rng(seed, "measure"))
    sigma, f_sift = sift(phi_a, phi_b, omega, m)
    run = ProtocolRun(config, channel, r, phi_a, phi_b, outcomes, omega, sigma)
    run.flags["sift"] = f_sift
    # Bob announces bases and the conclusive set, Alice her bases
    run.transcript.update(bases_b=config.M, conclusive=config.M, bases_a=config.M)
    if f_sift is Flag.ABORT:
        return run

    x_a = r[sigma]
    x_b = outcomes[sigma].astype(np.uint8)
    est = estimate_parameters(x_a, x_b, config.k, config.delta, phase_rng(seed, "estimate"))
    run.qber_estimate = est.qber
    run.flags["pe"] = est.flag
    run.transcript.update(pe_indices=config.k * max(1, math.ceil(math.log2(m))),
                          pe_values=config.k)
    if est.flag is Flag.ABORT:
        return run

    n = len(est.key_a)
    rec_rng = phase_rng(seed, "reconcile")
    if config.reconciliation == "cascade":
        corrected, leak = reconcile_cascade(est.key_a, est.key_b, est.qber,
                                            config.cascade_passes, rec_rng)
        run.transcript["cascade_seed"] = 64
    else:
        leak = model_leak(n, est.qber, config.f_ec)
        corrected = est.key_a.copy()
    run.leak_ec_bits = int(leak)
    run.residual_errors = int(np.count_nonzero(est.key_a != corrected))
    run.transcript["ec_parities"] = int(leak)

    f_ec = verify_hash(est.key_a, corrected, config.t, phase_rng(seed, "verify"))
    run.flags["ec"] = f_ec
    run.transcript.update(hash_seed=max(n, config.t) + config.t - 1, hash_value=config.t)
    if f_ec is Flag.ABORT:
        return run

    nu = sampling_deviation(n, config.k, budget.eps_bar)
    h_bound = n * (math.log2(1 / config.c_bar) - binary_entropy(min(config.delta + nu, 0.5)))
    l = min(n, max_key_length(h_bound, leak + config.t, budget))
    pa_rng = phase_rng(seed, "amplify")
    key_a, h = privacy_amplification(est.key_a, l, pa_rng)
    run.key_a = key_a
    run.key_b = h(corrected)
    run.transcript["pa_seed"] = h.seed_bits
    params = RateParams(M=config.M, n=n, k=config.k, m=m, l=l, s=leak, t=config.t,
                        delta=config.delta, c_bar=config.c_bar, leak_ec=leak)
    ns = solve_nu_star(params)
    run.security = {"nu": nu, "hmin_bound": h_bound, "nu_star": ns.nu,
                    "eps_pa_at_nu_star": ns.eps_pa}
    return run
