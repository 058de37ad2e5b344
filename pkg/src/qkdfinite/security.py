"""Finite-key security formulas for prepare-and-measure BB84.

Everything that spans many orders of magnitude (failure probabilities) is
handled as a base-two logarithm and only exponentiated on output.
"""

from __future__ import annotations

import decimal
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .quantum import density_matrix, hermitian_part

LN2 = math.log(2.0)
_HP = decimal.Context(prec=50)  # working precision for polishing nu*
DELTA_TERMS = ("thesis", "literature")


@dataclass(frozen=True)
class SecurityBudget:
    """Failure probabilities of the protocol.

    Attributes:
        eps: overall security target of the key.
        eps_ec: correctness failure of error correction, ``2**-t``.
        eps_bar: smoothing parameter of the min-entropy.
        eps_bar_prime: probability that the statistics are incompatible.
        eps_pa: secrecy failure, filled in once computed.
    """

    eps: float = 1e-9
    eps_ec: float = 1e-10
    eps_bar: float = 1e-10
    eps_bar_prime: float = 1e-11
    eps_pa: float | None = None

    def __post_init__(self):
        for name in ("eps", "eps_ec", "eps_bar", "eps_bar_prime"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.eps_pa is not None and not 0 <= self.eps_pa <= 1:
            raise ValueError(f"eps_pa must lie in [0, 1], got {self.eps_pa}")

    @property
    def slack(self) -> float:
        """``eps - eps_bar - eps_ec``, the budget left for privacy amplification."""
        return self.eps - self.eps_bar - self.eps_ec


@dataclass(frozen=True)
class RateParams:
    """Structural parameters of one protocol instance.

    ``n`` raw-key bits, ``k`` estimation bits, ``m`` sifted bits out of ``M``
    signals, final key length ``l``, syndrome length ``s``, hash length ``t``,
    estimation threshold ``delta`` and measurement quality ``c_bar``.
    """

    M: int
    n: int
    k: int
    m: int
    l: int = 0
    s: float = 0
    t: int = 0
    delta: float = 0.0
    c_bar: float = 0.5
    leak_ec: float = 0.0

    def __post_init__(self):
        if not 0 < self.c_bar <= 1:
            raise ValueError(f"c_bar must lie in (0, 1], got {self.c_bar}")
        if not 0 <= self.delta <= 1:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        if self.n <= 0 or self.k <= 0:
            raise ValueError("n and k must be positive")
        if not self.n + self.k <= self.m <= self.M:
            raise ValueError(f"need n + k <= m <= M, got n={self.n} k={self.k} "
                             f"m={self.m} M={self.M}")
        if self.l > self.n:
            raise ValueError(f"final key length l={self.l} exceeds n={self.n}")


@dataclass
class RateReport:
    r_sifted: float
    r_per_signal: float
    l_max: int
    nu_star: float | None
    eps_pa_at_nu_star: float | None
    n: int
    m: int
    k: int
    eps_bar: float
    eps_bar_prime: float
    M: int = 0
    feasible: bool = True
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def binary_entropy(x: float) -> float:
    """``h(x) = -x log x - (1 - x) log(1 - x)``."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy needs x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return float(-x * math.log2(x) - (1 - x) * math.log2(1 - x))


def log2_epsilon_pa(nu: float, p: RateParams) -> float:
    if nu < 0 or p.delta + nu > 1:
        raise ValueError(f"need 0 <= nu and delta + nu <= 1, got nu={nu}")
    exponent = (p.n * math.log2(1 / p.c_bar) - p.n * binary_entropy(p.delta + nu)
                - p.s - p.t - p.l)
    return -exponent / 5


def epsilon_pa(nu: float, p: RateParams) -> float:
    """Secrecy failure ``2**(-(n log(1/c) - n h(delta + nu) - s - t - l) / 5)``."""
    return float(2.0 ** log2_epsilon_pa(nu, p))


def log2_sampling_bound(nu: float, p: RateParams) -> float:
    """``log2 exp(-n k^2 nu^2 / (2 (n + k)(k + 1)))``."""
    return -p.n * p.k ** 2 * nu ** 2 / (2 * (p.n + p.k) * (p.k + 1)) / LN2


def sampling_deviation(n: int, k: int, eps: float) -> float:
    """The ``nu`` at which the sampling bound equals ``eps``."""
    return math.sqrt(2 * (n + k) * (k + 1) * math.log(1 / eps) / (n * k ** 2))


@dataclass(frozen=True)
class NuStar:
    nu: float | None
    log2_eps_pa: float | None
    solvable: bool
    within_quarter: bool

    @property
    def eps_pa(self) -> float | None:
        return None if self.log2_eps_pa is None else float(2.0 ** self.log2_eps_pa)


def _bisect(f: Callable[[float], float], lo: float, hi: float) -> float:
    flo = f(lo)
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return lo if abs(flo) <= abs(f(hi)) else hi


def solve_nu_star(p: RateParams) -> NuStar:
    """Unique crossing of ``eps_pa(nu)`` with the sampling bound.

    Solvable only when ``eps_pa(0) < 1``. On ``[0, 1/2 - delta]`` the left side
    increases and the right side decreases, so the crossing found there is
    unique; otherwise the remaining range up to ``1 - delta`` is scanned. The
    double-precision root is then polished in 50-digit arithmetic, because the
    exponent of ``eps_pa`` cancels terms of order ``n``.
    """
    if log2_epsilon_pa(0.0, p) >= 0:
        return NuStar(None, None, False, False)

    def f(nu):
        return log2_epsilon_pa(nu, p) - log2_sampling_bound(nu, p)

    mono_hi = max(0.0, 0.5 - p.delta)
    if mono_hi > 0 and f(mono_hi) > 0:
        nu = _bisect(f, 0.0, mono_hi)
    else:
        grid = np.linspace(mono_hi, 1 - p.delta, 1001)
        vals = np.array([f(x) for x in grid])
        idx = np.flatnonzero(vals > 0)
        if idx.size == 0:
            return NuStar(None, None, False, False)
        i = int(idx[0])
        nu = grid[0] if i == 0 else _bisect(f, grid[i - 1], grid[i])
    nu = _polish_nu(float(nu), p)
    log_eps = float(_log2_eps_pa_hp(decimal.Decimal(nu), p))
    return NuStar(nu, log_eps, True, log_eps <= -2.0)


def _log2_eps_pa_hp(nu: decimal.Decimal, p: RateParams) -> decimal.Decimal:
    # the exponent cancels terms of size n, so double precision loses digits
    with decimal.localcontext(_HP):
        D = decimal.Decimal
        ln2 = D(2).ln()
        x = D(p.delta) + nu
        h = D(0) if x in (0, 1) else -(x * x.ln() + (1 - x) * (1 - x).ln()) / ln2
        n = D(p.n)
        exponent = n * (1 / D(p.c_bar)).ln() / ln2 - n * h - D(p.s) - D(p.t) - D(p.l)
        return -exponent / 5


def _log2_sampling_hp(nu: decimal.Decimal, p: RateParams) -> decimal.Decimal:
    with decimal.localcontext(_HP):
        n, k = decimal.Decimal(p.n), decimal.Decimal(p.k)
        return -n * k * k * nu * nu / (2 * (n + k) * (k + 1)) / decimal.Decimal(2).ln()


def _polish_nu(nu: float, p: RateParams) -> float:
    """Newton steps on the log-domain gap in 50-digit arithmetic, rounded to a double."""
    D = decimal.Decimal
    with decimal.localcontext(_HP):
        x = D(nu)
        ln2 = D(2).ln()
        n, k = D(p.n), D(p.k)
        for _ in range(8):
            y = D(p.delta) + x
            if not 0 < y < 1 or x < 0:
                return nu
            gap = _log2_eps_pa_hp(x, p) - _log2_sampling_hp(x, p)
            slope = (n / 5 * ((1 - y) / y).ln() / ln2
                     + n * k * k * x / ((n + k) * (k + 1) * ln2))
            if slope <= 0:
                return nu
            step = gap / slope
            x -= step
            if abs(step) <= D("1e-40") * max(abs(x), D("1e-300")):
                break
    candidate = float(x)
    if not 0 <= candidate <= 1 - p.delta:
        return nu
    # keep whichever double is closest to the exact crossing
    best, best_gap = nu, None
    for c in (np.nextafter(candidate, -np.inf), candidate, np.nextafter(candidate, np.inf), nu):
        c = float(c)
        if c < 0 or p.delta + c > 1:
            continue
        g = abs(_log2_eps_pa_hp(D(c), p) - _log2_sampling_hp(D(c), p))
        if best_gap is None or g < best_gap:
            best, best_gap = c, g
    return best


def max_key_length(hmin_bound: float, leak_ec: float, b: SecurityBudget) -> int:
    """``floor(H_min - leak_EC - 2 log(1/(2 (eps - eps_bar - eps_ec))))``, at least 0."""
    if b.slack <= 0:
        raise ValueError("security budget violated: eps - eps_bar - eps_ec <= 0")
    penalty = 2 * (-1.0 - math.log2(b.slack))
    return max(0, math.floor(hmin_bound - leak_ec - penalty))


def asymptotic_rate(h_x_given_e: float, h_x_given_y: float) -> float:
    """Sifted rate ``H(X|E) - H(X|Y)``; negative values are returned as is."""
    return h_x_given_e - h_x_given_y


def finite_size_correction(n: int, b: SecurityBudget, delta_term: str = "thesis") -> float:
    """The correction ``Delta`` subtracted (with ``leak_EC``) from ``n H_xi``.

    ``thesis`` uses ``7 / sqrt(n log(2/(eps_bar - eps_bar')))``;
    ``literature`` uses ``7 sqrt(n log(2/eps_bar))``, i.e. a per-bit penalty of
    ``7 sqrt(log(2/eps_bar)/n)``.
    """
    if b.slack <= 0:
        raise ValueError("security budget violated: eps - eps_bar - eps_ec <= 0")
    if b.eps_bar <= b.eps_bar_prime:
        raise ValueError("need eps_bar > eps_bar_prime")
    pa_term = 2 * (-1.0 - math.log2(b.slack))
    if delta_term == "thesis":
        stat = 7 / math.sqrt(n * math.log2(2 / (b.eps_bar - b.eps_bar_prime)))
    elif delta_term == "literature":
        stat = 7 * math.sqrt(n * math.log2(2 / b.eps_bar))
    else:
        raise ValueError(f"delta_term must be one of {DELTA_TERMS}")
    return pa_term + stat


def bb84_h_xi(delta: float, nu: float, c_bar: float = 0.5) -> float:
    """Uncertainty-relation bound ``log(1/c) - h(min(delta + nu, 1/2))``."""
    return math.log2(1 / c_bar) - binary_entropy(min(delta + nu, 0.5))


def sifted_key_rate_finite(p: RateParams, b: SecurityBudget, h_xi: float | None = None,
                           delta_term: str = "thesis") -> float:
    """``r' = H_xi(X|E) - (leak_EC + Delta)/n``.

    When ``h_xi`` is omitted the BB84 bound ``1 - h(delta + nu*)`` is used, with
    ``nu*`` from :func:`solve_nu_star` or, if that has no solution, the
    sampling deviation at ``eps_bar'``.
    """
    delta_corr = finite_size_correction(p.n, b, delta_term)
    if h_xi is None:
        ns = solve_nu_star(p)
        nu = ns.nu if ns.solvable else sampling_deviation(p.n, p.k, b.eps_bar_prime)
        h_xi = bb84_h_xi(p.delta, nu, p.c_bar)
    return h_xi - (p.leak_ec + delta_corr) / p.n


def security_parameter_bound(b: SecurityBudget) -> float:
    """``Delta <= eps_ec + eps_pa``."""
    return b.eps_ec + (b.eps_pa or 0.0)


def default_leak(f_ec: float = 1.1) -> Callable[[int, float], float]:
    """Non-interactive reconciliation model ``leak = f_EC n h(Q)``."""
    def leak(n: int, qber: float) -> float:
        return f_ec * n * binary_entropy(qber)
    return leak


def _evaluate(M: int, n: int, k: int, qber: float, delta: float, b: SecurityBudget,
              eps_bar: float, eps_bar_prime: float, leak_model, c_bar: float,
              delta_term: str) -> RateReport:
    eps_bar, eps_bar_prime = float(eps_bar), float(eps_bar_prime)
    budget = replace(b, eps_bar=eps_bar, eps_bar_prime=eps_bar_prime)
    m = n + k
    leak = leak_model(n, qber)
    t = math.ceil(-math.log2(b.eps_ec))
    nu = sampling_deviation(n, k, eps_bar_prime)
    h_xi = bb84_h_xi(delta, nu, c_bar)
    p = RateParams(M=M, n=n, k=k, m=m, s=leak, t=t, delta=delta, c_bar=c_bar, leak_ec=leak)
    r_sifted = sifted_key_rate_finite(p, budget, h_xi=h_xi, delta_term=delta_term)
    l_max = max(0, min(n, math.floor(n * r_sifted)))
    report = RateReport(r_sifted=r_sifted, r_per_signal=(n / M) * max(r_sifted, 0.0),
                        l_max=l_max, nu_star=None, eps_pa_at_nu_star=None, n=n, m=k, k=k,
                        eps_bar=eps_bar, eps_bar_prime=eps_bar_prime, M=M)
    if l_max > 0:
        ns = solve_nu_star(replace(p, l=l_max))
        report.nu_star = ns.nu
        report.eps_pa_at_nu_star = ns.eps_pa
        if not (ns.solvable and ns.within_quarter):
            report.feasible = False
            report.notes.append("eps_pa(nu*) <= 1/4 not satisfied")
    return report


def _score(rep: RateReport) -> float:
    return rep.r_per_signal if rep.feasible else -1.0


def optimize_rate(M: int, channel_qber: float, b_partial: SecurityBudget,
                  leak_model: Callable[[int, float], float] | None = None, *,
                  c_bar: float = 0.5, delta: float | None = None,
                  delta_term: str = "thesis") -> RateReport:
    """Maximise ``r = (n/M) r'`` over ``n``, ``k = M - n``, ``eps_bar`` and ``eps_bar'``.

    Deterministic coarse grid followed by one local refinement. The constraints
    ``n + k <= M`` and ``eps - eps_ec > eps_bar > eps_bar'`` hold for every
    candidate. The entropy bound is evaluated at the estimation threshold
    ``delta`` (default: the channel QBER). Returns a zero-rate report when
    nothing yields a key.
    """
    if M < 100:
        raise ValueError("M must be at least 100")
    if not 0 <= channel_qber < 0.5:
        raise ValueError("channel QBER must lie in [0, 0.5)")
    leak_model = leak_model or default_leak()
    delta = channel_qber if delta is None else delta
    if not channel_qber <= delta <= 0.5:
        raise ValueError("delta must lie between the channel QBER and 1/2")
    eps = b_partial.eps
    top = min(eps / 2, (eps - b_partial.eps_ec) * (1 - 1e-9))
    if top <= 0:
        return RateReport(0.0, 0.0, 0, None, None, 0, 0, 0, 0.0, 0.0, M=M, feasible=False,
                          notes=["eps <= eps_ec: no room for smoothing"])

    def search(fracs, bar_grid, ratio_grid):
        best = None
        for frac in fracs:
            n = int(round(frac * M))
            k = M - n
            if n <= 0 or k <= 0:
                continue
            for eb in bar_grid:
                if not 0 < eb < eps - b_partial.eps_ec:
                    continue
                for ratio in ratio_grid:
                    ebp = eb * ratio
                    if not 0 < ebp < eb:
                        continue
                    rep = _evaluate(M, n, k, channel_qber, delta, b_partial, eb, ebp,
                                    leak_model, c_bar, delta_term)
                    if best is None or _score(rep) > _score(best):
                        best = rep
        return best

    fracs = np.round(np.arange(0.5, 0.951, 0.05), 4)
    bar_grid = top * 10.0 ** -np.arange(0, 7)
    ratio_grid = 10.0 ** -np.arange(1, 7)
    best = search(fracs, bar_grid, ratio_grid)
    # one refinement around the coarse optimum
    f0 = best.n / M
    fine_fracs = np.clip(f0 + np.linspace(-0.05, 0.04, 10), 0.5, 0.99)
    eb0 = best.eps_bar
    fine_bar = [x for x in eb0 * 10.0 ** np.linspace(-0.5, 0.5, 5) if x <= top]
    ratio0 = best.eps_bar_prime / best.eps_bar
    fine_ratio = [x for x in ratio0 * 10.0 ** np.linspace(-0.5, 0.5, 5) if x < 1]
    refined = search(fine_fracs, fine_bar, fine_ratio)
    if refined is not None and _score(refined) > _score(best):
        best = refined
    if best.r_per_signal <= 0 or not best.feasible:
        best.notes.append(f"no positive key rate (best r' = {best.r_sifted!r})")
        best.r_sifted = max(best.r_sifted, 0.0)
        best.r_per_signal = 0.0
        best.l_max = 0
    return best


def secrecy_distance_toy(joint_cq_state, l: int) -> float:
    """``1/2 || rho_KE - tau_K (x) rho_E ||_1`` for a key register of ``l`` bits.

    The key is the first tensor factor. Only small states (dimension up to 32)
    are accepted.
    """
    rho = density_matrix(joint_cq_state)
    dim = rho.shape[0]
    if dim > 32:
        raise ValueError(f"toy states are limited to dimension 32, got {dim}")
    dk = 2 ** l
    if dim % dk:
        raise ValueError(f"dimension {dim} is not divisible by 2**l = {dk}")
    de = dim // dk
    rho_e = np.einsum("kikj->ij", rho.reshape(dk, de, dk, de))
    ideal = np.kron(np.eye(dk) / dk, rho_e)
    evals = np.linalg.eigvalsh(hermitian_part(rho - ideal))
    return float(0.5 * np.abs(evals).sum())
