"""Composable finite-size secure key length.

Statistical fluctuations are handled on event counts rather than
probabilities: a multiplicative Chernoff tail bound caps the number of
multiphoton emissions, and a sampling-without-replacement bound lifts the
observed parameter-estimation error rate to an upper bound on the phase
error rate of the unobserved key rounds. Error-correction leakage is the
larger of the finite-block information-theoretic bound and the practical
f_EC * n * H(e) cost.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import special as _sp

from .entropy import binary_entropy
from .models import ChannelModel, DetectorModel, ProtocolParams, SourceModel, click_error_probs

__all__ = [
    "SecurityParams",
    "SessionCounts",
    "FiniteKeyResult",
    "expected_counts",
    "chernoff_upper",
    "nonmultiphoton_received_lower",
    "gamma_u",
    "phase_error_upper",
    "inverse_binomial_cdf",
    "lambda_ec",
    "finite_key_length",
]


@dataclass(frozen=True)
class SecurityParams:
    """Failure-probability budget for the composable security claim.

    All component failure probabilities derive from a single base value:
    privacy amplification and error correction each get eps_prime, and
    parameter estimation gets 2 * n_pe * eps_prime for its n_pe
    constraints. The secrecy parameter is their sum, so for n_pe = 2 it
    equals 6 * eps_prime. Correctness is budgeted separately.

    Defaults: eps_prime = 1e-10/6 (secrecy 1e-10, parameter estimation
    2e-10/3, privacy amplification 1e-10/6) and eps_cor = 1e-15.
    """

    eps_prime: float = 1e-10 / 6.0
    n_pe: int = 2
    eps_cor: float = 1e-15

    def __post_init__(self) -> None:
        if not 0.0 < self.eps_prime < 1.0:
            raise ValueError(f"eps_prime must be in (0, 1), got {self.eps_prime}")
        if not 0.0 < self.eps_cor < 1.0:
            raise ValueError(f"eps_cor must be in (0, 1), got {self.eps_cor}")
        if self.n_pe < 1:
            raise ValueError(f"n_pe must be >= 1, got {self.n_pe}")

    @property
    def eps_pa(self) -> float:
        return self.eps_prime

    @property
    def eps_ec(self) -> float:
        return self.eps_prime

    @property
    def eps_pe(self) -> float:
        return 2.0 * self.n_pe * self.eps_prime

    @property
    def eps_sec(self) -> float:
        return self.eps_pa + self.eps_pe + self.eps_ec


@dataclass(frozen=True)
class SessionCounts:
    """Event tallies (expected or sampled) for one session.

    Attributes:
        n_sent: pulses sent.
        n_rx_x / n_rx_z: sifted detections with both parties in the key /
            parameter-estimation basis.
        m_z: errors among the parameter-estimation detections.
        n_mp_star_x / n_mp_star_z: expected multiphoton emissions into the
            channel for rounds sifted into each basis.
    """

    n_sent: float
    n_rx_x: float
    n_rx_z: float
    m_z: float
    n_mp_star_x: float
    n_mp_star_z: float

    def __post_init__(self) -> None:
        for name in ("n_sent", "n_rx_x", "n_rx_z", "m_z", "n_mp_star_x", "n_mp_star_z"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.m_z > self.n_rx_z * (1.0 + 1e-12):
            raise ValueError(f"m_z ({self.m_z}) cannot exceed n_rx_z ({self.n_rx_z})")


@dataclass(frozen=True)
class FiniteKeyResult:
    """Secure key length with every intermediate bound, for audit.

    Attributes:
        ell: secure key length in bits (integer, >= 0).
        rate: ell / n_sent.
        counts: the session tallies the result was computed from.
        n_mp_upper_x / n_mp_upper_z: Chernoff upper bounds on multiphoton
            emissions per basis.
        n_nmp_x / n_nmp_z: lower bounds on received non-multiphoton
            signals per basis.
        phi_x: phase-error point estimate m_z / n_nmp_z.
        phi_x_upper: phase-error upper bound after the sampling
            correction, clamped to <= 1/2.
        lambda_ec: error-correction leakage in bits.
        e_x: key-basis QBER used for the leakage estimate.
    """

    ell: int
    rate: float
    counts: SessionCounts
    n_mp_upper_x: float
    n_mp_upper_z: float
    n_nmp_x: float
    n_nmp_z: float
    phi_x: float
    phi_x_upper: float
    lambda_ec: float
    e_x: float

    def to_dict(self) -> dict:
        return {
            "ell": self.ell,
            "rate": self.rate,
            "n_sent": self.counts.n_sent,
            "n_rx_x": self.counts.n_rx_x,
            "n_rx_z": self.counts.n_rx_z,
            "m_z": self.counts.m_z,
            "n_mp_star_x": self.counts.n_mp_star_x,
            "n_mp_star_z": self.counts.n_mp_star_z,
            "n_mp_upper_x": self.n_mp_upper_x,
            "n_mp_upper_z": self.n_mp_upper_z,
            "n_nmp_x": self.n_nmp_x,
            "n_nmp_z": self.n_nmp_z,
            "phi_x": self.phi_x,
            "phi_x_upper": self.phi_x_upper,
            "lambda_ec": self.lambda_ec,
            "e_x": self.e_x,
        }


def expected_counts(src: SourceModel, ch: ChannelModel, det: DetectorModel,
                    protocol: ProtocolParams) -> SessionCounts:
    """Expected session tallies for the given models.

    Sifted detections scale with the squared basis bias; errors use the
    same per-pulse error probability in the parameter-estimation basis.
    Expected multiphoton emissions carry an att^2 factor: the multiphoton
    bound applies after pre-attenuation, which thins two-photon pulses
    quadratically.
    """
    n_sent = protocol.resolved_n_sent(src.rep_rate)
    p_c, p_e = click_error_probs(src, ch, det, protocol.att)
    p_m_eff = src.multiphoton_prob * protocol.att**2
    px2 = protocol.p_x**2
    pz2 = protocol.p_z**2
    return SessionCounts(
        n_sent=n_sent,
        n_rx_x=n_sent * px2 * p_c,
        n_rx_z=n_sent * pz2 * p_c,
        m_z=n_sent * pz2 * p_e,
        n_mp_star_x=n_sent * px2 * p_m_eff,
        n_mp_star_z=n_sent * pz2 * p_m_eff,
    )


def chernoff_upper(expected: float, eps: float) -> float:
    """Multiplicative Chernoff upper bound on a sum of binary variables.

    For expectation x* and tail probability eps, returns
    (1 + delta) * x* with delta = (beta + sqrt(8*beta*x* + beta^2)) / (2*x*)
    and beta = -ln(eps); the actual count exceeds this with probability at
    most eps. At x* = 0 the continuous limit beta is returned.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must be in (0, 1), got {eps}")
    if expected < 0.0:
        raise ValueError(f"expected count must be >= 0, got {expected}")
    beta = -math.log(eps)
    if expected == 0.0:
        return beta
    delta = (beta + math.sqrt(8.0 * beta * expected + beta * beta)) / (2.0 * expected)
    return (1.0 + delta) * expected


def nonmultiphoton_received_lower(counts: SessionCounts,
                                  sec: SecurityParams) -> tuple[float, float]:
    """Lower bounds on received non-multiphoton signals, per basis.

    Worst case, every multiphoton emission reaches the receiver, so the
    Chernoff-bounded multiphoton count is subtracted from the received
    tally; clamped at zero.
    """
    lower_x = max(0.0, counts.n_rx_x - chernoff_upper(counts.n_mp_star_x, sec.eps_pe))
    lower_z = max(0.0, counts.n_rx_z - chernoff_upper(counts.n_mp_star_z, sec.eps_pe))
    return lower_x, lower_z


def gamma_u(n: float, k: float, observed_rate: float, eps: float) -> float:
    """Sampling-without-replacement correction for an unobserved rate.

    Given a rate observed on k samples, the rate on the n unobserved
    samples of the same population exceeds observed + gamma_u with
    probability at most eps. Valid for observed rates in (0, 0.5).

    Raises:
        ValueError: if the rate is outside (0, 0.5), n or k < 1, eps is
            outside (0, 1), or the bound's log factor is non-positive
            (outside the formula's regime).
    """
    if n < 1.0 or k < 1.0:
        raise ValueError(f"n and k must be >= 1, got n={n}, k={k}")
    if not 0.0 < observed_rate < 0.5:
        raise ValueError(f"observed_rate must be in (0, 0.5), got {observed_rate}")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must be in (0, 1), got {eps}")
    lam = observed_rate
    big = max(n, k)
    log_arg = (n + k) / (2.0 * math.pi * n * k * lam * (1.0 - lam) * eps**2)
    if log_arg <= 1.0:
        raise ValueError(f"bound out of regime: log argument {log_arg} <= 1")
    g = (n + k) / (n * k) * math.log(log_arg)
    t = big * g / (n + k)
    return (1.0 / (2.0 + 2.0 * big * t / (n + k))) * (
        (1.0 - 2.0 * lam) * t + math.sqrt(t * t + 4.0 * lam * (1.0 - lam) * g)
    )


def phase_error_upper(counts: SessionCounts, n_nmp_z: float,
                      sec: SecurityParams) -> float:
    """Upper bound on the key-basis phase error rate.

    All observed parameter-estimation errors are attributed to the
    received non-multiphoton fraction, giving phi = m_z / n_nmp_z; the
    sampling correction then lifts phi to its bound over the unobserved
    key rounds. When no errors were observed, half an error is substituted
    (rate 1/(2*n_nmp_z)) to stay inside the correction's domain; this only
    increases the bound. The result is clamped to <= 1/2.

    Raises:
        ValueError: if n_nmp_z <= 0 (no key possible).
    """
    if n_nmp_z <= 0.0:
        raise ValueError("n_nmp_z must be positive; no key under this bound")
    phi = counts.m_z / n_nmp_z
    lam = phi if phi > 0.0 else 0.5 / n_nmp_z
    if lam >= 0.5:
        return 0.5
    correction = gamma_u(counts.n_rx_x, counts.n_rx_z, lam, sec.eps_sec / 6.0)
    return min(0.5, phi + correction)


def inverse_binomial_cdf(eps: float, n: int, q: float) -> int:
    """Largest integer m with Binomial(n, q) CDF at m no larger than eps.

    Returns -1 when even CDF(0) exceeds eps (no such m). The continuous
    inverse of the regularized incomplete beta function supplies a
    starting point, which is then adjusted with exact CDF evaluations, so
    the convention holds for any n representable in a double.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must be in (0, 1), got {eps}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must be in [0, 1], got {q}")
    if float(_sp.bdtr(0.0, n, q)) > eps:
        return -1
    guess = float(_sp.bdtrik(eps, n, q))
    if math.isfinite(guess):
        m = min(n, max(0, int(guess)))
    else:
        # bdtrik gives up at extreme parameters (e.g. q = 1); bisect on the
        # exact CDF instead, keeping lo feasible and hi infeasible
        lo, hi = 0, n
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if float(_sp.bdtr(float(mid), n, q)) <= eps:
                lo = mid
            else:
                hi = mid
        m = lo
    while m > 0 and float(_sp.bdtr(float(m), n, q)) > eps:
        m -= 1
    while m < n and float(_sp.bdtr(float(m + 1), n, q)) <= eps:
        m += 1
    return m


def lambda_ec(n_x: float, e_x: float, eps_cor: float, f_ec_value: float = 1.16) -> float:
    """Bits leaked during error correction and verification.

    The greater of the finite-block information-theoretic bound

        n*H(e) + [n*(1-e) - F^-1(eps_cor; n, 1-e)] * log2((1-e)/e)
            - log2(n)/2 - log2(1/eps_cor)

    and the practical-code cost f_EC * n * H(e). F^-1 is the inverse
    binomial CDF (largest m with CDF(m) <= eps_cor), evaluated at n
    rounded to the nearest integer. e_x = 0 leaks nothing and returns 0.

    Raises:
        ValueError: if n_x < 1 or e_x is outside [0, 0.5).
    """
    if n_x < 1.0:
        raise ValueError(f"n_x must be >= 1, got {n_x}")
    if not 0.0 <= e_x < 0.5:
        raise ValueError(f"e_x must be in [0, 0.5), got {e_x}")
    if e_x == 0.0:
        return 0.0
    h = binary_entropy(e_x)
    practical = f_ec_value * n_x * h
    n_int = max(1, round(n_x))
    f_inv = inverse_binomial_cdf(eps_cor, n_int, 1.0 - e_x)
    info = (n_x * h
            + (n_x * (1.0 - e_x) - f_inv) * math.log2((1.0 - e_x) / e_x)
            - 0.5 * math.log2(n_x)
            - math.log2(1.0 / eps_cor))
    return max(info, practical)


def finite_key_length(counts: SessionCounts, sec: SecurityParams,
                      e_x_for_ec: float, f_ec_value: float = 1.16) -> FiniteKeyResult:
    """Assemble the secure key length from session tallies.

    ell = floor( n_nmp_x * (1 - H(phi_upper)) - lambda_ec
                 - 2*log2(1/(2*eps_pa)) - log2(2/eps_cor) ),

    clamped at zero. Degenerate inputs (no detections, bound exhausted by
    multiphoton emissions) yield ell = 0 with the intermediates recorded.
    """
    mp_upper_x = chernoff_upper(counts.n_mp_star_x, sec.eps_pe)
    mp_upper_z = chernoff_upper(counts.n_mp_star_z, sec.eps_pe)
    n_nmp_x = max(0.0, counts.n_rx_x - mp_upper_x)
    n_nmp_z = max(0.0, counts.n_rx_z - mp_upper_z)

    def _zero(phi: float, phi_upper: float, leak: float) -> FiniteKeyResult:
        return FiniteKeyResult(
            ell=0, rate=0.0, counts=counts,
            n_mp_upper_x=mp_upper_x, n_mp_upper_z=mp_upper_z,
            n_nmp_x=n_nmp_x, n_nmp_z=n_nmp_z,
            phi_x=phi, phi_x_upper=phi_upper, lambda_ec=leak, e_x=e_x_for_ec,
        )

    if n_nmp_x <= 0.0 or n_nmp_z <= 0.0 or counts.n_rx_x < 1.0:
        return _zero(0.5, 0.5, 0.0)

    phi = counts.m_z / n_nmp_z
    phi_upper = phase_error_upper(counts, n_nmp_z, sec)
    if phi_upper >= 0.5:
        return _zero(phi, phi_upper, 0.0)

    leak = lambda_ec(counts.n_rx_x, e_x_for_ec, sec.eps_cor, f_ec_value)
    raw = (n_nmp_x * (1.0 - binary_entropy(phi_upper))
           - leak
           - 2.0 * math.log2(1.0 / (2.0 * sec.eps_pa))
           - math.log2(2.0 / sec.eps_cor))
    ell = max(0, math.floor(raw))
    rate = ell / counts.n_sent if counts.n_sent > 0 else 0.0
    return FiniteKeyResult(
        ell=ell, rate=rate, counts=counts,
        n_mp_upper_x=mp_upper_x, n_mp_upper_z=mp_upper_z,
        n_nmp_x=n_nmp_x, n_nmp_z=n_nmp_z,
        phi_x=phi, phi_x_upper=phi_upper, lambda_ec=leak, e_x=e_x_for_ec,
    )
