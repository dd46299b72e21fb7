"""Domain models: photon source, channel, detectors, protocol settings.

Closed-form per-pulse click and error probabilities for a BB84 link driven
by a sub-Poissonian single-photon source. The source is described by its
mean photon number and second-order correlation g2(0); the photon-number
distribution is truncated at two photons, which saturates the multiphoton
bound g2*<n>^2/2 and is therefore the worst case consistent with the two
measured moments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "SourceModel",
    "PhotonDistribution",
    "ChannelModel",
    "DetectorModel",
    "ProtocolParams",
    "photon_distribution",
    "raw_click_prob",
    "dead_time_corrected_click",
    "error_prob",
    "click_error_probs",
]

_PROB_SUM_TOL = 1e-12


@dataclass(frozen=True)
class SourceModel:
    """Single-photon source: brightness, multiphoton noise and clock rate.

    Attributes:
        mean_photon_number: mean photons per pulse injected into the link,
            in [0, 1).
        g2: second-order intensity correlation at zero delay, in [0, 1].
        rep_rate: pulse repetition rate in Hz, > 0.
    """

    mean_photon_number: float
    g2: float
    rep_rate: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.mean_photon_number < 1.0:
            raise ValueError(f"mean_photon_number must be in [0, 1), got {self.mean_photon_number}")
        if not 0.0 <= self.g2 <= 1.0:
            raise ValueError(f"g2 must be in [0, 1], got {self.g2}")
        if not self.rep_rate > 0.0:
            raise ValueError(f"rep_rate must be positive, got {self.rep_rate}")
        p2 = self.g2 * self.mean_photon_number**2 / 2.0
        if self.mean_photon_number - 2.0 * p2 < 0.0:
            raise ValueError("two-photon weight exceeds the mean photon number "
                             f"(<n>={self.mean_photon_number}, g2={self.g2})")

    @property
    def multiphoton_prob(self) -> float:
        """Upper bound on the per-pulse multiphoton emission probability."""
        return self.g2 * self.mean_photon_number**2 / 2.0


@dataclass(frozen=True)
class PhotonDistribution:
    """Photon-number distribution with its multiphoton upper bound.

    Attributes:
        probs: tuple of (photon count, probability) pairs.
        p_m: multiphoton probability bound; at least the total weight on
            n >= 2 of any distribution consistent with the source moments.
    """

    probs: tuple[tuple[int, float], ...]
    p_m: float

    def __post_init__(self) -> None:
        if not self.probs:
            raise ValueError("probs must be non-empty")
        total = 0.0
        multi = 0.0
        for n, p in self.probs:
            if n < 0 or int(n) != n:
                raise ValueError(f"photon count must be a nonnegative integer, got {n}")
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability out of [0, 1]: p_{n} = {p}")
            total += p
            if n >= 2:
                multi += p
        if abs(total - 1.0) > _PROB_SUM_TOL:
            raise ValueError(f"probabilities must sum to 1, got {total!r}")
        if multi > self.p_m + _PROB_SUM_TOL:
            raise ValueError(f"weight on n>=2 ({multi!r}) exceeds p_m ({self.p_m!r})")

    @property
    def mean(self) -> float:
        return sum(n * p for n, p in self.probs)


@dataclass(frozen=True)
class ChannelModel:
    """Lossy quantum channel, parameterized by attenuation in dB."""

    loss_db: float

    def __post_init__(self) -> None:
        if not (self.loss_db >= 0.0 and math.isfinite(self.loss_db)):
            raise ValueError(f"loss_db must be finite and >= 0, got {self.loss_db}")

    @classmethod
    def from_fiber(cls, length_km: float, loss_per_km_db: float = 0.1904) -> "ChannelModel":
        if length_km < 0.0:
            raise ValueError(f"length_km must be >= 0, got {length_km}")
        if not loss_per_km_db > 0.0:
            raise ValueError(f"loss_per_km_db must be > 0, got {loss_per_km_db}")
        return cls(loss_db=length_km * loss_per_km_db)

    @property
    def transmittance(self) -> float:
        """Channel transmittance 10^(-loss_db/10), in (0, 1]."""
        return 10.0 ** (-self.loss_db / 10.0)


@dataclass(frozen=True)
class DetectorModel:
    """Receiver-side parameters, assumed identical for both bases.

    Attributes:
        det_efficiency: detection efficiency including receiver
            transmission, in (0, 1].
        dark_count_prob: dark count probability per pulse per basis,
            in [0, 1).
        dead_time: detector dead time in seconds, >= 0.
        misalignment: probability that a detected signal photon lands in
            the wrong detector, in [0, 0.5).
    """

    det_efficiency: float
    dark_count_prob: float
    dead_time: float = 0.0
    misalignment: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.det_efficiency <= 1.0:
            raise ValueError(f"det_efficiency must be in (0, 1], got {self.det_efficiency}")
        if not 0.0 <= self.dark_count_prob < 1.0:
            raise ValueError(f"dark_count_prob must be in [0, 1), got {self.dark_count_prob}")
        if self.dead_time < 0.0:
            raise ValueError(f"dead_time must be >= 0, got {self.dead_time}")
        if not 0.0 <= self.misalignment < 0.5:
            raise ValueError(f"misalignment must be in [0, 0.5), got {self.misalignment}")


@dataclass(frozen=True)
class ProtocolParams:
    """Protocol knobs: basis bias, source pre-attenuation and block size.

    Attributes:
        p_x: probability of choosing the key-generation basis, in (0, 1).
        att: pre-attenuation transmission applied between the source and
            the channel, in (0, 1].
        n_sent: number of pulses sent, >= 0. Mutually exclusive with
            acquisition_time_s.
        acquisition_time_s: session length in seconds; the pulse count is
            then rep_rate * time.
    """

    p_x: float = 0.5
    att: float = 1.0
    n_sent: float | None = None
    acquisition_time_s: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.p_x < 1.0:
            raise ValueError(f"p_x must be in (0, 1), got {self.p_x}")
        if not 0.0 < self.att <= 1.0:
            raise ValueError(f"att must be in (0, 1], got {self.att}")
        if self.n_sent is not None and self.acquisition_time_s is not None:
            raise ValueError("specify n_sent or acquisition_time_s, not both")
        if self.n_sent is not None and self.n_sent < 0.0:
            raise ValueError(f"n_sent must be >= 0, got {self.n_sent}")
        if self.acquisition_time_s is not None and self.acquisition_time_s < 0.0:
            raise ValueError(f"acquisition_time_s must be >= 0, got {self.acquisition_time_s}")

    @property
    def p_z(self) -> float:
        return 1.0 - self.p_x

    @property
    def sift_ratio(self) -> float:
        """Fraction of rounds where both parties picked the same basis."""
        return self.p_x**2 + (1.0 - self.p_x) ** 2

    def resolved_n_sent(self, rep_rate: float) -> float:
        if self.n_sent is not None:
            return self.n_sent
        if self.acquisition_time_s is not None:
            return rep_rate * self.acquisition_time_s
        raise ValueError("neither n_sent nor acquisition_time_s was set")


def photon_distribution(src: SourceModel) -> PhotonDistribution:
    """Two-photon-truncated distribution matching <n> and g2(0).

    p2 = g2*<n>^2/2, p1 = <n> - 2*p2, p0 = 1 - p1 - p2. The returned p_m
    equals p2: this truncation saturates the multiphoton bound, so any
    other distribution with the same moments has less multiphoton weight.
    """
    p2 = src.g2 * src.mean_photon_number**2 / 2.0
    p1 = src.mean_photon_number - 2.0 * p2
    p0 = 1.0 - p1 - p2
    return PhotonDistribution(probs=((0, p0), (1, p1), (2, p2)), p_m=p2)


def _click_term(n: int, dark: float, surv: float) -> float:
    """P(click | n photons) = 1 - (1 - dark) * (1 - surv)^n.

    Evaluated as -expm1(log1p(-dark) + n*log1p(-surv)) so that tiny dark
    and survival probabilities do not lose precision to cancellation.
    """
    if n == 0:
        return dark
    if surv >= 1.0:
        return 1.0
    return -math.expm1(math.log1p(-dark) + n * math.log1p(-surv))


def raw_click_prob(dist: PhotonDistribution, ch: ChannelModel, det: DetectorModel,
                   att: float = 1.0) -> float:
    """Per-pulse click probability before the dead-time correction."""
    if not 0.0 < att <= 1.0:
        raise ValueError(f"att must be in (0, 1], got {att}")
    surv = ch.transmittance * det.det_efficiency * att
    return sum(p * _click_term(n, det.dark_count_prob, surv) for n, p in dist.probs)


def dead_time_corrected_click(f: float, rep_rate: float, dead_time: float) -> float:
    """Self-consistent click probability under a detector dead time.

    Solves p = f / (1 + R*tau*p), i.e. R*tau*p^2 + p - f = 0, taking the
    nonnegative root in closed form. Reduces to p = f when R*tau = 0. The
    root is evaluated in the rationalized form 2f / (1 + sqrt(1 + 4*R*tau*f)),
    which stays accurate when R*tau*f is tiny.
    """
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"f must be in [0, 1], got {f}")
    rt = rep_rate * dead_time
    if rt < 0.0:
        raise ValueError(f"rep_rate * dead_time must be >= 0, got {rt}")
    return 2.0 * f / (1.0 + math.sqrt(1.0 + 4.0 * rt * f))


def error_prob(dist: PhotonDistribution, ch: ChannelModel, det: DetectorModel,
               att: float = 1.0, rep_rate: float = 0.0) -> float:
    """Per-pulse error probability in a basis, dead-time corrected.

    Clicks on vacuum pulses are dark counts and land in the wrong detector
    with probability 1/2; clicks on pulses carrying photons are wrong with
    the misalignment probability. The same multiplicative dead-time factor
    as in the click probability is applied.

    rep_rate is needed to evaluate the dead-time factor; pass 0 (or use a
    detector with dead_time=0) to skip the correction.
    """
    if not 0.0 < att <= 1.0:
        raise ValueError(f"att must be in (0, 1], got {att}")
    surv = ch.transmittance * det.det_efficiency * att
    raw_err = 0.0
    f = 0.0
    for n, p in dist.probs:
        term = _click_term(n, det.dark_count_prob, surv)
        f += p * term
        if n == 0:
            raw_err += p * det.dark_count_prob / 2.0
        else:
            raw_err += p * term * det.misalignment
    if f == 0.0:
        return 0.0
    p_c = dead_time_corrected_click(f, rep_rate, det.dead_time)
    return (p_c / f) * raw_err


def click_error_probs(src: SourceModel, ch: ChannelModel, det: DetectorModel,
                      att: float = 1.0) -> tuple[float, float]:
    """Dead-time-corrected (p_click, p_error) per pulse for one basis."""
    dist = photon_distribution(src)
    f = raw_click_prob(dist, ch, det, att)
    p_c = dead_time_corrected_click(f, src.rep_rate, det.dead_time)
    p_e = error_prob(dist, ch, det, att, rep_rate=src.rep_rate)
    return p_c, p_e
