"""Asymptotic (infinite-block) secure key rate and the QBER model.

The rate attributes key material only to the non-multiphoton fraction of
received signals: with single-photon fraction A, phase errors on that
fraction are amplified to e/A, and the error-correction term pays the full
observed QBER at the code inefficiency f_EC.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .entropy import binary_entropy
from .models import ChannelModel, DetectorModel, ProtocolParams, SourceModel, click_error_probs

__all__ = [
    "F_EC_TABLE",
    "AsymptoticResult",
    "QberMeasurement",
    "f_ec",
    "qber_model",
    "fit_misalignment",
    "gllp_bracket",
    "asymptotic_rate",
]

# Error-correction inefficiency vs QBER: piecewise-linear anchor nodes.
# Practical one-way codes run at 1.16 for the low-QBER regime relevant
# here; the factor degrades as the error rate grows. Override per call if
# a different code family is assumed.
F_EC_TABLE: tuple[tuple[float, float], ...] = (
    (0.00, 1.16),
    (0.05, 1.16),
    (0.10, 1.22),
    (0.15, 1.35),
)


@dataclass(frozen=True)
class AsymptoticResult:
    """Asymptotic rate at one operating point, with audit intermediates.

    Attributes:
        rate_per_pulse: secret bits per emitted pulse (clamped at 0).
        rate_bps: rate_per_pulse times the source repetition rate.
        single_photon_fraction: fraction of clicks attributed to
            non-multiphoton emissions, in [0, 1].
        e_x, e_z: QBER in the key and parameter-estimation basis.
        p_click: per-pulse detection probability (dead-time corrected).
    """

    rate_per_pulse: float
    rate_bps: float
    single_photon_fraction: float
    e_x: float
    e_z: float
    p_click: float

    def to_dict(self) -> dict:
        return {
            "rate_per_pulse": self.rate_per_pulse,
            "rate_bps": self.rate_bps,
            "single_photon_fraction": self.single_photon_fraction,
            "e_x": self.e_x,
            "e_z": self.e_z,
            "p_click": self.p_click,
        }


@dataclass(frozen=True)
class QberMeasurement:
    """One measured QBER point at a given fibre distance."""

    distance_km: float
    qber: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.qber <= 0.5:
            raise ValueError(f"qber must be in [0, 0.5], got {self.qber}")


def f_ec(e: float, table: Sequence[tuple[float, float]] = F_EC_TABLE) -> float:
    """Error-correction inefficiency factor at QBER e.

    Linear interpolation over the anchor table, clamped to the nearest
    endpoint outside its range.
    """
    if not 0.0 <= e <= 0.5:
        raise ValueError(f"qber must be in [0, 0.5], got {e}")
    if e <= table[0][0]:
        return table[0][1]
    if e >= table[-1][0]:
        return table[-1][1]
    for (x0, y0), (x1, y1) in zip(table, table[1:]):
        if x0 <= e <= x1:
            return y0 + (y1 - y0) * (e - x0) / (x1 - x0)
    raise AssertionError("unreachable: table not ordered")


def qber_model(mean_photon_number: float, total_efficiency: float,
               dark_count_prob: float, misalignment: float) -> float:
    """QBER of a link with signal rate <n>*T against a dark-count floor.

    e = (p_dc/2 + p_mis * <n> * T) / (p_dc + <n> * T)

    Half the dark counts land in the wrong detector; the misalignment
    fraction of the signal does. Tends to 1/2 in the dark-count-dominated
    limit and to p_mis when the signal dominates.
    """
    if not 0.0 < total_efficiency <= 1.0:
        raise ValueError(f"total_efficiency must be in (0, 1], got {total_efficiency}")
    signal = mean_photon_number * total_efficiency
    denom = dark_count_prob + signal
    if denom == 0.0:
        raise ValueError("dark_count_prob and <n>*T cannot both be zero")
    return (dark_count_prob / 2.0 + misalignment * signal) / denom


def fit_misalignment(data: Sequence[QberMeasurement], mean_photon_number: float,
                     dark_count_prob: float, loss_per_km_db: float,
                     det_efficiency: float, att: float = 1.0) -> float:
    """Least-squares misalignment from measured QBER vs distance.

    Mean photon number, dark counts and the loss model are held fixed; the
    QBER model is affine in the misalignment, so the minimizer is the
    closed-form linear regression solution. Deterministic. The result is
    clamped to the physical range [0, 0.5].

    Raises:
        ValueError: on an empty dataset, or if every point carries zero
            signal (no sensitivity to the misalignment).
    """
    if not data:
        raise ValueError("at least one QBER measurement is required")
    # e_i = a_i + b_i * p_mis  with a_i the dark-count part of the model
    sum_bb = 0.0
    sum_by = 0.0
    for m in data:
        t = 10.0 ** (-m.distance_km * loss_per_km_db / 10.0) * det_efficiency * att
        signal = mean_photon_number * t
        denom = dark_count_prob + signal
        if denom == 0.0:
            raise ValueError("dark_count_prob and <n>*T cannot both be zero")
        a = dark_count_prob / 2.0 / denom
        b = signal / denom
        sum_bb += b * b
        sum_by += b * (m.qber - a)
    if sum_bb == 0.0:
        raise ValueError("dataset carries no signal; misalignment is unidentifiable")
    return min(max(sum_by / sum_bb, 0.0), 0.5)


def gllp_bracket(single_photon_fraction: float, e_x: float, e_z: float,
                 f_ec_value: float) -> float:
    """Secret fraction per sifted click: A*(1 - H(e_x/A)) - f_EC*H(e_z).

    The privacy-amplification entropy argument e_x/A is clamped to
    [0, 1/2]; outside that range the formula has no operational meaning
    and the bracket is already non-positive.
    """
    if single_photon_fraction <= 0.0:
        return -f_ec_value * binary_entropy(e_z)
    amplified = min(e_x / single_photon_fraction, 0.5)
    return (single_photon_fraction * (1.0 - binary_entropy(amplified))
            - f_ec_value * binary_entropy(e_z))


def asymptotic_rate(src: SourceModel, ch: ChannelModel, det: DetectorModel,
                    protocol: ProtocolParams,
                    f_ec_table: Sequence[tuple[float, float]] = F_EC_TABLE) -> AsymptoticResult:
    """Asymptotic secure key rate at the given operating point.

    rate = p_sift * p_click * [A*(1 - H(e_x/A)) - f_EC(e_z)*H(e_z)],
    clamped at zero. The multiphoton bound entering A is scaled by att^2:
    pre-attenuation thins two-photon pulses quadratically but the signal
    only linearly. Both bases share the same click and error model, so
    e_x = e_z here.
    """
    p_c, p_e = click_error_probs(src, ch, det, protocol.att)
    p_m_eff = src.multiphoton_prob * protocol.att**2
    if p_c <= 0.0:
        return AsymptoticResult(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    e = p_e / p_c
    if p_c <= p_m_eff:
        return AsymptoticResult(0.0, 0.0, 0.0, e, e, p_c)
    a = (p_c - p_m_eff) / p_c
    bracket = gllp_bracket(a, e, e, f_ec(e, f_ec_table))
    per_pulse = max(0.0, protocol.sift_ratio * p_c * bracket)
    return AsymptoticResult(
        rate_per_pulse=per_pulse,
        rate_bps=per_pulse * src.rep_rate,
        single_photon_fraction=a,
        e_x=e,
        e_z=e,
        p_click=p_c,
    )
