"""Protocol-parameter optimization, loss-boundary search and sweeps.

The rate surface has floor and clamp kinks, so optimization is a
deterministic coarse grid over (basis bias, pre-attenuation) followed by
shrinking-grid refinement around the incumbent. Grid points are
independent, and the incumbent is selected by a lexicographic maximum, so
results do not depend on evaluation order and evaluations may run in
parallel without changing the output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .asymptotic import F_EC_TABLE, AsymptoticResult, asymptotic_rate, f_ec
from .finitekey import FiniteKeyResult, SecurityParams, SessionCounts, finite_key_length
from .models import ChannelModel, DetectorModel, ProtocolParams, SourceModel, click_error_probs

__all__ = [
    "NoPositiveRateError",
    "OptimizationConfig",
    "SweepSpec",
    "OptimizedPoint",
    "SweepRow",
    "optimize_point",
    "max_tolerable_loss",
    "run_sweep",
]

SWEEP_AXES = ("distance_km", "loss_db", "block_size_received", "acquisition_time_s")


class NoPositiveRateError(RuntimeError):
    """No positive key rate even at zero channel loss."""


@dataclass(frozen=True)
class OptimizationConfig:
    """Grid-search and bisection settings.

    Attributes:
        p_x_range: search interval for the key-basis bias, inside (0.5, 1).
        att_range: search interval for the pre-attenuation, inside (0, 1].
        grid_resolution: points per axis per round, >= 2.
        refinement_rounds: shrinking-grid rounds after the coarse pass.
        shrink_factor: range contraction per refinement round.
        loss_bisection_tol_db: boundary localization tolerance in dB.
        loss_cap_db: upper limit for the loss-boundary search.
    """

    p_x_range: tuple[float, float] = (0.505, 0.995)
    att_range: tuple[float, float] = (0.01, 1.0)
    grid_resolution: int = 32
    refinement_rounds: int = 4
    shrink_factor: float = 4.0
    loss_bisection_tol_db: float = 0.01
    loss_cap_db: float = 60.0

    def __post_init__(self) -> None:
        if not 0.5 < self.p_x_range[0] <= self.p_x_range[1] < 1.0:
            raise ValueError(f"p_x_range must lie inside (0.5, 1), got {self.p_x_range}")
        if not 0.0 < self.att_range[0] <= self.att_range[1] <= 1.0:
            raise ValueError(f"att_range must lie inside (0, 1], got {self.att_range}")
        if self.grid_resolution < 2:
            raise ValueError(f"grid_resolution must be >= 2, got {self.grid_resolution}")
        if self.refinement_rounds < 0:
            raise ValueError(f"refinement_rounds must be >= 0, got {self.refinement_rounds}")
        if self.shrink_factor <= 1.0:
            raise ValueError(f"shrink_factor must be > 1, got {self.shrink_factor}")
        if self.loss_bisection_tol_db <= 0.0:
            raise ValueError(f"loss_bisection_tol_db must be > 0, got {self.loss_bisection_tol_db}")
        if self.loss_cap_db <= 0.0:
            raise ValueError(f"loss_cap_db must be > 0, got {self.loss_cap_db}")


@dataclass(frozen=True)
class SweepSpec:
    """One sweep axis with its values and rate mode."""

    axis: str
    values: tuple[float, ...]
    mode: str = "finite"

    def __post_init__(self) -> None:
        if self.axis not in SWEEP_AXES:
            raise ValueError(f"axis must be one of {SWEEP_AXES}, got {self.axis!r}")
        if self.mode not in ("asymptotic", "finite"):
            raise ValueError(f"mode must be 'asymptotic' or 'finite', got {self.mode!r}")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep values must be strictly increasing")


@dataclass(frozen=True)
class OptimizedPoint:
    """Optimizer output at one operating point."""

    p_x: float
    att: float
    rate_per_pulse: float
    rate_bps: float
    result: AsymptoticResult | FiniteKeyResult | None


@dataclass(frozen=True)
class SweepRow:
    axis: str
    axis_value: float
    p_x: float
    att: float
    rate_per_pulse: float
    rate_bps: float
    status: str
    result: AsymptoticResult | FiniteKeyResult | None


def _linspace(lo: float, hi: float, k: int) -> list[float]:
    if hi <= lo:
        return [lo]
    step = (hi - lo) / (k - 1)
    return [lo + i * step for i in range(k)]


def _make_evaluator(
    src: SourceModel, ch: ChannelModel, det: DetectorModel, mode: str,
    sec: SecurityParams | None, n_sent: float | None, n_received: float | None,
    f_ec_table: Sequence[tuple[float, float]],
) -> Callable[[list[float], list[float]], list[tuple[float, float, float, object]]]:
    """Build a batch evaluator returning (rate, p_x, att, result) tuples.

    Click and error probabilities depend only on the attenuation, so they
    are computed once per att column.
    """
    if mode == "asymptotic":
        def evaluate(p_xs: list[float], atts: list[float]):
            out = []
            for att in atts:
                for p_x in p_xs:
                    res = asymptotic_rate(src, ch, det,
                                          ProtocolParams(p_x=p_x, att=att),
                                          f_ec_table=f_ec_table)
                    out.append((res.rate_per_pulse, p_x, att, res))
            return out
        return evaluate

    if sec is None:
        sec = SecurityParams()
    p_m = src.multiphoton_prob

    def evaluate(p_xs: list[float], atts: list[float]):
        out = []
        for att in atts:
            p_c, p_e = click_error_probs(src, ch, det, att)
            if p_c <= 0.0:
                out.extend((0.0, p_x, att, None) for p_x in p_xs)
                continue
            e_x = p_e / p_c
            ns = n_sent if n_sent is not None else n_received / p_c
            p_m_eff = p_m * att**2
            fec = f_ec(e_x, f_ec_table)
            for p_x in p_xs:
                px2 = p_x**2
                pz2 = (1.0 - p_x) ** 2
                counts = SessionCounts(
                    n_sent=ns,
                    n_rx_x=ns * px2 * p_c,
                    n_rx_z=ns * pz2 * p_c,
                    m_z=ns * pz2 * p_e,
                    n_mp_star_x=ns * px2 * p_m_eff,
                    n_mp_star_z=ns * pz2 * p_m_eff,
                )
                res = finite_key_length(counts, sec, e_x, f_ec_value=fec)
                out.append((res.rate, p_x, att, res))
        return out

    return evaluate


def optimize_point(
    src: SourceModel, ch: ChannelModel, det: DetectorModel,
    cfg: OptimizationConfig | None = None, *,
    mode: str = "finite", sec: SecurityParams | None = None,
    n_sent: float | None = None, n_received: float | None = None,
    fixed_p_x: float | None = None, fixed_att: float | None = None,
    f_ec_table: Sequence[tuple[float, float]] = F_EC_TABLE,
) -> OptimizedPoint:
    """Maximize the key rate over (p_x, att) at one operating point.

    Deterministic grid search with shrinking refinement; ties break toward
    larger p_x, then larger att. Either axis can be pinned with fixed_p_x
    or fixed_att. Finite mode needs exactly one of n_sent (pulses sent) or
    n_received (detections to accumulate); asymptotic mode needs neither.

    An all-zero-rate grid returns rate 0 at the tie-break point (the top
    of the searched ranges).
    """
    if cfg is None:
        cfg = OptimizationConfig()
    if mode not in ("asymptotic", "finite"):
        raise ValueError(f"mode must be 'asymptotic' or 'finite', got {mode!r}")
    if mode == "finite":
        if (n_sent is None) == (n_received is None):
            raise ValueError("finite mode needs exactly one of n_sent or n_received")
    elif n_sent is not None or n_received is not None:
        raise ValueError("asymptotic mode takes neither n_sent nor n_received")

    evaluate = _make_evaluator(src, ch, det, mode, sec, n_sent, n_received, f_ec_table)

    px_lo0, px_hi0 = cfg.p_x_range
    at_lo0, at_hi0 = cfg.att_range
    include_full_att = fixed_att is None and at_hi0 == 1.0
    px_lo, px_hi = px_lo0, px_hi0
    at_lo, at_hi = at_lo0, at_hi0
    best: tuple[float, float, float, object] | None = None

    for _ in range(cfg.refinement_rounds + 1):
        p_xs = [fixed_p_x] if fixed_p_x is not None else _linspace(px_lo, px_hi, cfg.grid_resolution)
        if fixed_att is not None:
            atts = [fixed_att]
        else:
            atts = _linspace(at_lo, at_hi, cfg.grid_resolution)
            if include_full_att and atts[-1] != 1.0:
                atts.append(1.0)
        for cand in evaluate(p_xs, atts):
            if best is None or cand[:3] > best[:3]:
                best = cand
        _, bp, ba, _ = best
        pw = (px_hi - px_lo) / (2.0 * cfg.shrink_factor)
        aw = (at_hi - at_lo) / (2.0 * cfg.shrink_factor)
        px_lo, px_hi = max(px_lo0, bp - pw), min(px_hi0, bp + pw)
        at_lo, at_hi = max(at_lo0, ba - aw), min(at_hi0, ba + aw)

    rate, p_x, att, result = best
    return OptimizedPoint(
        p_x=p_x, att=att, rate_per_pulse=rate, rate_bps=rate * src.rep_rate, result=result,
    )


def max_tolerable_loss(
    src: SourceModel, det: DetectorModel,
    cfg: OptimizationConfig | None = None, *,
    mode: str = "finite", sec: SecurityParams | None = None,
    n_sent: float | None = None, n_received: float | None = None,
    optimize_params: bool = True, p_x: float = 0.5, att: float = 1.0,
    f_ec_table: Sequence[tuple[float, float]] = F_EC_TABLE,
) -> float:
    """Channel loss (dB) at the zero/positive key-rate boundary.

    Bisects the loss axis, re-optimizing (p_x, att) at every probe when
    optimize_params is set, otherwise evaluating at the fixed values. The
    probe rate is nonincreasing in loss, so on return the rate is positive
    at boundary - tol and zero at boundary + tol. If the rate is still
    positive at the configured cap, the cap itself is returned.

    Raises:
        NoPositiveRateError: if the rate is zero already at 0 dB.
    """
    if cfg is None:
        cfg = OptimizationConfig()

    def rate_at(loss_db: float) -> float:
        ch = ChannelModel(loss_db=loss_db)
        if optimize_params:
            return optimize_point(src, ch, det, cfg, mode=mode, sec=sec, n_sent=n_sent,
                                  n_received=n_received, f_ec_table=f_ec_table).rate_per_pulse
        return optimize_point(src, ch, det, cfg, mode=mode, sec=sec, n_sent=n_sent,
                              n_received=n_received, fixed_p_x=p_x, fixed_att=att,
                              f_ec_table=f_ec_table).rate_per_pulse

    if rate_at(0.0) <= 0.0:
        raise NoPositiveRateError("key rate is zero at 0 dB channel loss")
    if rate_at(cfg.loss_cap_db) > 0.0:
        return cfg.loss_cap_db
    lo, hi = 0.0, cfg.loss_cap_db
    while hi - lo > cfg.loss_bisection_tol_db:
        mid = 0.5 * (lo + hi)
        if rate_at(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def run_sweep(
    spec: SweepSpec, src: SourceModel, det: DetectorModel,
    cfg: OptimizationConfig | None = None, *,
    sec: SecurityParams | None = None,
    channel: ChannelModel | None = None,
    n_sent: float | None = None,
    loss_per_km_db: float = 0.1904,
    fixed_p_x: float | None = None, fixed_att: float | None = None,
    f_ec_table: Sequence[tuple[float, float]] = F_EC_TABLE,
) -> list[SweepRow]:
    """Optimize one point per axis value, in axis order.

    distance_km and loss_db sweeps derive the channel per value (finite
    mode then requires n_sent for the block size); block_size_received and
    acquisition_time_s sweeps run against the fixed channel argument.
    Per-point failures become zero-rate rows with the error recorded in
    the status field.
    """
    if spec.axis in ("block_size_received", "acquisition_time_s") and channel is None:
        raise ValueError(f"a fixed channel is required for a {spec.axis} sweep")
    if spec.axis in ("distance_km", "loss_db") and spec.mode == "finite" and n_sent is None:
        raise ValueError(f"n_sent is required for a finite {spec.axis} sweep")

    rows: list[SweepRow] = []
    for value in spec.values:
        try:
            ch = channel
            kw: dict = {"n_sent": n_sent} if spec.mode == "finite" else {}
            if spec.axis == "distance_km":
                ch = ChannelModel.from_fiber(value, loss_per_km_db)
            elif spec.axis == "loss_db":
                ch = ChannelModel(loss_db=value)
            elif spec.axis == "block_size_received":
                kw = {"n_received": value}
            elif spec.axis == "acquisition_time_s":
                kw = {"n_sent": src.rep_rate * value}
            point = optimize_point(src, ch, det, cfg, mode=spec.mode, sec=sec,
                                   fixed_p_x=fixed_p_x, fixed_att=fixed_att,
                                   f_ec_table=f_ec_table, **kw)
            rows.append(SweepRow(spec.axis, value, point.p_x, point.att,
                                 point.rate_per_pulse, point.rate_bps, "ok", point.result))
        except (ValueError, ArithmeticError) as exc:
            rows.append(SweepRow(spec.axis, value, math.nan, math.nan, 0.0, 0.0,
                                 f"error: {exc}", None))
    return rows
