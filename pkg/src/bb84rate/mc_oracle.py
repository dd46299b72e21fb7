"""Seeded Monte-Carlo session sampler and bound-coverage experiments.

This module is the independent check on the closed-form model: it samples
per-pulse emissions, losses, dark counts, basis choices and errors, and it
measures the empirical failure rate of the concentration bounds at tail
probabilities large enough to observe.

Reproducibility contract
------------------------
Streams come from numpy's PCG64 (``numpy.random.default_rng(seed)``);
uniform doubles are drawn with ``Generator.random``. A session consumes
its stream in fixed-size chunks of at most 2**20 pulses; per chunk one
(10, m) block of uniforms is drawn, whose rows are used in this order:

    0 photon-number choice   n=2 if u < p2, n=1 if p2 <= u < p2+p1, else 0
    1 pre-attenuation, photon 1   survives iff u < att (and n >= 1)
    2 pre-attenuation, photon 2   survives iff u < att (and n >= 2)
    3 channel+detector, photon 1  detected iff u < eta_ch*eta_det
    4 channel+detector, photon 2  detected iff u < eta_ch*eta_det
    5 dark count                  iff u < p_dc
    6 dead-time thinning          click kept iff u < c_dt
    7 error flag                  signal click errs iff u < p_mis,
                                  dark-only click errs iff u < 1/2
    8 Alice basis                 X iff u < p_x
    9 Bob basis                   X iff u < p_x

Identical configuration (seed included) therefore yields bit-identical
tallies. Sub-streams for independent experiments are derived as
``default_rng([seed, index])``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .finitekey import chernoff_upper, gamma_u
from .models import (ChannelModel, DetectorModel, ProtocolParams, SourceModel,
                     click_error_probs, dead_time_corrected_click, photon_distribution,
                     raw_click_prob)

__all__ = [
    "TrialConfig",
    "SampledSession",
    "sample_session",
    "chernoff_coverage",
    "sampling_bound_coverage",
    "run_oracle_suite",
]

_CHUNK = 1 << 20


@dataclass(frozen=True)
class TrialConfig:
    """Seed and size of a Monte-Carlo experiment."""

    seed: int
    n_pulses: int
    eps_test: float = 1e-2

    def __post_init__(self) -> None:
        if self.n_pulses < 1:
            raise ValueError(f"n_pulses must be >= 1, got {self.n_pulses}")
        if not 0.0 < self.eps_test < 1.0:
            raise ValueError(f"eps_test must be in (0, 1), got {self.eps_test}")


@dataclass(frozen=True)
class SampledSession:
    """Tallies of one sampled session.

    n_clicks and n_errors count all kept detections regardless of basis
    agreement; n_rx_x/n_rx_z, m_x/m_z count sifted rounds only. m_x is the
    error count in the key basis, unobserved in the real protocol.
    n_mp_x/n_mp_z count pulses that entered the channel with two photons
    in rounds sifted into each basis.
    """

    n_pulses: int
    n_clicks: int
    n_errors: int
    n_rx_x: int
    n_rx_z: int
    m_x: int
    m_z: int
    n_mp_x: int
    n_mp_z: int

    def __post_init__(self) -> None:
        if self.m_z > self.n_rx_z or self.m_x > self.n_rx_x:
            raise ValueError("error tallies exceed sifted detections")
        if self.n_rx_x + self.n_rx_z > self.n_clicks:
            raise ValueError("sifted detections exceed total clicks")

    def to_dict(self) -> dict:
        return {
            "n_pulses": self.n_pulses,
            "n_clicks": self.n_clicks,
            "n_errors": self.n_errors,
            "n_rx_x": self.n_rx_x,
            "n_rx_z": self.n_rx_z,
            "m_x": self.m_x,
            "m_z": self.m_z,
            "n_mp_x": self.n_mp_x,
            "n_mp_z": self.n_mp_z,
        }


def sample_session(src: SourceModel, ch: ChannelModel, det: DetectorModel,
                   protocol: ProtocolParams, trial: TrialConfig) -> SampledSession:
    """Sample one session pulse by pulse; deterministic for a given seed.

    Dead time is applied as mean-field thinning with the analytic factor
    c_dt, matching the model under test rather than a timeline simulation.
    """
    dist = photon_distribution(src)
    probs = dict((n, p) for n, p in dist.probs)
    if any(n > 2 for n in probs):
        raise ValueError("sampler supports photon numbers up to 2")
    p1 = probs.get(1, 0.0)
    p2 = probs.get(2, 0.0)

    f = raw_click_prob(dist, ch, det, protocol.att)
    p_c = dead_time_corrected_click(f, src.rep_rate, det.dead_time)
    c_dt = p_c / f if f > 0.0 else 1.0
    s_cd = ch.transmittance * det.det_efficiency

    rng = np.random.default_rng(trial.seed)
    tallies = np.zeros(8, dtype=np.int64)  # clicks, errors, rx_x, rx_z, m_x, m_z, mp_x, mp_z
    remaining = trial.n_pulses
    while remaining > 0:
        m = min(remaining, _CHUNK)
        remaining -= m
        u = rng.random((10, m))
        n_emit = (u[0] < p1 + p2).astype(np.int8) + (u[0] < p2)
        n_chan = ((u[1] < protocol.att) & (n_emit >= 1)).astype(np.int8) \
            + ((u[2] < protocol.att) & (n_emit >= 2))
        n_det = ((u[3] < s_cd) & (n_chan >= 1)).astype(np.int8) \
            + ((u[4] < s_cd) & (n_chan >= 2))
        dark = u[5] < det.dark_count_prob
        click = ((n_det > 0) | dark) & (u[6] < c_dt)
        err = click & np.where(n_det > 0, u[7] < det.misalignment, dark & (u[7] < 0.5))
        alice_x = u[8] < protocol.p_x
        bob_x = u[9] < protocol.p_x
        both_x = alice_x & bob_x
        both_z = ~alice_x & ~bob_x
        multi = n_chan >= 2
        tallies += (
            int(click.sum()), int(err.sum()),
            int((click & both_x).sum()), int((click & both_z).sum()),
            int((err & both_x).sum()), int((err & both_z).sum()),
            int((multi & both_x).sum()), int((multi & both_z).sum()),
        )
    return SampledSession(trial.n_pulses, *(int(t) for t in tallies))


def chernoff_coverage(x_star: float, eps_test: float, trials: int, *,
                      seed: int = 0, population: int = 10**6,
                      bound_scale: float = 1.0) -> float:
    """Empirical exceedance of the Chernoff upper bound.

    Samples Binomial(population, x_star/population) counts and returns the
    fraction exceeding chernoff_upper(x_star, eps_test). By construction
    this fraction stays below eps_test up to sampling noise
    (3*sqrt(eps_test/trials) slack). bound_scale deliberately rescales the
    bound and exists for harness self-tests only.
    """
    if trials < 1000:
        raise ValueError(f"trials must be >= 1000, got {trials}")
    if x_star < 0.0 or x_star > population:
        raise ValueError(f"x_star must be in [0, population], got {x_star}")
    bound = chernoff_upper(x_star, eps_test) * bound_scale
    rng = np.random.default_rng([seed, 0])
    counts = rng.binomial(population, x_star / population, size=trials)
    return float(np.mean(counts > bound))


def sampling_bound_coverage(n: int, k: int, population_errors: int, eps_test: float,
                            trials: int, *, seed: int = 0,
                            bound_scale: float = 1.0) -> float:
    """Empirical exceedance of the sampling-without-replacement bound.

    Error flags are assigned to the whole population of n+k items first;
    the k-item observed sample is drawn without replacement, and the bound
    chi = lambda_obs + gamma_u is compared against the realized rate on
    the n unobserved items. A sample with zero observed errors uses the
    half-error floor rate 1/(2k); an observed rate >= 1/2 covers trivially
    (chi = 1). Returns the fraction of draws where the true unobserved
    rate exceeds chi.
    """
    if n < 1 or k < 1:
        raise ValueError(f"n and k must be >= 1, got n={n}, k={k}")
    if not 0 <= population_errors <= n + k:
        raise ValueError(f"population_errors must be in [0, n+k], got {population_errors}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rng = np.random.default_rng([seed, 1])
    observed = rng.hypergeometric(population_errors, n + k - population_errors, k, size=trials)
    chi = np.empty(trials)
    for obs in np.unique(observed):
        lam = (obs / k) if obs > 0 else 0.5 / k
        if lam >= 0.5:
            value = 1.0
        else:
            value = (lam if obs > 0 else 0.0) + gamma_u(n, k, lam, eps_test)
        chi[observed == obs] = value * bound_scale
    true_rate = (population_errors - observed) / n
    return float(np.mean(true_rate > chi))


def _coverage_limit(eps: float, trials: int) -> float:
    return eps + 3.0 * (eps / trials) ** 0.5


def run_oracle_suite(src: SourceModel, det: DetectorModel, protocol: ProtocolParams,
                     trial: TrialConfig, losses_db: tuple[float, ...] = (0.0, 10.0, 20.0, 30.0, 35.0),
                     *, chernoff_trials: int = 10**5, sampling_trials: int = 10**4,
                     bound_scale: float = 1.0) -> dict:
    """Run the model-agreement and bound-coverage checks; return a report.

    Model agreement: sampled click and error fractions at each loss must
    sit within 4 binomial standard deviations of the analytic values.
    Coverage: Chernoff and sampling-bound exceedance at eps_test must stay
    below eps_test plus 3-sigma sampling slack. All randomness derives
    deterministically from trial.seed.
    """
    checks: list[dict] = []

    for idx, loss in enumerate(losses_db):
        ch = ChannelModel(loss_db=loss)
        sub_seed = int(np.random.SeedSequence([trial.seed, idx]).generate_state(1)[0])
        session = sample_session(src, ch, det, protocol, TrialConfig(sub_seed, trial.n_pulses))
        p_c, p_e = click_error_probs(src, ch, det, protocol.att)
        n = trial.n_pulses
        for label, observed, expected in (
            ("click", session.n_clicks, p_c),
            ("error", session.n_errors, p_e),
        ):
            sigma = max((n * expected * (1.0 - expected)) ** 0.5, 1.0)
            dev = abs(observed - n * expected) / sigma
            checks.append({
                "name": f"model_agreement_{label}_at_{loss:g}dB",
                "passed": bool(dev <= 4.0),
                "observed": int(observed),
                "expected": n * expected,
                "deviation_sigma": dev,
                "seed": sub_seed,
            })

    for x_star in (50.0, 0.0):
        exceed = chernoff_coverage(x_star, trial.eps_test, chernoff_trials,
                                   seed=trial.seed, bound_scale=bound_scale)
        limit = _coverage_limit(trial.eps_test, chernoff_trials)
        checks.append({
            "name": f"chernoff_coverage_xstar_{x_star:g}",
            "passed": bool(exceed <= limit),
            "exceedance": exceed,
            "limit": limit,
        })

    # operating-regime instances: error rates <= 2%, including the
    # asymmetric split typical of a biased-basis session
    for n, k, pop_errors in ((1000, 1000, 40), (1900, 100, 40)):
        exceed = sampling_bound_coverage(n, k, pop_errors, trial.eps_test,
                                         sampling_trials, seed=trial.seed,
                                         bound_scale=bound_scale)
        limit = _coverage_limit(trial.eps_test, sampling_trials)
        checks.append({
            "name": f"sampling_bound_coverage_n{n}_k{k}_m{pop_errors}",
            "passed": bool(exceed <= limit),
            "exceedance": exceed,
            "limit": limit,
        })

    return {
        "trial": {"seed": trial.seed, "n_pulses": trial.n_pulses, "eps_test": trial.eps_test},
        "losses_db": list(losses_db),
        "bound_scale": bound_scale,
        "checks": checks,
        "all_passed": all(c["passed"] for c in checks),
    }
