import math

import pytest

from bb84rate import (ChannelModel, DetectorModel, NoPositiveRateError, OptimizationConfig,
                      ProtocolParams, SourceModel, SweepSpec, asymptotic_rate,
                      finite_key_length, expected_counts, click_error_probs,
                      max_tolerable_loss, optimize_point, run_sweep)


class TestConfigValidation:
    def test_rejects_bad_ranges(self):
        with pytest.raises(ValueError):
            OptimizationConfig(p_x_range=(0.4, 0.9))
        with pytest.raises(ValueError):
            OptimizationConfig(att_range=(0.0, 1.0))
        with pytest.raises(ValueError):
            OptimizationConfig(grid_resolution=1)
        with pytest.raises(ValueError):
            OptimizationConfig(loss_bisection_tol_db=0.0)


class TestOptimizePoint:
    def test_no_attenuation_optimal_at_zero_loss(self, source, detector, fast_opt):
        point = optimize_point(source, ChannelModel(0.0), detector, fast_opt,
                               mode="asymptotic")
        assert point.att == 1.0
        # exhaustive fine grid over att confirms the incumbent
        best = max(
            asymptotic_rate(source, ChannelModel(0.0), detector,
                            ProtocolParams(p_x=point.p_x, att=a / 200.0)).rate_per_pulse
            for a in range(1, 201)
        )
        assert point.rate_per_pulse >= best - 1e-15

    def test_asymptotic_bias_goes_to_range_top(self, source, detector, fast_opt):
        point = optimize_point(source, ChannelModel(10.0), detector, fast_opt,
                               mode="asymptotic")
        assert point.p_x == pytest.approx(fast_opt.p_x_range[1], abs=1e-9)

    def test_deterministic(self, source, detector, fast_opt):
        kw = dict(mode="finite", n_sent=160.7e6 * 10.0)
        a = optimize_point(source, ChannelModel(19.04), detector, fast_opt, **kw)
        b = optimize_point(source, ChannelModel(19.04), detector, fast_opt, **kw)
        assert (a.p_x, a.att, a.rate_per_pulse) == (b.p_x, b.att, b.rate_per_pulse)

    def test_all_zero_grid_returns_tiebreak_default(self, source, detector, fast_opt):
        # far past any boundary: every grid point is rate zero
        point = optimize_point(source, ChannelModel(59.0), detector, fast_opt,
                               mode="finite", n_sent=1e6)
        assert point.rate_per_pulse == 0.0
        assert point.p_x == pytest.approx(fast_opt.p_x_range[1], abs=1e-9)
        assert point.att == 1.0

    def test_optimization_never_loses_to_defaults(self, source, detector, fast_opt):
        ch = ChannelModel(19.04)
        n_sent = 160.7e6 * 60.0
        point = optimize_point(source, ch, detector, fast_opt, mode="finite", n_sent=n_sent)
        p_c, p_e = click_error_probs(source, ch, detector, 1.0)
        counts = expected_counts(source, ch, detector, ProtocolParams(p_x=0.5, n_sent=n_sent))
        from bb84rate import SecurityParams
        default = finite_key_length(counts, SecurityParams(), p_e / p_c)
        assert point.rate_per_pulse >= default.rate

    def test_fixed_axes(self, source, detector, fast_opt):
        point = optimize_point(source, ChannelModel(5.0), detector, fast_opt,
                               mode="asymptotic", fixed_p_x=0.5, fixed_att=0.7)
        assert point.p_x == 0.5 and point.att == 0.7

    def test_argument_validation(self, source, detector, fast_opt):
        with pytest.raises(ValueError):
            optimize_point(source, ChannelModel(0.0), detector, fast_opt, mode="finite")
        with pytest.raises(ValueError):
            optimize_point(source, ChannelModel(0.0), detector, fast_opt,
                           mode="finite", n_sent=1.0, n_received=1.0)
        with pytest.raises(ValueError):
            optimize_point(source, ChannelModel(0.0), detector, fast_opt,
                           mode="asymptotic", n_sent=1.0)

    def test_internal_counts_match_expected_counts(self, source, detector, fast_opt):
        # the evaluator inlines the tally arithmetic for speed; it must
        # agree exactly with the public expected_counts
        ch = ChannelModel(19.04)
        point = optimize_point(source, ch, detector, fast_opt, mode="finite",
                               n_sent=1e9)
        reference = expected_counts(source, ch, detector,
                                    ProtocolParams(p_x=point.p_x, att=point.att, n_sent=1e9))
        got = point.result.counts
        assert got.n_rx_x == pytest.approx(reference.n_rx_x, rel=1e-14)
        assert got.n_rx_z == pytest.approx(reference.n_rx_z, rel=1e-14)
        assert got.m_z == pytest.approx(reference.m_z, rel=1e-14)
        assert got.n_mp_star_x == pytest.approx(reference.n_mp_star_x, rel=1e-14)
        assert got.n_mp_star_z == pytest.approx(reference.n_mp_star_z, rel=1e-14)

    def test_received_block_mode(self, source, detector, fast_opt):
        point = optimize_point(source, ChannelModel(0.0), detector, fast_opt,
                               mode="finite", n_received=1e6)
        assert point.rate_per_pulse > 0.0
        # the resolved pulse count reproduces the requested received block
        p_c, _ = click_error_probs(source, ChannelModel(0.0), detector, point.att)
        assert point.result.counts.n_sent * p_c == pytest.approx(1e6, rel=1e-9)


class TestMaxTolerableLoss:
    def test_boundary_bracketing(self, source, detector):
        cfg = OptimizationConfig(grid_resolution=8, refinement_rounds=1,
                                 loss_bisection_tol_db=0.05)
        n_sent = 160.7e6 * 1.0
        boundary = max_tolerable_loss(source, detector, cfg, mode="finite", n_sent=n_sent)

        def rate(loss):
            return optimize_point(source, ChannelModel(loss), detector, cfg,
                                  mode="finite", n_sent=n_sent).rate_per_pulse

        assert rate(boundary - cfg.loss_bisection_tol_db) > 0.0
        assert rate(boundary + cfg.loss_bisection_tol_db) == 0.0

    def test_noiseless_trivial_case_hits_cap(self):
        # no dark counts, no multiphoton noise: QBER stays at p_mis and the
        # rate is positive at any finite loss, so the search reports the cap
        src = SourceModel(0.0142, 0.0, 160.7e6)
        det = DetectorModel(0.6525, 0.0, 0.0, 0.003)
        cfg = OptimizationConfig(grid_resolution=6, refinement_rounds=0, loss_cap_db=40.0)
        boundary = max_tolerable_loss(src, det, cfg, mode="asymptotic",
                                      optimize_params=False, p_x=0.5, att=1.0)
        assert boundary == 40.0

    def test_zero_rate_at_zero_loss_raises(self, source):
        deaf = DetectorModel(0.6525, 0.4, 0.0, 0.45)
        with pytest.raises(NoPositiveRateError):
            max_tolerable_loss(source, deaf, OptimizationConfig(grid_resolution=6,
                                                                refinement_rounds=0),
                               mode="asymptotic", optimize_params=False, p_x=0.5, att=1.0)

    def test_nondecreasing_in_acquisition_time(self, source, detector):
        cfg = OptimizationConfig(grid_resolution=8, refinement_rounds=1,
                                 loss_bisection_tol_db=0.05)
        short = max_tolerable_loss(source, detector, cfg, mode="finite",
                                   n_sent=160.7e6 * 1.0)
        long = max_tolerable_loss(source, detector, cfg, mode="finite",
                                  n_sent=160.7e6 * 60.0)
        assert long >= short - 2 * cfg.loss_bisection_tol_db
        assert long > short


class TestRunSweep:
    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SweepSpec(axis="frequency", values=(1.0, 2.0))
        with pytest.raises(ValueError):
            SweepSpec(axis="loss_db", values=(2.0, 1.0))
        with pytest.raises(ValueError):
            SweepSpec(axis="loss_db", values=(1.0, 2.0), mode="other")

    def test_distance_sweep_monotone(self, source, detector, fast_opt):
        spec = SweepSpec(axis="distance_km", values=(0.0, 50.0, 100.0, 150.0, 175.0),
                         mode="asymptotic")
        rows = run_sweep(spec, source, detector, fast_opt, fixed_p_x=0.5)
        rates = [r.rate_bps for r in rows]
        assert all(a >= b for a, b in zip(rates, rates[1:]))
        assert all(r.status == "ok" for r in rows)

    def test_block_size_sweep_nondecreasing(self, source, detector, fast_opt):
        spec = SweepSpec(axis="block_size_received", values=(1e5, 1e6, 1e7))
        rows = run_sweep(spec, source, detector, fast_opt, channel=ChannelModel(0.0))
        rates = [r.rate_per_pulse for r in rows]
        assert all(b >= a for a, b in zip(rates, rates[1:]))

    def test_acquisition_time_sweep(self, source, detector, fast_opt):
        spec = SweepSpec(axis="acquisition_time_s", values=(1.0, 10.0))
        rows = run_sweep(spec, source, detector, fast_opt, channel=ChannelModel(19.04))
        assert [r.axis_value for r in rows] == [1.0, 10.0]
        assert rows[1].rate_per_pulse >= rows[0].rate_per_pulse

    def test_per_point_errors_flagged(self, source, detector, fast_opt):
        spec = SweepSpec(axis="distance_km", values=(-5.0, 10.0), mode="asymptotic")
        rows = run_sweep(spec, source, detector, fast_opt)
        assert rows[0].status.startswith("error:")
        assert rows[0].rate_bps == 0.0 and math.isnan(rows[0].p_x)
        assert rows[1].status == "ok"

    def test_finite_distance_sweep_requires_block(self, source, detector, fast_opt):
        spec = SweepSpec(axis="distance_km", values=(10.0,), mode="finite")
        with pytest.raises(ValueError):
            run_sweep(spec, source, detector, fast_opt)
