import pytest

from bb84rate import DetectorModel, OptimizationConfig, SecurityParams, SourceModel

# Baseline system parameters used throughout the suite.
BASELINE = {
    "mean_photon_number": 0.0142,
    "g2": 0.036,
    "rep_rate": 160.7e6,
    "det_efficiency": 0.6525,
    "dark_count_prob": 1.47e-7,
    "dead_time": 27.5e-9,
    "misalignment": 0.003,
    "loss_per_km_db": 0.1904,
}


@pytest.fixture(scope="session")
def source():
    return SourceModel(mean_photon_number=BASELINE["mean_photon_number"],
                       g2=BASELINE["g2"], rep_rate=BASELINE["rep_rate"])


@pytest.fixture(scope="session")
def detector():
    return DetectorModel(det_efficiency=BASELINE["det_efficiency"],
                         dark_count_prob=BASELINE["dark_count_prob"],
                         dead_time=BASELINE["dead_time"],
                         misalignment=BASELINE["misalignment"])


@pytest.fixture(scope="session")
def security():
    return SecurityParams()


@pytest.fixture(scope="session")
def fast_opt():
    """Coarse optimizer settings for unit tests."""
    return OptimizationConfig(grid_resolution=12, refinement_rounds=2,
                              loss_bisection_tol_db=0.05)
