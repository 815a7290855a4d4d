import numpy as np
import pytest

from sargram import geo, synth

acceptance_results = []


def pytest_terminal_summary(terminalreporter):
    if acceptance_results:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for line in acceptance_results:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_scene_spec():
    """Hilly 600 m x 600 m opposite-side scene; small enough for unit tests."""
    return synth.standard_scene(
        extent=(600.0, 600.0),
        dsm_params={
            "base": 120.0,
            "hills": [
                {"amplitude": 12.0, "sigma": 220.0, "center": (-0.15, -0.2)},
                {"amplitude": 8.0, "sigma": 180.0, "center": (0.2, 0.15)},
            ],
        },
    )


@pytest.fixture(scope="session")
def small_models(small_scene_spec):
    return synth.scene_models(small_scene_spec)


@pytest.fixture(scope="session")
def small_dsm(small_scene_spec):
    return synth.make_dsm(small_scene_spec)


@pytest.fixture(scope="session")
def same_side_models():
    """Same-side 43-degree geometry used by range-sensitivity tests."""
    spec = synth.standard_scene(geometry="same", ref_incidence=70.0, extent=(600.0, 600.0))
    return synth.scene_models(spec)


@pytest.fixture(scope="session")
def rendered_small_scene(small_scene_spec):
    return synth.render_pair(small_scene_spec)


def random_ground_points(models, n, rng, heights=None):
    """ECEF points that project inside both models' images."""
    model_a, model_b = models
    if heights is None:
        heights = rng.uniform(50.0, 200.0, size=n * 3)
    rows = rng.uniform(1.0, model_a.rows - 2, size=n * 3)
    cols = rng.uniform(1.0, model_a.cols - 2, size=n * 3)
    lat, lon, xyz, status = geo.inverse_project_arrays(model_a, rows, cols, heights)
    rb, cb, status_b = geo.forward_project_arrays(model_b, xyz)
    ok = (
        (status == geo.ST_OK) & (status_b == geo.ST_OK)
        & (rb >= 1) & (rb <= model_b.rows - 2)
        & (cb >= 1) & (cb <= model_b.cols - 2)
    )
    xyz = xyz[ok][:n]
    assert xyz.shape[0] == n, "fixture could not place enough points in both footprints"
    return xyz
