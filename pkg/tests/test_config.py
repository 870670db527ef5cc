import json

import pytest

from corrsched.config import ConfigError, ExperimentConfig, default_budget_grid, load_config, parse_ini

SMALL = """
[experiment]
domains = so3, terrain-ridge
horizon = 40
budget_grid = 0:1:0.25
calibration_seeds = 100-115
evaluation_seeds = 0-4
q = 0.1

[terrain-ridge]
ridge_amplitude = 2.0
start = 0.5, 0.5

[pdm-lite]
obstacles = 2,0.3,0.5; 6,-0.3,0.5
levels = 4
"""


def test_defaults():
    cfg = ExperimentConfig()
    assert cfg.horizon == 200 and len(cfg.budget_grid) == 21
    assert cfg.budget_grid[5] == 0.25
    assert list(cfg.calibration_seeds) == list(range(10_000, 10_064))
    assert len(cfg.evaluation_seeds) == 50
    assert default_budget_grid(0.25) == (0.0, 0.25, 0.5, 0.75, 1.0)


def test_parse_small():
    cfg = parse_ini(SMALL)
    assert cfg.domains == ("so3", "terrain-ridge")
    assert cfg.budget_grid == (0.0, 0.25, 0.5, 0.75, 1.0)
    assert cfg.calibration_seeds == range(100, 116)
    assert cfg.evaluation_seeds == range(0, 5)
    assert cfg.q == 0.1
    ridge = cfg.domain_setup("terrain-ridge")
    assert ridge.spec.field.ridge_amplitude == 2.0
    # defaults survive when only some keys are overridden
    assert ridge.spec.field.ridge_sharpness == 20.0
    pdm = cfg.domain_setup("pdm-lite")
    assert pdm.spec.obstacles.centers == ((2.0, 0.3), (6.0, -0.3))
    assert pdm.params.horizon == 4 * 20


def test_impulse_window_scales_with_horizon():
    p = parse_ini(SMALL).domain_setup("so3").params
    assert (p.impulse_start, p.impulse_end) == (16, 18)
    p = ExperimentConfig().domain_setup("so3-impulse").params
    assert (p.impulse_start, p.impulse_end) == (80, 90)


def test_digest_tracks_content():
    a, b = parse_ini(SMALL), parse_ini(SMALL)
    assert a.digest() == b.digest()
    assert parse_ini(SMALL.replace("q = 0.1", "q = 0.3")).digest() != a.digest()


@pytest.mark.parametrize("text", [
    "[experiment]\nhorizon = 0\n",
    "[experiment]\nbogus = 1\n",
    "[nowhere]\nx = 1\n",
    "[so3]\nridge_flavour = 1\n",
    "[experiment]\nbudget_grid = 0:1:0.3\n",
    "[experiment]\nbudget_grid = 0, 0.5, 1.2\nsummary_fraction = 0.5\n",
    "[experiment]\nbudget_grid = 0, 0.5\n",  # summary fraction 0.25 not on the grid
    "[experiment]\ncalibration_seeds = 0-9\n",  # overlaps evaluation seeds 0-49
    "[experiment]\nevaluation_seeds = 9-3\n",
    "[experiment]\ndomains = so3, mars\n",
    "[experiment]\ncompact_traces = maybe\n",
    "[so3]\nstep = abc\n",
    "[pdm-lite]\nobstacles = 1,2\n",
    "[pdm-lite]\nobstacles = 5,0,1; 5.5,0,1\n",
    "not an ini file",
])
def test_bad_configs_raise(text):
    with pytest.raises(ConfigError):
        parse_ini(text)


def test_pdm_seed_ranges_must_be_disjoint():
    with pytest.raises(ConfigError):
        parse_ini("[experiment]\npdm_calibration_seeds = 30000-30010\n")


def test_load_config(tmp_path):
    assert load_config(None) == ExperimentConfig()
    p = tmp_path / "c.ini"
    p.write_text(SMALL)
    assert load_config(p).horizon == 40
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")


def test_to_dict_is_json_ready():
    d = parse_ini(SMALL).to_dict()
    assert json.loads(json.dumps(d))["horizon"] == 40
