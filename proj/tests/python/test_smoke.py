import os
from pathlib import Path

import numpy as np
import pytest

try:
    import topogrid as tg
except ImportError:
    import _topogrid as tg

GRID_PATH = os.environ.get(
    "TOPOGRID_DATA_DIR",
    str(Path(__file__).resolve().parents[2] / "data"),
) + "/grid_ieee14.json"


@pytest.fixture(scope="module")
def grid():
    return tg.load_grid(GRID_PATH)


@pytest.fixture(scope="module")
def catalog(grid):
    return tg.build_action_catalog(grid)


def quiet_scenario(n_steps=64):
    params = tg.ScenarioParams()
    params.n_steps = n_steps
    params.stress = 0.0
    return tg.generate_synthetic(params, 1, 5)[0]


def dc_config(horizon=12):
    config = tg.EnvConfig()
    config.mode = tg.SolverMode.dc
    config.horizon = horizon
    return config


def test_version():
    assert tg.__version__ == "0.1.0"


def test_grid_counts(grid):
    assert grid.n_substations == 14
    assert grid.n_lines == 20
    assert grid.n_loads == 11
    assert grid.n_generators == 5
    assert grid.n_slots == 56
    assert tg.grid_fingerprint(grid) != 0


def test_catalog_shape(grid, catalog):
    assert len(catalog) == 112
    assert catalog.total_configs() == 112
    assert catalog.action(0).kind == tg.Action.Kind.do_nothing
    assert sum(c.n_configs for c in catalog.counts) == 112
    assert tg.count_configs(6, 2) == 25


def test_invalid_catalog_id(catalog):
    with pytest.raises(tg.ContractViolation):
        catalog.action(len(catalog))


def test_scenario_roundtrip(tmp_path):
    scenario = quiet_scenario()
    path = str(tmp_path / "sc.csv")
    tg.save_scenario(scenario, path)
    loaded = tg.load_scenario(path)
    assert loaded.id == scenario.id
    assert loaded.n_steps() == scenario.n_steps()
    np.testing.assert_array_equal(np.asarray(loaded.load_p),
                                  np.asarray(scenario.load_p))
    np.testing.assert_array_equal(np.asarray(loaded.gen_v),
                                  np.asarray(scenario.gen_v))


def test_environment_episode(grid, catalog):
    env = tg.Environment(grid, catalog, dc_config())
    first = env.reset(quiet_scenario(), 0)
    assert first.observation.shape == (tg.ObservationLayout.size,)
    assert first.reward == 0.0
    total = 0.0
    while not env.episode_done:
        result = env.step(0)
        assert 0.0 <= result.reward <= 1.0
        total += result.reward
    assert env.cause == tg.EndCause.scenario_complete
    assert total > 0.0


def test_score_and_select(grid):
    options = tg.ScoreOptions()
    options.mode = tg.SolverMode.dc
    scores = []
    for seed in (5, 6):
        params = tg.ScenarioParams()
        params.n_steps = tg.STEPS_PER_WEEK
        params.stress = 1.0
        scenario = tg.generate_synthetic(params, 1, seed)[0]
        scenario.id = f"sc-{seed}"
        scores.append(tg.score_scenario(grid, scenario, options))
    assert all(s.line_max.shape == (grid.n_lines,) for s in scores)
    picked = tg.select_training_scenario(scores)
    best = max(scores, key=lambda s: s.max_loading)
    assert picked == best.scenario_id


def test_policy_forward(tmp_path):
    net = tg.PolicyNet(3)
    observation = np.linspace(-1.0, 1.0, tg.PolicyNet.INPUTS)
    probabilities = net.forward(observation)
    assert probabilities.shape == (tg.PolicyNet.ACTIONS,)
    assert np.all(probabilities >= 0.0)
    assert probabilities.sum() == pytest.approx(1.0, abs=1e-12)
    path = str(tmp_path / "net.bin")
    net.save(path)
    loaded = tg.PolicyNet.load(path)
    np.testing.assert_array_equal(loaded.forward(observation), probabilities)


def test_rollout_and_replay(grid, catalog):
    scenario = quiet_scenario()
    net = tg.PolicyNet(4)
    env = tg.GridEpisodeEnv(grid, catalog, scenario, dc_config())
    rollout = tg.rollout_episode(net, env, 17)
    record = rollout.record
    assert record.scenario_id == scenario.id
    assert record.success()
    replay = tg.rerun_episode(grid, catalog, scenario, record, dc_config())
    assert [s.reward for s in replay.steps] == [s.reward for s in record.steps]
    analysis = tg.analyze_episode(grid, catalog, record)
    assert analysis.signature == "B"
    assert analysis.entropy == 0.0


def test_train_and_evaluate(grid, catalog):
    scenario = quiet_scenario()
    config = tg.TrainerConfig()
    config.batch_size = 4
    config.max_batches = 2
    config.learning_rate = 0.01
    config.seed = 9
    result = tg.train(config, grid, catalog, scenario, dc_config())
    assert 1 <= len(result.history) <= 2
    assert result.history[0].batch == 0

    summary = tg.evaluate_agent(result.net, grid, catalog, [scenario], 2, 11,
                                dc_config(), 0.95, 2)
    assert summary.episodes_total == 2
    assert 0.0 <= summary.success_fraction <= 1.0
