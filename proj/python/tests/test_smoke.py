import pytest

dsn = pytest.importorskip("dsn")


def small_config():
    c = dsn.parse_config(
        """
        env.width = 7
        env.height = 8
        env.brick_row_last = 3
        env.brick_col_last = 5
        env.max_steps = 150
        window = 3
        horizon = 6
        episodes = 2
        seeds = 4
        """
    )
    return c


def test_environment_steps():
    env = dsn.Breakout()
    types = env.reset(3)
    assert len(types) == 15 * 12
    assert types.count(4) == 1  # one ball
    total = 0
    while not env.done:
        types, reward, done = env.step(0)
        total += reward
    assert total == env.bricks_destroyed - (3 - env.lives)
    assert "#" in env.render()


def test_bad_config_raises():
    with pytest.raises(dsn.ConfigError):
        dsn.parse_config("horizon = 0")
    with pytest.raises(dsn.ConfigError):
        dsn.parse_config("no_such_key = 1")


def test_train_save_load_eval():
    c = small_config()
    records, params = dsn.run_training(c)
    assert len(records) == 2
    assert all(r.total_reward == r.bricks - r.lives_lost for r in records)
    assert params.total_schemas() > 0
    text = dsn.save_params(params, c)
    assert text.startswith("dsn-schemas v1\nD=93 ")
    assert dsn.load_params(text, c) == params

    c.seeds = [1, 2]
    c.episodes = 1
    recs = dsn.run_eval(c, params, 2)
    assert len(recs) == 2
    csv = dsn.metrics_csv(recs).splitlines()
    assert csv[0].startswith("episode,seed,total_reward")
    assert len(csv) == 1 + 2 + 4


def test_predict_and_plan():
    c = small_config()
    _, params = dsn.run_training(c)
    env = dsn.Breakout(c.env)
    first = env.reset(9)
    second, _, _ = env.step(0)
    nxt, rpos, rneg = dsn.predict(params, c, first, second, 0)
    assert len(nxt) == len(first)
    assert isinstance(rpos, bool) and isinstance(rneg, bool)
    actions = dsn.plan(params, c, first, second)
    assert actions is None or all(a in (0, 1, 2) for a in actions)
    with pytest.raises(RuntimeError):
        dsn.predict(params, c, first[:-1], second, 0)
