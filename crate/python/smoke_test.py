"""Smoke test for the `cdas` extension module.

Build and expose the module first:

    cargo build --release -p cdas-py --features extension-module
    cp target/release/libcdas.so python/cdas.so
    python3 python/smoke_test.py
"""

import cdas


def main():
    env = cdas.Environment(1, 16, k=1, sigma=1 / 16, fov="line3", seed=7)
    assert env.n == 16 and env.num_actions > 0
    (target,) = env.targets

    belief = cdas.Belief(env)
    planner = cdas.Planner.eig()
    recovered_at = None
    for step in range(1, 21):
        action = planner.decide(belief, env)
        assert belief.information_gain(env, action) >= 0.0
        belief.absorb(env, action, env.observe(action))
        if belief.recovery(env)["exact"]:
            recovered_at = step
            break
    assert recovered_at is not None, "EIG did not recover the target in 20 steps"
    print(f"eig found cell {target} after {recovered_at} measurements")

    mcts = cdas.Planner.mcts(budget=200, seed=1)
    assert 0 <= mcts.decide(cdas.Belief(env), env) < env.num_actions

    exp = cdas.Experiment(
        'trials = 3\nrecord_wallclock = false\n[run]\nalgos = ["eig", "ts"]\n'
    )
    rows = exp.run()
    assert rows == exp.run(), "runs with one seed must agree"
    algos = {r["algo"] for r in rows}
    assert algos == {"eig", "ts"}, algos
    print(f"experiment produced {len(rows)} rows for {sorted(algos)}")

    try:
        cdas.Experiment("[env]\nsigma = -1\n")
    except ValueError as e:
        print(f"bad config rejected: {e}")
    else:
        raise AssertionError("negative sigma accepted")
    print("ok")


if __name__ == "__main__":
    main()
