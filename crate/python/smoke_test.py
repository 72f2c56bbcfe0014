"""Smoke test for the hostcap_py extension module.

Build and install the module first:

    pip install --no-build-isolation ./crates/py

then run ``python python/smoke_test.py`` from the repository root.
"""

import csv
import math
import pathlib

import hostcap_py as hc

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "crates" / "core" / "fixtures"


def check_power_flow():
    net = hc.Network.load(str(FIXTURES / "feeder15.json"))
    assert net.n_buses == 15 and net.steps == 144, net

    zero = [0.0] * net.n_buses
    sol = net.solve(zero, zero)
    assert sol["converged"]
    assert len(set(sol["v_pu"])) == 1
    assert all(f == 0.0 for f in sol["flow_p"] + sol["flow_q"])

    p = [0.0] * net.n_buses
    q = [0.0] * net.n_buses
    with open(FIXTURES / "feeder15_injections.csv") as f:
        for row in csv.DictReader(f):
            i = net.buses.index(int(row["bus"]))
            p[i] += float(row["p_kw"])
            q[i] += float(row["q_kvar"])
    sol = net.solve(p, q)
    with open(FIXTURES / "feeder15_solution.golden.csv") as f:
        golden = {int(r["id"]): float(r["v_pu"]) for r in csv.DictReader(f) if r["element"] == "bus"}
    for bus, v in zip(net.buses, sol["v_pu"]):
        assert abs(v - golden[bus]) < 1e-11, (bus, v, golden[bus])

    linear = net.solve(p, q, linear=True)
    assert linear["current_sq"] == [0.0] * net.n_lines

    heavy = [0.0] * net.n_buses
    heavy[-1] = -1e6
    try:
        net.solve(heavy, zero)
    except hc.DivergedError:
        pass
    else:
        raise AssertionError("expected DivergedError")


def check_oracle_and_pool():
    net = hc.Network.load(str(FIXTURES / "feeder15.json"))
    profiles = hc.Profiles.synthetic(net.steps, n_ev_types=5, n_pv_types=5, seed=0)
    assert profiles.n_types("ev") == 5 and len(profiles.shape("pv", 0)) == net.steps

    oracle = hc.Oracle(net, profiles, eps_bar=0.98)
    verdict = oracle.evaluate({"id": 0, "locations": []})
    assert verdict["label"] == 1 and verdict["pass_fraction"] == 1.0

    config = {
        "ev": {"candidate_buses": [5, 6, 7, 8], "lambda_range": [1.0, 3.0], "lambda_step": 0.5, "n_ev_types": 5},
        "pool_size_target": 50,
    }
    pool = hc.generate_pool(config, net, seed=3)
    assert len(pool) >= 50
    assert pool == hc.generate_pool(config, net, seed=3)
    labels = oracle.labels(pool)
    assert set(labels) <= {0, 1} and len(labels) == len(pool)


def check_learning():
    assert abs(hc.binary_entropy(0.5) - math.log(2)) < 1e-12

    grid = [[i / 19, j / 19] for i in range(20) for j in range(20)]
    result = hc.run_episode(
        grid, lambda k: int(grid[k][0] + grid[k][1] < 1.0), strategy="entropy",
        query_size=10, rounds=5, seed=1, epochs=100,
    )
    assert len(result["queried"]) == 50 == len(set(result["queried"]))
    assert result["history"]["budget"] == {"query_size": 10, "rounds": 5}

    exp = hc.Experiment.load(str(FIXTURES / "three_bus_experiment.json"))
    assert exp.n_scenarios == 2000
    truth = exp.evaluate()
    assert 0.0 < truth["feasible_fraction"] < 1.0
    episode = exp.learn("info_density")
    assert len(episode["queried"]) == 100
    assert episode["hc"]["max_total_kw"] <= truth["hc"]["max_total_kw"]


if __name__ == "__main__":
    check_power_flow()
    check_oracle_and_pool()
    check_learning()
    print("hostcap_py smoke test passed")
