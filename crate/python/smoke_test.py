"""Smoke test for the pycrashnet extension module."""

import json
import math

import pycrashnet as cn


def main():
    net = cn.random_network(3, [4, 4], 1, "relu", 2.0, seed=7)
    assert net.widths == [4, 4] and net.input_dim == 3
    x = [0.2, 0.5, 0.9]
    y = net.forward(x)
    assert len(y) == 1 and math.isfinite(y[0])

    again = cn.Network.from_json(net.to_json())
    assert again.forward(x) == y
    doc = json.loads(net.to_json())
    assert doc["version"] == 1 and doc["activation"]["kind"] == "relu"

    crashed = net.forward_failed(x, [(0, 1), (1, 3)])
    assert len(crashed) == 1
    assert net.forward_failed(x, []) == y

    inputs = cn.random_inputs(3, 50, 1)
    for f in (1, 2, 3):
        om = cn.omega_exhaustive(net, inputs, f)
        bound = cn.erf_total(net, f)
        assert om["omega_av"] <= om["omega_mav"] <= om["omega_max"]
        assert om["omega_max"] <= bound["erf_max_worst"] + 1e-9
        assert om["mode"] == "exhaustive"

    same = [cn.omega_sampled(net, inputs, 2, 10, seed=3, workers=w) for w in (1, 2)]
    assert same[0] == same[1]

    fixed = cn.erf_fixed(net, [1, 0])
    assert fixed["erf_av"] <= fixed["erf_max"]
    assert len(cn.layer_output_bounds(net)) == 2

    c = cn.binomial(150, 50)
    assert c == math.comb(150, 50)
    assert sum(cn.binomial(48, k) for k in range(1, 6)) * 60000 == 115_521_360_000

    try:
        cn.omega_exhaustive(net, inputs, 3, budget=10)
    except ValueError as e:
        assert "budget" in str(e)
    else:
        raise AssertionError("budget was not enforced")

    print("pycrashnet smoke test passed")


if __name__ == "__main__":
    main()
