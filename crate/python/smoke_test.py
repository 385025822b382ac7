"""Smoke test for the pymemnet extension.

Build and install first:  pip install --no-build-isolation -e crates/py
Then run:                 python3 python/smoke_test.py
"""

import math
import pathlib

import pymemnet

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "crates" / "core" / "tests" / "fixtures"

SINGLE = """
model B R=[10k,1k] tau=3e5 V=.05
source dc V=1
net m1
"""


def check_closed_form():
    c = pymemnet.Circuit(SINGLE)
    gamma = math.exp(20.0) / 3e5
    traj = c.solve_dc([1e-4, 1e-3, 1e-2])
    for t, p_on in zip(traj.times, traj.series("p1")):
        assert abs(p_on - (1.0 - math.exp(-gamma * t))) < 1e-9, (t, p_on)
    q = c.generator(1.0)
    assert abs(q[1][0] - gamma) < 1e-9 * gamma
    assert all(abs(sum(col)) == 0.0 for col in zip(*q))


def check_series_chain():
    c = pymemnet.Circuit.from_file(FIXTURES / "series5_dc.mn")
    assert c.labels() == ["p00000", "p00001x5", "p00011x10", "p00111x10", "p01111x5", "p11111"]
    assert len(c.labels(full_space=True)) == 32
    analytic = c.analytic_switching_time()
    assert abs(analytic - 1.255884164659193e-4) < 1e-15, analytic
    assert len(c.switching_time_stages()) == 5
    numeric, _tail = c.numeric_switching_time(3e-3)
    assert abs(numeric / analytic - 1.0) < 1e-3, numeric
    mc = c.monte_carlo(2e-3, trials=2000, seed=3)
    mean, se, hit = mc.switching_time_summary()
    assert hit == 2000
    assert abs(mean - analytic) < 4 * se, (mean, se)


def check_ac_and_spice():
    c = pymemnet.Circuit.from_file(FIXTURES / "binary_ac.mn")
    traj = c.simulate(0.01, samples=201)
    assert len(traj) == 201
    assert all(abs(sum(p) - 1.0) < 1e-9 for p in traj.probabilities)
    assert max(traj.mean_current) > 0.0

    netlist = c.emit_spice(0.1, t_start=0.05, max_step=1e-6)
    reference = (FIXTURES / "binary_ac.cir").read_text()
    assert pymemnet.netlists_equivalent(netlist, reference)
    assert pymemnet.lint_netlist(netlist) == []

    faster = c.with_frequency(20e3)
    assert "freq=20k" in str(faster) or "20000" in str(faster), str(faster)


def check_errors():
    try:
        pymemnet.Circuit("net m1 +")
    except ValueError as e:
        assert str(e).startswith("1:"), str(e)
    else:
        raise AssertionError("parse error not raised")
    try:
        pymemnet.Circuit.from_file(FIXTURES / "binary_ac.mn").analytic_switching_time()
    except RuntimeError:
        pass
    else:
        raise AssertionError("closed form accepted a sine source")


if __name__ == "__main__":
    check_closed_form()
    check_series_chain()
    check_ac_and_spice()
    check_errors()
    print("pymemnet smoke test passed")
