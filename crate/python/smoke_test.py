"""Builds the extension module and exercises the Python API.

    python3 python/smoke_test.py            # build, then test
    python3 python/smoke_test.py --no-build # reuse python/riskgrad.so
"""

import math
import os
import shutil
import subprocess
import sys
import tempfile

HERE = os.path.dirname(os.path.abspath(__file__))
ROOT = os.path.dirname(HERE)


def build():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "riskgrad-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    target = os.environ.get("CARGO_TARGET_DIR", os.path.join(ROOT, "target"))
    shutil.copyfile(
        os.path.join(target, "release", "libriskgrad_py.so"),
        os.path.join(HERE, "riskgrad.so"),
    )


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    if "--no-build" not in sys.argv:
        build()
    sys.path.insert(0, HERE)
    import riskgrad

    print("riskgrad", riskgrad.__version__)

    assert close(riskgrad.gaussian_avar(0.95), 2.0627, 1e-4)
    assert close(riskgrad.gaussian_var(0.95, mu=1.0, sigma=2.0), 1 + 2 * 1.6449, 1e-4)
    assert close(riskgrad.psi_constant(100, 1.0, 0.95, 1e8), 3.507e-6, 1e-3)
    assert riskgrad.deviation_probability_bound(0.01, 5000, 1.0) == 1.0
    assert riskgrad.empirical_avar([1.0, 2.0, 3.0, 4.0], 0.5) == 3.5

    rows = riskgrad.gaussian_sampler([(0.0, 1.0)], 5000, seed=1)
    assert len(rows) == 5000 and len(rows[0]) == 1
    est = riskgrad.estimate_avar(rows, 0.95, steps=10_000, chains=100, seed=1)
    print(est)
    assert close(est.avar, 2.0627, 0.05), est.avar
    assert close(est.var, 1.6449, 0.10), est.var
    assert est.path[-1][0] == 10_000

    two = riskgrad.gaussian_sampler([(0.0, 0.1), (0.0, 1.0)], 400, seed=2)
    model = riskgrad.PayoffModel.softmax(2)
    port = riskgrad.estimate_avar(two, 0.9, payoff=model, gamma=1e-3, steps=4000, chains=16, step_size=1e-3)
    weights = [math.exp(r) for r in port.portfolio]
    assert weights[0] > weights[1], port.portfolio

    forced = riskgrad.estimate_evar(
        rows[:1000], 0.9, steps=4000, chains=20, seed=3, atoms=1, partitions=1, force_atom=0.9
    )
    plain = riskgrad.estimate_avar(rows[:1000], 0.9, steps=4000, chains=20, seed=3)
    assert forced.value == plain.avar, (forced.value, plain.avar)

    try:
        riskgrad.estimate_avar([1.0], 1.5, steps=10, chains=1)
    except ValueError as err:
        print("rejected:", err)
    else:
        raise AssertionError("u outside (0,1) accepted")

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "prices.csv")
        with open(path, "w") as fh:
            fh.write("date,A,B\n2024-01-01,10,5\n2024-01-02,11,NA\n2024-01-03,13,6\n")
        table = riskgrad.load_csv(path)
        assert table.names == ["A"]
        assert table.increments() == [[1.0], [2.0]]
        try:
            riskgrad.load_csv(path, na="error")
        except ValueError as err:
            print("rejected:", err)
        else:
            raise AssertionError("missing value accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
