"""Smoke test for the `mlpf` extension module.

Build and install first:

    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install --force-reinstall dist/mlpf-*.whl
    python python/smoke_test.py
"""

import json
import math

import mlpf


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    ctl = mlpf.Problem("ctl")
    assert ctl.dim == 2
    assert close(ctl.eval([0.0, 0.0]), -1.0)
    value, grad = ctl.gradient([1.0, 1.0])
    assert len(grad) == 2 and math.isfinite(value)

    dvg = mlpf.Problem("dvg02")
    assert abs(dvg.eval([53.81, 1.27, 3.01, 2.13, 0.507])) < 1e-18

    lj = mlpf.Problem("lj13", lj_seed=0)
    assert lj.dim == 39

    assert close(mlpf.kernel("square", 3.0), 18.0)
    assert close(mlpf.kernel("sigmoid", 0.0), 0.0)
    assert close(mlpf.apply_kdl(math.e - 1.0, 0.0, 1.0), 1.0)
    assert close(mlpf.cost_update(2.0, 1.0), 2.0 / 3.0)
    try:
        mlpf.apply_kdl(-2.0, 0.0, 1.0)
    except ArithmeticError:
        pass
    else:
        raise AssertionError("expected a domain error")

    trace = mlpf.run("problem = ctl\n", max_steps=200, use_kdl=False)
    assert trace.status in ("converged", "max_steps", "diverged")
    assert trace.rows[0][0] == 0
    again = mlpf.run("problem = ctl\n", max_steps=200, use_kdl=False)
    assert again.to_csv() == trace.to_csv()
    doc = json.loads(trace.to_json())
    assert doc["status"] == trace.status

    try:
        mlpf.run("problem = ctl\nbogus = 1\n")
    except ValueError as e:
        assert "line 2" in str(e)
    else:
        raise AssertionError("expected a config error")

    passed, detail = mlpf.check("kernel_exactness")
    assert passed, detail
    print("smoke test ok:", trace)


if __name__ == "__main__":
    main()
