"""Smoke test for the spinspec_py extension module.

Build and install with `maturin build --release` in crates/py, then
`pip install` the wheel, or run `maturin develop` inside a virtualenv.
"""

import math
import pathlib
import sys

import spinspec_py as ss

SPECS = pathlib.Path(__file__).resolve().parent.parent / "specs"


def close(x, y, rel=1e-9):
    return abs(x - y) <= rel * max(abs(y), 1.0)


def main():
    example = ss.Problem.from_file(SPECS / "example.json")
    report = ss.analyze(example)
    assert report["charge"] == 1
    assert report["spin_structure"]["status"] == "compatible"
    assert close(report["action"], -8 * math.pi**3)
    assert close(report["a"], 4 * math.pi / 3)
    assert close(report["b_action"], -4 * math.pi)
    print("analyze ok", report["a"], report["b_action"])

    single = ss.Problem.twisted(turns=1)
    assert ss.analyze(single)["spin_structure"] == {"status": "spin_structure_mismatch", "cycle": "x3"}
    try:
        ss.verify(single, "torsion")
    except ss.SpinStructureError as e:
        print("single turn rejected:", e)
    else:
        raise AssertionError("single turn should not lift")

    flipped = ss.Problem.twisted(flipped=True)
    assert ss.analyze(flipped)["charge"] == -1

    checks = ss.verify(example, "all", seed=42)
    assert checks["passed"], checks
    print("verify ok,", len(checks["checks"]), "checks")

    spec = ss.spectrum(example, m=3, lambda_max=2.0)
    values = spec["spectrum"]["eigenvalues"]
    assert len(values) == 2 * 7**3
    assert sum(1 for v in values if abs(v - 1.0) < 1e-8) == 2
    print("spectrum ok, trust radius", spec["spectrum"]["trust_radius"])

    table, summary = ss.count(2.6)
    assert [(s["lambda"], s["count"]) for s in table["samples"]] == [(0.5, 0), (1.5, 2), (2.5, 20)]
    assert ss.lattice_count(1.5) == 19
    assert ss.exact_example_spectrum(0.5).count(0.0) == 6

    try:
        ss.Problem.from_json('{"symbol": [[], [], []], "grid": 2}')
    except ValueError as e:
        print("invalid spec rejected:", e)
    else:
        raise AssertionError("invalid spec accepted")

    assert ss.Problem.from_json(example.to_json()).degree == example.degree
    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
