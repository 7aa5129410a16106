"""Smoke test for the localiser_lab extension module.

Build and install first, e.g. `maturin develop --release` in crates/py.
"""

import json

import localiser_lab as ll


def main():
    for k in (-2, 1, 3):
        model = ll.Model.circle(96, k)
        report = model.half_signature(0.1, 0.1, t=10.0, lam=60.5)
        assert report["index"] == model.oracle_index(), (k, report["index"])
        assert report["signature"]["sig"] == 2 * report["index"]

    model = ll.Model.circle(64, 1)
    sig = model.localiser_signature(0.1, 30.5)
    assert sig["n_pos"] + sig["n_neg"] == 2 * 61

    both = ll.Model.direct_sum([ll.Model.circle(40, 2), ll.Model.circle(40, -1)])
    assert both.oracle_index() == ll.Model.circle(40, 2).oracle_index() + ll.Model.circle(40, -1).oracle_index()

    h = [[1.0, 2j, 0.0], [-2j, 1.0, 0.0], [0.0, 0.0, -3.0]]
    inertia = ll.hermitian_signature(h)
    assert (inertia["n_pos"], inertia["n_neg"], inertia["sig"]) == (1, 2, -1)

    p, rank = ll.kappa0([[0.9, 0.1], [0.1, 0.05]])
    assert rank == 1 and abs(p[0][0] + p[1][1] - 1.0) < 1e-12

    law = ll.defect_law_check(2, 100.0)
    assert law["pass"] and law["value"] <= 4 * 2 / 100.0

    semi = ll.semifinite_index([0.5, 0.25], [1, -2], 128, 0.1, 0.1, t=20.0, lam=100.5)
    assert abs(semi["tau_index"] - (0.5 * -1 + 0.25 * 2)) < 1e-9

    passed, csv, certificates = ll.run_experiment(
        "bounds", json.dumps({"schema_version": 1, "model": {"windings": [1]}, "params": {"t_grid": [10.0]}})
    )
    assert passed and csv.startswith("check,"), csv[:80]

    try:
        ll.Model.circle(0, 1)
    except ll.LocaliserError:
        pass
    else:
        raise AssertionError("expected LocaliserError")

    print("localiser_lab", ll.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
