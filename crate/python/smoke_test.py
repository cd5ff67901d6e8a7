"""Smoke test for the cascade_search extension module.

Build and install the extension first, from the repository root:

    pip install maturin && maturin develop --release -m crates/py/Cargo.toml
    python python/smoke_test.py
"""

import math
import os
import tempfile

import cascade_search as cs


def check_cost_model():
    assert math.isclose(cs.lifetime_cost(100, 0.1, [1.0, 3.0]), 130.0)
    assert math.isclose(cs.two_level_speedup(0.2125, 1.0, 0.1), 3.2)
    assert abs(cs.query_speedup([50, 10], [1.0, 3.3]) - 165 / 83) < 1e-9
    assert cs.solve_intermediate_m(50, 2.0, 1.0, 3.3) == 10
    assert cs.cascade_is_cheaper(0.5, 1.0, 0.1)
    assert not cs.cascade_is_cheaper(0.95, 1.0, 0.1)
    try:
        cs.two_level_speedup(1.0, 1.0, 0.1)
    except ValueError:
        pass
    else:
        raise AssertionError("equal tier costs accepted")


def check_matrix_round_trip(tmp):
    m = cs.EmbeddingMatrix(0, 2, [7, 3], [3.0, 4.0, 0.0, 2.0], normalize=True)
    assert len(m) == 2 and m.dim == 2 and m.ids == [7, 3]
    assert [round(x, 6) for x in m.row(7)] == [0.6, 0.8]
    path = os.path.join(tmp, "m.csc")
    m.write(path)
    back = cs.EmbeddingMatrix.read(path)
    assert back.ids == m.ids and back.row(3) == m.row(3)
    assert [doc for doc, _ in m.rank([0.0, 1.0])] == [3, 7]

    with open(path, "r+b") as f:
        f.seek(-6, os.SEEK_END)
        f.write(b"\xff")
    try:
        cs.EmbeddingMatrix.read(path)
    except cs.CascadeError:
        pass
    else:
        raise AssertionError("corrupt file accepted")


def check_cascade(tmp):
    data = cs.SyntheticDataset(n=2000, dim=64, queries=200, noise=1.5, seed=3)
    small = cs.Cascade.synthetic(data, [8], [1.0], [], output_k=10)
    large = cs.Cascade.synthetic(data, [64], [4.0], [], output_k=10)
    cascade = cs.Cascade.synthetic(data, [8, 64], [1.0, 4.0], [50], state_dir=os.path.join(tmp, "state"))

    r_small, r_large, r_cascade = (e.evaluate([1, 10]) for e in (small, large, cascade))
    print("R@1 small %.3f cascade %.3f large %.3f" % (r_small[1], r_cascade[1], r_large[1]))
    assert r_small[1] <= r_cascade[1] <= r_large[1] + 1e-12

    first = cascade.query(5)
    assert len(first["results"]) == 10
    assert first["cost_charged"][0]["new_encodings"] == 50
    again = cascade.query(5)
    assert again["results"] == first["results"]
    assert again["cost_charged"][0]["new_encodings"] == 0

    workload = cascade.generate_workload(0.1, seed=1)
    report = cascade.run_experiment(workload["queries"], [1, 5, 10])
    f_hat = report["lifetime"]["realized_f"]
    assert math.isclose(report["realized_speedup"], cs.two_level_speedup(1.0, 4.0, f_hat))
    print("pilot f %.3f realized f %.3f speedup %.2fx"
          % (workload["pilot_f"], f_hat, report["realized_speedup"]))

    recall = cs.recall_at_k({0: [4, 2], 1: [9, 1]}, [(0, 2), (1, 3)], [1, 2], [1, 2, 3, 4, 9])
    assert recall == {1: 0.0, 2: 0.5}


def main():
    check_cost_model()
    with tempfile.TemporaryDirectory() as tmp:
        check_matrix_round_trip(tmp)
        check_cascade(tmp)
    print("smoke test passed")


if __name__ == "__main__":
    main()
