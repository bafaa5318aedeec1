"""Exercise the jspq bindings end to end on tiny instances."""

import math
import os
import tempfile

import jspq


def main():
    inst = jspq.Instance([[(0, 3), (1, 2)], [(1, 2), (0, 4)]], id="tiny")
    assert (inst.n_jobs, inst.n_machines) == (2, 2)
    assert jspq.Instance.parse(inst.to_text(), "tiny").to_text() == inst.to_text()

    status, cmax, perms = jspq.solve(inst)
    assert status == "optimal" and cmax == 7, (status, cmax)
    assert inst.makespan(perms) == 7
    assert jspq.brute_force(inst) == 7
    try:
        inst.makespan([[(1, 1), (0, 0)], [(0, 1), (1, 0)]])
        raise AssertionError("cyclic order accepted")
    except ValueError:
        pass

    assert jspq.quality(7, 7) == 1.0
    assert math.isclose(jspq.quality(14, 7), 1.0 - math.tanh(1.0))

    feats = inst.features()
    assert len(feats) == 4 and all(len(r) == 18 for r in feats)

    gen = jspq.Instance.generate(4, 4, seed=3)
    samples = jspq.label([gen], random=4, seed=1)
    assert len(samples) == 4 * (1 + 3 + 4)
    assert all(0.0 < s["y"] <= 1.0 for s in samples)

    oracle = jspq.Oracle(seed=1)
    y = oracle.predict(gen, 0, gen.machine_ops(0))
    assert 0.0 <= y <= 1.0
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "w.bin")
        oracle.save(path)
        assert jspq.Oracle.load(path).predict(gen, 0, gen.machine_ops(0)) == y

    sts = jspq.search(gen, max_iter=50, seed=2)
    ots = jspq.search(gen, max_iter=50, seed=2, oracle=oracle)
    assert gen.makespan(sts["best_perms"]) == sts["best_makespan"]
    assert ots["oracle_calls"] > 0
    print("smoke test ok:", inst, sts["best_makespan"], ots["best_makespan"])


if __name__ == "__main__":
    main()
