"""Isolate the source of tiny late-stage objective decreases in exact mode."""
import numpy as np
import kdehmm as K
from kdehmm import hmm as H

spec = K.SyntheticSpec(length=200, seed=7)
series, _ = K.generate_synthetic(spec)
series = K.dequantize(series, 0.5, seed=8)
guess = K.threshold_occupancies(series)
model0 = K.hmm_initialize(series, guess, order=1)


def run(label, update_weights, floor_weights=True, iters=100):
    # variant of hmm_train with optional weight flooring disabled
    import kdehmm.hmm as hm
    orig = hm._WEIGHT_FLOOR
    hm._WEIGHT_FLOOR = 1e-12 if floor_weights else 0.0
    cur = model0
    trace = []
    try:
        for i in range(iters):
            cur, diag = K.hmm_gem_step(cur, mode="exact", update_weights=update_weights)
            trace.append(diag.objective)
        trace.append(K.hmm_pseudo_log_likelihood(cur))
    finally:
        hm._WEIGHT_FLOOR = orig
    tr = np.array(trace)
    d = np.diff(tr)
    drops = d < -1e-8 * np.abs(tr[:-1])
    worst = d.min()
    print(f"{label}: drops={int(drops.sum())}/{len(d)} worst={worst:.3e} final={tr[-1]:.6f}")
    print("   tail:", tr[-5:])
    return cur


run("exact +weights +floor", True, True)
run("exact +weights nofloor", True, False)
run("exact fixedweights", False, True)
