"""Long-run behaviour of exact-mode MM training at N=500."""
import time
import numpy as np
import kdehmm as K

spec = K.SyntheticSpec(length=500, seed=3)
s500, _ = K.generate_synthetic(spec)
mm0 = K.initialize_mm(s500, order=1)

t0 = time.perf_counter()
m_num, r_num = K.mm_train(mm0, K.MmTrainingConfig(mode="scalar_numeric"))
print(f"scalar: h={m_num.bandwidth:.6f} obj={r_num.final_objective:.6f} ({time.perf_counter()-t0:.2f}s)")

t0 = time.perf_counter()
m_rel, r_rel = K.mm_train(mm0, K.MmTrainingConfig(mode="relaxed_gem", max_iterations=2000, relative_tolerance=0.0))
print(f"relaxed 2000: h={m_rel.bandwidth:.6f} obj={r_rel.final_objective:.6f} ({time.perf_counter()-t0:.2f}s)")

for iters in (2000, 10000, 30000):
    t0 = time.perf_counter()
    m_ex, r_ex = K.mm_train(mm0, K.MmTrainingConfig(mode="exact_gem", max_iterations=iters, relative_tolerance=0.0))
    dt = time.perf_counter() - t0
    gap = abs(r_ex.final_objective - r_num.final_objective) / abs(r_num.final_objective)
    print(f"exact {iters}: h={m_ex.bandwidth:.6f} obj={r_ex.final_objective:.6f} relgap={gap:.2e} ({dt:.1f}s)")
    if gap < 1e-3:
        break
