"""Prototype acceptance criteria 5-9 to validate orderings and runtimes."""
import time
import numpy as np
import kdehmm as K

t_all = time.perf_counter()

def stamp(label, t0):
    print(f"[{label}] {time.perf_counter() - t0:.1f}s")


# ---------- criterion 5: accelerated-update quality, M=4 p=1 N=1000 ----------
t0 = time.perf_counter()
dec_total = 0
steps_total = 0
wins = 0
for run in range(10):
    raw = K.logistic_map_surrogate(1000, seed=500 + run)
    series = K.dequantize(raw, 0.5, seed=600 + run)
    guess = K.phase_occupancies(series, 4)
    model0 = K.hmm_initialize(series, guess, order=1)
    acc, rep_acc = K.hmm_train(model0, K.HmmTrainingConfig(
        mode="accelerated", max_iterations=50, relative_tolerance=0.0))
    exa, rep_exa = K.hmm_train(model0, K.HmmTrainingConfig(
        mode="exact", max_iterations=50, relative_tolerance=0.0))
    dec_total += rep_acc.decreasing_steps
    steps_total += rep_acc.steps
    if rep_acc.final_objective >= rep_exa.final_objective:
        wins += 1
    print(f"  run {run}: accel {rep_acc.final_objective:.2f} (dec {rep_acc.decreasing_steps}) "
          f"exact {rep_exa.final_objective:.2f}")
print(f"C5: decreasing fraction {dec_total}/{steps_total}, accel>=exact in {wins}/10")
stamp("C5", t0)

# ---------- criterion 8/9: markov sweep + hidden-state benefit ----------
t0 = time.perf_counter()
raw = K.logistic_map_surrogate(2000, seed=42)
series = K.dequantize(raw, 0.5, seed=43)
train = K.TimeSeries(series.values[:1000])
val = K.TimeSeries(series.values[1000:2000])

p = 3
ar = K.ar_fit(train, p)
ar_ps = K.ar_loglik(ar, val) / (len(val) - p)

mm0 = K.initialize_mm(train, p)
mm, _ = K.mm_train(mm0, K.MmTrainingConfig(mode="scalar_numeric"))
mm_ps = K.mm_sequence_logpdf(mm, val) / (len(val) - p)

h10 = K.hmm_initialize(train, K.uniform_occupancies(len(train), 1), order=p)
h1, rep_h1 = K.hmm_train(h10, K.HmmTrainingConfig(mode="accelerated", max_iterations=500))
h1_ps = K.hmm_score(h1, val) / (len(val) - p)
print(f"C8 (p=3): ar {ar_ps:.4f}  mm {mm_ps:.4f}  kde_hmm_M1 {h1_ps:.4f} "
      f"(iters {rep_h1.iterations})")
print(f"C8 gap mm-ar = {mm_ps - ar_ps:.3f} (need > 0.1); hmm >= mm: {h1_ps >= mm_ps}")
stamp("C8", t0)

t0 = time.perf_counter()
p9 = 2
hmm1_0 = K.hmm_initialize(train, K.uniform_occupancies(len(train), 1), order=p9)
hmm1, _ = K.hmm_train(hmm1_0, K.HmmTrainingConfig(mode="accelerated", max_iterations=500))
hmm1_ps = K.hmm_score(hmm1, val) / (len(val) - p9)

guess4 = K.phase_occupancies(train, 4)
hmm4_0 = K.hmm_initialize(train, guess4, order=p9)
hmm4, rep4 = K.hmm_train(hmm4_0, K.HmmTrainingConfig(mode="accelerated", max_iterations=500))
hmm4_ps = K.hmm_score(hmm4, val) / (len(val) - p9)

arhmm4, _ = K.ar_hmm_fit(train, 4, p9, guess4, max_iterations=500)
arhmm4_ps = K.ar_hmm_score(arhmm4, val) / (len(val) - p9)
print(f"C9: kde_hmm(4,2) {hmm4_ps:.4f}  kde_hmm(1,2) {hmm1_ps:.4f}  ar_hmm(4,2) {arhmm4_ps:.4f} "
      f"(iters {rep4.iterations})")
stamp("C9", t0)

# ---------- criterion 6: synthetic ordering at N=3162 (3 reps preview) ----------
t0 = time.perf_counter()
for family in ("bimodal_gmm", "gaussian"):
    kde_scores, ar_scores = [], []
    for rep in range(3):
        tr, _ = K.generate_synthetic(K.SyntheticSpec(length=3162, seed=1000 + rep, noise_family=family))
        va, _ = K.generate_synthetic(K.SyntheticSpec(length=1000, seed=2000 + rep, noise_family=family))
        guess = K.threshold_occupancies(tr)
        m0 = K.hmm_initialize(tr, guess, order=1)
        m, repk = K.hmm_train(m0, K.HmmTrainingConfig(mode="accelerated", max_iterations=500, relative_tolerance=1e-6))
        kde_scores.append(K.hmm_score(m, va) / (len(va) - 1))
        am, _ = K.ar_hmm_fit(tr, 2, 1, guess, max_iterations=500)
        ar_scores.append(K.ar_hmm_score(am, va) / (len(va) - 1))
        print(f"  {family} rep {rep}: kde {kde_scores[-1]:.4f} ({repk.iterations} it) ar {ar_scores[-1]:.4f}")
    print(f"C6 {family}: kde med {np.median(kde_scores):.4f} ar med {np.median(ar_scores):.4f}")
stamp("C6 preview", t0)

# ---------- criterion 7: trend preview (3 reps) ----------
t0 = time.perf_counter()
for size in (32, 100, 316, 1000, 3162):
    scores = []
    for rep in range(3):
        tr, _ = K.generate_synthetic(K.SyntheticSpec(length=size, seed=3000 + rep * 17 + size))
        va, _ = K.generate_synthetic(K.SyntheticSpec(length=1000, seed=4000 + rep * 13 + size))
        guess = K.threshold_occupancies(tr)
        m0 = K.hmm_initialize(tr, guess, order=1)
        m, _ = K.hmm_train(m0, K.HmmTrainingConfig(mode="accelerated", max_iterations=500))
        scores.append(K.hmm_score(m, va) / (len(va) - 1))
    print(f"C7 N={size}: median {np.median(scores):.4f} {sorted(np.round(scores,3))}")
stamp("C7 preview", t0)

print(f"TOTAL {time.perf_counter() - t_all:.1f}s")
