"""Scratch verification of the core math before tests are frozen."""
import itertools
import numpy as np
from scipy.integrate import quad

import kdehmm as K

rng = np.random.default_rng(42)

# --- 1. MM next-step value oracle (double loop, non-periodic) ---
def mm_oracle(y, p, h, ctx, x, periodic=False):
    y = list(y)
    N = len(y)
    def val(i):
        return y[i % N] if periodic else y[i]
    def k(r):
        return np.exp(-0.5 * r * r) / np.sqrt(2 * np.pi)
    ns = range(0, N) if periodic else range(p, N)
    num = 0.0
    den = 0.0
    for n in ns:
        prod_ctx = 1.0
        for l in range(1, p + 1):
            prod_ctx *= k((ctx[p - l] - val(n - l)) / h)
        num += prod_ctx * k((x - val(n)) / h)
        den += prod_ctx
    return np.log(num / den / h)

y = [0.0, 1.0, 0.0, 1.0]
model = K.KdeMm(K.as_series(y), order=1, bandwidth=1.0, periodic_extension=False)
got = K.mm_next_step_logpdf(model, [1.0], 0.0)
want = mm_oracle(y, 1, 1.0, [1.0], 0.0)
print("MM next-step:", got, want, "ok" if abs(got - want) < 1e-12 else "FAIL")

modelp = K.KdeMm(K.as_series(y), order=1, bandwidth=1.0, periodic_extension=True)
gotp = K.mm_next_step_logpdf(modelp, [1.0], 0.0)
wantp = mm_oracle(y, 1, 1.0, [1.0], 0.0, periodic=True)
print("MM next-step periodic:", gotp, wantp, "ok" if abs(gotp - wantp) < 1e-12 else "FAIL")

# --- 2. MM conditional density normalization by quadrature ---
yr = rng.normal(size=9)
m2 = K.KdeMm(K.as_series(yr), order=2, bandwidth=0.7)
ctx = [0.3, -0.2]
total, _ = quad(lambda x: np.exp(K.mm_next_step_logpdf(m2, ctx, x)), -12, 12, limit=200)
print("MM normalization:", total)

# --- 3. MM pseudo-likelihood vs direct oracle with CV ---
def mm_pseudo_oracle(y, p, h, periodic):
    y = list(y)
    N = len(y)
    def val(i):
        return y[i % N]
    def k(r):
        return np.exp(-0.5 * r * r) / np.sqrt(2 * np.pi)
    ts = range(0, N) if periodic else range(p, N)
    ns = range(0, N) if periodic else range(p, N)
    out = 0.0
    for t in ts:
        num = 0.0
        den = 0.0
        for n in ns:
            if n == t:
                continue
            prod_ctx = 1.0
            for l in range(1, p + 1):
                prod_ctx *= k((val(t - l) - val(n - l)) / h)
            num += prod_ctx * k((val(t) - val(n)) / h)
            den += prod_ctx
        out += np.log(num / den / h)
    return out

for periodic in (False, True):
    m3 = K.KdeMm(K.as_series(yr), order=1, bandwidth=0.8, periodic_extension=periodic)
    got = K.mm_pseudo_log_likelihood(m3)
    want = mm_pseudo_oracle(yr, 1, 0.8, periodic)
    print(f"MM pseudo (periodic={periodic}):", got, want, "ok" if abs(got - want) < 1e-10 else "FAIL")

# --- 4. HMM emission oracle + enumeration log-likelihood oracle ---
def hmm_emission_oracle(y, p, w_q, h_q, ctx, x, exclude=None):
    N = len(y)
    def k(r):
        return np.exp(-0.5 * r * r) / np.sqrt(2 * np.pi)
    num = 0.0
    den = 0.0
    for row, n in enumerate(range(p, N)):
        if exclude is not None and n == exclude:
            continue
        prod_ctx = w_q[row]
        for l in range(1, p + 1):
            prod_ctx *= k((ctx[p - l] - y[n - l]) / h_q[l])
        num += prod_ctx * k((x - y[n]) / h_q[0]) / h_q[0]
        den += prod_ctx
    return np.log(num / den)

def enumeration_loglik(y_train, seq, p, A, pi, weights, bandwidths, cross_validate):
    Tn = len(seq)
    m = A.shape[0]
    terms = []
    aligned = np.array_equal(np.asarray(seq), np.asarray(y_train))
    B = np.zeros((m, Tn - p))
    for j, t in enumerate(range(p, Tn)):
        ctx = [seq[t - p + i] for i in range(p)]
        for q in range(m):
            B[q, j] = np.exp(
                hmm_emission_oracle(
                    y_train, p, weights[q], bandwidths[q], ctx, seq[t],
                    exclude=(t if (cross_validate and aligned) else None),
                )
            )
    total = 0.0
    for path in itertools.product(range(m), repeat=Tn - p):
        prob = pi[path[0]]
        for i in range(1, len(path)):
            prob *= A[path[i - 1], path[i]]
        for i, q in enumerate(path):
            prob *= B[q, i]
        total += prob
    return np.log(total)

ytr = rng.normal(size=7)
p = 1
M = 2
A = np.array([[0.7, 0.3], [0.4, 0.6]])
import kdehmm.numerics as num
pi = num.stationary_distribution(A)
wmat = rng.random((M, len(ytr) - p))
wmat /= wmat.sum(axis=1, keepdims=True)
bw = rng.uniform(0.4, 1.2, size=(M, p + 1))
hmm = K.KdeHmm(K.as_series(ytr), p, A, pi, wmat, bw)

ctx = [0.123]
xval = -0.4
e_got = K.hmm_emission_logpdf(hmm, 1, ctx, xval)
e_want = hmm_emission_oracle(ytr, p, wmat[1], bw[1], ctx, xval)
print("HMM emission:", e_got, e_want, "ok" if abs(e_got - e_want) < 1e-12 else "FAIL")
e_got_cv = K.hmm_emission_logpdf(hmm, 0, ctx, xval, exclude_exemplar=3)
e_want_cv = hmm_emission_oracle(ytr, p, wmat[0], bw[0], ctx, xval, exclude=3)
print("HMM emission CV:", e_got_cv, e_want_cv, "ok" if abs(e_got_cv - e_want_cv) < 1e-12 else "FAIL")

score_got = K.hmm_score(hmm, ytr)
score_want = enumeration_loglik(ytr, ytr, p, A, pi, wmat, bw, cross_validate=False)
print("HMM score vs enumeration:", score_got, score_want,
      "ok" if abs(score_got - score_want) < 1e-10 * abs(score_want) else "FAIL")

pll_got = K.hmm_pseudo_log_likelihood(hmm)
pll_want = enumeration_loglik(ytr, ytr, p, A, pi, wmat, bw, cross_validate=True)
print("HMM pseudo vs enumeration:", pll_got, pll_want,
      "ok" if abs(pll_got - pll_want) < 1e-10 * abs(pll_want) else "FAIL")

# --- 5. emission normalization ---
total, _ = quad(lambda x: np.exp(K.hmm_emission_logpdf(hmm, 0, ctx, x)), -14, 14, limit=200)
print("HMM emission normalization:", total)

# --- 6. Exact GEM monotonicity, M=2 p=1 N=200 synthetic dequantized ---
spec = K.SyntheticSpec(length=200, seed=7)
series, _ = K.generate_synthetic(spec)
series = K.dequantize(series, 0.5, seed=8)
guess = K.threshold_occupancies(series)
model0 = K.hmm_initialize(series, guess, order=1)
cfg = K.HmmTrainingConfig(mode="exact", update_weights=True, max_iterations=100, relative_tolerance=0.0)
trained, rep = K.hmm_train(model0, cfg)
trace = np.array(rep.objective_trace + [rep.final_objective])
drops = np.diff(trace) < -1e-8 * np.abs(trace[:-1])
print("exact GEM trace head:", trace[:5])
print("exact GEM trace tail:", trace[-4:])
print("exact monotone:", not drops.any(), "| decreasing steps:", int(drops.sum()), "of", len(trace) - 1)

# --- 7. Accelerated mode on the same data ---
cfg2 = K.HmmTrainingConfig(mode="accelerated", max_iterations=100, relative_tolerance=0.0)
trained2, rep2 = K.hmm_train(model0, cfg2)
trace2 = np.array(rep2.objective_trace + [rep2.final_objective])
drops2 = np.diff(trace2) < -1e-8 * np.abs(trace2[:-1])
print("accel trace head:", trace2[:5])
print("accel trace tail:", trace2[-4:])
print("accel decreasing steps:", int(drops2.sum()), "of", len(trace2) - 1)
print("final objectives exact vs accel:", trace[-1], trace2[-1])

# --- 8. MM training modes agreement on N=500 ---
spec = K.SyntheticSpec(length=500, seed=3)
s500, _ = K.generate_synthetic(spec)
mm0 = K.initialize_mm(s500, order=1)
outs = {}
for mode in ("exact_gem", "relaxed_gem", "scalar_numeric"):
    mt, mrep = K.mm_train(mm0, K.MmTrainingConfig(mode=mode, max_iterations=500))
    outs[mode] = (mt.bandwidth, mrep.final_objective, mrep.iterations)
    print(f"MM {mode}: h={mt.bandwidth:.6f} obj={mrep.final_objective:.6f} iters={mrep.iterations}")
vals = [v[1] for v in outs.values()]
print("MM mode agreement rel spread:", (max(vals) - min(vals)) / abs(min(vals)))

# --- 9. MM exact monotone trace ---
mt, mrep = K.mm_train(mm0, K.MmTrainingConfig(mode="exact_gem", max_iterations=200, relative_tolerance=0.0))
tr = np.array(mrep.objective_trace + [mrep.final_objective])
dr = np.diff(tr) < -1e-8 * np.abs(tr[:-1])
print("MM exact monotone:", not dr.any(), "steps:", len(tr) - 1)
