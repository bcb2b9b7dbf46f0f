"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written the slow, obvious way — scalar
loops, per-window polynomial fits, an explicit mirror of the sampler's
random draws — and avoids the vectorised code paths under test.
"""

import numpy as np
from fractions import Fraction


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def naive_forward(model, x):
    """Per-instant, per-layer forward pass for a single sequence.

    Follows the recurrences directly: each gate as its own matrix-vector
    product, peepholes as element-wise products with the previous cell
    state (including the output gate), candidate through tanh, and the
    class scores as the plain sum of the per-instant projections.
    Returns (logits, probs).
    """
    x = np.asarray(x, dtype=np.float64)
    steps = x.shape[0]
    n, h = model.depth, model.hidden
    hs = [np.zeros(h) for _ in range(n)]
    cs = [np.zeros(h) for _ in range(n)]
    total = np.zeros(model.classes)
    for t in range(steps):
        below = None
        for l, layer in enumerate(model.layers):
            xt = x[t]
            c_prev, h_prev = cs[l], hs[l]
            a_i = layer.w_xi @ xt + layer.w_hi @ h_prev + layer.w_ci * c_prev + layer.b_i
            a_f = layer.w_xf @ xt + layer.w_hf @ h_prev + layer.w_cf * c_prev + layer.b_f
            a_g = layer.w_xc @ xt + layer.w_hc @ h_prev + layer.b_c
            a_o = layer.w_xo @ xt + layer.w_ho @ h_prev + layer.w_co * c_prev + layer.b_o
            if l > 0:
                a_i = a_i + layer.w_bi @ below
                a_f = a_f + layer.w_bf @ below
                a_g = a_g + layer.w_bc @ below
                a_o = a_o + layer.w_bo @ below
            gate_i, gate_f, gate_o = _sigmoid(a_i), _sigmoid(a_f), _sigmoid(a_o)
            cand = np.tanh(a_g)
            c_new = gate_f * c_prev + gate_i * cand
            h_new = gate_o * np.tanh(c_new)
            cs[l], hs[l] = c_new, h_new
            below = h_new
        total = total + (model.w_y @ hs[-1] + model.b_y)
    shifted = np.exp(total - total.max())
    return total, shifted / shifted.sum()


def savgol_reference(y, window, order):
    """Per-position least-squares polynomial smoothing.

    Interior positions fit a centred window and evaluate at its middle;
    the first and last half-windows reuse the polynomial fitted to the
    first (respectively last) full window, evaluated at their own
    offsets — the same boundary treatment as interpolation-mode
    smoothing.
    """
    y = np.asarray(y, dtype=np.float64)
    length = len(y)
    half = window // 2
    out = np.empty(length)
    xs = np.arange(window, dtype=np.float64)
    for j in range(half, length - half):
        coef = np.polyfit(xs, y[j - half:j + half + 1], order)
        out[j] = np.polyval(coef, float(half))
    head = np.polyfit(xs, y[:window], order)
    for j in range(half):
        out[j] = np.polyval(head, float(j))
    tail = np.polyfit(xs, y[length - window:], order)
    for j in range(length - half, length):
        out[j] = np.polyval(tail, float(j - (length - window)))
    return out


def brute_force_extrema(values):
    """Strict local extrema with plateau handling, checked per index.

    An index is reported when it is the midpoint of a maximal run of
    equal values whose nearest differing neighbours on both sides are
    both smaller or both larger; runs touching either end never count.
    """
    v = np.asarray(values, dtype=np.float64)
    length = len(v)
    found = set()
    for j in range(length):
        a = j
        while a > 0 and v[a - 1] == v[j]:
            a -= 1
        b = j
        while b + 1 < length and v[b + 1] == v[j]:
            b += 1
        if a == 0 or b == length - 1:
            continue
        if j != (a + b) // 2:
            continue
        left, right = v[a - 1], v[b + 1]
        if (left < v[j] and right < v[j]) or (left > v[j] and right > v[j]):
            found.add(j)
    return found


def largest_remainder_reference(sizes, target):
    """Quota assignment with exact rational remainders.

    Floors of target * size / total, then one extra to the largest
    fractional remainders, earlier entries winning ties.
    """
    total = sum(sizes.values())
    shares = {g: Fraction(target * n, total) for g, n in sizes.items()}
    quotas = {g: int(s) for g, s in shares.items()}
    leftover = target - sum(quotas.values())
    order = sorted(
        sizes, key=lambda g: (shares[g] - quotas[g], -list(sizes).index(g)), reverse=True,
    )
    for g in order[:leftover]:
        quotas[g] += 1
    return quotas


def naive_plan_selection(track_values, target_len, seed, window, order):
    """Mirror of the sampling plan: smoothing, extrema, quotas, draws.

    ``track_values`` maps track id -> raw 1-D values, in track order.
    Reproduces the exact draw sequence: one choice per non-empty track
    in order, then one backfill choice if deduplication left a gap.
    Returns the sorted selected indices (with deficit padding applied).
    """
    length = len(next(iter(track_values.values())))
    candidates = {}
    for tid, values in track_values.items():
        eff = min(window, length if length % 2 == 1 else length - 1)
        if eff <= order:
            smoothed = np.asarray(values, dtype=np.float64)
        else:
            smoothed = savgol_reference(values, eff, order)
        candidates[tid] = sorted(brute_force_extrema(smoothed))

    merged = sorted({idx for ids in candidates.values() for idx in ids})
    rng = np.random.default_rng(seed)

    if len(merged) == target_len:
        return merged
    if len(merged) < target_len:
        missing = target_len - len(merged)
        pool = np.array([i for i in range(length) if i not in set(merged)], dtype=np.int64)
        extra = []
        if missing > 0 and pool.size:
            take = min(missing, pool.size)
            extra = list(rng.choice(pool, size=take, replace=False))
        chosen = sorted(set(merged) | set(int(v) for v in extra))
        while len(chosen) < target_len:
            chosen.append(chosen[-1] if chosen else 0)
        return chosen

    sizes = {tid: len(ids) for tid, ids in candidates.items() if ids}
    quotas = largest_remainder_reference(sizes, target_len)
    picked = set()
    for tid in track_values:
        if tid not in sizes:
            continue
        pool = np.array(candidates[tid], dtype=np.int64)
        take = quotas[tid]
        if take > 0:
            picked.update(int(v) for v in rng.choice(pool, size=take, replace=False))
    shortfall = target_len - len(picked)
    if shortfall > 0:
        leftovers = np.array(sorted(set(merged) - picked), dtype=np.int64)
        extra = rng.choice(leftovers, size=shortfall, replace=False)
        picked.update(int(v) for v in extra)
    return sorted(picked)


def confusion_metrics_reference(matrix):
    """Per-class and averaged metrics as exact fractions (None when the
    denominator vanishes)."""
    matrix = np.asarray(matrix)
    classes = matrix.shape[0]
    out = {"per_class": []}
    prec, rec, f1s = [], [], []
    for k in range(classes):
        tp = int(matrix[k, k])
        fp = int(matrix[:, k].sum()) - tp
        fn = int(matrix[k].sum()) - tp
        p = Fraction(tp, tp + fp) if tp + fp else None
        r = Fraction(tp, tp + fn) if tp + fn else None
        f = Fraction(2 * tp, 2 * tp + fp + fn) if 2 * tp + fp + fn else None
        out["per_class"].append((p, r, f))
        if p is not None:
            prec.append(p)
        if r is not None:
            rec.append(r)
        if f is not None:
            f1s.append(f)
    out["accuracy"] = Fraction(int(np.trace(matrix)), int(matrix.sum()))
    out["macro_precision"] = sum(prec) / len(prec) if prec else None
    out["macro_recall"] = sum(rec) / len(rec) if rec else None
    out["macro_f1"] = sum(f1s) / len(f1s) if f1s else None
    return out
