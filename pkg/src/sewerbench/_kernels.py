"""Compiled numerical kernels (numba) for the hot paths.

Everything here is deterministic: no global RNG (randomized kernels take an
explicit splitmix64 state mirroring rng.RngStream), and prange loops only do
independent per-element writes, so results are bitwise identical for any
thread count. Python-side wrappers live in the classifier modules.
"""

from __future__ import annotations

import numba as nb
import numpy as np

U64_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_U64_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_U64_MUL2 = np.uint64(0x94D049BB133111EB)
_U64_30 = np.uint64(30)
_U64_27 = np.uint64(27)
_U64_31 = np.uint64(31)
_U64_11 = np.uint64(11)
_INV_2_53 = 1.0 / (1 << 53)


@nb.njit(nb.uint64(nb.uint64), cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> _U64_30)) * _U64_MUL1
    z = (z ^ (z >> _U64_27)) * _U64_MUL2
    return z ^ (z >> _U64_31)


@nb.njit(cache=True, inline="always")
def next_u64(s):
    s = s + U64_GOLDEN
    return mix64(s), s


@nb.njit(cache=True, inline="always")
def next_uniform(s):
    u, s = next_u64(s)
    return float(u >> _U64_11) * _INV_2_53, s


@nb.njit(cache=True)
def shuffle_indices(idx, s):
    """In-place Fisher-Yates; bit-compatible with rng.RngStream.shuffle."""
    for i in range(idx.shape[0] - 1, 0, -1):
        u, s = next_u64(s)
        j = int(u % np.uint64(i + 1))
        t = idx[i]
        idx[i] = idx[j]
        idx[j] = t
    return s


@nb.njit(cache=True)
def sequence_u64(state, n):
    """First n raw draws from a state (used by the cross-language check)."""
    out = np.empty(n, np.uint64)
    for i in range(n):
        out[i], state = next_u64(state)
    return out


# ---------------------------------------------------------------------------
# nearest neighbor / K* / LWL
# ---------------------------------------------------------------------------


@nb.njit(cache=True, parallel=True)
def nn1_predict(train_x, train_y, queries):
    """1-NN labels, squared Euclidean, distance ties -> earliest index."""
    nq = queries.shape[0]
    n, d = train_x.shape
    out = np.empty(nq, np.int8)
    for qi in nb.prange(nq):
        best = np.inf
        bi = 0
        for i in range(n):
            s = 0.0
            for a in range(d):
                diff = train_x[i, a] - queries[qi, a]
                s += diff * diff
            if s < best:
                best = s
                bi = i
        out[qi] = train_y[bi]
    return out


@nb.njit(cache=True, parallel=True)
def kstar_scores(train_x, train_y, queries, inv_scale):
    """Per-class sums of exp(-sum_a |dx_a| * inv_scale_a) over instances."""
    nq = queries.shape[0]
    n, d = train_x.shape
    out = np.zeros((nq, 2))
    for qi in nb.prange(nq):
        s0 = 0.0
        s1 = 0.0
        for i in range(n):
            acc = 0.0
            for a in range(d):
                acc += abs(train_x[i, a] - queries[qi, a]) * inv_scale[a]
            w = np.exp(-acc)
            if train_y[i] == 0:
                s0 += w
            else:
                s1 += w
        out[qi, 0] = s0
        out[qi, 1] = s1
    return out


@nb.njit(cache=True)
def kstar_mean_neff(col, probe_idx, inv_s):
    """Mean effective instance count (sum w)^2 / sum w^2, probe left out."""
    m = probe_idx.shape[0]
    n = col.shape[0]
    total = 0.0
    for pi in range(m):
        q = probe_idx[pi]
        qv = col[q]
        sw = 0.0
        sw2 = 0.0
        for i in range(n):
            if i == q:
                continue
            w = np.exp(-abs(col[i] - qv) * inv_s)
            sw += w
            sw2 += w * w
        total += (sw * sw) / sw2 if sw2 > 0.0 else 1.0
    return total / m


@nb.njit(cache=True, parallel=True)
def lwl_predict_dist(train_x, train_y, orders, queries):
    """Per-query distance-weighted decision stump.

    orders[:, a] holds train indices sorted by feature a (precomputed once
    per fit). Weights are max(0, 1 - d/d_max) with d_max the farthest
    training point; d_max == 0 degenerates to uniform weights, all-zero
    weights to the unweighted majority.
    Returns (nq, 2) class-weight distributions of the chosen stump side.
    """
    nq = queries.shape[0]
    n, d = train_x.shape
    out = np.empty((nq, 2))
    for qi in nb.prange(nq):
        w = np.empty(n)
        dmax = 0.0
        for i in range(n):
            s = 0.0
            for a in range(d):
                diff = train_x[i, a] - queries[qi, a]
                s += diff * diff
            s = np.sqrt(s)
            w[i] = s
            if s > dmax:
                dmax = s
        wt0 = 0.0
        wt1 = 0.0
        if dmax <= 0.0:
            for i in range(n):
                w[i] = 1.0
        else:
            for i in range(n):
                w[i] = 1.0 - w[i] / dmax
                if w[i] < 0.0:
                    w[i] = 0.0
        for i in range(n):
            if train_y[i] == 0:
                wt0 += w[i]
            else:
                wt1 += w[i]
        if wt0 + wt1 <= 0.0:
            c0 = 0.0
            c1 = 0.0
            for i in range(n):
                if train_y[i] == 0:
                    c0 += 1.0
                else:
                    c1 += 1.0
            out[qi, 0] = c0 / n
            out[qi, 1] = c1 / n
            continue
        # weighted stump: minimize misclassified weight over all midpoints;
        # ascending (feature, threshold) scan + strict < gives the tie rule
        best_err = np.inf
        bfeat = -1
        bthr = 0.0
        bl0 = 0.0
        bl1 = 0.0
        for a in range(d):
            l0 = 0.0
            l1 = 0.0
            for pos in range(n - 1):
                i = orders[pos, a]
                if train_y[i] == 0:
                    l0 += w[i]
                else:
                    l1 += w[i]
                v = train_x[i, a]
                vnext = train_x[orders[pos + 1, a], a]
                if vnext <= v:
                    continue
                err = min(l0, l1) + min(wt0 - l0, wt1 - l1)
                if err < best_err:
                    best_err = err
                    bfeat = a
                    mid = 0.5 * (v + vnext)
                    bthr = mid if v <= mid < vnext else v
                    bl0 = l0
                    bl1 = l1
        if bfeat < 0:
            out[qi, 0] = wt0 / (wt0 + wt1)
            out[qi, 1] = wt1 / (wt0 + wt1)
            continue
        if queries[qi, bfeat] <= bthr:
            s0 = bl0
            s1 = bl1
        else:
            s0 = wt0 - bl0
            s1 = wt1 - bl1
        tot = s0 + s1
        if tot > 0:
            out[qi, 0] = s0 / tot
            out[qi, 1] = s1 / tot
        else:
            out[qi, 0] = wt0 / (wt0 + wt1)
            out[qi, 1] = wt1 / (wt0 + wt1)
    return out


# ---------------------------------------------------------------------------
# multilayer perceptron (per-instance SGD with momentum)
# ---------------------------------------------------------------------------


@nb.njit(cache=True, fastmath={"reassoc", "contract", "arcp"})
def mlp_train(x, y, hidden, lr0, momentum, epochs, seed_state):
    """Train 1-hidden-layer sigmoid MLP with 2 softmax outputs.

    Weight init order (documented, uniform(-0.5, 0.5) each): W1 row-major
    over (hidden, input), b1, W2 row-major, b2. Each epoch reshuffles the
    instance order from the same stream. A non-finite epoch loss restores
    the epoch-start state, halves the learning rate and reruns the same
    order (at most 3 halvings). W1 is held transposed (input, hidden)
    internally so the hot loops run over the contiguous hidden axis.
    Returns (W1 (hidden, input), b1, W2, b2, status), status 1 = diverged.
    """
    n, d = x.shape
    s = seed_state
    w1t = np.empty((d, hidden))  # transposed W1
    b1 = np.empty(hidden)
    w2 = np.empty((2, hidden))
    b2 = np.empty(2)
    for i in range(hidden):
        for j in range(d):
            u, s = next_uniform(s)
            w1t[j, i] = u - 0.5
    for i in range(hidden):
        u, s = next_uniform(s)
        b1[i] = u - 0.5
    for i in range(2):
        for j in range(hidden):
            u, s = next_uniform(s)
            w2[i, j] = u - 0.5
    for i in range(2):
        u, s = next_uniform(s)
        b2[i] = u - 0.5
    vw1t = np.zeros((d, hidden))
    vb1 = np.zeros(hidden)
    vw2 = np.zeros((2, hidden))
    vb2 = np.zeros(2)
    a1 = np.empty(hidden)
    d1 = np.empty(hidden)
    idx = np.arange(n)
    lr = lr0
    halvings = 0
    ep = 0
    while ep < epochs:
        s = shuffle_indices(idx, s)
        sw1 = w1t.copy()
        sb1 = b1.copy()
        sw2 = w2.copy()
        sb2 = b2.copy()
        sv1 = vw1t.copy()
        svb1 = vb1.copy()
        sv2 = vw2.copy()
        svb2 = vb2.copy()
        retry = True
        while retry:
            retry = False
            loss = 0.0
            for t in range(n):
                k = idx[t]
                # forward
                for h in range(hidden):
                    a1[h] = b1[h]
                for a in range(d):
                    xa = x[k, a]
                    for h in range(hidden):
                        a1[h] += w1t[a, h] * xa
                for h in range(hidden):
                    a1[h] = 1.0 / (1.0 + np.exp(-a1[h]))
                z0 = b2[0]
                z1 = b2[1]
                for h in range(hidden):
                    z0 += w2[0, h] * a1[h]
                    z1 += w2[1, h] * a1[h]
                m = z0 if z0 > z1 else z1
                e0 = np.exp(z0 - m)
                e1 = np.exp(z1 - m)
                tot = e0 + e1
                p0 = e0 / tot
                p1 = e1 / tot
                py = p0 if y[k] == 0 else p1
                if py < 1e-300:
                    py = 1e-300
                loss -= np.log(py)
                # backward
                g0 = p0 - (1.0 if y[k] == 0 else 0.0)
                g1 = p1 - (1.0 if y[k] == 1 else 0.0)
                for h in range(hidden):
                    d1[h] = (w2[0, h] * g0 + w2[1, h] * g1) * a1[h] * (1.0 - a1[h])
                # momentum updates
                for h in range(hidden):
                    dv = -lr * g0 * a1[h] + momentum * vw2[0, h]
                    vw2[0, h] = dv
                    w2[0, h] += dv
                    dv = -lr * g1 * a1[h] + momentum * vw2[1, h]
                    vw2[1, h] = dv
                    w2[1, h] += dv
                dv = -lr * g0 + momentum * vb2[0]
                vb2[0] = dv
                b2[0] += dv
                dv = -lr * g1 + momentum * vb2[1]
                vb2[1] = dv
                b2[1] += dv
                for a in range(d):
                    nlx = -lr * x[k, a]
                    for h in range(hidden):
                        dv = nlx * d1[h] + momentum * vw1t[a, h]
                        vw1t[a, h] = dv
                        w1t[a, h] += dv
                for h in range(hidden):
                    dv = -lr * d1[h] + momentum * vb1[h]
                    vb1[h] = dv
                    b1[h] += dv
            if not np.isfinite(loss):
                if halvings >= 3:
                    return w1t.T.copy(), b1, w2, b2, 1
                halvings += 1
                lr *= 0.5
                w1t[:] = sw1
                b1[:] = sb1
                w2[:] = sw2
                b2[:] = sb2
                vw1t[:] = sv1
                vb1[:] = svb1
                vw2[:] = sv2
                vb2[:] = svb2
                retry = True
        ep += 1
    return w1t.T.copy(), b1, w2, b2, 0


# ---------------------------------------------------------------------------
# SMO for the soft-margin SVM dual
# ---------------------------------------------------------------------------


@nb.njit(cache=True, inline="always")
def _kernel_row(x, sq, gamma, gram, use_gram, i, out):
    n = out.shape[0]
    if use_gram:
        for k in range(n):
            out[k] = gram[i, k]
    else:
        d = x.shape[1]
        for k in range(n):
            acc = 0.0
            for a in range(d):
                acc += x[i, a] * x[k, a]
            out[k] = np.exp(-gamma * (sq[i] + sq[k] - 2.0 * acc))


@nb.njit(cache=True)
def smo_kernel(x, y, c, gamma, tol, max_passes, gram):
    """SMO with deterministic maximal-violating-pair working-set selection.

    y is +-1 float64. If gram has shape (n, n) it is used directly;
    otherwise RBF rows exp(-gamma * ||xi - xk||^2) are computed on demand.

    Maintains the bias-free margins F_i = sum_j alpha_j y_j K_ij. Each
    iteration pairs i = argmax over I_up of (y_i - F_i) with j = argmin
    over I_low, stopping when the gap drops to tol (which bounds every
    KKT violation by tol). The bias is the midpoint of the final bracket.
    One "pass" is n pair updates; exhausting max_passes returns
    best-so-far with converged=False. Returns (alpha, bias, converged,
    passes_used).
    """
    n = y.shape[0]
    use_gram = gram.shape[0] == n and gram.shape[1] == n
    sq = np.zeros(n)
    if not use_gram:
        d = x.shape[1]
        for i in range(n):
            acc = 0.0
            for a in range(d):
                acc += x[i, a] * x[i, a]
            sq[i] = acc
    alpha = np.zeros(n)
    f = np.zeros(n)  # sum_j alpha_j y_j K_ij, zero at alpha = 0
    rowi = np.empty(n)
    rowj = np.empty(n)
    max_iter = max_passes * n
    converged = False
    it = 0
    m_up = 0.0
    m_low = 0.0
    while it < max_iter:
        # working pair: largest b-estimate in I_up vs smallest in I_low
        i = -1
        j = -1
        m_up = -np.inf
        m_low = np.inf
        for t in range(n):
            bt = y[t] - f[t]
            if (y[t] > 0 and alpha[t] < c - 1e-12) or (y[t] < 0 and alpha[t] > 1e-12):
                if bt > m_up:
                    m_up = bt
                    i = t
            if (y[t] > 0 and alpha[t] > 1e-12) or (y[t] < 0 and alpha[t] < c - 1e-12):
                if bt < m_low:
                    m_low = bt
                    j = t
        if i < 0 or j < 0 or m_up - m_low <= tol:
            converged = i >= 0 and j >= 0
            break
        _kernel_row(x, sq, gamma, gram, use_gram, i, rowi)
        _kernel_row(x, sq, gamma, gram, use_gram, j, rowj)
        if y[i] != y[j]:
            lo = max(0.0, alpha[j] - alpha[i])
            hi = min(c, c + alpha[j] - alpha[i])
        else:
            lo = max(0.0, alpha[i] + alpha[j] - c)
            hi = min(c, alpha[i] + alpha[j])
        eta = 2.0 * rowi[j] - rowi[i] - rowj[j]
        if lo >= hi or eta >= 0.0:
            # degenerate pair (duplicate rows); no monotone step exists
            break
        aj_new = alpha[j] + y[j] * (m_up - m_low) / eta
        if aj_new < lo:
            aj_new = lo
        elif aj_new > hi:
            aj_new = hi
        d_aj = aj_new - alpha[j]
        if d_aj == 0.0:
            break
        d_ai = -y[i] * y[j] * d_aj
        alpha[i] += d_ai
        alpha[j] = aj_new
        ci = y[i] * d_ai
        cj = y[j] * d_aj
        for k in range(n):
            f[k] += ci * rowi[k] + cj * rowj[k]
        it += 1
    # fresh bracket for the bias (the loop may have exited mid-step)
    m_up = -np.inf
    m_low = np.inf
    for t in range(n):
        bt = y[t] - f[t]
        if (y[t] > 0 and alpha[t] < c - 1e-12) or (y[t] < 0 and alpha[t] > 1e-12):
            if bt > m_up:
                m_up = bt
        if (y[t] > 0 and alpha[t] > 1e-12) or (y[t] < 0 and alpha[t] < c - 1e-12):
            if bt < m_low:
                m_low = bt
    bias = 0.5 * (m_up + m_low)
    if not np.isfinite(bias):
        bias = 0.0
    passes_used = it // n + (1 if it % n else 0)
    return alpha, bias, converged, passes_used


# ---------------------------------------------------------------------------
# entropy trees
# ---------------------------------------------------------------------------


@nb.njit(cache=True, inline="always")
def _entropy(c0, c1):
    n = c0 + c1
    if n <= 0 or c0 == 0 or c1 == 0:
        return 0.0
    p0 = c0 / n
    p1 = c1 / n
    return -(p0 * np.log(p0) + p1 * np.log(p1))


@nb.njit(cache=True)
def best_entropy_split(x, y, idx, feats, min_leaf):
    """Best (feature, midpoint threshold, gain) over idx rows.

    feats must be ascending; scan order (ascending feature, ascending
    threshold) plus strict improvement implements the tie rule: lowest
    feature index, then lowest threshold. Returns gain -1.0 when no valid
    candidate exists.
    """
    m = idx.shape[0]
    c0 = 0
    c1 = 0
    for t in range(m):
        if y[idx[t]] == 0:
            c0 += 1
        else:
            c1 += 1
    h_parent = _entropy(c0, c1)
    best_gain = -1.0
    best_feat = -1
    best_thr = 0.0
    vals = np.empty(m)
    labs = np.empty(m, np.int8)
    for fi in range(feats.shape[0]):
        f = feats[fi]
        for t in range(m):
            vals[t] = x[idx[t], f]
        order = np.argsort(vals)
        l0 = 0
        l1 = 0
        for pos in range(m - 1):
            o = order[pos]
            if y[idx[o]] == 0:
                l0 += 1
            else:
                l1 += 1
            v = vals[o]
            vnext = vals[order[pos + 1]]
            if vnext <= v:
                continue
            nl = pos + 1
            nr = m - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            hl = _entropy(l0, l1)
            hr = _entropy(c0 - l0, c1 - l1)
            gain = h_parent - (nl * hl + nr * hr) / m
            if gain > best_gain:
                best_gain = gain
                best_feat = f
                mid = 0.5 * (v + vnext)
                best_thr = mid if v <= mid < vnext else v
    return best_feat, best_thr, best_gain


@nb.njit(cache=True)
def build_tree(x, y, min_leaf, min_node_to_split, min_gain, feat_sub, seed_state):
    """Grow a binary entropy tree iteratively (preorder, left first).

    feat_sub == 0 uses all features; otherwise feat_sub distinct features
    are drawn per node from the splitmix state (sorted ascending so the
    split tie rule stays by original feature index). A node becomes a leaf
    when pure, smaller than min_node_to_split, or when the best gain is
    <= 0 or < min_gain.

    Returns (feat, thr, left, right, c0, c1, n_nodes, seed_state). Leaves
    have feat == -1.
    """
    n, d = x.shape
    cap = 2 * n + 1
    feat = np.full(cap, -1, np.int64)
    thr = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    cnt0 = np.zeros(cap, np.int64)
    cnt1 = np.zeros(cap, np.int64)
    idx = np.arange(n)
    tmp = np.empty(n, np.int64)
    all_feats = np.arange(d)
    pick = np.empty(d, np.int64)
    # stack entries: (node_id, start, end)
    stack_node = np.empty(cap, np.int64)
    stack_lo = np.empty(cap, np.int64)
    stack_hi = np.empty(cap, np.int64)
    top = 0
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n
    top = 1
    n_nodes = 1
    s = seed_state
    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        m = hi - lo
        c0 = 0
        c1 = 0
        for t in range(lo, hi):
            if y[idx[t]] == 0:
                c0 += 1
            else:
                c1 += 1
        cnt0[node] = c0
        cnt1[node] = c1
        if c0 == 0 or c1 == 0 or m < min_node_to_split:
            continue
        if feat_sub > 0 and feat_sub < d:
            # partial Fisher-Yates over a fresh copy, then ascending sort
            for a in range(d):
                pick[a] = all_feats[a]
            for a in range(feat_sub):
                u, s = next_u64(s)
                j = a + int(u % np.uint64(d - a))
                t2 = pick[a]
                pick[a] = pick[j]
                pick[j] = t2
            sel = np.sort(pick[:feat_sub].copy())
        else:
            sel = all_feats
        bfeat, bthr, bgain = best_entropy_split(x, y, idx[lo:hi], sel, min_leaf)
        if bfeat < 0 or bgain <= 0.0 or bgain < min_gain:
            continue
        # stable partition by x[., bfeat] <= bthr
        nl = 0
        for t in range(lo, hi):
            if x[idx[t], bfeat] <= bthr:
                tmp[nl] = idx[t]
                nl += 1
        nr = 0
        for t in range(lo, hi):
            if x[idx[t], bfeat] > bthr:
                tmp[nl + nr] = idx[t]
                nr += 1
        for t in range(m):
            idx[lo + t] = tmp[t]
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feat[node] = bfeat
        thr[node] = bthr
        left[node] = lid
        right[node] = rid
        # push right first so the left child is processed next (preorder)
        stack_node[top] = rid
        stack_lo[top] = lo + nl
        stack_hi[top] = hi
        top += 1
        stack_node[top] = lid
        stack_lo[top] = lo
        stack_hi[top] = lo + nl
        top += 1
    return (
        feat[:n_nodes].copy(),
        thr[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        cnt0[:n_nodes].copy(),
        cnt1[:n_nodes].copy(),
        s,
    )


@nb.njit(cache=True, parallel=True)
def tree_apply(feat, thr, left, right, queries):
    """Leaf node id for each query row."""
    nq = queries.shape[0]
    out = np.empty(nq, np.int64)
    for qi in nb.prange(nq):
        node = 0
        while feat[node] >= 0:
            if queries[qi, feat[node]] <= thr[node]:
                node = left[node]
            else:
                node = right[node]
        out[qi] = node
    return out
