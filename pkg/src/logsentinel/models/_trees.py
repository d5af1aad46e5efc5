"""Compiled CART kernels shared by the tree, forest and boosting families.

Trees are stored as flat arrays: ``feature`` (-1 marks a leaf),
``threshold`` (go left when ``x <= threshold``), ``left``, ``right`` and
``value``.  Randomness comes from a splitmix64 stream seeded per tree, so a
tree depends only on its data and its seed.
"""

import numpy as np
from numba import njit

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


@njit(cache=True, nogil=True)
def _splitmix(state):
    state = (state + np.uint64(0x9E3779B97F4A7C15)) & _MASK
    z = state
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=True, nogil=True)
def _randint(state, m):
    state, z = _splitmix(state)
    u = np.float64(z >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    r = np.int64(u * m)
    if r >= m:
        r = m - 1
    return state, r


@njit(cache=True, nogil=True)
def bootstrap_indices(n, seed):
    state = np.uint64(seed)
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        state, r = _randint(state, n)
        out[i] = r
    return out


@njit(cache=True, nogil=True)
def _midpoint(a, b):
    t = (a + b) / 2.0
    if t >= b:
        t = a
    return t


@njit(cache=True, nogil=True)
def _best_class_split(X, y, idx, features):
    """Best Gini split over ``features`` (ascending order) for node ``idx``.

    Maximizes sum over children of (n_c1^2 + n_c0^2) / n_c, which is the same
    as minimizing the weighted child impurity; only strict improvements
    replace the incumbent, so ties keep the lower feature and threshold.
    """
    m = idx.shape[0]
    best_feature = -1
    best_threshold = 0.0
    best_score = -1.0
    total1 = 0.0
    for i in range(m):
        total1 += y[idx[i]]
    total0 = m - total1
    vals = np.empty(m)
    labs = np.empty(m)
    for f in features:
        for i in range(m):
            vals[i] = X[idx[i], f]
        order = np.argsort(vals, kind="mergesort")
        for i in range(m):
            labs[i] = y[idx[order[i]]]
        left1 = 0.0
        for i in range(m - 1):
            left1 += labs[i]
            a = vals[order[i]]
            b = vals[order[i + 1]]
            if a == b:
                continue
            nl = i + 1.0
            nr = m - nl
            left0 = nl - left1
            right1 = total1 - left1
            right0 = total0 - left0
            score = (left1 * left1 + left0 * left0) / nl + (right1 * right1 + right0 * right0) / nr
            if score > best_score:
                best_score = score
                best_feature = f
                best_threshold = _midpoint(a, b)
    return best_feature, best_threshold


@njit(cache=True, nogil=True)
def build_class_tree(X, y, sample, max_features, max_depth, min_samples_split, seed):
    """Grow a CART classification tree on the rows listed in ``sample``.

    ``max_features`` < d draws that many distinct features per node; when
    none of them splits the node the remaining features are tried in order.
    ``max_depth`` < 0 means unlimited.  Leaf ``value`` is the class-1 share.
    """
    n = sample.shape[0]
    d = X.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)

    state = np.uint64(seed)
    stack_nodes = np.empty(cap, dtype=np.int64)
    stack_start = np.empty(cap, dtype=np.int64)
    stack_end = np.empty(cap, dtype=np.int64)
    stack_depth = np.empty(cap, dtype=np.int64)
    buf = sample.copy()
    count = 1
    top = 0
    stack_nodes[0] = 0
    stack_start[0] = 0
    stack_end[0] = n
    stack_depth[0] = 0
    top = 1
    perm = np.arange(d)
    while top > 0:
        top -= 1
        node = stack_nodes[top]
        s = stack_start[top]
        e = stack_end[top]
        depth = stack_depth[top]
        idx = buf[s:e]
        m = e - s
        ones = 0.0
        for i in range(m):
            ones += y[idx[i]]
        value[node] = ones / m
        if ones == 0.0 or ones == m or m < min_samples_split or (max_depth >= 0 and depth >= max_depth):
            continue
        if max_features < d:
            for i in range(d):
                perm[i] = i
            for i in range(max_features):
                state, r = _randint(state, d - i)
                j = i + r
                tmp = perm[i]
                perm[i] = perm[j]
                perm[j] = tmp
            chosen = np.sort(perm[:max_features].copy())
            f, t = _best_class_split(X, y, idx, chosen)
            if f < 0:
                rest = np.sort(perm[max_features:].copy())
                f, t = _best_class_split(X, y, idx, rest)
        else:
            f, t = _best_class_split(X, y, idx, np.arange(d))
        if f < 0:
            continue
        # partition idx in place: x <= t to the front, stable
        lo = np.empty(m, dtype=np.int64)
        hi = np.empty(m, dtype=np.int64)
        nl = 0
        nh = 0
        for i in range(m):
            r = idx[i]
            if X[r, f] <= t:
                lo[nl] = r
                nl += 1
            else:
                hi[nh] = r
                nh += 1
        for i in range(nl):
            buf[s + i] = lo[i]
        for i in range(nh):
            buf[s + nl + i] = hi[i]
        feature[node] = f
        threshold[node] = t
        left[node] = count
        right[node] = count + 1
        stack_nodes[top] = count + 1
        stack_start[top] = s + nl
        stack_end[top] = e
        stack_depth[top] = depth + 1
        top += 1
        stack_nodes[top] = count
        stack_start[top] = s
        stack_end[top] = s + nl
        stack_depth[top] = depth + 1
        top += 1
        count += 2
    return feature[:count], threshold[:count], left[:count], right[:count], value[:count]


@njit(cache=True, nogil=True)
def _best_regression_split(X, g, idx):
    m = idx.shape[0]
    d = X.shape[1]
    best_feature = -1
    best_threshold = 0.0
    total = 0.0
    for i in range(m):
        total += g[idx[i]]
    best_score = total * total / m
    vals = np.empty(m)
    for f in range(d):
        for i in range(m):
            vals[i] = X[idx[i], f]
        order = np.argsort(vals, kind="mergesort")
        acc = 0.0
        for i in range(m - 1):
            acc += g[idx[order[i]]]
            a = vals[order[i]]
            b = vals[order[i + 1]]
            if a == b:
                continue
            nl = i + 1.0
            rest = total - acc
            score = acc * acc / nl + rest * rest / (m - nl)
            if score > best_score + 1e-12 * abs(best_score) + 1e-300:
                best_score = score
                best_feature = f
                best_threshold = _midpoint(a, b)
    return best_feature, best_threshold


@njit(cache=True, nogil=True)
def build_regression_tree(X, g, h, max_depth, min_samples_split):
    """Least-squares tree on gradients ``g``; leaves hold the Newton step
    sum(g) / sum(h)."""
    n = X.shape[0]
    cap = 2 ** (max_depth + 1) + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    buf = np.arange(n)
    stack_nodes = np.empty(cap, dtype=np.int64)
    stack_start = np.empty(cap, dtype=np.int64)
    stack_end = np.empty(cap, dtype=np.int64)
    stack_depth = np.empty(cap, dtype=np.int64)
    stack_nodes[0] = 0
    stack_start[0] = 0
    stack_end[0] = n
    stack_depth[0] = 0
    top = 1
    count = 1
    while top > 0:
        top -= 1
        node = stack_nodes[top]
        s = stack_start[top]
        e = stack_end[top]
        depth = stack_depth[top]
        idx = buf[s:e]
        m = e - s
        sg = 0.0
        sh = 0.0
        for i in range(m):
            sg += g[idx[i]]
            sh += h[idx[i]]
        value[node] = sg / sh if sh > 1e-12 else 0.0
        if depth >= max_depth or m < min_samples_split:
            continue
        f, t = _best_regression_split(X, g, idx)
        if f < 0:
            continue
        lo = np.empty(m, dtype=np.int64)
        hi = np.empty(m, dtype=np.int64)
        nl = 0
        nh = 0
        for i in range(m):
            r = idx[i]
            if X[r, f] <= t:
                lo[nl] = r
                nl += 1
            else:
                hi[nh] = r
                nh += 1
        for i in range(nl):
            buf[s + i] = lo[i]
        for i in range(nh):
            buf[s + nl + i] = hi[i]
        feature[node] = f
        threshold[node] = t
        left[node] = count
        right[node] = count + 1
        stack_nodes[top] = count + 1
        stack_start[top] = s + nl
        stack_end[top] = e
        stack_depth[top] = depth + 1
        top += 1
        stack_nodes[top] = count
        stack_start[top] = s
        stack_end[top] = s + nl
        stack_depth[top] = depth + 1
        top += 1
        count += 2
    return feature[:count], threshold[:count], left[:count], right[:count], value[:count]


@njit(cache=True, nogil=True)
def apply_tree(X, feature, threshold, left, right, value):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@njit(cache=True, nogil=True)
def fit_forest(X, y, n_trees, max_features, max_depth, min_samples_split, seeds, bootstrap):
    """Grow ``n_trees`` trees; returns concatenated node arrays and offsets."""
    n = X.shape[0]
    offsets = np.zeros(n_trees + 1, dtype=np.int64)
    feats = []
    ths = []
    lefts = []
    rights = []
    vals = []
    for t in range(n_trees):
        if bootstrap:
            sample = bootstrap_indices(n, seeds[t])
        else:
            sample = np.arange(n)
        f, th, l, r, v = build_class_tree(X, y, sample, max_features, max_depth,
                                          min_samples_split, seeds[t] ^ np.uint64(0x5DEECE66D))
        feats.append(f)
        ths.append(th)
        lefts.append(l)
        rights.append(r)
        vals.append(v)
        offsets[t + 1] = offsets[t] + f.shape[0]
    total = offsets[n_trees]
    F = np.empty(total, dtype=np.int64)
    T = np.empty(total)
    L = np.empty(total, dtype=np.int64)
    R = np.empty(total, dtype=np.int64)
    V = np.empty(total)
    for t in range(n_trees):
        o = offsets[t]
        k = offsets[t + 1] - o
        F[o:o + k] = feats[t]
        T[o:o + k] = ths[t]
        L[o:o + k] = lefts[t]
        R[o:o + k] = rights[t]
        V[o:o + k] = vals[t]
    return F, T, L, R, V, offsets


@njit(cache=True, nogil=True)
def forest_votes(X, F, T, L, R, V, offsets):
    """Number of trees voting class 1 for each row (a leaf votes 1 when its
    class-1 share exceeds one half)."""
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    votes = np.zeros(n, dtype=np.int64)
    for t in range(n_trees):
        o = offsets[t]
        for i in range(n):
            node = 0
            while F[o + node] >= 0:
                if X[i, F[o + node]] <= T[o + node]:
                    node = L[o + node]
                else:
                    node = R[o + node]
            if V[o + node] > 0.5:
                votes[i] += 1
    return votes


@njit(cache=True, nogil=True)
def fit_boosting(X, y, n_rounds, learning_rate, max_depth, min_samples_split):
    """Gradient boosting on logistic loss with Newton leaf values.

    A round whose step would raise the training loss is shrunk by halving
    (up to 30 times, then skipped), so the training loss never increases.
    Returns the base score, per-round node arrays, offsets and the loss
    after each round.
    """
    n = X.shape[0]
    p1 = 0.0
    for i in range(n):
        p1 += y[i]
    p1 /= n
    base = np.log(p1 / (1.0 - p1))
    F = np.full(n, base)
    losses = np.empty(n_rounds + 1)
    losses[0] = _logloss(F, y)
    offsets = np.zeros(n_rounds + 1, dtype=np.int64)
    feats = []
    ths = []
    lefts = []
    rights = []
    vals = []
    g = np.empty(n)
    h = np.empty(n)
    for r in range(n_rounds):
        for i in range(n):
            p = 1.0 / (1.0 + np.exp(-F[i]))
            g[i] = y[i] - p
            h[i] = p * (1.0 - p)
        f, th, l, rt, v = build_regression_tree(X, g, h, max_depth, min_samples_split)
        step = apply_tree(X, f, th, l, rt, v)
        scale = learning_rate
        newF = F + scale * step
        new_loss = _logloss(newF, y)
        tries = 0
        while new_loss > losses[r] and tries < 30:
            scale *= 0.5
            newF = F + scale * step
            new_loss = _logloss(newF, y)
            tries += 1
        if new_loss > losses[r]:
            scale = 0.0
            newF = F.copy()
            new_loss = losses[r]
        F = newF
        losses[r + 1] = new_loss
        v = v * scale
        feats.append(f)
        ths.append(th)
        lefts.append(l)
        rights.append(rt)
        vals.append(v)
        offsets[r + 1] = offsets[r] + f.shape[0]
    total = offsets[n_rounds]
    Fa = np.empty(total, dtype=np.int64)
    Ta = np.empty(total)
    La = np.empty(total, dtype=np.int64)
    Ra = np.empty(total, dtype=np.int64)
    Va = np.empty(total)
    for t in range(n_rounds):
        o = offsets[t]
        k = offsets[t + 1] - o
        Fa[o:o + k] = feats[t]
        Ta[o:o + k] = ths[t]
        La[o:o + k] = lefts[t]
        Ra[o:o + k] = rights[t]
        Va[o:o + k] = vals[t]
    return base, Fa, Ta, La, Ra, Va, offsets, losses


@njit(cache=True, nogil=True)
def _logloss(F, y):
    total = 0.0
    for i in range(F.shape[0]):
        # log(1 + exp(-s)) with s = +F for y=1, -F for y=0
        s = F[i] if y[i] == 1 else -F[i]
        if s > 0:
            total += np.log1p(np.exp(-s))
        else:
            total += -s + np.log1p(np.exp(s))
    return total / F.shape[0]


@njit(cache=True, nogil=True)
def boosting_margin(X, base, F, T, L, R, V, offsets):
    n = X.shape[0]
    out = np.full(n, base)
    n_rounds = offsets.shape[0] - 1
    for t in range(n_rounds):
        o = offsets[t]
        for i in range(n):
            node = 0
            while F[o + node] >= 0:
                if X[i, F[o + node]] <= T[o + node]:
                    node = L[o + node]
                else:
                    node = R[o + node]
            out[i] += V[o + node]
    return out
