"""Compiled inner loops for tree induction and SMO.

Trees are stored as flat arrays indexed by node id (``left == -1`` marks a
leaf).  Forests stack those arrays row-wise, one row per tree.
"""

import numba as nb
import numpy as np

GINI = 0
ENTROPY = 1

_MULT = np.uint64(6364136223846793005)
_INC = np.uint64(1442695040888963407)


@nb.njit(cache=True)
def _next(state):
    state[0] = state[0] * _MULT + _INC
    return state[0] >> np.uint64(33)


@nb.njit(cache=True)
def _randint(state, m):
    return np.int64(_next(state) % np.uint64(m))


@nb.njit(cache=True)
def _impurity(counts, total, criterion):
    if total == 0:
        return 0.0
    acc = 0.0
    if criterion == GINI:
        for k in range(counts.shape[0]):
            p = counts[k] / total
            acc += p * p
        return 1.0 - acc
    for k in range(counts.shape[0]):
        if counts[k] > 0:
            p = counts[k] / total
            acc -= p * np.log2(p)
    return acc


@nb.njit(cache=True)
def _term(c, criterion, xlogx):
    # per-class contribution to the running sum: c^2 (gini) or c*log2(c) (entropy)
    if criterion == GINI:
        return c * c
    return xlogx[np.int64(c)]


@nb.njit(cache=True)
def _weighted_impurity(total, acc, criterion, xlogx, inv):
    """``total * impurity`` of a child from its running sum ``acc``."""
    if criterion == GINI:
        return total - acc * inv[total]
    return xlogx[total] - acc


@nb.njit(cache=True)
def _midpoint(v0, v1):
    thr = 0.5 * (v0 + v1)
    # rounding can push the midpoint onto v1 for adjacent floats
    return v0 if thr >= v1 else thr


@nb.njit(cache=True)
def build_tree(X, y, orders, sample_idx, n_classes, max_depth, min_samples_split, min_samples_leaf,
               criterion, max_features, seed, feature, threshold, left, right, value):
    """Grow one CART tree into the preallocated node arrays; returns the node count.

    Candidate splits are scanned feature by feature in ascending index and
    threshold order, and only a strictly larger impurity decrease replaces
    the incumbent split, so ties resolve to the lowest feature index and then
    the lowest threshold.

    ``orders[f]`` is the argsort of column ``f`` over all rows of ``X``.  Each
    feature keeps its own value-sorted list of the sampled rows; a split
    stably partitions every list, so nodes never sort.
    """
    n_rows = X.shape[0]
    n_features = X.shape[1]
    N = sample_idx.shape[0]
    xlogx = np.zeros(N + 1)
    inv = np.zeros(N + 1)
    for c in range(1, N + 1):
        xlogx[c] = c * np.log2(c)
        inv[c] = 1.0 / c
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    _next(state)

    # rows[f, start:end] lists the node's rows (with bootstrap repeats) sorted by column f
    multiplicity = np.zeros(n_rows, dtype=np.int64)
    for p in range(N):
        multiplicity[sample_idx[p]] += 1
    rows = np.empty((n_features, N), dtype=np.int64)
    for f in range(n_features):
        k = 0
        for q in range(n_rows):
            r = orders[f, q]
            for _ in range(multiplicity[r]):
                rows[f, k] = r
                k += 1
    goes_left = np.zeros(n_rows, dtype=np.int64)
    buf = np.empty(N, dtype=np.int64)

    cap = feature.shape[0]
    stack_node = np.empty(cap, dtype=np.int64)
    stack_start = np.empty(cap, dtype=np.int64)
    stack_end = np.empty(cap, dtype=np.int64)
    stack_depth = np.empty(cap, dtype=np.int64)
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = N
    stack_depth[0] = 0
    sp = 1
    n_nodes = 1

    features = np.arange(n_features)
    counts = np.zeros(n_classes)
    left_counts = np.zeros(n_classes)
    right_counts = np.zeros(n_classes)

    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        start = stack_start[sp]
        end = stack_end[sp]
        depth = stack_depth[sp]
        n = end - start

        counts[:] = 0.0
        for p in range(start, end):
            counts[y[rows[0, p]]] += 1.0
        for k in range(n_classes):
            value[node, k] = counts[k]
        feature[node] = -1
        threshold[node] = 0.0
        left[node] = -1
        right[node] = -1

        n_nonzero = 0
        for k in range(n_classes):
            if counts[k] > 0:
                n_nonzero += 1
        if depth >= max_depth or n < min_samples_split or n_nonzero <= 1 or n < 2 * min_samples_leaf:
            continue

        # candidate features: partial Fisher-Yates draw, then ascending order
        if max_features < n_features:
            for f in range(n_features):
                features[f] = f
            for f in range(max_features):
                r = f + _randint(state, n_features - f)
                tmp = features[f]
                features[f] = features[r]
                features[r] = tmp
            candidates = np.sort(features[:max_features])
        else:
            candidates = np.arange(n_features)

        parent = _impurity(counts, n, criterion)
        best_gain = -np.inf
        best_feature = -1
        best_threshold = 0.0
        best_nl = 0
        right_acc0 = 0.0
        for k in range(n_classes):
            right_acc0 += _term(counts[k], criterion, xlogx)
        for f in candidates:
            left_counts[:] = 0.0
            right_counts[:] = counts
            left_acc = 0.0
            right_acc = right_acc0
            v0 = 0.0
            for q in range(start, end):
                r = rows[f, q]
                v1 = X[r, f]
                nl = q - start
                if nl > 0 and v1 > v0 and nl >= min_samples_leaf and n - nl >= min_samples_leaf:
                    gain = parent - (_weighted_impurity(nl, left_acc, criterion, xlogx, inv)
                                     + _weighted_impurity(n - nl, right_acc, criterion, xlogx, inv)) * inv[n]
                    if gain > best_gain + 1e-12:
                        best_gain = gain
                        best_feature = f
                        best_threshold = _midpoint(v0, v1)
                        best_nl = nl
                c = y[r]
                left_acc += _term(left_counts[c] + 1.0, criterion, xlogx) - _term(left_counts[c], criterion, xlogx)
                right_acc += _term(right_counts[c] - 1.0, criterion, xlogx) - _term(right_counts[c], criterion, xlogx)
                left_counts[c] += 1.0
                right_counts[c] -= 1.0
                v0 = v1

        if best_feature < 0:
            continue

        mid = start + best_nl
        # a child that cannot split only needs its class counts, read from rows[0]
        child_depth = depth + 1
        n_right = end - mid
        left_leaf = child_depth >= max_depth or best_nl < min_samples_split or best_nl < 2 * min_samples_leaf
        right_leaf = child_depth >= max_depth or n_right < min_samples_split or n_right < 2 * min_samples_leaf
        n_partition = 1 if left_leaf and right_leaf else n_features
        for q in range(start, mid):
            goes_left[rows[best_feature, q]] = 1
        for f in range(n_partition):
            if f == best_feature:
                continue
            nl = start
            nr = 0
            for q in range(start, end):
                # branch-free: the side is unpredictable, so write both and advance one
                r = rows[f, q]
                g = goes_left[r]
                rows[f, nl] = r
                buf[nr] = r
                nl += g
                nr += 1 - g
            for q in range(nr):
                rows[f, mid + q] = buf[q]
        for q in range(start, mid):
            goes_left[rows[best_feature, q]] = 0

        feature[node] = best_feature
        threshold[node] = best_threshold
        left[node] = n_nodes
        right[node] = n_nodes + 1
        # push right first so the left subtree gets the smaller node ids
        stack_node[sp] = n_nodes + 1
        stack_start[sp] = mid
        stack_end[sp] = end
        stack_depth[sp] = child_depth
        sp += 1
        stack_node[sp] = n_nodes
        stack_start[sp] = start
        stack_end[sp] = mid
        stack_depth[sp] = child_depth
        sp += 1
        n_nodes += 2
    return n_nodes


@nb.njit(cache=True)
def build_forest(X, y, orders, n_classes, n_trees, bootstrap, max_depth, min_samples_split, min_samples_leaf,
                 criterion, max_features, seeds, capacity):
    n = X.shape[0]
    feature = np.full((n_trees, capacity), -1, dtype=np.int64)
    threshold = np.zeros((n_trees, capacity))
    left = np.full((n_trees, capacity), -1, dtype=np.int64)
    right = np.full((n_trees, capacity), -1, dtype=np.int64)
    value = np.zeros((n_trees, capacity, n_classes))
    n_nodes = np.zeros(n_trees, dtype=np.int64)
    state = np.empty(1, dtype=np.uint64)
    for t in range(n_trees):
        state[0] = np.uint64(seeds[t])
        _next(state)
        sample = np.empty(n, dtype=np.int64)
        if bootstrap:
            for p in range(n):
                sample[p] = _randint(state, n)
        else:
            for p in range(n):
                sample[p] = p
        n_nodes[t] = build_tree(X, y, orders, sample, n_classes, max_depth, min_samples_split, min_samples_leaf,
                                criterion, max_features, _next(state), feature[t], threshold[t],
                                left[t], right[t], value[t])
    return feature, threshold, left, right, value, n_nodes


@nb.njit(cache=True)
def apply_trees(X, feature, threshold, left, right):
    """Leaf node id reached by every row of ``X`` in every tree."""
    n_trees = feature.shape[0]
    out = np.empty((X.shape[0], n_trees), dtype=np.int64)
    for t in range(n_trees):
        for i in range(X.shape[0]):
            node = 0
            while left[t, node] != -1:
                if X[i, feature[t, node]] <= threshold[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            out[i, t] = node
    return out


@nb.njit(cache=True)
def smo_solve(K, y, C, eps, max_iter, record_objective):
    """Solve the soft-margin dual ``min 1/2 a'Qa - e'a`` s.t. ``0 <= a <= C, y'a = 0``.

    Working pairs are chosen by maximal violation plus second-order gain.
    Returns ``(alpha, rho, iterations, converged, objective_trace)`` where
    the decision function is ``sum(alpha * y * K) - rho``.
    """
    tau = 1e-12
    n = y.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)
    QD = np.empty(n)
    for t in range(n):
        QD[t] = K[t, t]
    trace = np.empty(max_iter + 1 if record_objective else 1)
    if record_objective:
        trace[0] = 0.0
    it = 0
    converged = False
    while it < max_iter:
        g_max = -np.inf
        g_max2 = -np.inf
        i = -1
        for t in range(n):
            if y[t] > 0:
                if alpha[t] < C and -G[t] >= g_max:
                    g_max = -G[t]
                    i = t
            else:
                if alpha[t] > 0 and G[t] >= g_max:
                    g_max = G[t]
                    i = t
        j = -1
        obj_diff_min = np.inf
        if i >= 0:
            for t in range(n):
                q_it = y[i] * y[t] * K[i, t]
                if y[t] > 0:
                    if alpha[t] > 0:
                        grad_diff = g_max + G[t]
                        if G[t] >= g_max2:
                            g_max2 = G[t]
                        if grad_diff > 0:
                            quad = QD[i] + QD[t] - 2.0 * y[i] * q_it
                            if quad <= 0:
                                quad = tau
                            obj_diff = -(grad_diff * grad_diff) / quad
                            if obj_diff <= obj_diff_min:
                                j = t
                                obj_diff_min = obj_diff
                else:
                    if alpha[t] < C:
                        grad_diff = g_max - G[t]
                        if -G[t] >= g_max2:
                            g_max2 = -G[t]
                        if grad_diff > 0:
                            quad = QD[i] + QD[t] + 2.0 * y[i] * q_it
                            if quad <= 0:
                                quad = tau
                            obj_diff = -(grad_diff * grad_diff) / quad
                            if obj_diff <= obj_diff_min:
                                j = t
                                obj_diff_min = obj_diff
        if i < 0 or j < 0 or g_max + g_max2 < eps:
            converged = True
            break
        it += 1

        q_ij = y[i] * y[j] * K[i, j]
        old_ai = alpha[i]
        old_aj = alpha[j]
        if y[i] != y[j]:
            quad = QD[i] + QD[j] + 2.0 * q_ij
            if quad <= 0:
                quad = tau
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * q_ij
            if quad <= 0:
                quad = tau
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        d_ai = alpha[i] - old_ai
        d_aj = alpha[j] - old_aj
        for t in range(n):
            G[t] += y[t] * (y[i] * K[i, t] * d_ai + y[j] * K[j, t] * d_aj)
        if record_objective:
            acc = 0.0
            for t in range(n):
                acc += alpha[t] * (G[t] - 1.0)
            # dual objective in maximization form
            trace[it] = -0.5 * acc

    ub = np.inf
    lb = -np.inf
    n_free = 0
    sum_free = 0.0
    for t in range(n):
        yg = y[t] * G[t]
        if alpha[t] >= C:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            sum_free += yg
    if n_free > 0:
        rho = sum_free / n_free
    else:
        rho = 0.5 * (ub + lb)
    return alpha, rho, it, converged, trace[: it + 1] if record_objective else trace[:0]
