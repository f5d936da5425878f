"""Pure-Python reference implementations of the compiled kernels.

Semantics are identical to ``_kernels.pyx``; given the same pre-drawn random
streams both produce the same chains.
"""

import math


def metropolis_run(state, unary, pair, periodic, heavy, sq, sites, props, logu, thin, phase, out):
    """Advance a single-site Metropolis chain over ``len(sites)`` proposals.

    ``state`` is modified in place. Step ``t`` moves site ``sites[t]`` to the
    ``props[t]``-th value different from its current one and accepts when
    ``logu[t] < delta``. After global step ``phase + t + 1`` divisible by
    ``thin`` the state is copied into the next row of ``out``.

    Returns ``(recorded, accepted)``.
    """
    d = state.shape[0]
    st = [int(v) for v in state]
    un = [float(v) for v in unary]
    pr = [[float(v) for v in row] for row in pair]
    sqv = [float(v) for v in sq]
    total = 0.0
    if heavy:
        total = sum(sqv[v] for v in st)
    rec = 0
    acc = 0
    n_out = out.shape[0]
    for t in range(len(sites)):
        s = int(sites[t])
        x = st[s]
        y = int(props[t])
        if y >= x:
            y += 1
        if heavy:
            new_total = total - sqv[x] + sqv[y]
            delta = math.log1p(total) - math.log1p(new_total)
        else:
            delta = un[y] - un[x]
            if s > 0:
                left = st[s - 1]
                delta += pr[left][y] - pr[left][x]
            elif periodic:
                left = st[d - 1]
                delta += pr[left][y] - pr[left][x]
            if s < d - 1:
                right = st[s + 1]
                delta += pr[y][right] - pr[x][right]
            elif periodic:
                right = st[0]
                delta += pr[y][right] - pr[x][right]
        if logu[t] < delta:
            st[s] = y
            acc += 1
            if heavy:
                total = new_total
        if (phase + t + 1) % thin == 0 and rec < n_out:
            for j in range(d):
                out[rec, j] = st[j]
            rec += 1
    for j in range(d):
        state[j] = st[j]
    return rec, acc
