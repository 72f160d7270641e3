"""Branch-and-bound search kernels for the finite-control-set optimizer.

Depth-first over the input tree with the accumulated stage cost as lower
bound (valid because every term is nonnegative), ascending input order,
strict-improvement incumbent updates and an explicit lexicographic
tie-break on exactly equal leaf values. A warm-start sequence is
re-evaluated inside the kernel (identical arithmetic) before the search
so its value can seed the incumbent without float-path mismatches.

Subtree searches for parallel solves replay a fixed input prefix from
the root state inside the kernel, keeping leaf values bit-identical to
the single-threaded search regardless of partitioning.

Compiled with numba when available; the same code runs (slowly) as plain
Python otherwise.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

TERM_NONE = 0
TERM_POLYTOPE = 1
TERM_ELLIPSOID = 2


@njit(cache=True, nogil=True)
def _quad(M, v):
    s = 0.0
    for i in range(v.shape[0]):
        t = 0.0
        for j in range(v.shape[0]):
            t += M[i, j] * v[j]
        s += v[i] * t
    return s


@njit(cache=True, nogil=True)
def _apply_mode(A_s, b_s, u, x):
    n = x.shape[0]
    xn = np.empty(n)
    for r in range(n):
        s = b_s[u, r]
        for c in range(n):
            s += A_s[u, r, c] * x[c]
        xn[r] = s
    return xn


@njit(cache=True, nogil=True)
def _in_halfspaces(H, h, x, tol):
    for r in range(H.shape[0]):
        s = 0.0
        for c in range(x.shape[0]):
            s += H[r, c] * x[c]
        if s > h[r] + tol:
            return False
    return True


@njit(cache=True, nogil=True)
def _terminal_ok(term_mode, Hterm, hterm, Zterm, cterm, x, tol):
    if term_mode == TERM_POLYTOPE:
        return _in_halfspaces(Hterm, hterm, x, tol)
    if term_mode == TERM_ELLIPSOID:
        d = x - cterm
        return _quad(Zterm, d) <= 1.0 + tol
    return True


@njit(cache=True, nogil=True)
def _lex_update(best_seq, cand, N):
    for t in range(N):
        if cand[t] < best_seq[t]:
            for r in range(N):
                best_seq[r] = cand[r]
            return
        elif cand[t] > best_seq[t]:
            return


@njit(cache=True, nogil=True)
def dfs_tracking(x0, A_s, b_s, Q, r_table, P_term, xbars,
                 HX, hX, check_state, term_mode, Hterm, hterm, Zterm, cterm,
                 N, prefix, warm_tail, tol):
    """Exact minimizer of the cycle-tracking cost over the input tree.

    Returns (value, found, sequence, nodes_expanded, nodes_pruned); the
    sequence includes the replayed prefix.
    """
    n = x0.shape[0]
    Ns = A_s.shape[0]
    d0 = prefix.shape[0]
    expanded = 0
    pruned = 0
    best_val = np.inf
    has_best = False
    best_seq = np.full(N, -1, np.int64)

    # replay the prefix with in-search arithmetic
    x_start = x0.copy()
    cost0 = 0.0
    feasible_prefix = True
    for i in range(d0):
        u = prefix[i]
        dx = x_start - xbars[i]
        base = cost0 + _quad(Q, dx)
        cost0 = base + r_table[i, u]
        x_start = _apply_mode(A_s, b_s, u, x_start)
        if i + 1 <= N - 1:
            if check_state and not _in_halfspaces(HX, hX, x_start, tol):
                feasible_prefix = False
                break
        else:
            if not _terminal_ok(term_mode, Hterm, hterm, Zterm, cterm, x_start, tol):
                feasible_prefix = False
                break
    if not feasible_prefix:
        return np.inf, False, best_seq, expanded, pruned
    if d0 == N:
        dN = x_start - xbars[N]
        total = cost0 + _quad(P_term, dN)
        best_seq[:] = prefix
        return total, True, best_seq, expanded, pruned

    # warm-start seeding (same arithmetic as the search)
    if warm_tail.shape[0] == N - d0:
        x = x_start.copy()
        cost = cost0
        ok = True
        for i in range(d0, N):
            u = warm_tail[i - d0]
            dx = x - xbars[i]
            base = cost + _quad(Q, dx)
            cost = base + r_table[i, u]
            x = _apply_mode(A_s, b_s, u, x)
            if i + 1 <= N - 1:
                if check_state and not _in_halfspaces(HX, hX, x, tol):
                    ok = False
                    break
            else:
                if not _terminal_ok(term_mode, Hterm, hterm, Zterm, cterm, x, tol):
                    ok = False
                    break
        if ok:
            dN = x - xbars[N]
            best_val = cost + _quad(P_term, dN)
            has_best = True
            for t in range(d0):
                best_seq[t] = prefix[t]
            for t in range(d0, N):
                best_seq[t] = warm_tail[t - d0]

    cap = 1024
    st_depth = np.empty(cap, np.int64)
    st_state = np.empty((cap, n), np.float64)
    st_cost = np.empty(cap, np.float64)
    st_path = np.empty((cap, N), np.int64)
    st_depth[0] = d0
    st_state[0] = x_start
    st_cost[0] = cost0
    st_path[0, :] = -1
    for t in range(d0):
        st_path[0, t] = prefix[t]
    top = 1
    while top > 0:
        top -= 1
        d = st_depth[top]
        cost = st_cost[top]
        x = st_state[top].copy()
        path = st_path[top].copy()
        dx = x - xbars[d]
        base = cost + _quad(Q, dx)
        if has_best and base > best_val:
            pruned += 1
            continue
        for u in range(Ns - 1, -1, -1):
            c_u = base + r_table[d, u]
            if has_best and c_u > best_val:
                pruned += 1
                continue
            xn = _apply_mode(A_s, b_s, u, x)
            expanded += 1
            if d + 1 <= N - 1:
                if check_state and not _in_halfspaces(HX, hX, xn, tol):
                    pruned += 1
                    continue
                if top >= cap:
                    ncap = 2 * cap
                    tmp_d = np.empty(ncap, np.int64); tmp_d[:cap] = st_depth; st_depth = tmp_d
                    tmp_s = np.empty((ncap, n), np.float64); tmp_s[:cap] = st_state; st_state = tmp_s
                    tmp_c = np.empty(ncap, np.float64); tmp_c[:cap] = st_cost; st_cost = tmp_c
                    tmp_p = np.empty((ncap, N), np.int64); tmp_p[:cap] = st_path; st_path = tmp_p
                    cap = ncap
                st_depth[top] = d + 1
                st_state[top] = xn
                st_cost[top] = c_u
                st_path[top] = path
                st_path[top, d] = u
                top += 1
            else:
                if not _terminal_ok(term_mode, Hterm, hterm, Zterm, cterm, xn, tol):
                    pruned += 1
                    continue
                dN = xn - xbars[N]
                total = c_u + _quad(P_term, dN)
                if not has_best or total < best_val:
                    best_val = total
                    has_best = True
                    best_seq[:] = path
                    best_seq[d] = u
                elif total == best_val:
                    cand = path.copy()
                    cand[d] = u
                    _lex_update(best_seq, cand, N)
    return best_val, has_best, best_seq, expanded, pruned


@njit(cache=True, nogil=True)
def _output_sqerr(C_s, d_s, ybar, u, x):
    ny = ybar.shape[0]
    e2 = 0.0
    for r in range(ny):
        s = d_s[u, r] - ybar[r]
        for c in range(x.shape[0]):
            s += C_s[u, r, c] * x[c]
        e2 += s * s
    return e2


@njit(cache=True, nogil=True)
def dfs_output_tracking(x0, A_s, b_s, C_s, d_s, ybar, w_out, rate_table, w_term,
                        u_prev0, HX, hX, check_state, N, prefix, warm_tail, tol):
    """Exact minimizer of the output-reference cost (rate-penalized).

    Stage i costs w_out*||y_i - ybar||^2 + rate_table[u_i, u_{i-1}] with
    y_i read through mode u_i at the pre-decision state; the terminal term
    is w_term*||y_N - ybar||^2 through the last applied mode. No terminal
    set.
    """
    n = x0.shape[0]
    Ns = A_s.shape[0]
    d0 = prefix.shape[0]
    expanded = 0
    pruned = 0
    best_val = np.inf
    has_best = False
    best_seq = np.full(N, -1, np.int64)

    x_start = x0.copy()
    cost0 = 0.0
    up_start = u_prev0
    feasible_prefix = True
    for i in range(d0):
        u = prefix[i]
        base = cost0 + w_out * _output_sqerr(C_s, d_s, ybar, u, x_start)
        cost0 = base + rate_table[u, up_start]
        up_start = u
        x_start = _apply_mode(A_s, b_s, u, x_start)
        if i + 1 <= N - 1 and check_state and not _in_halfspaces(HX, hX, x_start, tol):
            feasible_prefix = False
            break
    if not feasible_prefix:
        return np.inf, False, best_seq, expanded, pruned
    if d0 == N:
        total = cost0 + w_term * _output_sqerr(C_s, d_s, ybar, prefix[N - 1], x_start)
        best_seq[:] = prefix
        return total, True, best_seq, expanded, pruned

    if warm_tail.shape[0] == N - d0:
        x = x_start.copy()
        cost = cost0
        up = up_start
        ok = True
        for i in range(d0, N):
            u = warm_tail[i - d0]
            base = cost + w_out * _output_sqerr(C_s, d_s, ybar, u, x)
            cost = base + rate_table[u, up]
            up = u
            x = _apply_mode(A_s, b_s, u, x)
            if i + 1 <= N - 1 and check_state and not _in_halfspaces(HX, hX, x, tol):
                ok = False
                break
        if ok:
            best_val = cost + w_term * _output_sqerr(C_s, d_s, ybar, up, x)
            has_best = True
            for t in range(d0):
                best_seq[t] = prefix[t]
            for t in range(d0, N):
                best_seq[t] = warm_tail[t - d0]

    cap = 1024
    st_depth = np.empty(cap, np.int64)
    st_state = np.empty((cap, n), np.float64)
    st_cost = np.empty(cap, np.float64)
    st_path = np.empty((cap, N), np.int64)
    st_uprev = np.empty(cap, np.int64)
    st_depth[0] = d0
    st_state[0] = x_start
    st_cost[0] = cost0
    st_path[0, :] = -1
    for t in range(d0):
        st_path[0, t] = prefix[t]
    st_uprev[0] = up_start
    top = 1
    while top > 0:
        top -= 1
        d = st_depth[top]
        cost = st_cost[top]
        x = st_state[top].copy()
        path = st_path[top].copy()
        up = st_uprev[top]
        if has_best and cost > best_val:
            pruned += 1
            continue
        for u in range(Ns - 1, -1, -1):
            base = cost + w_out * _output_sqerr(C_s, d_s, ybar, u, x)
            c_u = base + rate_table[u, up]
            if has_best and c_u > best_val:
                pruned += 1
                continue
            xn = _apply_mode(A_s, b_s, u, x)
            expanded += 1
            if d + 1 <= N - 1:
                if check_state and not _in_halfspaces(HX, hX, xn, tol):
                    pruned += 1
                    continue
                if top >= cap:
                    ncap = 2 * cap
                    tmp_d = np.empty(ncap, np.int64); tmp_d[:cap] = st_depth; st_depth = tmp_d
                    tmp_s = np.empty((ncap, n), np.float64); tmp_s[:cap] = st_state; st_state = tmp_s
                    tmp_c = np.empty(ncap, np.float64); tmp_c[:cap] = st_cost; st_cost = tmp_c
                    tmp_p = np.empty((ncap, N), np.int64); tmp_p[:cap] = st_path; st_path = tmp_p
                    tmp_u = np.empty(ncap, np.int64); tmp_u[:cap] = st_uprev; st_uprev = tmp_u
                    cap = ncap
                st_depth[top] = d + 1
                st_state[top] = xn
                st_cost[top] = c_u
                st_path[top] = path
                st_path[top, d] = u
                st_uprev[top] = u
                top += 1
            else:
                total = c_u + w_term * _output_sqerr(C_s, d_s, ybar, u, xn)
                if not has_best or total < best_val:
                    best_val = total
                    has_best = True
                    best_seq[:] = path
                    best_seq[d] = u
                elif total == best_val:
                    cand = path.copy()
                    cand[d] = u
                    _lex_update(best_seq, cand, N)
    return best_val, has_best, best_seq, expanded, pruned
