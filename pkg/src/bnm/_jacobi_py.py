"""Pure numpy one-sided Jacobi sweeps.

Same contract as the compiled kernel, but pairs are visited in round-robin
rounds of disjoint pairs so each round is a single vectorized rotation.
"""
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _round_robin(n):
    """Rounds of disjoint (p, q) pairs covering every pair once, p < q."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        ps, qs = [], []
        for i in range(size // 2):
            a, b = players[i], players[size - 1 - i]
            if a < 0 or b < 0:
                continue
            ps.append(min(a, b))
            qs.append(max(a, b))
        order = np.argsort(ps, kind="stable")
        rounds.append((np.asarray(ps, dtype=np.intp)[order],
                       np.asarray(qs, dtype=np.intp)[order]))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def jacobi_sweeps(G, Vt, rel_tol, floor, max_sweeps):
    n = G.shape[0]
    rounds = _round_robin(n)
    for sweep in range(max_sweeps):
        rotated = 0
        for P, Q in rounds:
            gp = G[P]
            gq = G[Q]
            alpha = np.sqrt(np.einsum("ij,ij->i", gp, gp))
            beta = np.sqrt(np.einsum("ij,ij->i", gq, gq))
            gamma = np.einsum("ij,ij->i", gp, gq)
            active = (alpha > floor) & (beta > floor) & (np.abs(gamma) > rel_tol * alpha * beta)
            if not active.any():
                continue
            rotated += int(active.sum())
            P, Q = P[active], Q[active]
            alpha, beta, gamma = alpha[active], beta[active], gamma[active]
            gp, gq = gp[active], gq[active]
            zeta = (beta * beta - alpha * alpha) / (2.0 * gamma)
            big = np.abs(zeta) > 1e150
            safe = np.where(big, 0.0, zeta)
            t = np.where(
                big,
                0.5 / np.where(big, zeta, 1.0),
                np.where(safe >= 0.0, 1.0, -1.0) / (np.abs(safe) + np.sqrt(1.0 + safe * safe)),
            )
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            c = c[:, None]
            s = s[:, None]
            G[P] = c * gp - s * gq
            G[Q] = s * gp + c * gq
            vp = Vt[P]
            vq = Vt[Q]
            Vt[P] = c * vp - s * vq
            Vt[Q] = s * vp + c * vq
        if rotated == 0:
            return sweep + 1
    return -1
