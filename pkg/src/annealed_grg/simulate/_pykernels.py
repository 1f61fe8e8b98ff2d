"""Pure-Python sweep kernel; the reference the compiled core must reproduce bit for bit.

Floating-point operations are issued in the same order as in ``_ckernels.pyx``:
products left to right, sums sequential, and ``math.log`` / ``math.exp`` from
the C library.
"""
from __future__ import annotations

import math

import numpy as np

from .rng import block_size, uniform, uniforms


def pair_indices(n: int):
    return np.triu_indices(n, 1)


def edge_probabilities(w, l_n, gs, c, theta, iu, ju):
    """Conditional presence probability of every pair given the spins."""
    ww = w[iu] * w[ju]
    p = ww / (l_n + ww)
    K = c + theta * gs[iu] * gs[ju]
    return p * K / (1.0 + p * (K - 1.0))


def _neighbors(n, ei, ej):
    rows = np.concatenate([ei, ej])
    cols = np.concatenate([ej, ei])
    order = np.lexsort((cols, rows))
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=ptr[1:])
    return ptr.tolist(), cols[order].tolist()


def run_sweeps(
    w, l_n, spins, gs, labels, c, theta, h, key, sweep0, n_sweeps,
    atom_s, atom_g, atom_logw, prop_s, prop_g,
    out_B, out_mean, out_energy, out_edges, out_accepts,
):
    n = w.shape[0]
    key, sweep0 = int(key), int(sweep0)
    npairs = n * (n - 1) // 2
    block = block_size(n)
    iu, ju = pair_indices(n)
    ww = w[iu] * w[ju]
    p = ww / (l_n + ww)
    atomic = atom_s.shape[0] > 0
    n_atoms = atom_s.shape[0]
    wl, ag, alw = w.tolist(), atom_g.tolist(), atom_logw.tolist()
    ei = ej = np.zeros(0, dtype=np.int64)
    for s in range(n_sweeps):
        base = (sweep0 + s) * block
        # edge stage
        u = uniforms(key, base + np.arange(npairs, dtype=np.uint64))
        K = c + theta * gs[iu] * gs[ju]
        present = u < p * K / (1.0 + p * (K - 1.0))
        ei, ej = iu[present], ju[present]
        ptr, nbr = _neighbors(n, ei, ej)
        # spin stage
        g = gs.tolist()
        accepts = 0
        for i in range(n):
            nb = nbr[ptr[i] : ptr[i + 1]]
            if atomic:
                lw = []
                for a in range(n_atoms):
                    acc = alw[a]
                    for j in nb:
                        acc += math.log(c + theta * ag[a] * g[j])
                    lw.append(acc)
                top = max(lw)
                total = 0.0
                cum = []
                for a in range(n_atoms):
                    total += math.exp(lw[a] - top)
                    cum.append(total)
                ui = uniform(key, base + npairs + i) * total
                pick = n_atoms - 1
                for a in range(n_atoms):
                    if ui < cum[a]:
                        pick = a
                        break
                labels[i] = pick
                spins[i] = atom_s[pick]
                g[i] = ag[pick]
                accepts += 1
            else:
                gp = float(prop_g[s, i])
                gi = g[i]
                d = h * (gp - gi)
                for j in nb:
                    d += math.log(c + theta * gp * g[j]) - math.log(c + theta * gi * g[j])
                if math.log(uniform(key, base + npairs + n + i)) < d:
                    spins[i] = prop_s[s, i]
                    g[i] = gp
                    accepts += 1
        gs[:] = g
        # observables
        acc = 0.0
        for i in range(n):
            acc += wl[i] * g[i]
        out_B[s] = acc / l_n
        acc = 0.0
        for x in spins.tolist():
            acc += x
        out_mean[s] = acc / n
        acc = 0.0
        for i, j in zip(ei.tolist(), ej.tolist()):
            acc += math.log(c + theta * g[i] * g[j])
        out_energy[s] = acc
        out_edges[s] = ei.shape[0]
        out_accepts[s] = accepts
    return ei, ej
