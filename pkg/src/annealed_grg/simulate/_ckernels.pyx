# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sweep kernel. Mirrors ``_pykernels.run_sweeps`` operation for operation."""
import numpy as np
from libc.math cimport log, exp
from libc.stdint cimport uint64_t, int64_t
from libcpp.vector cimport vector

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline double _uniform(uint64_t key, uint64_t ctr) noexcept nogil:
    cdef uint64_t z = key + (ctr + 1) * GOLDEN
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    z = z ^ (z >> 31)
    return (<double>(z >> 11) + 0.5) * 1.1102230246251565e-16


def run_sweeps(
    const double[::1] w, double l_n, double[::1] spins, double[::1] gs, int64_t[::1] labels,
    double c, double theta, double h, uint64_t key, int64_t sweep0, int64_t n_sweeps,
    const double[::1] atom_s, const double[::1] atom_g, const double[::1] atom_logw,
    const double[:, ::1] prop_s, const double[:, ::1] prop_g,
    double[::1] out_B, double[::1] out_mean, double[::1] out_energy,
    int64_t[::1] out_edges, int64_t[::1] out_accepts,
):
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t n_atoms = atom_s.shape[0]
    cdef uint64_t npairs = n * (n - 1) // 2
    cdef uint64_t block = npairs + 2 * n
    cdef bint atomic = n_atoms > 0
    cdef vector[int64_t] ei, ej, ptr, fill, nbr
    cdef vector[double] lw, cum
    cdef Py_ssize_t s, i, j, a, e, k, pick
    cdef uint64_t base, pidx
    cdef double ww, p, K, u, top, total, acc, gi, gp, d
    cdef int64_t accepts
    lw.resize(n_atoms if n_atoms > 0 else 1)
    cum.resize(n_atoms if n_atoms > 0 else 1)
    ptr.resize(n + 1)
    fill.resize(n)
    with nogil:
        for s in range(n_sweeps):
            base = <uint64_t>(sweep0 + s) * block
            # edge stage
            ei.clear()
            ej.clear()
            pidx = 0
            for i in range(n):
                for j in range(i + 1, n):
                    ww = w[i] * w[j]
                    p = ww / (l_n + ww)
                    K = c + theta * gs[i] * gs[j]
                    if _uniform(key, base + pidx) < p * K / (1.0 + p * (K - 1.0)):
                        ei.push_back(i)
                        ej.push_back(j)
                    pidx += 1
            # neighbor lists, ascending within each site
            for i in range(n + 1):
                ptr[i] = 0
            for e in range(<Py_ssize_t>ei.size()):
                ptr[ei[e] + 1] += 1
                ptr[ej[e] + 1] += 1
            for i in range(n):
                ptr[i + 1] += ptr[i]
                fill[i] = ptr[i]
            nbr.resize(2 * ei.size())
            for e in range(<Py_ssize_t>ei.size()):
                nbr[fill[ei[e]]] = ej[e]
                fill[ei[e]] += 1
                nbr[fill[ej[e]]] = ei[e]
                fill[ej[e]] += 1
            # spin stage
            accepts = 0
            for i in range(n):
                if atomic:
                    for a in range(n_atoms):
                        acc = atom_logw[a]
                        for k in range(ptr[i], ptr[i + 1]):
                            acc = acc + log(c + theta * atom_g[a] * gs[nbr[k]])
                        lw[a] = acc
                    top = lw[0]
                    for a in range(1, n_atoms):
                        if lw[a] > top:
                            top = lw[a]
                    total = 0.0
                    for a in range(n_atoms):
                        total = total + exp(lw[a] - top)
                        cum[a] = total
                    u = _uniform(key, base + npairs + i) * total
                    pick = n_atoms - 1
                    for a in range(n_atoms):
                        if u < cum[a]:
                            pick = a
                            break
                    labels[i] = pick
                    spins[i] = atom_s[pick]
                    gs[i] = atom_g[pick]
                    accepts += 1
                else:
                    gp = prop_g[s, i]
                    gi = gs[i]
                    d = h * (gp - gi)
                    for k in range(ptr[i], ptr[i + 1]):
                        d = d + (log(c + theta * gp * gs[nbr[k]]) - log(c + theta * gi * gs[nbr[k]]))
                    if log(_uniform(key, base + npairs + n + i)) < d:
                        spins[i] = prop_s[s, i]
                        gs[i] = gp
                        accepts += 1
            # observables
            acc = 0.0
            for i in range(n):
                acc = acc + w[i] * gs[i]
            out_B[s] = acc / l_n
            acc = 0.0
            for i in range(n):
                acc = acc + spins[i]
            out_mean[s] = acc / n
            acc = 0.0
            for e in range(<Py_ssize_t>ei.size()):
                acc = acc + log(c + theta * gs[ei[e]] * gs[ej[e]])
            out_energy[s] = acc
            out_edges[s] = ei.size()
            out_accepts[s] = accepts
    cdef Py_ssize_t m = ei.size()
    out_i = np.empty(m, dtype=np.int64)
    out_j = np.empty(m, dtype=np.int64)
    cdef int64_t[::1] oi = out_i
    cdef int64_t[::1] oj = out_j
    for e in range(m):
        oi[e] = ei[e]
        oj[e] = ej[e]
    return out_i, out_j
