# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Brute-force objective search, built with ``-ffast-math`` so the row maximum vectorises."""


def max_two_state_objective(const double[:, ::1] Eu, const double[:, ::1] E2u,
                            const double[:, ::1] Ed, const double[:, ::1] E2d,
                            double omega):
    cdef Py_ssize_t G0 = Eu.shape[0]
    cdef Py_ssize_t G1 = Eu.shape[1]
    cdef Py_ssize_t i, j, l, bi = 0, bj = 0, bl = 0
    cdef double a, b, E, obj, row
    cdef double best = -1e300
    cdef const double* ed
    cdef const double* e2d
    for i in range(G0):
        ed = &Ed[i, 0]
        e2d = &E2d[i, 0]
        for j in range(G1):
            a = Eu[i, j]
            b = E2u[i, j]
            row = -1e300
            # branch-free row maximum; the argmax is recovered only when the row wins
            for l in range(G1):
                E = a + ed[l]
                obj = E - omega * (b + e2d[l] - E * E)
                row = obj if obj > row else row
            if row > best:
                best = row
                bi = i
                bj = j
                row = -1e300
                for l in range(G1):
                    E = a + ed[l]
                    obj = E - omega * (b + e2d[l] - E * E)
                    if obj > row:
                        row = obj
                        bl = l
    return best, bi, bj, bl
