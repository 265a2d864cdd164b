"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

Each function here is the reference semantics; the compiled module must
return the same values to rounding.
"""

import numpy as np


def ar_recursion(mu, phi, eps, lags):
    """Run ``r_t = mu + sum_i phi_i (r_{t-i} - mu) + eps_t`` from the given lags."""
    phi = np.asarray(phi, dtype=float)
    eps = np.asarray(eps, dtype=float)
    p = phi.shape[0]
    T = eps.shape[0]
    buf = np.empty(p + T)
    buf[:p] = np.asarray(lags, dtype=float) - mu
    for t in range(T):
        r = mu
        for i in range(p):
            r = r + phi[i] * buf[p + t - 1 - i]
        r = r + eps[t]
        buf[p + t] = r - mu
    return buf[p:] + mu


def dp_backward(mean_e, second_e, r0, probs):
    """Backward recursion for the scalar-asset coefficients, one problem per row.

    ``mean_e`` and ``second_e`` are ``(B, T)``; ``r0`` and ``probs`` are
    length ``T`` (``probs[t-1]`` is the exit mass at ``t``).  Returns
    ``(omega, lambda, theta)`` of shapes ``(B, T+1)``, ``(B, T+1)``, ``(B, T)``.
    """
    mean_e = np.asarray(mean_e, dtype=float)
    second_e = np.asarray(second_e, dtype=float)
    B, T = mean_e.shape
    om = np.empty((B, T + 1))
    la = np.empty((B, T + 1))
    th = np.empty((B, T))
    om[:, T] = probs[T - 1]
    la[:, T] = probs[T - 1]
    for t in range(T - 1, -1, -1):
        w1 = om[:, t + 1]
        l1 = la[:, t + 1]
        h = mean_e[:, t] * mean_e[:, t] / second_e[:, t]
        pt = probs[t - 1] if t > 0 else 0.0
        om[:, t] = pt + r0[t] * r0[t] * w1 * (1.0 - h)
        la[:, t] = pt + r0[t] * l1 * (1.0 - h)
        th[:, t] = l1 * l1 * h / w1
    return om, la, th


def max_two_state_objective(Eu, E2u, Ed, E2d, omega):
    """Maximise ``E - omega (E2 - E^2)`` over ``(i, j, l)``.

    ``E = Eu[i, j] + Ed[i, l]`` and ``E2 = E2u[i, j] + E2d[i, l]``.  Returns
    ``(best, i, j, l)``; ties keep the first index in row-major order.
    """
    Eu, E2u, Ed, E2d = (np.asarray(a, dtype=float) for a in (Eu, E2u, Ed, E2d))
    best, bi, bj, bl = -np.inf, 0, 0, 0
    for i in range(Eu.shape[0]):
        E = Eu[i][:, None] + Ed[i][None, :]
        obj = E - omega * (E2u[i][:, None] + E2d[i][None, :] - E * E)
        flat = int(np.argmax(obj))
        value = obj.flat[flat]
        if value > best:
            best = float(value)
            bi = i
            bj, bl = divmod(flat, obj.shape[1])
    return best, bi, bj, bl
