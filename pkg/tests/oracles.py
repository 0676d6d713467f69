"""Independent reference implementations used only by the tests.

Deliberately naive: plain loops, no shared helpers with the package.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import integrate, special


def gauss_solve(A, b):
    """Gaussian elimination with partial pivoting on a complex system."""
    A = np.array(A, dtype=complex)
    b = np.array(b, dtype=complex).reshape(-1)
    n = len(b)
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(A[r, col]))
        A[[col, piv]] = A[[piv, col]]
        b[[col, piv]] = b[[piv, col]]
        for r in range(col + 1, n):
            f = A[r, col] / A[col, col]
            for c in range(col, n):
                A[r, c] -= f * A[col, c]
            b[r] -= f * b[col]
    x = np.zeros(n, dtype=complex)
    for r in range(n - 1, -1, -1):
        acc = b[r]
        for c in range(r + 1, n):
            acc -= A[r, c] * x[c]
        x[r] = acc / A[r, r]
    return x


def conj_transpose(H):
    N, M = len(H), len(H[0])
    return np.array([[np.conj(H[n][m]) for n in range(N)] for m in range(M)])


def matvec(A, x):
    return np.array([sum(A[i][k] * x[k] for k in range(len(x))) for i in range(len(A))])


def zf_oracle(y, H):
    Hh = conj_transpose(H)
    gram = np.array([[sum(Hh[i][n] * H[n][j] for n in range(len(H))) for j in range(len(H[0]))]
                     for i in range(len(H[0]))])
    return gauss_solve(gram, matvec(Hh, y))


def lmmse_oracle(y, H, var):
    Hh = conj_transpose(H)
    M = len(H[0])
    gram = np.array([[sum(Hh[i][n] * H[n][j] for n in range(len(H))) + (var if i == j else 0)
                      for j in range(M)] for i in range(M)])
    return gauss_solve(gram, matvec(Hh, y))


def brute_force_ml(y, H, points):
    """Loop over every candidate in lexicographic order; first minimum wins."""
    M = len(H[0])
    best, best_metric = None, math.inf
    for cand in itertools.product(range(len(points)), repeat=M):
        r = [y[n] - sum(H[n][m] * points[cand[m]] for m in range(M)) for n in range(len(y))]
        metric = sum(abs(v) ** 2 for v in r)
        if metric < best_metric:
            best, best_metric = cand, metric
    return np.array(best)


def qpsk_quadrant(z, points):
    """Index of the QPSK point in the same quadrant as ``z``."""
    target = (1 if z.real >= 0 else -1, 1 if z.imag >= 0 else -1)
    for i, p in enumerate(points):
        if (np.sign(p.real), np.sign(p.imag)) == target:
            return i
    raise AssertionError("no matching quadrant")


def dense_forward(layers, x):
    """Triple-loop forward pass; ``layers`` is a list of (W, b, activation)."""
    a = [float(v) for v in x]
    for W, b, act in layers:
        fan_in, fan_out = len(W), len(W[0])
        z = [float(b[j]) + sum(a[i] * float(W[i][j]) for i in range(fan_in)) for j in range(fan_out)]
        if act == "relu":
            a = [max(v, 0.0) for v in z]
        elif act == "linear":
            a = z
        elif act == "sigmoid":
            a = [1.0 / (1.0 + math.exp(-v)) for v in z]
        elif act == "softmax":
            mx = max(z)
            e = [math.exp(v - mx) for v in z]
            s = sum(e)
            a = [v / s for v in e]
        else:
            raise ValueError(act)
    return np.array(a)


def scalar_loss(output, target, head, clusters=1, floor=1e-12):
    total = 0.0
    for o_row, t_row in zip(np.atleast_2d(output), np.atleast_2d(target)):
        for o, t in zip(o_row, t_row):
            o, t = float(o), float(t)
            if head in ("softmax", "cluster_softmax"):
                total -= t * math.log(max(o, floor))
            elif head == "sigmoid":
                total -= t * math.log(max(o, floor)) + (1 - t) * math.log(max(1 - o, floor))
            elif head == "linear":
                total += 0.5 * (o - t) ** 2
    return total


def mrc_ber_integral(eb_n0_db, branches=2):
    """BPSK BER with MRC, averaging Q(sqrt(2g)) over the Gamma(L, gbar) SNR density."""
    gbar = 10 ** (eb_n0_db / 10)

    def integrand(g):
        pdf = g ** (branches - 1) * math.exp(-g / gbar) / (math.factorial(branches - 1) * gbar**branches)
        return 0.5 * special.erfc(math.sqrt(g)) * pdf

    value, _ = integrate.quad(integrand, 0, math.inf, limit=200)
    return value


def gray_table(bits):
    """Reflected binary code built by mirroring, row i is the code of i."""
    codes = ["0", "1"]
    for _ in range(bits - 1):
        codes = ["0" + c for c in codes] + ["1" + c for c in reversed(codes)]
    return [int(c, 2) for c in codes]
