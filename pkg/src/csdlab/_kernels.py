"""Fused pointwise loops for the time stepper (numba).

Each kernel replaces a chain of numpy temporaries on (2, N, N) arrays.
"""
import numba
import numpy as np

# fast-math without nnan/ninf, so non-finite values still propagate to the blow-up check
_FM = {"nsz", "arcp", "contract", "afn", "reassoc"}


@numba.njit(cache=True, fastmath=_FM)
def pack_currents(psi, out):
    """out[0] = J^0, out[1] = J^1 + i J^2 for a (2, N, N) spinor."""
    n1, n2 = psi.shape[1], psi.shape[2]
    for i in range(n1):
        for j in range(n2):
            a = psi[0, i, j]
            b = psi[1, i, j]
            out[0, i, j] = a.real * a.real + a.imag * a.imag + b.real * b.real + b.imag * b.imag
            c = a.conjugate() * b
            out[1, i, j] = complex(-2.0 * c.imag, 2.0 * c.real)


@numba.njit(cache=True, fastmath=_FM)
def gauge_hat(X, d1, d2, out):
    """Potentials from packed current transforms.

    X[0] is the DFT of J^0, X[1] the DFT of J^1 + i J^2.  d1, d2 are the
    symbols of Delta^{-1} d_1, Delta^{-1} d_2.  Writes out[0] = DFT of
    A_0 and out[1] = DFT of A_1 + i A_2.
    """
    n1, n2 = X.shape[1], X.shape[2]
    for i in range(n1):
        row = X[1, i]
        mrow = X[1, (n1 - i) % n1]
        for j in range(n2):
            mj = n2 - j
            if mj == n2:
                mj = 0
            z = row[j]
            zm = mrow[mj].conjugate()
            a = d1[i, j]
            b = d2[i, j]
            # J^1 = (z + zm) / 2, J^2 = (z - zm) / 2i
            out[0, i, j] = a * (-0.5j) * (z - zm) - b * 0.5 * (z + zm)
            out[1, i, j] = (b - 1j * a) * X[0, i, j]


@numba.njit(cache=True, fastmath=_FM)
def duhamel_source(psi, A, m, out):
    """out = -i gamma^0 (m psi - A_mu gamma^mu psi).

    A[0] carries A_0 in its real part, A[1] carries A_1 + i A_2.
    """
    n1, n2 = psi.shape[1], psi.shape[2]
    for i in range(n1):
        for j in range(n2):
            a0 = A[0, i, j].real
            a1 = A[1, i, j].real
            a2 = A[1, i, j].imag
            p1 = psi[0, i, j]
            p2 = psi[1, i, j]
            v1 = m * p1 - (a0 * p1 + (1j * a1 + a2) * p2)
            v2 = m * p2 - ((1j * a1 - a2) * p1 - a0 * p2)
            out[0, i, j] = -1j * v1
            out[1, i, j] = 1j * v2


@numba.njit(cache=True, fastmath=_FM)
def mass_source(psi, m, out):
    n1, n2 = psi.shape[1], psi.shape[2]
    for i in range(n1):
        for j in range(n2):
            out[0, i, j] = -1j * m * psi[0, i, j]
            out[1, i, j] = 1j * m * psi[1, i, j]


@numba.njit(cache=True, fastmath=_FM)
def prop_axpy(ecos, eoff, x, c, y, out):
    """out = E (x + c y) with E = [[ecos, eoff], [-conj(eoff), ecos]] pointwise.

    Every free-propagator symbol U(t) has this form (ecos real).
    """
    n1, n2 = x.shape[1], x.shape[2]
    for i in range(n1):
        for j in range(n2):
            u = x[0, i, j] + c * y[0, i, j]
            v = x[1, i, j] + c * y[1, i, j]
            a = ecos[i, j]
            q = eoff[i, j]
            out[0, i, j] = a * u + q * v
            out[1, i, j] = a * v - q.conjugate() * u


@numba.njit(cache=True, fastmath=_FM)
def prop_combine(ecos, eoff, x, c, y, w, d, z, out):
    """out = E (x + c (y + w)) + d z, the closing stage of a Lawson RK4 step."""
    n1, n2 = x.shape[1], x.shape[2]
    for i in range(n1):
        for j in range(n2):
            u = x[0, i, j] + c * (y[0, i, j] + w[0, i, j])
            v = x[1, i, j] + c * (y[1, i, j] + w[1, i, j])
            a = ecos[i, j]
            q = eoff[i, j]
            out[0, i, j] = a * u + q * v + d * z[0, i, j]
            out[1, i, j] = a * v - q.conjugate() * u + d * z[1, i, j]


@numba.njit(cache=True, fastmath=_FM)
def axpy(x, c, y, out):
    """out = x + c y."""
    n0, n1, n2 = x.shape
    for k in range(n0):
        for i in range(n1):
            for j in range(n2):
                out[k, i, j] = x[k, i, j] + c * y[k, i, j]


def empty_like_spinor(shape):
    return np.empty(shape, dtype=np.complex128)


# --------------------------------------------------------------------------
# Probe kernels.  Time-batched fields are (nt, N, N); spinors and gamma
# coefficients carry their component axis first, (c, nt, N, N).
# --------------------------------------------------------------------------

@numba.njit(cache=True, fastmath=_FM)
def flow_fill(vals, ii, jj, r, times, sign, out):
    """out[k] = coefficients vals (at lattice points (ii, jj), |xi| = r) times e^{sign i t_k r}.

    ``out`` must be zero outside the listed points.
    """
    for k in range(times.shape[0]):
        t = sign * times[k]
        for p in range(vals.shape[0]):
            ph = t * r[p]
            out[k, ii[p], jj[p]] = vals[p] * complex(np.cos(ph), np.sin(ph))


@numba.njit(cache=True, fastmath=_FM)
def abs_pow_sum(w, r):
    """sum over the grid of |w|^r, per leading index of a (nt, N, N) array."""
    nt, n1, n2 = w.shape
    out = np.zeros(nt)
    half = 0.5 * r
    for k in range(nt):
        acc = 0.0
        for i in range(n1):
            for j in range(n2):
                z = w[k, i, j]
                a = z.real * z.real + z.imag * z.imag
                acc += a if half == 1.0 else a ** half
        out[k] = acc
    return out


@numba.njit(cache=True, fastmath=_FM)
def product_abs_pow_sum(u, v, r):
    """sum over the grid of |u v|^r per time, without forming u v."""
    nt, n1, n2 = u.shape
    out = np.zeros(nt)
    half = 0.5 * r
    for k in range(nt):
        acc = 0.0
        for i in range(n1):
            for j in range(n2):
                a = u[k, i, j]
                b = v[k, i, j]
                m = (a.real * a.real + a.imag * a.imag) * (b.real * b.real + b.imag * b.imag)
                acc += m if half == 1.0 else m ** half
        out[k] = acc
    return out


@numba.njit(cache=True, fastmath=_FM)
def multiply(u, v, out):
    nt, n1, n2 = u.shape
    for k in range(nt):
        for i in range(n1):
            for j in range(n2):
                out[k, i, j] = u[k, i, j] * v[k, i, j]


@numba.njit(cache=True, fastmath=_FM)
def component_sup(c):
    """max over the grid of sqrt(sum_m |c_m|^2), per time, for c of shape (m, nt, N, N)."""
    nc, nt, n1, n2 = c.shape
    out = np.zeros(nt)
    for k in range(nt):
        best = 0.0
        for i in range(n1):
            for j in range(n2):
                acc = 0.0
                for m in range(nc):
                    z = c[m, k, i, j]
                    acc += z.real * z.real + z.imag * z.imag
                if acc > best:
                    best = acc
        out[k] = np.sqrt(best)
    return out


@numba.njit(cache=True, fastmath=_FM)
def weighted_sq_sum(c, w):
    """sum over the grid and components of w |c|^2, per time, for c of shape (m, nt, N, N)."""
    nc, nt, n1, n2 = c.shape
    out = np.zeros(nt)
    for k in range(nt):
        acc = 0.0
        for m in range(nc):
            for i in range(n1):
                for j in range(n2):
                    z = c[m, k, i, j]
                    acc += w[i, j] * (z.real * z.real + z.imag * z.imag)
        out[k] = acc
    return out


@numba.njit(cache=True, fastmath=_FM)
def bilinear_fields(psi, phi, out):
    """out[nu] = psi-bar gamma^nu phi for spinors of shape (2, nt, N, N)."""
    _, nt, n1, n2 = psi.shape
    for k in range(nt):
        for i in range(n1):
            for j in range(n2):
                p1 = psi[0, k, i, j].conjugate()
                p2 = psi[1, k, i, j].conjugate()
                f1 = phi[0, k, i, j]
                f2 = phi[1, k, i, j]
                a = p1 * f2
                b = p2 * f1
                out[0, k, i, j] = p1 * f1 + p2 * f2
                out[1, k, i, j] = 1j * (a - b)
                out[2, k, i, j] = a + b


@numba.njit(cache=True, fastmath=_FM)
def n_from_bilinears(bh, d1, d2, out):
    """Gamma coefficients of N from bilinear DFTs; d_j is the symbol of Delta^{-1} d_j."""
    _, nt, n1, n2 = bh.shape
    for k in range(nt):
        for i in range(n1):
            for j in range(n2):
                a = d1[i, j]
                b = d2[i, j]
                b0 = bh[0, k, i, j]
                out[0, k, i, j] = a * bh[2, k, i, j] - b * bh[1, k, i, j]
                out[1, k, i, j] = b * b0
                out[2, k, i, j] = -a * b0


@numba.njit(cache=True, fastmath=_FM)
def gamma_apply(c, psi, out):
    """out = (c_mu gamma^mu) psi pointwise; c is (3, nt, N, N), psi (2, nt, N, N)."""
    _, nt, n1, n2 = psi.shape
    for k in range(nt):
        for i in range(n1):
            for j in range(n2):
                c0 = c[0, k, i, j]
                c1 = c[1, k, i, j]
                c2 = c[2, k, i, j]
                p1 = psi[0, k, i, j]
                p2 = psi[1, k, i, j]
                out[0, k, i, j] = c0 * p1 + (1j * c1 + c2) * p2
                out[1, k, i, j] = (1j * c1 - c2) * p1 - c0 * p2
