# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.

Line-for-line counterpart of ``mblab._kernels_py``; see that module for the
algorithm descriptions.  Results agree with the fallback to rounding error.
"""
import numpy as np

from libc.math cimport exp, log, fabs, INFINITY, NAN

from mblab.errors import MeanOutOfRange, NoConvergence

BACKEND = "cython"

MEAN_TOL = 1e-12
MAX_INVERSION_STEPS = 200
THETA_SPAN = 700.0

cdef double _MEAN_TOL = MEAN_TOL
cdef int _MAX_STEPS = MAX_INVERSION_STEPS


cdef double _max_row_sum(const double[:, ::1] M) noexcept nogil:
    cdef Py_ssize_t n = M.shape[0], i, j
    cdef double c = 0.0, s
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += M[i, j]
        if s > c:
            c = s
    return c


cdef int _power(const double[:, ::1] M, double[::1] u, double[::1] v,
                double[::1] wu, double[::1] wv, double c, double tol,
                long max_iter, long* iters, double* err) noexcept nogil:
    # 0 on convergence; u, v hold the last iterates either way
    cdef Py_ssize_t n = M.shape[0], i, j
    cdef double s, d, hi, lo, r, vmax, ru
    cdef long it
    for it in range(1, max_iter + 1):
        hi = 0.0
        lo = INFINITY
        vmax = 0.0
        for i in range(n):
            s = 0.0
            for j in range(n):
                s += M[i, j] * v[j]
            s += c * v[i]
            wv[i] = s
            r = s / v[i]
            if r > hi:
                hi = r
            if r < lo:
                lo = r
            if s > vmax:
                vmax = s
        for i in range(n):
            v[i] = wv[i] / vmax
        s = 0.0
        for j in range(n):
            d = 0.0
            for i in range(n):
                d += u[i] * M[i, j]
            d += c * u[j]
            wu[j] = d
            s += d
        ru = 0.0
        for j in range(n):
            d = fabs(wu[j] - s * u[j])
            if d > ru:
                ru = d
        ru /= s
        for j in range(n):
            u[j] = wu[j] / s
        iters[0] = it
        err[0] = (hi - lo) / hi
        if ru > err[0]:
            err[0] = ru
        if (hi - lo) <= tol * hi and ru <= tol:
            return 0
    return 1


cdef double _normalize(const double[:, ::1] M, double[::1] u, double[::1] v,
                       double[::1] wv) noexcept nogil:
    # returns rho; rescales v so that u.v = 1 and leaves M v in wv
    cdef Py_ssize_t n = M.shape[0], i, j
    cdef double s, uv = 0.0, uMv = 0.0
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += M[i, j] * v[j]
        wv[i] = s
        uv += u[i] * v[i]
        uMv += u[i] * s
    for i in range(n):
        v[i] /= uv
        wv[i] /= uv
    return uMv / uv


cdef double _residual(const double[:, ::1] M, double[::1] u, double[::1] v,
                      double[::1] Mv, double rho) noexcept nogil:
    cdef Py_ssize_t n = M.shape[0], i, j
    cdef double d, rv = 0.0, ru = 0.0, vmax = 0.0, umax = 0.0
    for i in range(n):
        d = fabs(Mv[i] - rho * v[i])
        if d > rv:
            rv = d
        if fabs(v[i]) > vmax:
            vmax = fabs(v[i])
        if fabs(u[i]) > umax:
            umax = fabs(u[i])
    for j in range(n):
        d = 0.0
        for i in range(n):
            d += u[i] * M[i, j]
        d = fabs(d - rho * u[j])
        if d > ru:
            ru = d
    rv /= rho * vmax
    ru /= rho * umax
    return rv if rv > ru else ru


def power_iteration(M, double tol=1e-12, long max_iter=100_000, u0=None, v0=None):
    """Joint shifted power iteration; returns ``(rho, u, v, residual, iterations)``."""
    cdef double[:, ::1] Mv_ = np.ascontiguousarray(M, dtype=float)
    cdef Py_ssize_t n = Mv_.shape[0]
    u = np.full(n, 1.0 / n) if u0 is None else np.array(u0, dtype=float)
    u /= u.sum()
    v = np.ones(n) if v0 is None else np.array(v0, dtype=float)
    wu = np.empty(n)
    wv = np.empty(n)
    cdef double c = _max_row_sum(Mv_)
    cdef long it = 0
    cdef double err = INFINITY, rho
    if not c > 0.0:
        raise NoConvergence("zero matrix has no Perron-Frobenius vector", float("inf"))
    if _power(Mv_, u, v, wu, wv, c, tol, max_iter, &it, &err):
        raise NoConvergence(
            f"power iteration did not converge in {max_iter} iterations", err)
    rho = _normalize(Mv_, u, v, wv)
    if not rho > 0.0:
        raise NoConvergence("spectral radius is zero", float("inf"))
    return rho, u, v, _residual(Mv_, u, v, wv, rho), it


cdef class FamilyCore:
    """Numerical core of an exponential family generated by ``(P, f)``."""

    cdef double[:, ::1] _P
    cdef double[:, ::1] _M
    cdef double[::1] _f
    cdef double[::1] _u
    cdef double[::1] _v
    cdef double[::1] _wu
    cdef double[::1] _wv
    cdef readonly object P, f
    cdef readonly int n
    cdef readonly double fmax, fmin, log_rho_top, log_rho_bottom, tol, mu0, theta_cap
    cdef readonly long max_iter
    cdef public long evaluations
    cdef double _last_rho
    cdef long _last_iter

    def __init__(self, P, f, log_rho_top, log_rho_bottom, double tol=1e-12, long max_iter=100_000):
        self.P = np.array(P, dtype=float, order="C")
        self.f = np.array(f, dtype=float, order="C")
        self._P = self.P
        self._f = self.f
        self.n = self.P.shape[0]
        self._M = np.empty((self.n, self.n))
        self._u = np.empty(self.n)
        self._v = np.empty(self.n)
        self._wu = np.empty(self.n)
        self._wv = np.empty(self.n)
        self.fmax = float(self.f.max())
        self.fmin = float(self.f.min())
        self.log_rho_top = log_rho_top
        self.log_rho_bottom = log_rho_bottom
        self.tol = tol
        self.max_iter = max_iter
        self.evaluations = 0
        self.theta_cap = THETA_SPAN / (self.fmax - self.fmin)
        self.mu0 = self.evaluate(0.0)[1]

    cdef int _solve(self, double theta, bint warm, double* A, double* mu) except -1:
        cdef Py_ssize_t n = self.n, i, j
        cdef double shift = 0.0, ref = 0.0, c, rho, err = INFINITY
        cdef long it = 0
        if theta > 0.0:
            ref = self.fmax
        elif theta < 0.0:
            ref = self.fmin
        shift = theta * ref
        for j in range(n):
            self._wu[j] = exp(theta * (self._f[j] - ref)) if theta != 0.0 else 1.0
        for i in range(n):
            for j in range(n):
                self._M[i, j] = self._P[i, j] * self._wu[j]
        if not warm:
            for i in range(n):
                self._v[i] = 1.0
                self._u[i] = 1.0 / n
        c = _max_row_sum(self._M)
        self.evaluations += 1
        if _power(self._M, self._u, self._v, self._wu, self._wv, c, self.tol,
                  self.max_iter, &it, &err):
            raise NoConvergence(
                f"power iteration did not converge in {self.max_iter} iterations", err)
        rho = _normalize(self._M, self._u, self._v, self._wv)
        if not rho > 0.0:
            raise NoConvergence("spectral radius is zero", float("inf"))
        self._last_rho = rho
        self._last_iter = it
        A[0] = log(rho) + shift
        mu[0] = 0.0
        for i in range(n):
            mu[0] += self._f[i] * self._u[i] * self._v[i]
        return 0

    def triple(self, double theta):
        """``(A(theta), u, v, residual, iterations)`` for the scaled tilt."""
        cdef double A, mu
        self._solve(theta, False, &A, &mu)
        res = _residual(self._M, self._u, self._v, self._wv, self._last_rho)
        return A, np.array(self._u), np.array(self._v), res, self._last_iter

    cpdef tuple evaluate(self, double theta):
        """``(A(theta), mu(theta))``."""
        cdef double A, mu
        self._solve(theta, False, &A, &mu)
        return A, mu

    cdef int _invert(self, double mu, double* theta_out, double* A_out) except -1:
        cdef double lo, hi, glo, ghi, Alo, Ahi, theta, A, gt, m
        cdef int side = 0, k
        if not (self.fmin < mu < self.fmax):
            raise MeanOutOfRange(f"mean {mu!r} outside open interval ({self.fmin}, {self.fmax})")
        if mu == self.mu0:
            theta_out[0] = 0.0
            A_out[0] = 0.0
            return 0
        if mu > self.mu0:
            lo = 0.0
            glo = self.mu0 - mu
            Alo = 0.0
            hi = 1.0
            self._solve(hi, False, &Ahi, &m)
            ghi = m - mu
            while ghi <= 0.0:
                if ghi == 0.0:
                    theta_out[0] = hi
                    A_out[0] = Ahi
                    return 0
                lo, glo, Alo = hi, ghi, Ahi
                hi *= 2.0
                if hi > 2.0 * self.theta_cap:
                    raise NoConvergence(f"mean {mu!r} is numerically at the boundary", fabs(ghi))
                self._solve(hi, True, &Ahi, &m)
                ghi = m - mu
        else:
            hi = 0.0
            ghi = self.mu0 - mu
            Ahi = 0.0
            lo = -1.0
            self._solve(lo, False, &Alo, &m)
            glo = m - mu
            while glo >= 0.0:
                if glo == 0.0:
                    theta_out[0] = lo
                    A_out[0] = Alo
                    return 0
                hi, ghi, Ahi = lo, glo, Alo
                lo *= 2.0
                if lo < -2.0 * self.theta_cap:
                    raise NoConvergence(f"mean {mu!r} is numerically at the boundary", fabs(glo))
                self._solve(lo, True, &Alo, &m)
                glo = m - mu

        theta = lo
        A = Alo
        for k in range(_MAX_STEPS):
            theta = (lo * ghi - hi * glo) / (ghi - glo)
            if not (lo < theta < hi):
                theta = 0.5 * (lo + hi)
                if not (lo < theta < hi):
                    break
            self._solve(theta, True, &A, &m)
            gt = m - mu
            if fabs(gt) <= _MEAN_TOL:
                break
            if gt < 0.0:
                lo = theta
                glo = gt
                if side == -1:
                    ghi *= 0.5
                side = -1
            else:
                hi = theta
                ghi = gt
                if side == 1:
                    glo *= 0.5
                side = 1
        theta_out[0] = theta
        A_out[0] = A
        return 0

    cpdef double theta_from_mean(self, double mu) except? -1.0:
        cdef double theta, A
        self._invert(mu, &theta, &A)
        return theta

    cpdef tuple dual(self, double mu):
        """``(theta, A*(mu), A(theta))``; boundary means map to ``theta = +-inf``."""
        cdef double theta, A
        if mu == self.fmax:
            return INFINITY, -self.log_rho_top, NAN
        if mu == self.fmin:
            return -INFINITY, -self.log_rho_bottom, NAN
        self._invert(mu, &theta, &A)
        return theta, theta * mu - A, A

    cpdef double kl_mean(self, double mu1, double mu2) except? -1.0:
        """Divergence rate between the members with means ``mu1`` and ``mu2``."""
        cdef double theta2, A2, conj1, kl
        if not (self.fmin < mu2 < self.fmax):
            raise MeanOutOfRange(f"second mean {mu2!r} must be interior")
        if not (self.fmin <= mu1 <= self.fmax):
            raise MeanOutOfRange(f"mean {mu1!r} outside [{self.fmin}, {self.fmax}]")
        if mu1 == mu2:
            return 0.0
        self._invert(mu2, &theta2, &A2)
        conj1 = self.dual(mu1)[1]
        kl = conj1 - (theta2 * mu1 - A2)
        return kl if kl > 0.0 else 0.0


def cumulative_rows(P):
    """Row-wise cumulative sums plus the last positive column of each row."""
    P = np.asarray(P, dtype=float)
    cum = np.cumsum(P, axis=1)
    last = np.array([np.flatnonzero(row > 0)[-1] for row in P], dtype=np.int64)
    return np.ascontiguousarray(cum), last


cpdef long next_state(cum_row, long last, double u):
    cdef Py_ssize_t j = 0, n = len(cum_row)
    while j < n and not (cum_row[j] > u):
        j += 1
    return j if j <= last else last


def simulate_path(cum, last, long x0, uniforms):
    """States ``x_0 .. x_k`` driven by inverse-CDF on the given uniforms."""
    cdef const double[:, ::1] C = np.ascontiguousarray(cum, dtype=float)
    cdef const long long[::1] L = np.ascontiguousarray(last, dtype=np.int64)
    cdef const double[::1] U = np.ascontiguousarray(uniforms, dtype=float)
    cdef Py_ssize_t k = U.shape[0], n = C.shape[1], i, j
    out = np.empty(k + 1, dtype=np.int64)
    cdef long long[::1] O = out
    cdef long long x = x0
    cdef double u
    O[0] = x
    with nogil:
        for i in range(k):
            u = U[i]
            j = 0
            while j < n and not (C[x, j] > u):
                j += 1
            x = j if j <= L[x] else L[x]
            O[i + 1] = x
    return out
