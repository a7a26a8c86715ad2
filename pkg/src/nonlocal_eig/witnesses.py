"""Test-function families whose overlap ratio approaches one.

For a linear map ``a(x) = A x`` and a trial function ``phi`` supported in
the unit ball, the overlap ratio is

    int phi(x) phi(A x) dx / (|det A|^{-1/2} int phi^2)

Hoelder's inequality caps it at one; each family below drives it to one
along a parameter, which pins the infimum of the candidate energy at
``(1 - |det A|^{-1/2})^2``.  Every witness can be evaluated pointwise and
carries both the closed-form ratio and an independent numerical estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, linalg

from .kernel import unit_ball_volume

SIGMA_SEP = 0.5


@dataclass
class OverlapReport:
    family: str
    params: dict
    analytic_ratio: float
    measured_ratio: float
    stderr: float = 0.0
    samples: int = 0
    seed: Optional[int] = None
    method: str = "closed-form"
    extras: dict = field(default_factory=dict)

    @property
    def abs_error(self) -> float:
        return abs(self.measured_ratio - self.analytic_ratio)

    def as_dict(self) -> dict:
        out = {
            "family": self.family,
            "params": self.params,
            "analytic_ratio": float(self.analytic_ratio),
            "measured_ratio": float(self.measured_ratio),
            "stderr": float(self.stderr),
            "samples": int(self.samples),
            "seed": self.seed,
            "method": self.method,
        }
        out.update(self.extras)
        return out


def _ratio_with_stderr(f, g, weights, det_abs) -> tuple[float, float]:
    """Ratio of weighted sums with a delta-method standard error.

    ``f`` is phi(x) phi(Ax), ``g`` is phi(x)^2, both divided by the sampling
    density; ``weights`` groups samples into independent strata as a list of
    (index array, stratum weight) pairs.
    """
    num = den = 0.0
    var_n = var_d = cov = 0.0
    for idx, w in weights:
        fi, gi = f[idx], g[idx]
        n = len(idx)
        num += w * fi.mean()
        den += w * gi.mean()
        if n > 1:
            var_n += w * w * fi.var(ddof=1) / n
            var_d += w * w * gi.var(ddof=1) / n
            cov += w * w * np.cov(fi, gi, ddof=1)[0, 1] / n
    if den <= 0:
        raise ValueError("witness has zero estimated L2 mass")
    rho = num / den
    var = max(var_n - 2 * rho * cov + rho * rho * var_d, 0.0)
    c = det_abs ** -0.5
    return rho / c, float(np.sqrt(var) / den / c)


class WitnessFunction:
    """Base class: pointwise evaluation plus overlap bookkeeping."""

    kind = "abstract"

    def __init__(self, matrix, params: dict):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.dim = self.matrix.shape[0]
        self.params = params

    @property
    def det_abs(self) -> float:
        return float(abs(np.linalg.det(self.matrix)))

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError

    @property
    def analytic_ratio(self) -> float:
        raise NotImplementedError

    @property
    def support_radius(self) -> float:
        raise NotImplementedError

    def measure_overlap_uniform(self, samples: int = 200_000, seed: int = 0, radius: float = 1.0) -> OverlapReport:
        """Plain Monte Carlo over the ball B_radius (which must contain the support)."""
        d = self.dim
        rng = np.random.default_rng(seed)
        u = rng.standard_normal((samples, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        x = radius * u * rng.uniform(size=(samples, 1)) ** (1.0 / d)
        fx = self(x)
        fa = self(x @ self.matrix.T)
        vol = unit_ball_volume(d) * radius ** d
        ratio, se = _ratio_with_stderr(fx * fa, fx * fx, [(np.arange(samples), vol)], self.det_abs)
        return OverlapReport(self.kind, self.params, self.analytic_ratio, ratio, se, samples, seed,
                             "monte-carlo(uniform-ball)")


def hoelder_ceiling_ok(report: OverlapReport, n_se: float = 3.0) -> bool:
    return report.measured_ratio <= 1.0 + n_se * report.stderr + 1e-12


# ---------------------------------------------------------------------------
# separable power law


class PowerLawWitness(WitnessFunction):
    kind = "power_law"

    def __init__(self, alphas, sigma: float, eps: Optional[float] = None):
        alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
        if np.any(alphas == 0):
            raise ValueError("diagonal entries must be nonzero")
        if not (0 < sigma < SIGMA_SEP):
            raise ValueError("power-law exponent must satisfy 0 < sigma < 1/2")
        d = len(alphas)
        if eps is None:
            eps = d ** -0.5
        if not (0 < eps <= d ** -0.5 + 1e-15):
            raise ValueError("need 0 < eps <= d^{-1/2} so the support stays in B_1")
        super().__init__(np.diag(alphas), {"alphas": alphas.tolist(), "sigma": sigma, "eps": eps})
        self.alphas = alphas
        self.sigma = float(sigma)
        self.eps = float(eps)

    def factor(self, t, k: int) -> np.ndarray:
        """1-D factor |t|^-sigma on (0, eps); symmetric support when alpha_k < 0."""
        t = np.asarray(t, dtype=float)
        at = np.abs(t)
        if self.alphas[k] > 0:
            inside = (t > 0) & (t < self.eps)
        else:
            inside = (at > 0) & (at < self.eps)
        with np.errstate(divide="ignore"):
            return np.where(inside, np.where(inside, at, 1.0) ** -self.sigma, 0.0)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.ones(len(x))
        for k in range(self.dim):
            out = out * self.factor(x[:, k], k)
        return out

    @property
    def analytic_ratio(self) -> float:
        s = np.maximum(np.abs(self.alphas), 1.0 / np.abs(self.alphas))
        return float(np.prod(s ** (self.sigma - 0.5)))

    @property
    def support_radius(self) -> float:
        return self.eps * np.sqrt(self.dim)

    def measure_overlap_quadrature(self) -> OverlapReport:
        """Per-coordinate adaptive quadrature; the product is exact for separable functions.

        The substitution t = s^p with p = 1/(1-2 sigma) removes the
        endpoint singularity of |t|^{-2 sigma}.
        """
        p = 1.0 / (1.0 - 2.0 * self.sigma)
        top = self.eps ** (1.0 / p)
        ratio = 1.0
        for k, alpha in enumerate(self.alphas):

            def integrand(s, sign, fn):
                t = sign * s ** p
                return fn(t) * p * s ** (p - 1) if s > 0 else 0.0

            f = lambda t: float(self.factor(np.array([t]), k)[0])
            fa = lambda t: float(self.factor(np.array([alpha * t]), k)[0])
            signs = (1.0, -1.0)
            opts = dict(limit=500, epsabs=0.0, epsrel=1e-11)
            num = sum(integrate.quad(integrand, 0, top, args=(sg, lambda t: f(t) * fa(t)), **opts)[0] for sg in signs)
            den = sum(integrate.quad(integrand, 0, top, args=(sg, lambda t: f(t) ** 2), **opts)[0] for sg in signs)
            ratio *= num / (abs(alpha) ** -0.5 * den)
        return OverlapReport(self.kind, self.params, self.analytic_ratio, ratio, 0.0, 0, None, "grid-quadrature")


def power_law_witness(alphas, sigma: float, eps: Optional[float] = None) -> tuple[PowerLawWitness, OverlapReport]:
    w = PowerLawWitness(alphas, sigma, eps)
    return w, w.measure_overlap_quadrature()


# ---------------------------------------------------------------------------
# geometric sums over the level sets of an expansive map


def is_expansive(A) -> bool:
    return bool(np.all(np.abs(np.linalg.eigvals(np.atleast_2d(A))) > 1.0))


class GeometricWitness(WitnessFunction):
    """phi = sum_{j <= J_max} sigma^j 1_{E_j} for the level sets of an expansive map.

    ``E_j`` collects the points whose last visit to the seed ball ``B``
    under forward iteration happens at step ``j``.  For a co-expansive
    ``A`` the construction runs on ``A^{-1}``; the overlap ratio is the same.
    """

    kind = "expansive_geometric"

    def __init__(self, A, sigma: float, J_max: Optional[int] = None, trunc_tol: float = 1e-8):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if is_expansive(A):
            b, inverted = A, False
        elif is_expansive(np.linalg.inv(A)):
            b, inverted = np.linalg.inv(A), True
        else:
            raise ValueError("map is neither expansive nor co-expansive")
        det_b = abs(np.linalg.det(b))
        if not (0 < sigma < np.sqrt(det_b)):
            raise ValueError(f"need 0 < sigma < |det|^(1/2) = {np.sqrt(det_b):.6g}")
        self.b = b
        self.b_inv = np.linalg.inv(b)
        self.inverted = inverted
        self.sigma = float(sigma)
        self.det_b = det_b
        self.q = sigma * sigma / det_b
        d = A.shape[0]
        # seed ball radius: b^{-j}(B) stays inside B_1 for every j
        norms, P = [1.0], np.eye(d)
        for _ in range(5000):
            P = self.b_inv @ P
            nrm = np.linalg.norm(P, 2)
            norms.append(nrm)
            if nrm < 1e-3 and len(norms) > 10:
                break
        self.seed_radius = 1.0 / max(norms)
        # invariant ellipsoid D = {x : x^T Q x <= c}, b^{-1}(D) inside D, B_1 inside D
        Q = linalg.solve_discrete_lyapunov(self.b_inv.T, np.eye(d))
        Q = 0.5 * (Q + Q.T)
        # margin keeps shells from lining up with level sets, so the sampling is not degenerate
        self.Q = Q
        self.c = float(np.linalg.eigvalsh(Q).max()) * 1.5 ** 2
        self.Lq = np.linalg.cholesky(Q)
        self.D_volume = unit_ball_volume(d) * self.c ** (d / 2) / np.sqrt(np.linalg.det(Q))
        if J_max is None:
            J_max = int(np.ceil(np.log(trunc_tol) / np.log(self.q))) if self.q < 1 else 1000
            # keep b^{-J} points representable in double precision
            contraction = max(abs(np.linalg.eigvals(self.b_inv)))
            J_max = min(J_max, int(650 / -np.log(contraction)))
            if sigma > 1:
                # phi^2 = sigma^{2J} must stay finite
                J_max = min(J_max, int(300 * np.log(10) / (2 * np.log(sigma))))
        self.J_max = int(J_max)
        super().__init__(A, {"A": A.tolist(), "sigma": self.sigma, "J_max": self.J_max})

    def in_D(self, x) -> np.ndarray:
        return np.einsum("ni,ij,nj->n", x, self.Q, x) <= self.c

    def levels(self, x, horizon: Optional[int] = None) -> np.ndarray:
        """Last step j with b^j(x) in B; -1 outside F; -2 if unresolved at the horizon."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if horizon is None:
            horizon = self.J_max + 64
        r2 = self.seed_radius ** 2
        out = np.full(len(x), -1, dtype=np.int64)
        active = np.arange(len(x))
        z = x.copy()
        bT = self.b.T
        for step in range(horizon + 1):
            if len(active) == 0:
                break
            inB = np.einsum("ni,ni->n", z, z) < r2
            out[active[inB]] = step
            # once outside D the orbit never returns, since b maps the complement of D into itself
            keep = self.in_D(z)
            active, z = active[keep], z[keep]
            z = z @ bT
        if len(active):
            out[active] = -2
        return out

    def __call__(self, x) -> np.ndarray:
        lev = self.levels(x)
        ok = (lev >= 0) & (lev <= self.J_max)
        return np.where(ok, self.sigma ** np.where(ok, lev, 0).astype(float), 0.0)

    @property
    def analytic_ratio(self) -> float:
        return float(self.sigma * self.det_b ** -0.5)

    @property
    def analytic_ratio_truncated(self) -> float:
        q, J = self.q, self.J_max
        return self.analytic_ratio * (1 - q ** J) / (1 - q ** (J + 1))

    @property
    def support_radius(self) -> float:
        return 1.0

    def _sample_shell(self, j: int, n: int, rng) -> np.ndarray:
        """Uniform samples from b^{-j}(D minus b^{-1} D)."""
        d = self.dim
        got = []
        need = n
        while need > 0:
            m = int(need / max(1 - 1 / self.det_b, 0.05) * 1.2) + 16
            u = rng.standard_normal((m, d))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            u *= rng.uniform(size=(m, 1)) ** (1.0 / d)
            # x^T Q x <= c  <=>  x = sqrt(c) L^{-T} u with Q = L L^T
            y = np.sqrt(self.c) * linalg.solve_triangular(self.Lq.T, u.T, lower=False).T
            y = y[~self.in_D(y @ self.b.T)]
            got.append(y[:need])
            need -= len(got[-1])
        y = np.vstack(got)
        return y @ np.linalg.matrix_power(self.b_inv, j).T

    def measure_overlap_stratified(self, samples: int = 1_000_000, seed: int = 0, n_min: int = 32,
                                   n_levels: int = 8) -> OverlapReport:
        """Stratified Monte Carlo over the shells b^{-j}(D) minus b^{-j-1}(D).

        Shells beyond J_max + 1 carry no mass once the sum is truncated.
        Per-shell sample counts follow the expected L2 contribution q^j with
        a floor of ``n_min``; shard seeds derive from ``seed``.
        """
        J = self.J_max + 1
        w = self.q ** np.arange(J + 1)
        alloc = np.maximum(n_min, np.floor((samples - n_min * (J + 1)) * w / w.sum())).astype(int)
        # hand the rounding remainder to the heaviest shells
        short = samples - int(alloc.sum())
        if short > 0:
            alloc[: min(short, J + 1)] += 1
            alloc[0] += max(0, short - (J + 1))
        streams = np.random.SeedSequence(seed).spawn(J + 1)
        shell_vol = self.D_volume * (1 - 1 / self.det_b)
        f_all, g_all, strata, lev_all, vols = [], [], [], [], []
        start = 0
        for j in range(J + 1):
            rng = np.random.default_rng(streams[j])
            x = self._sample_shell(j, alloc[j], rng)
            fx = self(x)
            fa = self(x @ self.matrix.T)
            # values in shell j are of order sigma^{2j} and the shell volume of
            # order det^{-j}; carrying the product q^j as the weight avoids overflow
            s = self.sigma ** (2 * j)
            f_all.append(fx * fa / s)
            g_all.append(fx * fx / s)
            lev_all.append(self.levels(x))
            idx = np.arange(start, start + len(x))
            strata.append((idx, shell_vol * self.q ** j))
            vols.append(shell_vol * self.det_b ** -j)
            start += len(x)
        f = np.concatenate(f_all)
        g = np.concatenate(g_all)
        lev = np.concatenate(lev_all)
        ratio, se = _ratio_with_stderr(f, g, strata, self.det_abs)
        # measures of the first few level sets, for the |E_j| = |det|^{-j} |E_0| check
        meas, meas_se = [], []
        for l in range(min(n_levels, self.J_max + 1)):
            ind = (lev == l).astype(float)
            m = sum(wt * ind[idx].mean() for (idx, _), wt in zip(strata, vols))
            v = sum(wt * wt * ind[idx].var(ddof=1) / len(idx) for (idx, _), wt in zip(strata, vols))
            meas.append(float(m))
            meas_se.append(float(np.sqrt(v)))
        extras = {
            "analytic_ratio_truncated": float(self.analytic_ratio_truncated),
            "J_max": self.J_max,
            "level_measures": meas,
            "level_measures_stderr": meas_se,
            "unresolved": int(np.sum(lev == -2)),
        }
        return OverlapReport(self.kind, self.params, self.analytic_ratio, ratio, se, int(alloc.sum()), seed,
                             "monte-carlo(stratified)", extras)


def expansive_geometric_witness(A, sigma: float, sample_count: int = 1_000_000, seed: int = 0,
                                J_max: Optional[int] = None) -> tuple[GeometricWitness, OverlapReport]:
    w = GeometricWitness(A, sigma, J_max)
    return w, w.measure_overlap_stratified(sample_count, seed)


# ---------------------------------------------------------------------------
# orbits of a small ball under unimodular Jordan blocks


def shear_block(size: int, lam: float) -> np.ndarray:
    return lam * np.eye(size) + np.eye(size, k=1)


def rotation_block(size: int, theta: float) -> np.ndarray:
    if size % 2 or size < 4:
        raise ValueError("rotation-shear block needs an even size >= 4")
    M = np.array([[np.cos(theta), np.sin(theta)], [-np.sin(theta), np.cos(theta)]])
    m = size // 2
    out = np.kron(np.eye(m), M) + np.kron(np.eye(m, k=1), np.eye(2))
    return out


class OrbitWitness(WitnessFunction):
    """phi_k = sum_{j=0}^{k} 1 on A^j(2^{-k} B_rho(p)) for pairwise disjoint images."""

    def __init__(self, A, k: int, center, radius: float, kind: str, params: dict):
        self.kind = kind
        super().__init__(A, params)
        self.k = int(k)
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.scale = 2.0 ** -self.k
        self.powers = [np.linalg.matrix_power(self.matrix, j) for j in range(self.k + 1)]
        self.inv_powers = [np.linalg.inv(P) for P in self.powers]
        self.params = dict(params, radius=self.radius)
        if self.support_radius > 1.0:
            raise ValueError(f"support reaches |x| = {self.support_radius:.4g} > 1")

    @property
    def support_radius(self) -> float:
        return max(self.scale * (np.linalg.norm(P @ self.center) + self.radius * np.linalg.norm(P, 2))
                   for P in self.powers)

    def memberships(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        c = self.scale * self.center
        r2 = (self.scale * self.radius) ** 2
        out = np.zeros((len(x), self.k + 1), dtype=bool)
        for j, Pi in enumerate(self.inv_powers):
            y = x @ Pi.T - c
            out[:, j] = np.einsum("ni,ni->n", y, y) < r2
        return out

    def __call__(self, x) -> np.ndarray:
        return self.memberships(x).sum(axis=1).astype(float)

    @property
    def analytic_ratio(self) -> float:
        return self.k / (self.k + 1)

    def sample_images(self, n_per: int, rng) -> np.ndarray:
        d = self.dim
        pts = []
        for P in self.powers:
            u = rng.standard_normal((n_per, d))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            u *= self.radius * rng.uniform(size=(n_per, 1)) ** (1.0 / d)
            pts.append(self.scale * (self.center + u) @ P.T)
        return np.vstack(pts)

    def overlap_count(self, samples: int = 100_000, seed: int = 0) -> int:
        """Number of sampled support points lying in two or more images."""
        rng = np.random.default_rng(seed)
        x = self.sample_images(max(1, samples // (self.k + 1)), rng)
        return int(np.sum(self.memberships(x).sum(axis=1) > 1))

    def measure_overlap(self, samples: int = 100_000, seed: int = 0) -> OverlapReport:
        """Monte Carlo with the equal mixture of uniform laws on the k+1 images.

        Dividing by the mixture density gives unbiased integrals of any
        function supported on the union.
        """
        rng = np.random.default_rng(seed)
        n_per = max(2, samples // (self.k + 1))
        x = self.sample_images(n_per, rng)
        mem = self.memberships(x)
        ball = unit_ball_volume(self.dim) * (self.scale * self.radius) ** self.dim
        vols = ball * self.det_abs ** np.arange(self.k + 1)
        density = (mem / vols).sum(axis=1) / (self.k + 1)
        fx = mem.sum(axis=1).astype(float)
        fa = self(x @ self.matrix.T)
        ratio, se = _ratio_with_stderr(fx * fa / density, fx * fx / density,
                                       [(np.arange(len(x)), 1.0)], self.det_abs)
        return OverlapReport(self.kind, self.params, self.analytic_ratio, ratio, se, len(x), seed,
                             "monte-carlo(image-mixture)",
                             {"overlapping_samples": int(np.sum(mem.sum(axis=1) > 1))})


def _separated(A, center, radius: float, k: int) -> bool:
    """Images of B_radius(center) under A^0..A^k are disjoint if centres are
    further apart than the sum of circumradii."""
    P = [np.linalg.matrix_power(A, j) for j in range(k + 1)]
    c = [Pj @ center for Pj in P]
    rad = [radius * np.linalg.norm(Pj, 2) for Pj in P]
    for j in range(k + 1):
        for l in range(j + 1, k + 1):
            if np.linalg.norm(c[j] - c[l]) <= rad[j] + rad[l]:
                return False
    return True


def jordan_shear_witness(k: int, lam: float, d: int, samples: int = 100_000,
                         seed: int = 0) -> tuple[OrbitWitness, OverlapReport]:
    if k < 5:
        raise ValueError("shear family needs k >= 5 for the support to fit in B_1")
    if lam not in (1, -1):
        raise ValueError("shear block eigenvalue must be +1 or -1")
    if d < 2:
        raise ValueError("shear block needs d >= 2")
    A = shear_block(d, float(lam))
    p = np.zeros(d)
    p[:2] = 1.0
    orbit = [np.linalg.matrix_power(A, j) @ p for j in range(k + 1)]
    for j in range(k + 1):
        for l in range(j + 1, k + 1):
            if np.linalg.norm(orbit[j] - orbit[l]) < 1.0:
                raise ValueError("orbit points closer than 1; disjointness not certified")
    radius = 0.25
    # the centre spacing argument is planar; confirm on samples and shrink if needed
    while True:
        w = OrbitWitness(A, k, p, radius, "jordan_shear", {"k": k, "lambda": lam, "d": d})
        if w.overlap_count(samples, seed) == 0:
            break
        radius /= 2
        if radius < 2.0 ** -40:
            raise ValueError("could not separate the orbit images")
    return w, w.measure_overlap(samples, seed)


def jordan_rotation_witness(k: int, theta: float, d: int = 4, samples: int = 100_000,
                            seed: int = 0) -> tuple[OrbitWitness, OverlapReport]:
    if k < 7:
        raise ValueError("rotation family needs k >= 7")
    A = rotation_block(d, theta)
    q = np.zeros(d)
    q[:4] = 1.0
    radius = 0.25
    while not _separated(A, q, radius, k):
        radius /= 2
        if radius < 2.0 ** -40:
            raise ValueError("orbit points collide; no admissible radius separates the images")
    w = OrbitWitness(A, k, q, radius, "jordan_rotation", {"k": k, "theta": theta, "d": d})
    return w, w.measure_overlap(samples, seed)


# ---------------------------------------------------------------------------
# isometric blocks and the Jordan composition


class UnitBallWitness(WitnessFunction):
    """Normalised indicator of B_1; its overlap ratio is exactly one for orthogonal maps."""

    kind = "unit_ball"

    def __init__(self, A):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if not np.allclose(A.T @ A, np.eye(A.shape[0]), atol=1e-12):
            raise ValueError("unit-ball witness needs an orthogonal block")
        super().__init__(A, {"A": A.tolist()})
        self.height = unit_ball_volume(self.dim) ** -0.5

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.where(np.einsum("ni,ni->n", x, x) < 1.0, self.height, 0.0)

    @property
    def analytic_ratio(self) -> float:
        return 1.0

    @property
    def support_radius(self) -> float:
        return 1.0


class ComposedWitness(WitnessFunction):
    """Phi(x) = t^{d/2} |det C|^{-1/2} phi(t C^{-1} x) with phi the block product.

    ``t = sqrt(r+s) ||C||`` keeps the support inside B_1 and the scaling
    preserves the L2 norm, while the overlap under ``C J C^{-1}`` equals the
    overlap of the block product under ``J``.
    """

    kind = "composed"

    def __init__(self, C, blocks: Sequence[WitnessFunction]):
        C = np.atleast_2d(np.asarray(C, dtype=float))
        dims = [b.dim for b in blocks]
        if sum(dims) != C.shape[0] or C.shape[0] != C.shape[1]:
            raise ValueError("block dimensions do not match C")
        J = linalg.block_diag(*[b.matrix for b in blocks])
        A = C @ J @ np.linalg.inv(C)
        super().__init__(A, {"C": C.tolist(), "blocks": [b.kind for b in blocks]})
        self.C = C
        self.C_inv = np.linalg.inv(C)
        self.blocks = list(blocks)
        self.offsets = np.cumsum([0] + dims)
        self.t = np.sqrt(len(blocks)) * np.linalg.norm(C, 2)
        self.prefactor = self.t ** (self.dim / 2) * abs(np.linalg.det(C)) ** -0.5

    def product(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        out = np.ones(len(y))
        for b, lo, hi in zip(self.blocks, self.offsets[:-1], self.offsets[1:]):
            out = out * b(y[:, lo:hi])
        return out

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.prefactor * self.product(self.t * x @ self.C_inv.T)

    @property
    def analytic_ratio(self) -> float:
        return float(np.prod([b.analytic_ratio for b in self.blocks]))

    @property
    def support_radius(self) -> float:
        # block supports sit in unit balls, so |y| <= sqrt(r+s) and |x| <= ||C|| |y| / t
        return float(np.linalg.norm(self.C, 2) * np.sqrt(len(self.blocks)) / self.t)


def composed_witness(C, blocks: Sequence[WitnessFunction]) -> ComposedWitness:
    return ComposedWitness(C, blocks)


def block_witness(J, sigma: Optional[float] = None, k: int = 9, J_max: Optional[int] = None) -> WitnessFunction:
    """Pick the family that fits one real Jordan block."""
    J = np.atleast_2d(np.asarray(J, dtype=float))
    n = J.shape[0]
    eig = np.abs(np.linalg.eigvals(J))
    if np.all(eig > 1) or np.all(eig < 1):
        det = abs(np.linalg.det(J))
        s = sigma if sigma is not None else 0.99 * np.sqrt(max(det, 1 / det))
        return GeometricWitness(J, s, J_max)
    if np.allclose(J.T @ J, np.eye(n), atol=1e-12):
        return UnitBallWitness(J)
    if np.allclose(J, shear_block(n, J[0, 0])) and J[0, 0] in (1.0, -1.0):
        return jordan_shear_witness(max(k, 5), J[0, 0], n)[0]
    if n >= 4 and n % 2 == 0:
        theta = np.arctan2(J[0, 1], J[0, 0])
        if np.allclose(J, rotation_block(n, theta)):
            return jordan_rotation_witness(max(k, 7), theta, n)[0]
    raise ValueError("block is not a recognised real Jordan block")
