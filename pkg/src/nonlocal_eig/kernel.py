"""Profiles, deformation maps and the symmetric kernel built from them.

The kernel couples a compactly supported profile ``psi`` with a
diffeomorphism ``a``::

    K(x, y) = psi(y - a(x)) + psi(x - a(y))

Points are passed as arrays whose last axis has length ``d``; a 1-D
array of length ``d`` is a single point, an ``(n, d)`` array is a batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special

SHAPES = ("indicator", "epanechnikov", "bump")


def unit_ball_volume(d: int) -> float:
    return float(np.pi ** (d / 2) / special.gamma(d / 2 + 1))


def _as_points(z, d: int) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim == 0:
        z = z.reshape(1)
    if z.shape[-1] != d:
        raise ValueError(f"expected points of dimension {d}, got shape {z.shape}")
    return z


def _raw_radial_moment(shape: str, d: int, power: int) -> float:
    """Integral of |z|**power * shape(z) over the unit ball, unit constant."""
    area = d * unit_ball_volume(d)
    if shape == "indicator":
        return area / (d + power)
    if shape == "epanechnikov":
        return area * (1.0 / (d + power) - 1.0 / (d + power + 2))
    # bump: exp(-1/(1-r^2)) has no elementary antiderivative
    val, _ = integrate.quad(
        lambda r: r ** (d - 1 + power) * np.exp(-1.0 / (1.0 - r * r)) if r < 1 else 0.0,
        0.0,
        1.0,
        epsabs=1e-15,
        epsrel=1e-13,
        limit=200,
    )
    return area * val


@dataclass(frozen=True)
class Profile:
    """Radial profile ``c * shape(|z|)`` supported in the closed unit ball.

    ``constant`` is the multiplier ``c``.  Use :meth:`normalized` to pick it
    so that the profile has a prescribed mass.
    """

    shape: str
    dim: int
    constant: float = 1.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown profile shape {self.shape!r}; choose from {SHAPES}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError("profile dimension must be a positive integer")
        if not np.isfinite(self.constant) or self.constant <= 0:
            raise ValueError("profile constant must be positive (mass must be positive)")

    @classmethod
    def normalized(cls, shape: str = "epanechnikov", dim: int = 1, mass: float = 1.0) -> "Profile":
        if mass <= 0:
            raise ValueError("profile mass must be positive")
        return cls(shape, dim, mass / _raw_radial_moment(shape, dim, 0))

    def __call__(self, z) -> np.ndarray:
        return profile_eval(self, z)

    @property
    def mass(self) -> float:
        return profile_mass(self)

    @property
    def second_moment(self) -> float:
        return profile_second_moment(self)

    @property
    def sup(self) -> float:
        # every built-in shape peaks at the origin
        return self.constant * (np.exp(-1.0) if self.shape == "bump" else 1.0)


def profile_eval(profile: Profile, z) -> np.ndarray:
    """Evaluate psi at one point or a batch of points; zero outside the unit ball."""
    z = _as_points(z, profile.dim)
    r2 = np.einsum("...i,...i->...", z, z)
    inside = r2 < 1.0
    if profile.shape == "indicator":
        out = inside.astype(float)
    elif profile.shape == "epanechnikov":
        out = np.where(inside, 1.0 - r2, 0.0)
    else:
        with np.errstate(divide="ignore", over="ignore"):
            out = np.where(inside, np.exp(-1.0 / np.where(inside, 1.0 - r2, 1.0)), 0.0)
    return profile.constant * out


def profile_mass(profile: Profile) -> float:
    return profile.constant * _raw_radial_moment(profile.shape, profile.dim, 0)


def profile_second_moment(profile: Profile) -> float:
    """Integral of psi(z) |z|^2, the constant entering the finite-radius bound."""
    return profile.constant * _raw_radial_moment(profile.shape, profile.dim, 2)


@dataclass(frozen=True, eq=False)
class MapSpec:
    """A diffeomorphism ``a`` of R^d together with what the bounds need.

    Build instances with :meth:`linear` or :meth:`diffeo`.  ``jac_sup`` and
    ``jac_inf`` are the sup and inf of ``|J_{a^{-1}}|`` over R^d.
    """

    dim: int
    kind: str
    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    jacobian_inverse_abs: Callable[[np.ndarray], np.ndarray]
    jac_sup: float
    jac_inf: float
    homogeneous: bool = False
    matrix: Optional[np.ndarray] = None
    jordan_transform: Optional[np.ndarray] = None
    jordan_blocks: tuple = ()
    params: dict = field(default_factory=dict)

    @classmethod
    def linear(cls, A, jordan_transform=None, jordan_blocks: Sequence = (), atol: float = 1e-10) -> "MapSpec":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        d = A.shape[0]
        if A.shape != (d, d):
            raise ValueError("linear map needs a square matrix")
        det = np.linalg.det(A)
        if not np.isfinite(det) or abs(det) < 1e-14 or np.linalg.cond(A) > 1e12:
            raise ValueError("linear map matrix is singular")
        A_inv = np.linalg.inv(A)
        jac = 1.0 / abs(det)
        C = None
        blocks: tuple = ()
        if jordan_transform is not None:
            C = np.atleast_2d(np.asarray(jordan_transform, dtype=float))
            blocks = tuple(np.atleast_2d(np.asarray(b, dtype=float)) for b in jordan_blocks)
            if sum(b.shape[0] for b in blocks) != d or any(b.shape[0] != b.shape[1] for b in blocks):
                raise ValueError("Jordan blocks must be square and partition the dimension")
            if C.shape != (d, d):
                raise ValueError("Jordan transform must be d x d")
            from scipy.linalg import block_diag

            J = block_diag(*blocks)
            err = np.max(np.abs(C @ J @ np.linalg.inv(C) - A))
            if err > atol:
                raise ValueError(f"C J C^-1 differs from A by {err:.3e}")
        return cls(
            dim=d,
            kind="linear",
            forward=lambda x: np.asarray(x, dtype=float) @ A.T,
            inverse=lambda y: np.asarray(y, dtype=float) @ A_inv.T,
            jacobian_inverse_abs=lambda y: np.full(np.shape(y)[:-1], jac),
            jac_sup=jac,
            jac_inf=jac,
            homogeneous=True,
            matrix=A,
            jordan_transform=C,
            jordan_blocks=blocks,
        )

    @classmethod
    def diffeo(
        cls,
        dim: int,
        forward,
        inverse,
        jacobian_inverse_abs,
        jac_sup: float,
        jac_inf: float,
        homogeneous: bool = False,
        check_radius: float = 10.0,
        n_check: int = 4096,
        seed: int = 0,
        **params,
    ) -> "MapSpec":
        """Wrap user callables; declared Jacobian bounds are checked on samples."""
        if not (0 < jac_inf <= jac_sup < np.inf):
            raise ValueError("need 0 < jac_inf <= jac_sup < inf")
        spec = cls(dim, "diffeo", forward, inverse, jacobian_inverse_abs, float(jac_sup), float(jac_inf),
                   homogeneous, params=dict(params))
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-check_radius, check_radius, size=(n_check, dim))
        back = spec.forward(spec.inverse(pts))
        if np.max(np.abs(back - pts)) > 1e-10 * max(1.0, check_radius):
            raise ValueError("forward(inverse(y)) does not reproduce y")
        jv = spec.jacobian_inverse_abs(pts)
        slack = 1e-12 * jac_sup
        if np.any(jv > jac_sup + slack) or np.any(jv < jac_inf - slack):
            raise ValueError(
                f"sampled |J_a^-1| in [{jv.min():.6g}, {jv.max():.6g}] escapes declared "
                f"[{jac_inf:.6g}, {jac_sup:.6g}]"
            )
        return spec

    @classmethod
    def sine_perturbed(cls, alpha, beta) -> "MapSpec":
        """Diagonal map a(x)_k = alpha_k x_k + beta_k sin(x_k), |beta_k| < |alpha_k|."""
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        beta = np.atleast_1d(np.asarray(beta, dtype=float))
        if alpha.shape != beta.shape or alpha.ndim != 1:
            raise ValueError("alpha and beta must be equal-length vectors")
        if np.any(np.abs(beta) >= np.abs(alpha)):
            raise ValueError("need |beta_k| < |alpha_k| for invertibility")

        def forward(x):
            x = np.asarray(x, dtype=float)
            return alpha * x + beta * np.sin(x)

        def inverse(y):
            y = np.asarray(y, dtype=float)
            # monotone per coordinate: bracket then Newton with bisection fallback
            lo = (y - np.abs(beta)) / alpha
            hi = (y + np.abs(beta)) / alpha
            lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
            x = y / alpha
            sgn = np.sign(alpha)
            for _ in range(100):
                f = forward(x) - y
                step = f / (alpha + beta * np.cos(x))
                x_new = x - step
                # keep the bracket valid
                pos = sgn * f > 0
                hi = np.where(pos, x, hi)
                lo = np.where(pos, lo, x)
                out = (x_new <= lo) | (x_new >= hi)
                x_new = np.where(out, 0.5 * (lo + hi), x_new)
                if np.max(np.abs(x_new - x)) <= 1e-15 * max(1.0, np.max(np.abs(x))):
                    x = x_new
                    break
                x = x_new
            return x

        def jac_inv(y):
            x = inverse(y)
            return np.prod(1.0 / np.abs(alpha + beta * np.cos(x)), axis=-1)

        lo = np.abs(alpha) - np.abs(beta)
        hi = np.abs(alpha) + np.abs(beta)
        return cls.diffeo(
            len(alpha),
            forward,
            inverse,
            jac_inv,
            jac_sup=float(np.prod(1.0 / lo)),
            jac_inf=float(np.prod(1.0 / hi)),
            homogeneous=False,
            kind_name="sine_perturbed",
            alpha=alpha.tolist(),
            beta=beta.tolist(),
        )

    @property
    def det_abs(self) -> float:
        if self.matrix is None:
            raise ValueError("only linear maps have a determinant")
        return float(abs(np.linalg.det(self.matrix)))

    def reach_radii(self, R: float) -> tuple[float, float]:
        """Radii enclosing a(B_R) and a^{-1}(B_{R+1})."""
        if self.matrix is not None:
            A = self.matrix
            return (np.linalg.norm(A, 2) * R, np.linalg.norm(np.linalg.inv(A), 2) * (R + 1))
        if self.dim == 1:
            # in 1-D the Jacobian bounds are Lipschitz bounds for a and a^{-1}
            a0 = abs(float(self.forward(np.zeros(1))[0]))
            b0 = abs(float(self.inverse(np.zeros(1))[0]))
            return (a0 + R / self.jac_inf, b0 + self.jac_sup * (R + 1))
        return (_sampled_reach(self.forward, self.dim, R), _sampled_reach(self.inverse, self.dim, R + 1))


def _sampled_reach(f, d: int, R: float, n: int = 20000, pad: float = 1.1) -> float:
    rng = np.random.default_rng(12345)
    u = rng.normal(size=(n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = R * rng.uniform(0, 1, size=(n, 1)) ** (1.0 / d)
    pts = np.vstack([u * R, u * r, np.zeros((1, d))])
    return pad * float(np.max(np.linalg.norm(f(pts), axis=1))) + 1e-9


@dataclass(frozen=True)
class DeformationKernel:
    profile: Profile
    map: MapSpec

    def __post_init__(self):
        if self.profile.dim != self.map.dim:
            raise ValueError("profile and map dimensions differ")

    @property
    def dim(self) -> int:
        return self.profile.dim

    @property
    def psi_mass(self) -> float:
        return self.profile.mass

    def __call__(self, x, y) -> np.ndarray:
        return kernel_eval(self, x, y)


def kernel_eval(kernel: DeformationKernel, x, y) -> np.ndarray:
    """K(x, y) = psi(y - a(x)) + psi(x - a(y)); broadcasts over leading axes."""
    d = kernel.dim
    x = _as_points(x, d)
    y = _as_points(y, d)
    a = kernel.map.forward
    first = profile_eval(kernel.profile, y - a(x))
    second = profile_eval(kernel.profile, x - a(y))
    out = first + second
    return out[0] if out.shape == (1,) else out


def kernel_mass(kernel: DeformationKernel, x, epsrel: float = 1e-10) -> float:
    """m(x) = int K(x, y) dy = int psi + (psi * |J_{a^{-1}}|)(x)."""
    d = kernel.dim
    x = _as_points(x, d).reshape(d)
    psi_mass = profile_mass(kernel.profile)
    if kernel.map.matrix is not None:
        return psi_mass * (1.0 + 1.0 / kernel.map.det_abs)
    jac = kernel.map.jacobian_inverse_abs
    prof = kernel.profile

    def integrand(*z):
        z = np.asarray(z, dtype=float)
        return float(np.ravel(profile_eval(prof, x - z))[0] * np.ravel(jac(z.reshape(1, d)))[0])

    if d == 1:
        val, err = integrate.quad(integrand, x[0] - 1.0, x[0] + 1.0, epsrel=epsrel, epsabs=1e-13, limit=200)
    else:
        val = _polar_convolution(prof, jac, x, 48)
        err = abs(val - _polar_convolution(prof, jac, x, 24))
    if not np.isfinite(val) or err > 1e-6 * max(1.0, abs(val)):
        raise RuntimeError(f"kernel mass quadrature did not converge (error estimate {err:.3e})")
    return psi_mass + val


def _polar_convolution(prof: Profile, jac, x: np.ndarray, n: int) -> float:
    """int psi(r) |J(x - r w)| over the unit ball in polar coordinates about x.

    psi is radial and smooth inside its support, so Gauss-Legendre in r and
    the periodic trapezoid rule in angle converge quickly.
    """
    d = len(x)
    r, wr = np.polynomial.legendre.leggauss(n)
    r, wr = 0.5 * (r + 1.0), 0.5 * wr
    if d == 2:
        th = 2 * np.pi * np.arange(2 * n) / (2 * n)
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
        wdir = np.full(len(th), 2 * np.pi / len(th))
    else:
        c, wc = np.polynomial.legendre.leggauss(n)
        ph = 2 * np.pi * np.arange(2 * n) / (2 * n)
        C, P = np.meshgrid(c, ph, indexing="ij")
        S = np.sqrt(1 - C ** 2)
        dirs = np.stack([(S * np.cos(P)).ravel(), (S * np.sin(P)).ravel(), C.ravel()], axis=1)
        wdir = np.outer(wc, np.full(len(ph), 2 * np.pi / len(ph))).ravel()
    pts = x - (r[:, None, None] * dirs[None, :, :]).reshape(-1, d)
    radial = np.ravel(profile_eval(prof, r[:, None] * np.eye(d)[0]))
    vals = np.ravel(jac(pts)).reshape(len(r), len(dirs))
    return float(np.einsum("i,i,ij,j->", wr * r ** (d - 1), radial, vals, wdir))
