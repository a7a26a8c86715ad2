"""Closed-form bounds on the whole-space principal eigenvalue.

All values use the energy-quotient convention (``lambda1``) and scale
linearly with the profile mass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .kernel import DeformationKernel, MapSpec

LOWER_CASES = ("M<1", "m>1", "not-applicable")


@dataclass(frozen=True)
class Candidate:
    """Trial function supported in the unit ball, with optional gradient.

    ``func`` and ``grad`` take an ``(n, d)`` array; ``grad`` returns ``(n, d)``.
    """

    func: Callable[[np.ndarray], np.ndarray]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "candidate"

    def __call__(self, x):
        return self.func(x)


def _as_candidate(phi) -> Candidate:
    if isinstance(phi, Candidate):
        return phi
    if callable(phi):
        return Candidate(phi, name=getattr(phi, "__name__", "candidate"))
    raise TypeError("candidate must be callable")


def closed_form_linear(A, psi_mass: float) -> float:
    """2 (1 - |det A|^{-1/2})^2 * psi_mass."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    det = abs(np.linalg.det(A))
    if not np.isfinite(det) or det < 1e-14 or np.linalg.cond(A) > 1e12:
        raise ValueError("matrix is singular")
    return 2.0 * (1.0 - det ** -0.5) ** 2 * psi_mass


def lower_bound_thm2(kernel: DeformationKernel) -> tuple[Optional[float], str]:
    M, m = kernel.map.jac_sup, kernel.map.jac_inf
    mass = kernel.psi_mass
    if M < 1:
        return 2.0 * (1.0 - np.sqrt(M)) ** 2 * mass, "M<1"
    if m > 1:
        return 2.0 * (np.sqrt(m) - 1.0) ** 2 * mass, "m>1"
    return None, "not-applicable"


def upper_bound_sup(kernel: DeformationKernel) -> float:
    return 2.0 * (1.0 + kernel.map.jac_sup) * kernel.psi_mass


def _quadrature_box(amap: MapSpec) -> float:
    """Half-width of a box containing B_1 and a^{-1}(B_1)."""
    if amap.matrix is not None:
        return max(1.0, float(np.linalg.norm(np.linalg.inv(amap.matrix), 2)))
    return max(1.0, amap.reach_radii(0.0)[1])


def _midpoint_nodes(d: int, half: float, n: int) -> tuple[np.ndarray, float]:
    h = 2 * half / n
    c = -half + (np.arange(n) + 0.5) * h
    if d == 1:
        return c[:, None], h
    mesh = np.meshgrid(*([c] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1), h ** d


def _default_points(d: int) -> int:
    return {1: 200_000, 2: 1200, 3: 120}[d]


def candidate_energy(amap: MapSpec, phi, n: Optional[int] = None, method: str = "grid") -> float:
    """int (phi(x) - phi(a x))^2 dx / int phi^2, by quadrature.

    ``method="grid"`` is a midpoint rule on a box covering B_1 and
    a^{-1}(B_1) with ``n`` points per axis; ``"adaptive"`` (1-D only) uses
    QUADPACK on the same interval.
    """
    phi = _as_candidate(phi)
    d = amap.dim
    half = _quadrature_box(amap)
    if method == "adaptive":
        if d != 1:
            raise ValueError("adaptive candidate quadrature is 1-D only")
        f = lambda t: float(phi(np.array([[t]]))[0])
        g = lambda t: float(phi(amap.forward(np.array([[t]])))[0])
        opts = dict(limit=500, epsabs=1e-13, epsrel=1e-11)
        pts = [-1.0, 0.0, 1.0]
        norm = integrate.quad(lambda t: f(t) ** 2, -half, half, points=pts, **opts)[0]
        diff = integrate.quad(lambda t: (f(t) - g(t)) ** 2, -half, half, points=pts, **opts)[0]
    else:
        x, w = _midpoint_nodes(d, half, n or _default_points(d))
        fx = phi(x)
        fa = phi(amap.forward(x))
        norm = float(np.sum(fx * fx) * w)
        diff = float(np.sum((fx - fa) ** 2) * w)
    if not norm > 1e-300:
        raise ValueError("candidate is numerically zero")
    return diff / norm


def gradient_energy(phi: Candidate, d: int, n: Optional[int] = None) -> float:
    """int |grad phi|^2 / int phi^2 over the unit box."""
    if phi.grad is None:
        raise ValueError("finite-radius bound needs the candidate gradient")
    x, w = _midpoint_nodes(d, 1.0, n or _default_points(d))
    g = np.asarray(phi.grad(x)).reshape(len(x), d)
    f = phi(x)
    norm = float(np.sum(f * f) * w)
    if not norm > 1e-300:
        raise ValueError("candidate is numerically zero")
    return float(np.sum(g * g) * w) / norm


def upper_bound_candidate(kernel: DeformationKernel, phi, n: Optional[int] = None, method: str = "grid") -> float:
    """2 int psi * int (phi - phi o a)^2 for a unit-norm phi (normalised internally)."""
    if not kernel.map.homogeneous:
        raise ValueError("candidate upper bound needs a map homogeneous of degree one")
    return 2.0 * kernel.psi_mass * candidate_energy(kernel.map, phi, n=n, method=method)


def energy_from_overlap(det_abs: float, ratio: float) -> float:
    """int (phi - phi o a)^2 for unit-norm phi with overlap ratio ``ratio``."""
    return 1.0 + 1.0 / det_abs - 2.0 * det_abs ** -0.5 * ratio


def upper_bound_from_ratio(kernel: DeformationKernel, ratio: float) -> float:
    if kernel.map.matrix is None:
        raise ValueError("overlap ratios are defined for linear maps")
    return 2.0 * kernel.psi_mass * energy_from_overlap(kernel.map.det_abs, ratio)


def young_constant(delta: float) -> float:
    """C(delta) with 2(A+B)^2 <= (2+delta) A^2 + C(delta) B^2."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    return 2.0 * (1.0 + 2.0 / delta)


@dataclass(frozen=True)
class FiniteRadiusBound:
    delta: float
    R: float
    psi_mass: float
    psi_second_moment: float
    candidate_energy: float
    gradient_energy: float
    jac_sup: float

    @property
    def C(self) -> float:
        return young_constant(self.delta)

    @property
    def leading(self) -> float:
        return (2.0 + self.delta) * self.psi_mass * self.candidate_energy

    @property
    def remainder(self) -> float:
        return self.C / self.R ** 2 * self.psi_second_moment * self.gradient_energy * self.jac_sup

    @property
    def value(self) -> float:
        return self.leading + self.remainder


def finite_radius_bound(kernel: DeformationKernel, phi, R: float, delta: float, n: Optional[int] = None) -> FiniteRadiusBound:
    """Upper bound on lambda1(B_R) from a smooth candidate.

    ``jac_sup`` is exact for linear maps; for other maps the declared global
    supremum is used, which dominates the supremum over B_{1+1/R}.
    """
    phi = _as_candidate(phi)
    if phi.grad is None:
        raise ValueError("finite-radius bound needs the candidate gradient")
    if not kernel.map.homogeneous:
        raise ValueError("finite-radius bound needs a map homogeneous of degree one")
    if not R > 0:
        raise ValueError("R must be positive")
    young_constant(delta)
    return FiniteRadiusBound(
        delta=float(delta),
        R=float(R),
        psi_mass=kernel.psi_mass,
        psi_second_moment=kernel.profile.second_moment,
        candidate_energy=candidate_energy(kernel.map, phi, n=n),
        gradient_energy=gradient_energy(phi, kernel.dim, n=n),
        jac_sup=kernel.map.jac_sup,
    )


@dataclass
class BoundReport:
    lower: Optional[float]
    lower_case: str
    upper_sup: float
    upper_candidate: Optional[float]
    candidate_id: Optional[str]
    exact_linear: Optional[float]
    psi_mass: float

    def as_dict(self) -> dict:
        return {
            "lower": self.lower,
            "lower_case": self.lower_case,
            "upper_sup": self.upper_sup,
            "upper_candidate": self.upper_candidate,
            "candidate_id": self.candidate_id,
            "exact_linear": self.exact_linear,
            "psi_mass": self.psi_mass,
        }


def bound_report(kernel: DeformationKernel, candidate=None) -> BoundReport:
    lower, case = lower_bound_thm2(kernel)
    exact = closed_form_linear(kernel.map.matrix, kernel.psi_mass) if kernel.map.matrix is not None else None
    up_c = cid = None
    if candidate is not None and kernel.map.homogeneous:
        cand = _as_candidate(candidate)
        up_c, cid = upper_bound_candidate(kernel, cand), cand.name
    return BoundReport(lower, case, upper_bound_sup(kernel), up_c, cid, exact, kernel.psi_mass)


def default_candidate(d: int) -> Candidate:
    """Smooth radial trial function (1 - |x|^2)^2 on B_1."""

    def f(x):
        r2 = np.sum(np.asarray(x, dtype=float) ** 2, axis=-1)
        return np.where(r2 < 1, (1 - r2) ** 2, 0.0)

    def g(x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        return np.where((r2 < 1)[:, None], -4 * (1 - r2)[:, None] * x, 0.0)

    return Candidate(f, g, name=f"smooth-radial-d{d}")
