import numpy as np
import pytest

from nonlocal_eig import assemble_operator, build_grid, rayleigh_quotient, smallest_eigenpair, sweep_radius
from nonlocal_eig.discretize import Grid
from nonlocal_eig.spectra import dense_smallest_eigenpair, extrapolate_power_tail

from conftest import make_kernel

# upper bracket for R=16, h=0.05 comes from the dense oracle at R=4, h=0.05:
# lambda1(B_R) is nonincreasing in R, so lambda1(B_4) bounds lambda1(B_16)
UPPER_BRACKET_R16 = 0.409911
LOWER_BOUND = 0.171573


def test_upper_bracket_from_dense_oracle(dilation_kernel):
    op = assemble_operator(build_grid(1, 4.0, 0.05, dilation_kernel.map), dilation_kernel)
    lam, _ = dense_smallest_eigenpair(op)
    assert 2 * lam == pytest.approx(UPPER_BRACKET_R16, abs=1e-6)


def test_dilation_bracket(dilation_kernel):
    op = assemble_operator(build_grid(1, 16.0, 0.05, dilation_kernel.map), dilation_kernel)
    res = smallest_eigenpair(op)
    assert res.converged
    assert LOWER_BOUND - 1e-4 <= res.lambda1 <= UPPER_BRACKET_R16
    assert res.lambda1 == 2 * res.lambda_T
    assert np.all(res.eigvec > 0)
    assert np.sum(res.eigvec ** 2) * op.grid.cell_volume == pytest.approx(1.0, rel=1e-12)


def test_scalar_operator():
    k = make_kernel([[1.0]])
    ext = np.array([[0.1 * j] for j in range(-20, 21) if j != 0])
    g = Grid(1, 0.05, 0.1, np.zeros((1, 1)), ext, 2.1)
    op = assemble_operator(g, k)
    res = smallest_eigenpair(op)
    assert res.lambda_T == pytest.approx(op.T[0, 0], rel=1e-15)
    assert res.eigvec.shape == (1,)


@pytest.mark.parametrize("seed", range(6))
def test_matches_dense(seed):
    rng = np.random.default_rng(100 + seed)
    d = 1 + seed % 2
    A = rng.uniform(-1, 1, (d, d)) + np.diag(rng.choice([-1.8, 1.6], d))
    k = make_kernel(A, ["epanechnikov", "indicator"][seed % 2])
    g = build_grid(d, 2.0, 0.1 if d == 1 else 0.5, k.map)
    op = assemble_operator(g, k)
    res = smallest_eigenpair(op, tol=1e-12)
    lam, v = dense_smallest_eigenpair(op)
    assert res.lambda_T == pytest.approx(lam, rel=1e-8)
    if not res.near_degenerate:
        assert np.allclose(res.eigvec, v, atol=1e-6)


def test_residual_criterion(dilation_kernel):
    op = assemble_operator(build_grid(1, 4.0, 0.05, dilation_kernel.map), dilation_kernel)
    res = smallest_eigenpair(op, tol=1e-10)
    v = res.eigvec / np.linalg.norm(res.eigvec)
    r = np.linalg.norm(op.T @ v - res.lambda_T * v)
    assert r <= 1e-10 * op.gershgorin_bound
    assert res.iterations > 0


def test_rayleigh_quotient_properties(dilation_kernel):
    g = build_grid(1, 4.0, 0.05, dilation_kernel.map)
    op = assemble_operator(g, dilation_kernel)
    res = smallest_eigenpair(op, tol=1e-12)
    assert rayleigh_quotient(g, dilation_kernel, res.eigvec) == pytest.approx(res.lambda1, rel=1e-9)
    rng = np.random.default_rng(3)
    for _ in range(5):
        assert rayleigh_quotient(g, dilation_kernel, rng.standard_normal(op.n)) >= res.lambda1 - 1e-10
    with pytest.raises(ValueError):
        rayleigh_quotient(g, dilation_kernel, np.zeros(op.n))
    with pytest.raises(ValueError):
        rayleigh_quotient(g, dilation_kernel, np.ones(op.n + 1))


def test_rayleigh_constant_decreases_for_convolution(convolution_kernel):
    vals = []
    for R in (4.0, 8.0, 16.0):
        g = build_grid(1, R, 0.05, convolution_kernel.map)
        vals.append(rayleigh_quotient(g, convolution_kernel, np.ones(g.n_interior)))
    assert vals[0] > vals[1] > vals[2]


@pytest.mark.parametrize("shape,order", [("indicator", 1.0), ("epanechnikov", 2.0)])
def test_refinement_order(shape, order):
    k = make_kernel([[1.0]], shape)
    lam = []
    for h in (0.025, 0.0125, 0.00625):
        lam.append(smallest_eigenpair(assemble_operator(build_grid(1, 4.0, h, k.map), k)).lambda_T)
    d1, d2 = abs(lam[0] - lam[1]), abs(lam[1] - lam[2])
    assert np.log2(d1 / d2) == pytest.approx(order, abs=0.25)


def test_sweep_monotone_and_csv(dilation_kernel):
    table = sweep_radius(dilation_kernel, [2, 4, 8], lambda R: R / 40)
    col = table.column()
    assert np.all(np.diff(col) <= 2e-10)
    text = table.to_csv().splitlines()
    assert text[0] == "R,h,lambda1,lambda_T,iterations,residual,converged"
    assert len(text) == 4
    assert "np.float64" not in table.to_csv()


def test_sweep_parallel_matches_serial(dilation_kernel):
    a = sweep_radius(dilation_kernel, [2, 4, 8], 0.1, jobs=1)
    b = sweep_radius(dilation_kernel, [2, 4, 8], 0.1, jobs=3)
    assert a.to_csv() == b.to_csv()


def test_sweep_validation(dilation_kernel):
    with pytest.raises(ValueError):
        sweep_radius(dilation_kernel, [4, 2], 0.1)
    with pytest.raises(ValueError):
        sweep_radius(dilation_kernel, [2], 1.0)


def test_single_radius_limit(dilation_kernel):
    t = sweep_radius(dilation_kernel, [4], 0.1)
    assert t.limit == t.rows[0].lambda1
    assert t.method == "last-value"


def test_extrapolation_exact_power_tail():
    R = np.array([2.0, 4.0, 8.0, 16.0])
    vals = 0.3 + 0.7 * R ** -1.5
    lim, method = extrapolate_power_tail(R, vals)
    assert lim == pytest.approx(0.3, abs=1e-10)
    assert method.startswith("power-tail")
    assert extrapolate_power_tail([1, 2, 3], [1.0, 1.0, 1.0])[1] == "last-value"
