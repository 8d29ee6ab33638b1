"""Product-integration march for the weakly singular time-domain equation."""
import warnings

import numpy as np
import pytest

from nltdyn import (
    BoundaryData,
    InstabilityError,
    ModelParams,
    TimeGrid,
    TimeKernel,
    default_grading,
    ttilde_series,
    volterra_march,
)


def series_on(nodes, kernel, n_terms=30):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return np.array([ttilde_series(t, kernel, n_terms) for t in np.atleast_1d(nodes)])


class TestTimeGrid:
    @pytest.mark.parametrize("args, msg", [
        ((0.0, 64), "tau_max must be positive"),
        ((0.5, 4), "M must be at least 8"),
        ((0.5, 64, 1.5), "gamma must be >= 2"),
    ])
    def test_validation(self, args, msg):
        with pytest.raises(ValueError, match=msg):
            TimeGrid(*args)

    def test_nodes_graded_toward_zero(self):
        g = TimeGrid(0.5, 64, gamma=4.0)
        assert len(g.nodes) == 64
        assert g.nodes[-1] == 0.5
        assert np.all(np.diff(g.nodes) > 0)
        # grading packs nodes near tau = 0
        assert g.nodes[0] < 0.5 / 64

    def test_refined_doubles(self):
        g = TimeGrid(0.5, 64, gamma=4.0)
        r = g.refined()
        assert (r.tau_max, r.M, r.gamma) == (0.5, 128, 4.0)
        # every coarse node survives refinement
        np.testing.assert_allclose(r.nodes[1::2], g.nodes, rtol=1e-14)


@pytest.mark.parametrize("alpha, want", [(0.25, 8.0), (0.4, 10.0), (0.05, 2.0 / 0.45)])
def test_default_grading(alpha, want):
    assert default_grading(ModelParams(alpha=alpha, c1=1.0, mu=0.5)) == pytest.approx(want)


def test_march_rejects_local_regime(local_params):
    with pytest.raises(ValueError, match="nonlocal regime"):
        volterra_march(local_params, BoundaryData.reference(-1.0, 1.0), TimeGrid(0.5, 64))


def test_march_rejects_shallow_grading():
    p = ModelParams(alpha=0.4, c1=1.0, mu=0.5)
    with pytest.raises(ValueError, match="short-time power unresolved"):
        volterra_march(p, BoundaryData.asymptotic(0.02), TimeGrid(0.5, 64, gamma=2.0))


class TestDegenerateCoupling:
    def test_seed_passthrough(self):
        p0 = ModelParams(alpha=0.25, c1=0.0, mu=0.5)
        seed = lambda tau: np.full(np.shape(tau), 2.0 + 1.0j)
        out = volterra_march(p0, BoundaryData.asymptotic(0.02), TimeGrid(0.3, 16), seed_fn=seed)
        assert out.shape == (16,)
        assert np.all(out == 2.0 + 1.0j)

    def test_default_seed_unavailable(self):
        p0 = ModelParams(alpha=0.25, c1=0.0, mu=0.5)
        with pytest.raises(ValueError, match="explicit seed_fn"):
            volterra_march(p0, BoundaryData.asymptotic(0.02), TimeGrid(0.3, 16))


def test_march_reproduces_terminating_series(nonlocal_params):
    # at b2 = 0 the series solution is a single exact power, so the march
    # error is pure quadrature error
    b0 = BoundaryData.asymptotic(0.0)
    grid = TimeGrid(0.5, 120)
    out = volterra_march(nonlocal_params, b0, grid)
    ref = series_on(grid.nodes, TimeKernel(nonlocal_params, b0), n_terms=2)
    sel = grid.nodes >= 0.05
    err = np.max(np.abs(out[sel] - ref[sel]) / np.abs(ref[sel]))
    assert err <= 1e-12


def test_march_order_consistency(nonlocal_params):
    """Error against the converged series must shrink under M -> 2M."""
    b = BoundaryData.asymptotic(0.02)
    kern = TimeKernel(nonlocal_params, b)
    seed = lambda tau: series_on(tau, kern)
    errs = {}
    for m_nodes in (100, 200):
        grid = TimeGrid(0.3, m_nodes)
        out = volterra_march(nonlocal_params, b, grid, seed_fn=seed)
        ref = series_on(grid.nodes, kern)
        sel = grid.nodes >= 0.03
        errs[m_nodes] = np.max(np.abs(out[sel] - ref[sel]) / np.abs(ref[sel]))
    assert errs[200] <= 0.6 * errs[100]


def test_refinement_guard(nonlocal_params):
    b = BoundaryData.asymptotic(0.02)
    with pytest.raises(InstabilityError, match="moved node values"):
        volterra_march(nonlocal_params, b, TimeGrid(0.3, 64), refine_tol=1e-16)
    # a realistic tolerance passes on the same problem
    out = volterra_march(nonlocal_params, b, TimeGrid(0.3, 96), refine_tol=1e-3)
    assert out.shape == (96,)
