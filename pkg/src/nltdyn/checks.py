r"""Named verification suites over the library's asserted identities.

Each check_* function runs one suite against pinned reference
configurations (local: alpha = 1, t(-1) = 1; nonlocal: alpha = 0.25, b2 as
stated; c1 = 1, mu = 0.5 throughout) and returns a report dict:

    {"check": name,
     "passed": bool,
     "residuals": [{"name", "value", "tolerance", "passed"}, ...],
     "rows": [...],        # scan table for CSV output, may be empty
     "details": {...}}     # extra scalars worth keeping

overall pass <=> all named residuals pass. The point sweeps honor the
GQD_THREADS environment variable (default: min(4, cpu count)) and collect
results in submission order, so reports are deterministic.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .model import ModelParams, loop_integral_I1
from .amplitude import (BoundaryData, ReducedAmplitude, asymptotic_seed,
                        t_from_anchor, lambda_from_boundary, riccati_flow,
                        unitarity_residual)
from .timedomain import TimeKernel, ttilde_series, laplace_bridge, bridge_terms_for_tolerance
from .volterra import TimeGrid, default_grading, volterra_march
from .evolution import (ContourSpec, apply_evolution, appendix_d_probe,
                        composition_residual, continuity_probe,
                        make_gaussian_packet)

__all__ = ["CHECKS", "worker_count", "run_check",
           "check_unitarity", "check_riccati", "check_a_independence",
           "check_born", "check_bridge", "check_volterra",
           "check_composition", "check_appendix_d", "check_continuity"]


def worker_count() -> int:
    env = os.environ.get("GQD_THREADS")
    if env is not None:
        n = int(env)
        if n < 1:
            raise ValueError("GQD_THREADS must be a positive integer")
        return n
    return min(4, os.cpu_count() or 1)


def _entry(name, value, tolerance, passed=None):
    value = float(value)
    if passed is None:
        passed = value <= tolerance
    return {"name": name, "value": value, "tolerance": float(tolerance),
            "passed": bool(passed)}


def _report(check, entries, rows=None, details=None):
    return {"check": check, "passed": all(e["passed"] for e in entries),
            "residuals": entries, "rows": rows or [], "details": details or {}}


def _local_amp(a=-1.0, g_a=1.0, alpha=1.0, c1=1.0, mu=0.5):
    return ReducedAmplitude(ModelParams(alpha, c1, mu), BoundaryData.reference(a, g_a))


def _nonlocal_amp(b2, alpha=0.25, c1=1.0, mu=0.5):
    return ReducedAmplitude(ModelParams(alpha, c1, mu), BoundaryData.asymptotic(b2))


def check_unitarity(n_pairs=200, seed=20260818, tol=1e-7):
    """Resolvent-difference identity r(z1, z2) over random upper-half-plane
    pairs, both regimes; pass when max |r| <= tol * max(|t(z1)|, |t(z2)|)."""
    rng = np.random.default_rng(seed)
    configs = [("local alpha=1", _local_amp()),
               ("nonlocal b2=0", _nonlocal_amp(0.0)),
               ("nonlocal b2=0.1", _nonlocal_amp(0.1))]
    entries, rows = [], []
    for label, amp in configs:
        z1 = rng.uniform(-10, 10, n_pairs) + 1j * rng.uniform(0.05, 5.0, n_pairs)
        z2 = rng.uniform(-10, 10, n_pairs) + 1j * rng.uniform(0.05, 5.0, n_pairs)

        def ratio(i):
            a, b = complex(z1[i]), complex(z2[i])
            if a == b:
                b += 1e-3
            r = unitarity_residual(amp, a, b)
            return abs(r) / max(abs(amp.t(a)), abs(amp.t(b)))

        with ThreadPoolExecutor(max_workers=worker_count()) as ex:
            ratios = list(ex.map(ratio, range(n_pairs)))
        worst = int(np.argmax(ratios))
        rows.append({"config": label, "re_z1": z1[worst].real, "im_z1": z1[worst].imag,
                     "re_z2": z2[worst].real, "im_z2": z2[worst].imag,
                     "max_ratio": float(ratios[worst])})
        entries.append(_entry(f"max |r|/max|t| ({label})", max(ratios), tol))
    return _report("unitarity", entries, rows, {"n_pairs": n_pairs, "seed": seed})


def check_riccati(tol_local=1e-6, tol_nonlocal=1e-4):
    """Flow dt/dz = -t^2 I2 from a far seed against the closed forms at ten
    targets per run; the nonlocal regime is seeded at z = -1e4 with the
    two-term asymptotic value (exact at b2 = 0, approximate at b2 = 1e-3)
    and with the closed form at b2 = 0.1 (flow fidelity alone)."""
    local_amp = _local_amp()
    path_loc = -np.logspace(np.log10(50.0), 0.0, 11)
    runs = [("local alpha=1", local_amp, path_loc,
             local_amp.t(path_loc[0]), tol_local)]
    for b2, seed_kind in ((0.0, "asymptotic"), (1e-3, "asymptotic"), (0.1, "closed")):
        amp = _nonlocal_amp(b2)
        path = -np.logspace(4.0, 0.0, 11)
        seed = (asymptotic_seed(path[0], amp.params, b2) if seed_kind == "asymptotic"
                else amp.t(path[0]))
        runs.append((f"nonlocal b2={b2:g} ({seed_kind} seed)", amp, path, seed, tol_nonlocal))
    entries, rows = [], []
    for label, amp, path, seed, tol in runs:
        flow = riccati_flow(amp, path, seed)
        errs = []
        for z, tv in zip(path[1:], flow[1:]):
            ref = amp.t(z)
            err = abs(tv - ref) / abs(ref)
            errs.append(err)
            rows.append({"run": label, "z": float(z.real if isinstance(z, complex) else z),
                         "rel_err": float(err)})
        entries.append(_entry(f"max rel err ({label})", max(errs), tol))
    return _report("riccati", entries, rows)


def check_a_independence(z_eval=-1.0, anchors=(-1e2, -1e3, -1e4),
                         b2_strict=1e-3, b2_trend=0.1, tol=1e-4):
    """Anchored amplitude t(z; a, g_a = N(a)) vs N(z) as the anchor recedes.

    With the two-term g_a approximation the error must fall monotonically in
    |a| and reach tol at a = -1e4 for the small-b2 run; the large-b2 run is
    held to the monotone trend only (its two-term boundary value is too
    crude at these |a| for the absolute target)."""
    entries, rows = [], []
    for b2, strict in ((b2_strict, True), (b2_trend, False)):
        amp = _nonlocal_amp(b2)
        ref = amp.t(z_eval)
        errs = []
        for a in anchors:
            g_a = asymptotic_seed(a, amp.params, b2)
            val = t_from_anchor(z_eval, a, g_a, amp.params)
            err = abs(val - ref) / abs(ref)
            errs.append(err)
            rows.append({"b2": b2, "a": float(a), "rel_err": float(err)})
        worst_ratio = max(errs[i + 1] / errs[i] for i in range(len(errs) - 1))
        entries.append(_entry(f"anchor error monotone (b2={b2:g})", worst_ratio, 1.0,
                              passed=worst_ratio < 1.0))
        if strict:
            entries.append(_entry(f"final anchor error (b2={b2:g})", errs[-1], tol))
    return _report("a-independence", entries, rows)


_BORN_ZS = (-1.0 + 0.0j, -5.0 + 0.0j, -0.5 + 0.5j, 2.0 + 1.0j, -2.0 + 3.0j,
            10.0 + 0.5j, -10.0 + 0.0j, 0.3 + 0.2j, -0.25 + 0.0j, 5.0 + 5.0j)


def check_born(lam=1e-3, a=-1.0, tol_equiv=1e-10, ratio_band=1.0):
    """Coupling-form equivalence t(z) = lambda/(1 - lambda I1(z)) after the
    boundary -> lambda conversion, plus the weak-coupling order check: the
    residual |t - lambda - lambda^2 I1| must shrink by 8 (+/- 1) when lambda
    is halved (it is O(lambda^3))."""
    params = ModelParams(1.0, 1.0, 0.5)

    def amp_for(lam_):
        i1a = loop_integral_I1(a + 0.0j, params).real
        g_a = lam_ / (1.0 - lam_ * i1a)
        return ReducedAmplitude(params, BoundaryData.reference(a, g_a))

    amp = amp_for(lam)
    lam_back = lambda_from_boundary(amp)
    errs, rows = [], []
    for z in _BORN_ZS:
        i1 = loop_integral_I1(z, params)
        direct = lam_back / (1.0 - lam_back * i1)
        err = abs(amp.t(z) - direct) / abs(direct)
        errs.append(err)
        rows.append({"re_z": z.real, "im_z": z.imag, "rel_err": float(err)})
    entries = [_entry("closed form vs coupling form", max(errs), tol_equiv)]

    def born_resid(lam_):
        amp_ = amp_for(lam_)
        return max(abs(amp_.t(z) - lam_ - lam_ ** 2 * loop_integral_I1(z, params))
                   for z in _BORN_ZS)

    r_full = born_resid(lam)
    r_half = born_resid(lam / 2.0)
    ratio = r_full / r_half
    entries.append(_entry("third-order residual ratio vs 8", abs(ratio - 8.0), ratio_band))
    return _report("born", entries, rows,
                   {"lambda": lam, "ratio": float(ratio),
                    "resid_full": float(r_full), "resid_half": float(r_half)})


def check_bridge(b2=0.1, tol=1e-6, rate_band=0.15):
    """Truncated term-wise transform of the series vs N(z) on the ray
    z = -x + 0.1i. The truncation order comes from the geometric tail bound;
    the criterion applies where |z| >= 100 (closer in, the series leaves its
    convergence region and the rows record that). The empirical decay rate
    at z = -100 + 0.1i must match ln|rho| within rate_band."""
    params = ModelParams(0.25, 1.0, 0.5)
    amp = _nonlocal_amp(b2)
    kernel = TimeKernel(params, BoundaryData.asymptotic(b2))
    rows, errs = [], []
    for x in np.logspace(1.0, 3.0, 20):
        z = -x + 0.1j
        ref = amp.t(z)
        try:
            n = bridge_terms_for_tolerance(z, kernel, tol)
        except ArithmeticError:
            rows.append({"abs_z": abs(z), "n_terms": 0, "rel_err": float("nan"),
                         "status": "divergent"})
            continue
        val = laplace_bridge(z, kernel, n)
        err = abs(val - ref) / abs(ref)
        in_range = abs(z) >= 100.0
        if in_range:
            errs.append(err)
        rows.append({"abs_z": abs(z), "n_terms": n, "rel_err": float(err),
                     "status": "checked" if in_range else "near-field"})
    entries = [_entry("transform vs amplitude (|z| >= 100)", max(errs), tol)]

    z0 = -100.0 + 0.1j
    ref0 = amp.t(z0)
    ns = np.arange(5, 46, 5)
    errs_n = [abs(laplace_bridge(z0, kernel, int(n)) - ref0) / abs(ref0) for n in ns]
    slope = np.polyfit(ns, np.log(errs_n), 1)[0]
    # term ratio modulus |rho| = |b2| / |b1 (-z)^(1/2-alpha)|
    predicted = np.log(abs(kernel.b2)
                       / (abs(kernel.b1) * abs(z0) ** (0.5 - params.alpha)))
    entries.append(_entry("geometric rate vs ln|rho|", abs(slope / predicted - 1.0), rate_band))
    return _report("bridge", entries, rows,
                   {"slope": float(slope), "predicted": float(predicted)})


def check_volterra(tol_series=1e-3, m_nodes=400):
    """March vs the series solution.

    Run A (b2 = 0): the kernel collapses to its leading power and the series
    is a single term; the march must track it to tol_series on
    tau in [0.05, 0.5]. Run B (b2 = 0.02, series-seeded) measures the actual
    refinement behavior: the error against a 30-term series reference must
    at least halve under M -> 2M (or already sit at rounding level)."""
    params = ModelParams(0.25, 1.0, 0.5)

    bnd0 = BoundaryData.asymptotic(0.0)
    grid0 = TimeGrid(0.5, m_nodes, default_grading(params))
    f0 = volterra_march(params, bnd0, grid0)
    kern0 = TimeKernel(params, bnd0)
    sel0 = grid0.nodes >= 0.05
    ref0 = np.asarray(ttilde_series(grid0.nodes[sel0], kern0, 20))
    err_a = float(np.max(np.abs(f0[sel0] - ref0) / np.abs(ref0)))
    entries = [_entry("march vs series (b2=0)", err_a, tol_series)]

    bnd2 = BoundaryData.asymptotic(0.02)
    kern2 = TimeKernel(params, bnd2)

    def series_seed(x):
        return np.asarray(ttilde_series(x, kern2, 30))

    errs = {}
    for m in (m_nodes, 2 * m_nodes):
        grid = TimeGrid(0.3, m, default_grading(params))
        f = volterra_march(params, bnd2, grid, seed_fn=series_seed)
        sel = grid.nodes >= 0.03
        ref = series_seed(grid.nodes[sel])
        errs[m] = float(np.max(np.abs(f[sel] - ref) / np.abs(ref)))
    shrink = errs[2 * m_nodes] / max(errs[m_nodes], 1e-300)
    entries.append(_entry("refinement error shrink (b2=0.02)", shrink, 0.5,
                          passed=shrink <= 0.5 or errs[2 * m_nodes] <= 1e-10))
    rows = [{"run": "b2=0", "M": m_nodes, "max_rel_err": err_a},
            {"run": "b2=0.02", "M": m_nodes, "max_rel_err": errs[m_nodes]},
            {"run": "b2=0.02", "M": 2 * m_nodes, "max_rel_err": errs[2 * m_nodes]}]
    return _report("volterra", entries, rows)


def norm_audit_grid(k_core: float = 6.0, k_tail: float = 300.0,
                    n_core: int = 1001, n_tail: int = 600):
    """k-grid for norm bookkeeping: linear sampling through the packet core,
    log sampling far out for the scattered wave's slowly decaying tail mass.
    The low end starts at 1e-5 because the scattered wave goes like k^(-alpha)
    there, and for alpha near 1 the k^2-weighted mass below the first node
    would otherwise register at the 1e-4 level on its own."""
    lin = np.linspace(1e-5, k_core, n_core)
    log = np.geomspace(k_core, k_tail, n_tail + 1)[1:]
    return np.concatenate([lin, log])


# composition needs no tail nodes: the chained product integrates the
# intermediate spectrum over the continuum, so only the packet core and the
# residual's own support matter
_COMP_GRID = (1e-3, 6.0, 1500)


def check_composition(times_norm=(0.5, 1.0, 2.0), times_chain=(2.0, 1.0, 0.0),
                      tol_norm=1e-4, tol_comp=5e-4):
    """Norm conservation and the two-step composition law for a Gaussian
    packet (k0 = 1, sigma = 0.2) in both regimes."""
    psi_norm = make_gaussian_packet(1.0, 0.2, norm_audit_grid())
    psi_comp = make_gaussian_packet(1.0, 0.2, _COMP_GRID)
    entries, rows = [], []
    for label, amp in (("local alpha=1", _local_amp()),
                       ("nonlocal b2=0", _nonlocal_amp(0.0))):
        for t in times_norm:
            dev = abs(apply_evolution(psi_norm, t, 0.0, amp).norm() - 1.0)
            entries.append(_entry(f"norm deviation ({label}, t={t:g})", dev, tol_norm))
            rows.append({"config": label, "quantity": "norm_dev", "t": t, "value": dev})
        t2, t1, t0 = times_chain
        resid = composition_residual(t2, t1, t0, psi_comp, amp)
        entries.append(_entry(f"composition residual ({label})", resid, tol_comp))
        rows.append({"config": label, "quantity": "composition", "t": t2, "value": resid})
    return _report("composition", entries, rows)


def check_appendix_d(nu_list=(10.0, 30.0, 100.0), gamma0=0.5,
                     t_list=(0.01, 0.03, 0.1), b2=0.1, slope_band=0.2,
                     gamma0_local=0.1, t_list_local=(0.2, 0.3), q_max_local=2.0):
    """Scaling of the elastic element <psi_nu| R(t,0) |psi_nu> with nu.

    Local regime: the magnitude dies like nu^(1-2 alpha) = nu^(-1) at
    alpha = 1; fit the log-log slope. Nonlocal regime: the t-dependence
    flattens with nu while the magnitude stays away from zero (the
    t-independent limit), tested as a shrinking spread, spread << magnitude
    at the largest nu, and a Cauchy-like approach of the magnitudes.

    The local fit probes later times with a narrower resonance than the
    nonlocal entries: the element saturates toward its bound-pole value
    (whose scaling is clean) only once the early-time continuum transient
    has dephased, and probe cost at the largest nu grows with t_max, so
    the local grid also stops at a lower q_max (the truncated share of
    the state is the same at every nu; the family stays comparable)."""
    entries, rows = [], []
    # trend diagnostics (slopes, spreads) need 4 digits, not 7: a looser
    # frontier stop keeps the largest-nu contours short
    loose = ContourSpec(abs_tol=1e-7, rel_tol=1e-4)

    nl = appendix_d_probe(nu_list, gamma0, t_list, _nonlocal_amp(b2), contour=loose)
    for r in nl["rows"]:
        rows.append({"regime": "nonlocal", **r})
    s = {rec["nu"]: rec for rec in nl["summary"]}
    nus = sorted(s)
    spread_ratio = max(s[nus[i + 1]]["spread_abs"] / s[nus[i]]["spread_abs"]
                       for i in range(len(nus) - 1))
    entries.append(_entry("t-spread shrinks with nu (nonlocal)", spread_ratio, 1.0,
                          passed=spread_ratio < 1.0))
    top = s[nus[-1]]
    entries.append(_entry("spread / magnitude at largest nu (nonlocal)",
                          top["spread_abs"] / top["max_abs"], 0.1))
    gaps = [abs(s[nus[i + 1]]["max_abs"] - s[nus[i]]["max_abs"])
            for i in range(len(nus) - 1)]
    cauchy = gaps[-1] / max(gaps[0], 1e-300)
    entries.append(_entry("magnitude Cauchy approach (nonlocal)", cauchy, 1.0,
                          passed=cauchy < 1.0))

    loc = appendix_d_probe(nu_list, gamma0_local, t_list_local, _local_amp(),
                           contour=loose, q_max=q_max_local)
    for r in loc["rows"]:
        rows.append({"regime": "local", **r})
    mags = [rec["max_abs"] for rec in loc["summary"]]
    slope = np.polyfit(np.log(nu_list), np.log(mags), 1)[0]
    entries.append(_entry("log-log slope vs -1 (local)", abs(slope + 1.0), slope_band))
    return _report("appendix-d", entries, rows,
                   {"local_slope": float(slope),
                    "nonlocal_summary": nl["summary"], "local_summary": loc["summary"]})


def check_continuity(t_sequence=(1.0, 0.1, 0.01), b2=0.1):
    """|<psi| V(t) |psi> - 1| must shrink as the probe time does (strong
    continuity at t = 0 survives in the nonlocal regime for normalizable
    states)."""
    amp = _nonlocal_amp(b2)
    psi = make_gaussian_packet(1.0, 0.2, _COMP_GRID)
    probe = continuity_probe(psi, t_sequence, amp)
    devs = [r["deviation"] for r in probe]  # rows come back sorted by t
    worst = max(devs[i] / devs[i + 1] for i in range(len(devs) - 1))
    entries = [_entry("deviation decreasing toward t=0", worst, 1.0,
                      passed=worst < 1.0)]
    return _report("continuity", entries, probe)


CHECKS = {
    "unitarity": check_unitarity,
    "riccati": check_riccati,
    "a-independence": check_a_independence,
    "born": check_born,
    "bridge": check_bridge,
    "volterra": check_volterra,
    "composition": check_composition,
    "appendix-d": check_appendix_d,
    "continuity": check_continuity,
}


def run_check(name, **overrides):
    try:
        fn = CHECKS[name]
    except KeyError:
        raise ValueError(f"unknown check {name!r}; choose from {sorted(CHECKS)}") from None
    return fn(**overrides)
