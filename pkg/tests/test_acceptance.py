"""Acceptance gate: every advertised guarantee, one test each.

Each test runs the named verification suite at its shipped tolerances and
prints a single pass/fail line with the tightest margin, so a bare
``pytest tests/test_acceptance.py -v`` doubles as the release scorecard.
"""
import time

import pytest

from nltdyn import run_check


def _run(name, **overrides):
    t0 = time.perf_counter()
    report = run_check(name, **overrides)
    return report, time.perf_counter() - t0


def _describe(tag, report, elapsed):
    worst = max(report["residuals"],
                key=lambda e: e["value"] / e["tolerance"] if e["tolerance"] > 0 else 0.0)
    status = "PASS" if report["passed"] else "FAIL"
    print(f"[{tag}] {status} {report['check']}: worst '{worst['name']}' = "
          f"{worst['value']:.6g} (tol {worst['tolerance']:g}) in {elapsed:.1f}s")


def _failures(report):
    bad = [e for e in report["residuals"] if not e["passed"]]
    return "; ".join(f"{e['name']} = {e['value']:.6g} > {e['tolerance']:g}" for e in bad)


def test_criterion_01_unitarity_identity():
    # 200 random upper-half-plane pairs, both regimes, |r| <= 1e-7 scale
    report, elapsed = _run("unitarity")
    _describe("criterion 1", report, elapsed)
    assert elapsed <= 30.0
    assert report["passed"], _failures(report)


def test_criterion_02_riccati_flow_vs_closed_form():
    report, elapsed = _run("riccati")
    _describe("criterion 2", report, elapsed)
    assert elapsed <= 30.0
    assert report["passed"], _failures(report)


def test_criterion_03_reference_point_independence():
    report, elapsed = _run("a-independence")
    _describe("criterion 3", report, elapsed)
    assert report["passed"], _failures(report)


def test_criterion_04_hamiltonian_limit_equivalence():
    report, elapsed = _run("born")
    _describe("criterion 4", report, elapsed)
    assert report["passed"], _failures(report)


def test_criterion_05_transform_bridge():
    report, elapsed = _run("bridge")
    _describe("criterion 5", report, elapsed)
    assert report["passed"], _failures(report)


def test_criterion_06_volterra_march():
    report, elapsed = _run("volterra")
    _describe("criterion 6", report, elapsed)
    assert elapsed <= 120.0
    assert report["passed"], _failures(report)


def test_criterion_07_packet_norm_and_composition():
    report, elapsed = _run("composition")
    _describe("criterion 7", report, elapsed)
    assert elapsed <= 180.0
    assert report["passed"], _failures(report)


def test_criterion_08_infinite_energy_family():
    report, elapsed = _run("appendix-d")
    _describe("criterion 8", report, elapsed)
    assert elapsed <= 180.0
    assert report["passed"], _failures(report)


def test_criterion_09_strong_continuity():
    report, elapsed = _run("continuity")
    _describe("criterion 9", report, elapsed)
    assert report["passed"], _failures(report)
