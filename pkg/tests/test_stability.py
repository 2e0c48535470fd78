import json
import math

import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp

from config import StabilityMode
from errors import ArgumentError
from integrators import SplitBlocks, SplitState, SplitStepper, splitting_energy
from stability import StabilityConstants, certify, compute_alpha, compute_gammas, energy_lower_bound
from tests.helpers import random_spd


def test_alpha_of_diagonal_pencil():
    assert compute_alpha(np.diag([1.0, 4.0, 9.0]), np.eye(3)) == pytest.approx(3.0)
    assert compute_alpha(np.zeros((0, 0)), np.zeros((0, 0))) == 0.0


def test_alpha_sparse_path():
    n = 700
    A = sp.diags(np.arange(1.0, n + 1.0) ** 2, format="csr")
    M = sp.diags(np.full(n, 4.0), format="csr")
    assert compute_alpha(A, M) == pytest.approx(n / 2.0, rel=1e-6)


def test_gammas():
    M11, M22 = np.eye(1), np.eye(1)
    gamma, gamma_a = compute_gammas(M11, np.array([[0.5]]), M22, M11, np.zeros((1, 1)), M22)
    assert gamma == pytest.approx(0.5)
    assert gamma_a == 0.0
    assert compute_gammas(np.eye(2), np.zeros((2, 0)), np.zeros((0, 0)),
                          np.eye(2), np.zeros((2, 0)), np.zeros((0, 0))) == (0.0, 0.0)


def test_certify_modes():
    c = StabilityConstants(alpha=10.0, alpha_full=100.0, gamma=0.6, gamma_a=0.1)
    ortho = certify(0.1, c, StabilityMode.ORTHO)
    assert ortho.tau_max == pytest.approx(math.sqrt(2.0) / 10.0)
    assert ortho.passed
    non = certify(0.1, c, StabilityMode.NONORTHO)
    assert non.tau_max == pytest.approx(math.sqrt(2.0 * 0.64) / 10.0)
    assert non.tau_max_nonortho_stated == pytest.approx(math.sqrt(2.0 * 0.4) / 10.0)
    assert non.passed
    cfl = certify(0.1, c, StabilityMode.CFL)
    assert cfl.tau_max == pytest.approx(0.02)
    assert not cfl.passed
    assert cfl.mode == StabilityMode.CFL.value


def test_certify_weighted():
    c = StabilityConstants(alpha_full=100.0)
    implicit = certify(1.0, c, StabilityMode.WEIGHTED, sigma=0.25)
    assert implicit.passed and math.isinf(implicit.tau_max)
    assert implicit.to_dict()["tau_max"] is None
    leapfrog = certify(1.0, c, StabilityMode.WEIGHTED, sigma=0.0)
    assert leapfrog.tau_max == pytest.approx(0.02)
    with pytest.raises(ArgumentError):
        certify(1.0, c, StabilityMode.WEIGHTED)


def test_certify_rejects_bad_input():
    c = StabilityConstants(alpha=1.0)
    with pytest.raises(ArgumentError):
        certify(0.0, c, StabilityMode.ORTHO)
    with pytest.raises(ArgumentError):
        certify(0.1, c, StabilityMode.CFL)


def test_vanishing_alpha_gives_unbounded_step():
    report = certify(10.0, StabilityConstants(alpha=0.0), StabilityMode.ORTHO)
    assert report.passed and math.isinf(report.tau_max_split)


def test_report_json(tmp_path):
    report = certify(0.1, StabilityConstants(alpha=1.0, alpha_full=2.0), StabilityMode.ORTHO)
    report.to_json(tmp_path / "s.json")
    data = json.loads((tmp_path / "s.json").read_text())
    assert data["mode"] == "ortho_3_4"
    assert data["passed"] is True


def test_constants_from_blocks(rng):
    M, A = random_spd(rng, 6), random_spd(rng, 6)
    blocks = SplitBlocks.from_matrices(M, A, 2)
    c = StabilityConstants.from_blocks(blocks)
    assert c.alpha == pytest.approx(compute_alpha(A[2:, 2:], M[2:, 2:]))
    assert c.alpha_full >= c.alpha - 1e-12
    assert 0.0 <= c.gamma < 1.0


def test_energy_bounded_below(rng):
    M, A = random_spd(rng, 6), random_spd(rng, 6)
    blocks = SplitBlocks.from_matrices(M, A, 3)
    c = StabilityConstants.from_blocks(blocks)
    tau = 0.5 * certify(1e-3, c, StabilityMode.NONORTHO).tau_max
    stepper = SplitStepper(blocks, tau, 1.0)
    state = SplitState.from_full(np.zeros(6), rng.standard_normal(6), 3)
    for _ in range(100):
        bound = energy_lower_bound(blocks, state, tau, c)
        assert bound >= 0.0
        assert splitting_energy(blocks, state, tau) >= bound - 1e-10 * abs(bound)
        state = stepper.step(state)


def test_certified_split_run_stays_bounded(rng):
    M, A = random_spd(rng, 6), random_spd(rng, 6)
    Mo = la.block_diag(M[:3, :3], M[3:, 3:])
    blocks = SplitBlocks.from_matrices(Mo, A, 3)
    c = StabilityConstants.from_blocks(blocks)
    report = certify(0.9 * math.sqrt(2.0) / c.alpha, c, StabilityMode.ORTHO)
    assert report.passed
    stepper = SplitStepper(blocks, report.tau, 1.0)
    u0 = rng.standard_normal(6)
    state = SplitState.from_full(np.zeros(6), u0, 3)
    peak = 0.0
    for _ in range(10_000):
        state = stepper.step(state)
        peak = max(peak, float(np.max(np.abs(state.cur))))
    assert peak < 1e3 * np.max(np.abs(u0))
