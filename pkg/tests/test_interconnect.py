import numpy as np
import pytest

from conftest import random_system
from qlin import (
    Channel,
    ClassicalController,
    QuantumController,
    ShapeError,
    ValidationError,
    build_system,
    cf_type1,
    cf_type2,
    direct_mf,
    find_qnd,
    homodyne_split,
    mf_type1,
    mf_type2,
    realizability_defect,
    sigma,
)
from qlin import scenarios as sc
from qlin.xfer import TransferFunction, evaluate


def zero_mf1(plant):
    m = plant.m
    return ClassicalController(np.zeros((0, 0)), np.zeros((0, m)),
                               C_K=np.zeros((2 * m, 0)))


def test_mf1_zero_controller_reproduces_measured_plant():
    rng = np.random.default_rng(40)
    plant = random_system(rng, 2, 2, force=True)
    split = homodyne_split(2, "P")
    loop = mf_type1(plant, zero_mf1(plant), split)
    ref = plant.to_state_space(split)
    assert np.array_equal(loop.A, ref.A)
    assert np.array_equal(loop.B, ref.B)
    assert np.array_equal(loop.C, ref.C)
    assert np.array_equal(loop.D, ref.D)
    assert loop.inputs.names == ref.inputs.names
    assert loop.outputs.names == ref.outputs.names


def random_mf1_controller(rng, plant, k):
    return ClassicalController(
        rng.normal(size=(k, k)) - 2 * np.eye(k),
        rng.normal(size=(k, plant.m)),
        C_K=rng.normal(size=(2 * plant.m, k)))


def test_mf1_block_pattern():
    rng = np.random.default_rng(41)
    plant = random_system(rng, 2, 1)
    ctrl = random_mf1_controller(rng, plant, 3)
    split = homodyne_split(1, "P")
    loop = mf_type1(plant, ctrl, split)
    n2 = 2 * plant.n
    # conjugate noise never enters the controller state
    assert np.array_equal(loop.b("P")[n2:, :], np.zeros((3, 1)))
    # plant block of the drift is untouched by the loop
    assert np.array_equal(loop.A[:n2, :n2], plant.A)
    # measured noise drives the controller through B_K
    assert np.array_equal(loop.b("Q")[n2:, :], ctrl.B_K)


def test_mf1_width_validation():
    rng = np.random.default_rng(42)
    plant = random_system(rng, 1, 1)
    bad = ClassicalController(np.zeros((1, 1)), np.zeros((1, 2)),
                              C_K=np.zeros((2, 1)))
    with pytest.raises(ShapeError):
        mf_type1(plant, bad, homodyne_split(1, "P"))


def zero_mf2(plant):
    m1 = sum(1 for ch in plant.channels if ch.role == "feedback")
    m2 = sum(1 for ch in plant.channels if ch.role == "evaluation")
    return ClassicalController(np.zeros((0, 0)), np.zeros((0, m1)),
                               C_K1=np.zeros((2 * m1, 0)), C_K2=np.zeros((2 * m2, 0)))


def test_mf2_zero_controller_and_direct_term():
    plant = sc.michelson()
    fb = homodyne_split(1, "P")
    ev = homodyne_split(1, "P")
    loop = mf_type2(plant, zero_mf2(plant), fb, ev)
    assert np.array_equal(loop.A, plant.A)
    # the z output carries the measured evaluation noise directly
    assert np.array_equal(loop.d("z", "Q2"), np.eye(1))
    assert np.array_equal(loop.d("z", "P2"), np.zeros((1, 1)))

    # a dead controller (zero gains, nonzero dimension) stays decoupled
    dead = ClassicalController(-np.eye(3), np.zeros((3, 1)),
                               C_K1=np.zeros((2, 3)), C_K2=np.zeros((2, 3)))
    loop2 = mf_type2(plant, dead, fb, ev)
    assert np.array_equal(loop2.A[:4, 4:], np.zeros((4, 3)))
    assert np.array_equal(loop2.A[4:, :4], np.zeros((3, 4)))


def test_mf2_requires_role_partition():
    rng = np.random.default_rng(43)
    plant = random_system(rng, 1, 2)  # default roles: environment
    with pytest.raises(ValidationError):
        mf_type2(plant, zero_mf2(sc.michelson()), homodyne_split(1, "P"),
                 homodyne_split(1, "P"))


def test_mf_port_bookkeeping():
    plant = sc.michelson()
    loop = mf_type2(plant, zero_mf2(plant), homodyne_split(1, "P"),
                    homodyne_split(1, "P"))
    # free field width (4 quadratures) plus force: no channel double-counted
    assert loop.inputs.total == 2 * plant.m + 1
    loop1 = mf_type1(sc.optomech_full(), random_mf1_controller(
        np.random.default_rng(44), sc.optomech_full(), 2), homodyne_split(1, "P"))
    assert loop1.inputs.total == 2 * sc.optomech_full().m + 1


def test_cf1_reproduces_tsang_caves_reference_matrices():
    m_, w_, k_, g_ = 1.0, 1.0, 1.0, 2.0
    loop = sc.tsang_caves_loop(m_, w_, k_, g_)
    g = k_ / np.sqrt(m_ * w_)
    A_ref = np.array([
        [0, 1 / m_, 0, 0, 0, 0],
        [-m_ * w_ ** 2, 0, k_, 0, 0, 0],
        [0, 0, -g_, 0, 0, 0],
        [k_, 0, 0, -g_, g, 0],
        [0, 0, 0, 0, 0, -w_],
        [0, 0, g, 0, w_, 0],
    ])
    C_ref = np.sqrt(2 * g_) * np.array([[0, 0, 1, 0, 0, 0], [0, 0, 0, 1, 0, 0.0]])
    assert np.allclose(loop.A, A_ref)
    assert np.allclose(loop.C, C_ref)
    # canonical input matrix; the displayed B_e = C_e^T has a sign slip
    assert np.allclose(loop.B, sigma(3) @ C_ref.T @ sigma(1))
    assert np.allclose(loop.B, -C_ref.T)
    assert np.allclose(loop.force, [0, 1, 0, 0, 0, 0])


def test_cf1_decoupled_when_couplings_vanish():
    rng = np.random.default_rng(45)
    plant = random_system(rng, 1, 1)
    ctrl = QuantumController(G_K=np.zeros((2, 2)), C1=np.zeros((2, 2)),
                             C2=np.zeros((2, 2)))
    loop = cf_type1(plant, ctrl)
    assert np.array_equal(loop.A[:2, 2:], np.zeros((2, 2)))
    assert np.array_equal(loop.A[2:, :2], np.zeros((2, 2)))
    assert np.array_equal(loop.C[:, 2:], np.zeros((2, 2)))


def test_cf1_direct_interaction_blocks():
    rng = np.random.default_rng(46)
    plant = random_system(rng, 2, 1)
    GK = rng.normal(size=(2, 2))
    GK = (GK + GK.T) / 2
    C1 = rng.normal(size=(2, 2))
    ctrl = QuantumController(G_K=GK, C1=C1, C2=-C1)
    loop = cf_type1(plant, ctrl)
    S1, Sn = sigma(1), sigma(plant.n)
    # controller couples to the plant only through the direct interaction
    assert np.allclose(loop.C[:, 4:], 0.0)
    assert np.allclose(loop.A[:4, 4:], Sn @ plant.C.T @ S1 @ C1)
    assert np.allclose(loop.A[4:, :4], sigma(1) @ C1.T @ S1.T @ plant.C)
    assert np.allclose(loop.A[4:, 4:], sigma(1) @ GK)
    # no field reaches the controller block
    assert np.allclose(loop.B[4:, :], 0.0)


def test_cf1_dfs_construction_blocks():
    plant = sc.two_port_cavity(1.0, 1.0)
    ctrl = QuantumController(G_K=plant.G, C1=plant.C / 2, C2=plant.C / 2)
    loop = cf_type1(plant, ctrl)
    A, B, C = plant.A, plant.B, plant.C
    coupling = sigma(1) @ C.T @ sigma(2) @ C / 2
    assert np.allclose(loop.A[:2, :2], A)
    assert np.allclose(loop.A[2:, 2:], A)
    assert np.allclose(loop.A[:2, 2:], coupling)
    assert np.allclose(loop.A[2:, :2], coupling)
    assert np.allclose(loop.B, np.vstack([B, B]))
    assert np.allclose(loop.C, np.hstack([C, C]))


def test_cf2_reproduces_michelson_reference_matrices():
    p = sc.MichelsonParams(m=1.0, omega=0.01, lam=1.0, L=1.0)
    eps, alpha = sc.michelson_cf_params(p)
    beta = alpha
    loop = sc.michelson_cf_loop(p)
    lam, m_, w_ = p.lam, p.m, p.omega
    rle = np.sqrt(2 * lam * eps)
    rl = np.sqrt(lam)
    re = np.sqrt(2 * eps)
    A_ref = np.array([
        [0, 1 / m_, 0, 0, 0, 0],
        [lam - m_ * w_ ** 2, 0, lam, 0, rle, 0],
        [0, 0, 0, 1 / m_, 0, 0],
        [-lam, 0, -lam - m_ * w_ ** 2, 0, -rle, 0],
        [-rle, 0, -rle, 0, -eps, beta],
        [0, 0, 0, 0, -alpha, -eps],
    ])
    B_ref = np.array([
        [0, 0], [rl, -rl], [0, 0], [-rl, -rl], [-re, 0], [0, -re]])
    C_ref = np.array([[rl, 0, rl, 0, re, 0], [rl, 0, -rl, 0, 0, re]])
    assert np.allclose(loop.A, A_ref)
    assert np.allclose(loop.B, B_ref)
    assert np.allclose(loop.C, C_ref)
    assert np.allclose(loop.force, [0, 1, 0, -1, 0, 0])


def test_cf2_controller_decoupled_from_untouched_quadratures():
    plant = sc.michelson()
    ctrl = QuantumController(G_K=np.diag([0.3, 0.7]), C_K=np.zeros((2, 2)))
    loop = cf_type2(plant, ctrl, S=np.eye(2))
    # zero coupling: controller invisible in the output field
    assert np.allclose(loop.C[:, 4:], 0.0)
    assert np.allclose(loop.B[4:, :], 0.0)


def test_cf2_with_identity_scattering_matches_cf1_dfs_form():
    kappa = 0.8
    plant2 = sc.two_port_cavity(kappa, kappa)  # C1 = C2 = C/2
    C_full = 2.0 * np.sqrt(2 * kappa) * np.eye(2)
    ctrl2 = QuantumController(G_K=plant2.G, C_K=C_full)
    loop2 = cf_type2(plant2, ctrl2, S=np.eye(2))

    plant1 = build_system(np.zeros((2, 2)), C_full, channels=[Channel("W")])
    ctrl1 = QuantumController(G_K=plant1.G, C1=C_full / 2, C2=C_full / 2)
    loop1 = cf_type1(plant1, ctrl1)
    assert np.allclose(loop1.A, loop2.A)
    assert np.allclose(loop1.B, loop2.B)
    assert np.allclose(loop1.C, loop2.C)


def test_cf_loops_always_realizable():
    rng = np.random.default_rng(47)
    for _ in range(10):
        plant = random_system(rng, 2, 1)
        C1 = rng.normal(size=(2, 2))
        C2 = rng.normal(size=(2, 2))
        GK = rng.normal(size=(2, 2))
        GK = (GK + GK.T) / 2
        loop = cf_type1(plant, QuantumController(G_K=GK, C1=C1, C2=C2))
        assert realizability_defect(loop.A, loop.C) < 1e-12
    for _ in range(10):
        plant = random_system(rng, 2, 2)
        plant = build_system(plant.G, plant.C,
                             channels=[Channel("W1", "feedback"),
                                       Channel("W2", "evaluation")])
        GK = rng.normal(size=(2, 2))
        GK = (GK + GK.T) / 2
        from qlin.nogo import random_orthosymplectic

        S = random_orthosymplectic(rng, 1)
        loop = cf_type2(plant, QuantumController(
            G_K=GK, C_K=rng.normal(size=(2, 2))), S=S)
        assert realizability_defect(loop.A, loop.C) < 1e-12


def test_cf2_rejects_bad_scattering():
    plant = sc.michelson()
    ctrl = QuantumController(G_K=np.zeros((2, 2)), C_K=np.eye(2))
    with pytest.raises(ValidationError):
        cf_type2(plant, ctrl, S=np.array([[1.0, 0.0], [0.0, 2.0]]))


def test_direct_mf_ideal_limit_has_position_qnd():
    loop = direct_mf(1.0, 0.0)
    v = find_qnd(loop, ["Q", "P"], "y")
    assert v.achieved
    assert np.allclose(v.witnesses[0], [1.0, 0.0], atol=1e-14)
    # u = sqrt(k) y: direct gain from the measured noise
    assert np.isclose(loop.d("u", "Q")[0, 0], 1.0)


def test_direct_mf_finite_bandwidth_transfer():
    kappa, tau = 1.0, 1.0
    loop = direct_mf(kappa, tau)
    tf = TransferFunction(loop, "Q", "q")
    for s in (0.0, 0.5, 2.0):
        ref = -np.sqrt(kappa) * tau / ((kappa * tau + 1) + tau * s)
        assert np.isclose(evaluate(tf, s)[0, 0].real, ref, atol=1e-12)
    # QND is recovered only in the tau -> 0 limit
    v = find_qnd(loop, ["Q", "P"], "y")
    assert not any(np.allclose(np.abs(w), [1, 0, 0]) for w in v.witnesses)


def test_direct_mf_small_tau_bound():
    kappa, tau = 1.0, 1e-6
    loop = direct_mf(kappa, tau)
    tf = TransferFunction(loop, "Q", "q")
    for W in np.linspace(0.0, kappa, 7):
        assert abs(evaluate(tf, 1j * W)[0, 0]) < 2e-6 * np.sqrt(kappa)


def test_direct_mf_rejects_negative_tau():
    with pytest.raises(ValidationError):
        direct_mf(1.0, -0.1)
