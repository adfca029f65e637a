"""Closed-loop realizations for measurement-based and coherent feedback.

All interconnections are assembled from explicit block formulas; the only
algebraic loop in scope (ideal direct feedback, ``tau = 0``) is eliminated
in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    MeasurementSplit,
    Ports,
    QuantumLinearSystem,
    ShapeError,
    StateSpaceModel,
    ValidationError,
    sigma,
)

__all__ = [
    "ClassicalController",
    "QuantumController",
    "mf_type1",
    "mf_type2",
    "cf_type1",
    "cf_type2",
    "direct_mf",
    "direct_mf_controller",
]


@dataclass(frozen=True)
class ClassicalController:
    """Classical feedback processor dx_K/dt = A_K x_K + B_K y, u = C_K x_K.

    Type-1 loops use ``C_K`` (full-width modulation); type-2 loops use the
    split pair ``C_K1``/``C_K2`` acting on the feedback and evaluation
    inputs separately.
    """

    A_K: np.ndarray
    B_K: np.ndarray
    C_K: Optional[np.ndarray] = None
    C_K1: Optional[np.ndarray] = None
    C_K2: Optional[np.ndarray] = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A_K, dtype=float))
        if A.size == 0:
            A = A.reshape(0, 0)
        if A.shape[0] != A.shape[1]:
            raise ShapeError(f"A_K must be square, got {A.shape}")
        k = A.shape[0]
        B = np.asarray(self.B_K, dtype=float)
        if B.ndim == 1:
            B = B.reshape(k, -1) if B.size else B.reshape(k, 0)
        if B.ndim != 2 or B.shape[0] != k:
            raise ShapeError(f"B_K must have {k} rows, got shape {B.shape}")
        object.__setattr__(self, "A_K", A)
        object.__setattr__(self, "B_K", B)
        for name in ("C_K", "C_K1", "C_K2"):
            val = getattr(self, name)
            if val is not None:
                val = np.asarray(val, dtype=float)
                if val.ndim == 1:
                    val = val.reshape(-1, k) if val.size else val.reshape(0, k)
                if val.ndim != 2 or val.shape[1] != k:
                    raise ShapeError(f"{name} must have {k} columns, got shape {val.shape}")
                object.__setattr__(self, name, val)

    @property
    def dim(self) -> int:
        return self.A_K.shape[0]


@dataclass(frozen=True)
class QuantumController:
    """Fully quantum controller (Hamiltonian matrix plus field couplings).

    Type-1 controllers couple through two field groups ``C1``/``C2``;
    type-2 controllers have a single coupling ``C_K`` and an optional
    scattering matrix ``S`` acting on the fed-back field.
    """

    G_K: np.ndarray
    C1: Optional[np.ndarray] = None
    C2: Optional[np.ndarray] = None
    C_K: Optional[np.ndarray] = None
    S: Optional[np.ndarray] = None

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G_K, dtype=float))
        if G.shape[0] != G.shape[1] or G.shape[0] % 2:
            raise ShapeError(f"G_K must be square with even size, got {G.shape}")
        if np.linalg.norm(G - G.T) > 1e-12 * max(1.0, np.linalg.norm(G)):
            raise ValidationError("G_K must be symmetric")
        object.__setattr__(self, "G_K", (G + G.T) / 2.0)
        nk2 = G.shape[0]
        for name in ("C1", "C2", "C_K"):
            val = getattr(self, name)
            if val is not None:
                val = np.atleast_2d(np.asarray(val, dtype=float))
                if val.shape[1] != nk2:
                    raise ShapeError(f"{name} must have {nk2} columns, got {val.shape[1]}")
                object.__setattr__(self, name, val)
        if self.S is not None:
            object.__setattr__(self, "S", _check_scattering(np.asarray(self.S, dtype=float)))

    @property
    def dim(self) -> int:
        return self.G_K.shape[0]


def _check_scattering(S: np.ndarray) -> np.ndarray:
    if S.shape[0] != S.shape[1] or S.shape[0] % 2:
        raise ShapeError(f"scattering matrix must be square with even size, got {S.shape}")
    m = S.shape[0] // 2
    Sm = sigma(m)
    if np.max(np.abs(S.T @ S - np.eye(2 * m))) > 1e-12 * max(1, 2 * m):
        raise ValidationError("scattering matrix is not orthogonal")
    if np.max(np.abs(S @ Sm @ S.T - Sm)) > 1e-12 * max(1, 2 * m):
        raise ValidationError("scattering matrix is not symplectic")
    return S


def _role_rows(plant: QuantumLinearSystem):
    """Coupling rows and input columns of the feedback/evaluation partitions."""
    fb_idx, ev_idx = [], []
    for j, ch in enumerate(plant.channels):
        if ch.role == "feedback":
            fb_idx.extend((2 * j, 2 * j + 1))
        elif ch.role == "evaluation":
            ev_idx.extend((2 * j, 2 * j + 1))
        else:
            raise ValidationError(
                f"channel {ch.label!r} has role {ch.role!r}; type-2 loops need "
                "every channel tagged feedback or evaluation")
    if not fb_idx or not ev_idx:
        raise ValidationError("type-2 loops need at least one feedback and one "
                              "evaluation channel")
    return np.asarray(fb_idx), np.asarray(ev_idx)


def mf_type1(plant: QuantumLinearSystem, ctrl: ClassicalController,
             split: MeasurementSplit) -> StateSpaceModel:
    """Type-1 measurement feedback: all outputs measured, all inputs modulated.

    The measured signal ``y = M1 W_out`` drives the controller whose output
    ``u = C_K x_K`` modulates every input quadrature.  Extended state is
    ``[x; x_K]``; inputs are the measured noise ``Q``, its conjugate ``P``
    and the force; outputs are ``y``, the conjugate signal ``ybar`` and the
    full field ``Wout``.
    """
    m = plant.m
    if split.m != m:
        raise ShapeError(f"split covers {split.m} channels, plant has {m}")
    k = ctrl.dim
    if k == 0:
        B_K = np.zeros((0, m))
        C_K = np.zeros((2 * m, 0))
    else:
        if ctrl.C_K is None:
            raise ValidationError("type-1 controller needs C_K")
        if ctrl.B_K.shape[1] != m:
            raise ShapeError(f"B_K must have {m} columns (one per measured signal)")
        if ctrl.C_K.shape[0] != 2 * m:
            raise ShapeError(f"C_K must have {2 * m} rows (full-width modulation)")
        B_K, C_K = ctrl.B_K, ctrl.C_K

    A, B, C = plant.A, plant.B, plant.C
    M1, M2 = split.M1, split.M2
    n2 = 2 * plant.n
    N = n2 + k
    Ae = np.zeros((N, N))
    Ae[:n2, :n2] = A
    Ae[:n2, n2:] = B @ C_K
    Ae[n2:, :n2] = B_K @ (M1 @ C)
    Ae[n2:, n2:] = ctrl.A_K + B_K @ (M1 @ C_K)

    inputs = Ports([("Q", m), ("P", m)])
    cols = [np.vstack([B @ M1.T, B_K]),
            np.vstack([B @ M2.T, np.zeros((k, m))])]
    if plant.force is not None:
        inputs.append("F", 1)
        cols.append(np.vstack([plant.force.reshape(-1, 1), np.zeros((k, 1))]))
    Be = np.hstack(cols)

    outputs = Ports([("y", m), ("ybar", m), ("Wout", 2 * m)])
    for j, ch in enumerate(plant.channels):
        outputs.alias(ch.label + ".out.Q", 2 * m + 2 * j, 1)
        outputs.alias(ch.label + ".out.P", 2 * m + 2 * j + 1, 1)
    Ce = np.vstack([
        np.hstack([M1 @ C, M1 @ C_K]),
        np.hstack([M2 @ C, M2 @ C_K]),
        np.hstack([C, C_K]),
    ])
    De = np.zeros((4 * m, Be.shape[1]))
    De[:m, :m] = np.eye(m)
    De[m:2 * m, m:2 * m] = np.eye(m)
    De[2 * m:, :m] = M1.T
    De[2 * m:, m:2 * m] = M2.T
    return StateSpaceModel(Ae, Be, Ce, De, inputs, outputs)


def mf_type2(plant: QuantumLinearSystem, ctrl: ClassicalController,
             fb_split: MeasurementSplit, eval_split: MeasurementSplit) -> StateSpaceModel:
    """Type-2 measurement feedback: dedicated feedback and evaluation channels.

    ``y = M W1_out`` (fb_split) drives the controller, which modulates both
    channel groups through ``C_K1``/``C_K2``; the evaluation signal is
    ``z = M1 W2_out`` (eval_split).  A direct feedthrough term from y onto
    the evaluation modulation is intentionally not modeled; it changes no
    structural verdict and is left as a config hook.
    """
    fb_idx, ev_idx = _role_rows(plant)
    C1 = plant.C[fb_idx, :]
    C2 = plant.C[ev_idx, :]
    B1 = plant.B[:, fb_idx]
    B2 = plant.B[:, ev_idx]
    m1, m2 = len(fb_idx) // 2, len(ev_idx) // 2
    if fb_split.m != m1 or eval_split.m != m2:
        raise ShapeError("measurement splits do not match the channel partition")
    k = ctrl.dim
    if k == 0:
        B_K = np.zeros((0, m1))
        C_K1 = np.zeros((2 * m1, 0))
        C_K2 = np.zeros((2 * m2, 0))
    else:
        if ctrl.C_K1 is None or ctrl.C_K2 is None:
            raise ValidationError("type-2 controller needs C_K1 and C_K2")
        if ctrl.B_K.shape[1] != m1:
            raise ShapeError(f"B_K must have {m1} columns")
        if ctrl.C_K1.shape[0] != 2 * m1 or ctrl.C_K2.shape[0] != 2 * m2:
            raise ShapeError("C_K1/C_K2 widths do not match the channel partition")
        B_K, C_K1, C_K2 = ctrl.B_K, ctrl.C_K1, ctrl.C_K2
    M = fb_split.M1
    M1e, M2e = eval_split.M1, eval_split.M2

    A = plant.A
    n2 = 2 * plant.n
    N = n2 + k
    Ae = np.zeros((N, N))
    Ae[:n2, :n2] = A
    Ae[:n2, n2:] = B1 @ C_K1 + B2 @ C_K2
    Ae[n2:, :n2] = B_K @ (M @ C1)
    Ae[n2:, n2:] = ctrl.A_K + B_K @ (M @ C_K1)

    inputs = Ports([("W1", 2 * m1), ("Q2", m2), ("P2", m2)])
    fb_channels = [ch for ch in plant.channels if ch.role == "feedback"]
    ev_channels = [ch for ch in plant.channels if ch.role == "evaluation"]
    for j, ch in enumerate(fb_channels):
        inputs.alias(ch.label + ".Q", 2 * j, 1)
        inputs.alias(ch.label + ".P", 2 * j + 1, 1)
    cols = [np.vstack([B1, B_K @ M]),
            np.vstack([B2 @ M1e.T, np.zeros((k, m2))]),
            np.vstack([B2 @ M2e.T, np.zeros((k, m2))])]
    if plant.force is not None:
        inputs.append("F", 1)
        cols.append(np.vstack([plant.force.reshape(-1, 1), np.zeros((k, 1))]))
    Be = np.hstack(cols)

    outputs = Ports([("y", m1), ("z", m2), ("W1out", 2 * m1), ("W2out", 2 * m2)])
    for j, ch in enumerate(fb_channels):
        outputs.alias(ch.label + ".out.Q", m1 + m2 + 2 * j, 1)
        outputs.alias(ch.label + ".out.P", m1 + m2 + 2 * j + 1, 1)
    for j, ch in enumerate(ev_channels):
        outputs.alias(ch.label + ".out.Q", m1 + m2 + 2 * m1 + 2 * j, 1)
        outputs.alias(ch.label + ".out.P", m1 + m2 + 2 * m1 + 2 * j + 1, 1)
    Ce = np.vstack([
        np.hstack([M @ C1, M @ C_K1]),
        np.hstack([M1e @ C2, M1e @ C_K2]),
        np.hstack([C1, C_K1]),
        np.hstack([C2, C_K2]),
    ])
    De = np.zeros((Ce.shape[0], Be.shape[1]))
    De[:m1, :2 * m1] = M
    De[m1:m1 + m2, 2 * m1:2 * m1 + m2] = np.eye(m2)
    De[m1 + m2:m1 + m2 + 2 * m1, :2 * m1] = np.eye(2 * m1)
    De[m1 + m2 + 2 * m1:, 2 * m1:2 * m1 + m2] = M1e.T
    De[m1 + m2 + 2 * m1:, 2 * m1 + m2:2 * m1 + 2 * m2] = M2e.T
    return StateSpaceModel(Ae, Be, Ce, De, inputs, outputs)


def cf_type1(plant: QuantumLinearSystem, qctrl: QuantumController) -> QuantumLinearSystem:
    """Type-1 coherent feedback: controller in series with all plant fields.

    The controller's two field groups are chained as ``W2 = W_out`` and
    ``W = W1_out``, giving the closed loop with coupling
    ``C_e = [C, C1 + C2]`` and the Hamiltonian matrix assembled from the
    plant/controller blocks.  ``C1 + C2 = 0`` realizes a pure direct
    interaction (controller decoupled from the field).
    """
    if qctrl.C1 is None or qctrl.C2 is None:
        raise ValidationError("type-1 CF controller needs C1 and C2")
    if qctrl.C1.shape != qctrl.C2.shape:
        raise ShapeError("C1 and C2 must have equal shapes")
    if qctrl.C1.shape[0] != 2 * plant.m:
        raise ShapeError(
            f"controller couplings must have {2 * plant.m} rows to match the plant fields")
    C, G = plant.C, plant.G
    C1, C2, GK = qctrl.C1, qctrl.C2, qctrl.G_K
    Sm = sigma(plant.m)
    off = C.T @ Sm @ (C1 - C2) / 2.0
    lower = GK + (C1.T @ Sm.T @ C2 + C2.T @ Sm @ C1) / 2.0
    n2, k2 = 2 * plant.n, qctrl.dim
    Ge = np.zeros((n2 + k2, n2 + k2))
    Ge[:n2, :n2] = G
    Ge[:n2, n2:] = off
    Ge[n2:, :n2] = off.T
    Ge[n2:, n2:] = lower
    Ce = np.hstack([C, C1 + C2])
    force = None
    if plant.force is not None:
        force = np.concatenate([plant.force, np.zeros(k2)])
    labels = plant.mode_labels + tuple(f"ctrl{i + 1}" for i in range(k2 // 2))
    return QuantumLinearSystem(Ge, Ce, plant.channels, force=force, mode_labels=labels)


def cf_type2(plant: QuantumLinearSystem, qctrl: QuantumController,
             S: Optional[np.ndarray] = None) -> QuantumLinearSystem:
    """Type-2 coherent feedback through a scattering element.

    The feedback output scatters into the controller, ``W3 = S W1_out``,
    and the controller output re-enters the evaluation input.  The closed
    loop is a system with coupling ``C_e = [S C1 + C2, C_K]`` whose input
    field carries ``S W1``; channel labels are taken from the evaluation
    partition.
    """
    if qctrl.C_K is None:
        raise ValidationError("type-2 CF controller needs C_K")
    fb_idx, ev_idx = _role_rows(plant)
    C1 = plant.C[fb_idx, :]
    C2 = plant.C[ev_idx, :]
    if C1.shape[0] != C2.shape[0]:
        raise ShapeError("feedback and evaluation partitions must have equal widths")
    if qctrl.C_K.shape[0] != C1.shape[0]:
        raise ShapeError("C_K width does not match the plant channel partition")
    if S is None:
        S = qctrl.S if qctrl.S is not None else np.eye(C1.shape[0])
    S = _check_scattering(np.asarray(S, dtype=float))
    if S.shape[0] != C1.shape[0]:
        raise ShapeError("scattering size does not match the channel width")

    G, GK, CK = plant.G, qctrl.G_K, qctrl.C_K
    mc = C1.shape[0] // 2
    Sm = sigma(mc)
    upper = G + (C2.T @ Sm @ S @ C1 + C1.T @ S.T @ Sm.T @ C2) / 2.0
    lowleft = CK.T @ Sm @ (S @ C1 - C2) / 2.0
    n2, k2 = 2 * plant.n, qctrl.dim
    Ge = np.zeros((n2 + k2, n2 + k2))
    Ge[:n2, :n2] = upper
    Ge[n2:, :n2] = lowleft
    Ge[:n2, n2:] = lowleft.T
    Ge[n2:, n2:] = GK
    Ce = np.hstack([S @ C1 + C2, CK])
    channels = tuple(ch for ch in plant.channels if ch.role == "evaluation")
    force = None
    if plant.force is not None:
        force = np.concatenate([plant.force, np.zeros(k2)])
    labels = plant.mode_labels + tuple(f"ctrl{i + 1}" for i in range(k2 // 2))
    return QuantumLinearSystem(Ge, Ce, channels, force=force, mode_labels=labels)


def direct_mf(kappa: float, tau: float) -> StateSpaceModel:
    """Direct (proportional) measurement feedback on the squeezing cavity.

    The plant is the single-mode cavity with drift diag(-kappa, 0), probe
    rate kappa and amplitude modulation on q only; the feedback circuit is
    a first-order low-pass of time constant ``tau`` with gain sqrt(kappa).
    ``tau = 0`` selects the ideal infinite-bandwidth limit, eliminated in
    closed form, for which q is measured without disturbance.

    Outputs: measured signal ``y``, feedback signal ``u`` and the state
    read-outs ``q``/``p``.
    """
    if kappa <= 0:
        raise ValidationError("kappa must be positive")
    if tau < 0:
        raise ValidationError("tau must be nonnegative")
    rk = np.sqrt(kappa)
    inputs = Ports([("Q", 1), ("P", 1)])
    if tau == 0.0:
        # u = sqrt(kappa) y cancels both the drift and the Q noise on q
        A = np.zeros((2, 2))
        B = np.array([[0.0, 0.0], [0.0, -rk]])
        C = np.array([[rk, 0.0], [kappa, 0.0], [1.0, 0.0], [0.0, 1.0]])
        D = np.array([[1.0, 0.0], [rk, 0.0], [0.0, 0.0], [0.0, 0.0]])
    else:
        A = np.array([[-kappa, 0.0, rk],
                      [0.0, 0.0, 0.0],
                      [rk / tau, 0.0, -1.0 / tau]])
        B = np.array([[-rk, 0.0],
                      [0.0, -rk],
                      [1.0 / tau, 0.0]])
        C = np.array([[rk, 0.0, 0.0],
                      [0.0, 0.0, rk],
                      [1.0, 0.0, 0.0],
                      [0.0, 1.0, 0.0]])
        D = np.array([[1.0, 0.0],
                      [0.0, 0.0],
                      [0.0, 0.0],
                      [0.0, 0.0]])
    outputs = Ports([("y", 1), ("u", 1), ("q", 1), ("p", 1)])
    return StateSpaceModel(A, B, C, D, inputs, outputs)


def direct_mf_controller(kappa: float, tau: float) -> StateSpaceModel:
    """The feedback circuit alone: Xi_{y->u}(s) = sqrt(kappa) / (1 + tau s)."""
    if kappa <= 0:
        raise ValidationError("kappa must be positive")
    if tau < 0:
        raise ValidationError("tau must be nonnegative")
    inputs = Ports([("y", 1)])
    outputs = Ports([("u", 1)])
    if tau == 0.0:
        return StateSpaceModel(np.zeros((0, 0)), np.zeros((0, 1)),
                               np.zeros((1, 0)), [[np.sqrt(kappa)]], inputs, outputs)
    return StateSpaceModel([[-1.0 / tau]], [[1.0 / tau]], [[np.sqrt(kappa)]],
                           [[0.0]], inputs, outputs)
