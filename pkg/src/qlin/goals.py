"""Verdict engines for the three structural control goals.

Each goal is decided twice and cross-checked:

* a geometric route on orthonormalized controllability/observability
  subspaces (emptiness or nonemptiness of an intersection), and
* an algebraic route on Markov-parameter identities (and, for zero-transfer
  claims, pointwise transfer-function probing).

A verdict whose routes disagree is flagged through ``method_agreement``
rather than silently resolved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .core import StateSpaceModel
from .structural import (
    Subspace,
    controllability_matrix,
    intersect,
    kernel,
    markov_parameters,
    observability_matrix,
    range_space,
    rank_tolerance,
)
from .xfer import TransferFunction, evaluate

__all__ = [
    "GoalVerdict",
    "residual_tolerance",
    "check_bae",
    "find_qnd",
    "find_dfs",
    "transfer_zero_equivalence",
]

#: Base factor of the Markov-residual threshold; override per call or via
#: the QLIN_TOL environment variable in the CLI.
DEFAULT_RESIDUAL_BASE = 1e-9

#: Rank tolerance for subspace intersections inside the goal engines.
#: Computed controllability/observability subspaces carry rounding of
#: order eps * cond, so two of them meeting at an angle below this count
#: as intersecting; it matches the principal-angle tolerance used for
#: witness-subspace comparisons.
INTERSECT_RTOL = 1e-8

PortArg = Union[str, Sequence[str]]


@dataclass(frozen=True)
class GoalVerdict:
    """Outcome of a BAE/QND/DFS check.

    ``witnesses`` are unit vectors spanning the witness subspace (empty for
    BAE).  ``residual`` is the largest Markov-identity violation of the
    witnesses when the goal is achieved, and the obstruction gap (smallest
    singular value separating the candidate space from the goal condition)
    when it is not.  ``method_agreement`` records whether the geometric and
    algebraic routes concurred.
    """

    goal: str
    achieved: bool
    witnesses: tuple[np.ndarray, ...]
    residual: float
    method_agreement: bool
    dims: dict = field(default_factory=dict)
    tolerance: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "achieved", bool(self.achieved))
        object.__setattr__(self, "method_agreement", bool(self.method_agreement))
        object.__setattr__(self, "residual", float(self.residual))
        object.__setattr__(self, "tolerance", float(self.tolerance))
        object.__setattr__(self, "dims", {k: (int(v) if np.isscalar(v) else v)
                                          for k, v in self.dims.items()})


def residual_tolerance(model: StateSpaceModel, input_port: PortArg,
                       output_port: PortArg, base: Optional[float] = None) -> float:
    """Markov-residual threshold 'base * (1+|A|)^N * |B| * |C|'.

    The (1+|A|)^N factor guards against amplification across the N powers
    of the drift entering the Markov sequence.
    """
    if base is None:
        base = DEFAULT_RESIDUAL_BASE
    nA = np.linalg.norm(model.A, 2) if model.nstates else 0.0
    B = model.b(input_port)
    C = model.c(output_port)
    nB = np.linalg.norm(B, 2) if B.size else 0.0
    nC = np.linalg.norm(C, 2) if C.size else 0.0
    return float(base * (1.0 + nA) ** model.nstates * nB * nC)


def _markov_residual(model, input_port, output_port, include_direct=True) -> float:
    vals = [np.max(np.abs(M)) if M.size else 0.0
            for M in markov_parameters(model, input_port, output_port)]
    if include_direct:
        D = model.d(output_port, input_port)
        if D.size:
            vals.append(np.max(np.abs(D)))
    return float(max(vals)) if vals else 0.0


def _normalize_witness(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    nz = np.nonzero(np.abs(v) > 1e-12 * np.max(np.abs(v)))[0]
    if nz.size and v[nz[0]] < 0:
        v = -v
    return v + 0.0  # clear negative zeros


def _witness_list(space: Subspace) -> tuple[np.ndarray, ...]:
    return tuple(_normalize_witness(space.basis[:, j]) for j in range(space.dim))


def _obstruction_gap(mat: np.ndarray, candidate: Subspace) -> tuple[float, float]:
    """Smallest singular value of ``mat @ candidate.basis`` and its rank cutoff.

    Measures how far the candidate subspace is from containing a vector
    annihilated by ``mat``; (0-dim candidate) -> (inf, 0).
    """
    if candidate.dim == 0:
        return float("inf"), 0.0
    M = mat @ candidate.basis
    if M.size == 0 or not np.any(M):
        return 0.0, 0.0
    s = np.linalg.svd(M, compute_uv=False)
    cutoff = rank_tolerance(s, M.shape)
    gap = float(s[-1]) if M.shape[0] >= M.shape[1] else 0.0
    return gap, cutoff


def transfer_zero_equivalence(model: StateSpaceModel, input_port: PortArg,
                              output_port: PortArg, probes: int = 16,
                              base: Optional[float] = None,
                              seed: int = 0x5EED) -> bool:
    """Check that the Markov-zero test and transfer-function probing agree.

    The transfer function is evaluated at ``probes`` pseudo-random points on
    a circle of radius ``2 |A| + 1`` (always outside the spectrum, so the
    resolvent is well conditioned); both routes must deliver the same
    zero/nonzero verdict.
    """
    tol = residual_tolerance(model, input_port, output_port, base)
    markov_zero = _markov_residual(model, input_port, output_port) <= tol
    tf = TransferFunction(model, input_port, output_port)
    radius = 2.0 * (np.linalg.norm(model.A, 2) if model.nstates else 0.0) + 1.0
    rng = np.random.default_rng(seed)
    worst = 0.0
    drawn = 0
    while drawn < probes:
        s = radius * np.exp(2j * np.pi * rng.random())
        try:
            val = evaluate(tf, s)
        except ValueError:
            continue  # probe landed too close to a pole; resample
        drawn += 1
        if val.size:
            worst = max(worst, float(np.max(np.abs(val))))
    # The transfer magnitude lives on its own scale: on this circle the
    # resolvent norm is below 1/(|A|+1), so a zero path leaves only
    # rounding ~ eps * |B| |C| while a live path is O(|B||C|/(R-|A|)).
    nB = np.linalg.norm(model.b(input_port), 2)
    nC = np.linalg.norm(model.c(output_port), 2)
    transfer_zero = worst <= (base if base is not None else DEFAULT_RESIDUAL_BASE) * (1.0 + nB * nC)
    return markov_zero == transfer_zero


def check_bae(model: StateSpaceModel, ba_port: PortArg, shot_output: PortArg,
              base: Optional[float] = None, rank_rtol: Optional[float] = None,
              probes: int = 16) -> GoalVerdict:
    """Decide back-action evasion: zero signal flow from the BA noise to the
    measured output.

    Parameters
    ----------
    model : StateSpaceModel
    ba_port : str or sequence of str
        Input port(s) carrying the back-action (conjugate) noise.
    shot_output : str or sequence of str
        Measured-signal output port(s) (post-selector).
    base : float, optional
        Residual-threshold base factor (default 1e-9).

    Returns
    -------
    GoalVerdict
        ``achieved`` iff no subsystem is both controllable from the BA port
        and observable from the measured output, equivalently iff all
        Markov parameters (and the direct term) of the pair vanish.
    """
    tol = residual_tolerance(model, ba_port, shot_output, base)
    residual = _markov_residual(model, ba_port, shot_output)
    markov_achieved = residual <= tol

    ctrl = range_space(controllability_matrix(model, ba_port), rtol=rank_rtol)
    obs = range_space(observability_matrix(model, shot_output).T, rtol=rank_rtol)
    meet = intersect(ctrl, obs, rtol=rank_rtol if rank_rtol is not None else INTERSECT_RTOL)
    D = model.d(shot_output, ba_port)
    direct = float(np.max(np.abs(D))) if D.size else 0.0
    geo_achieved = meet.dim == 0 and direct <= tol

    agree = geo_achieved == markov_achieved
    if agree:
        agree = transfer_zero_equivalence(model, ba_port, shot_output,
                                          probes=probes, base=base)
    return GoalVerdict(
        goal="BAE",
        achieved=markov_achieved,
        witnesses=(),
        residual=residual,
        method_agreement=agree,
        dims={"controllable": ctrl.dim, "observable": obs.dim, "overlap": meet.dim},
        tolerance=tol,
    )


def _goal_subspaces(model, noise_ports, rank_rtol):
    ctrb = controllability_matrix(model, noise_ports)
    unctrl = kernel(ctrb.T, rtol=rank_rtol)     # Ker(C_u^T)
    return ctrb, unctrl


def find_qnd(model: StateSpaceModel, noise_ports: PortArg, output: PortArg,
             restrict_to: Optional[Subspace] = None,
             base: Optional[float] = None,
             rank_rtol: Optional[float] = None) -> GoalVerdict:
    """Find QND variables: uncontrollable from all noise, observable in the output.

    The witness subspace is ``Ker(Ctrb^T) ∩ Range(Obsv^T)`` intersected with
    ``restrict_to`` when given (e.g. the plant block of a hybrid loop).
    """
    ctrb, unctrl = _goal_subspaces(model, noise_ports, rank_rtol)
    obs_rows = observability_matrix(model, output)
    obs = range_space(obs_rows.T, rtol=rank_rtol)
    meet_rtol = rank_rtol if rank_rtol is not None else INTERSECT_RTOL
    space = intersect(unctrl, obs, rtol=meet_rtol)
    candidate = obs if restrict_to is None else intersect(obs, restrict_to, rtol=meet_rtol)
    if restrict_to is not None:
        space = intersect(space, restrict_to, rtol=meet_rtol)

    tol = residual_tolerance(model, noise_ports, output, base)
    witnesses = _witness_list(space)
    if witnesses:
        unc = max(float(np.max(np.abs(w @ ctrb))) for w in witnesses)
        obs_scale = np.linalg.norm(obs_rows, 2) if obs_rows.size else 0.0
        observable = all(
            np.linalg.norm(obs_rows @ w) > obs_rows.shape[0] * np.finfo(float).eps * obs_scale
            for w in witnesses)
        markov_ok = unc <= tol and observable
        return GoalVerdict("QND", True, witnesses, unc, markov_ok,
                           dims={"witness": space.dim, "uncontrollable": unctrl.dim,
                                 "observable": obs.dim},
                           tolerance=tol)
    gap, cutoff = _obstruction_gap(ctrb.T, candidate)
    markov_empty = gap > cutoff
    return GoalVerdict("QND", False, (), gap, markov_empty,
                       dims={"witness": 0, "uncontrollable": unctrl.dim,
                             "observable": obs.dim},
                       tolerance=tol)


def find_dfs(model: StateSpaceModel, noise_ports: PortArg, output_fields: PortArg,
             restrict_to: Optional[Subspace] = None,
             base: Optional[float] = None,
             rank_rtol: Optional[float] = None) -> GoalVerdict:
    """Find a decoherence-free subsystem: uncontrollable from all input fields
    and invisible in all output fields.

    ``output_fields`` must name full field outputs (pre-measurement), not a
    homodyne signal.
    """
    ctrb, unctrl = _goal_subspaces(model, noise_ports, rank_rtol)
    obs_rows = observability_matrix(model, output_fields)
    unobs = kernel(obs_rows, rtol=rank_rtol)
    meet_rtol = rank_rtol if rank_rtol is not None else INTERSECT_RTOL
    space = intersect(unctrl, unobs, rtol=meet_rtol)
    if restrict_to is not None:
        space = intersect(space, restrict_to, rtol=meet_rtol)

    tol = residual_tolerance(model, noise_ports, output_fields, base)
    witnesses = _witness_list(space)
    if witnesses:
        res = max(max(float(np.max(np.abs(w @ ctrb))),
                      float(np.max(np.abs(obs_rows @ w)))) for w in witnesses)
        return GoalVerdict("DFS", True, witnesses, res, res <= tol,
                           dims={"witness": space.dim, "uncontrollable": unctrl.dim,
                                 "unobservable": unobs.dim},
                           tolerance=tol)
    cand = restrict_to if restrict_to is not None else Subspace(
        model.nstates, np.eye(model.nstates))
    gap, cutoff = _obstruction_gap(np.vstack([ctrb.T, obs_rows]), cand)
    return GoalVerdict("DFS", False, (), gap, gap > cutoff,
                       dims={"witness": 0, "uncontrollable": unctrl.dim,
                             "unobservable": unobs.dim},
                       tolerance=tol)
