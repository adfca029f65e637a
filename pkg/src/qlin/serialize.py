"""File formats: system descriptions, controllers, realizations, reports.

All files are UTF-8 JSON.  Matrices are row-major arrays of arrays of
finite doubles; non-finite entries are rejected on load.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from .core import (
    Channel,
    Ports,
    QuantumLinearSystem,
    StateSpaceModel,
    ValidationError,
    build_system,
)
from .goals import GoalVerdict
from .interconnect import ClassicalController, QuantumController

__all__ = [
    "system_to_dict",
    "system_from_dict",
    "model_to_dict",
    "model_from_dict",
    "controller_from_dict",
    "verdict_to_dict",
]


def _matrix(obj: Any, name: str) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"field {name!r} is not a numeric matrix: {exc}") from None
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"field {name!r} contains NaN or Inf")
    return arr


def system_to_dict(sys: QuantumLinearSystem) -> dict:
    out = {
        "modes": sys.n,
        "G": sys.G.tolist(),
        "C": sys.C.tolist(),
        "channels": [{"label": ch.label, "role": ch.role} for ch in sys.channels],
        "mode_labels": list(sys.mode_labels),
    }
    if sys.force is not None:
        out["force"] = sys.force.tolist()
    return out


def system_from_dict(d: dict) -> QuantumLinearSystem:
    if not isinstance(d, dict):
        raise ValidationError("system description must be a JSON object")
    try:
        modes = int(d["modes"])
        G = _matrix(d["G"], "G")
        C = _matrix(d["C"], "C")
    except KeyError as exc:
        raise ValidationError(f"system description missing field {exc}") from None
    if G.shape != (2 * modes, 2 * modes):
        raise ValidationError(
            f"G has shape {G.shape}, expected {(2 * modes, 2 * modes)} for modes={modes}")
    channels = None
    if "channels" in d:
        channels = [Channel(str(ch["label"]), str(ch.get("role", "environment")))
                    for ch in d["channels"]]
    force = None
    if d.get("force") is not None:
        force = _matrix(d["force"], "force").reshape(-1)
    labels = tuple(str(s) for s in d.get("mode_labels", ())) or None
    return build_system(G, C, channels=channels, force=force, mode_labels=labels)


def _ports_to_list(ports: Ports) -> list[dict]:
    return [{"name": n, "start": s, "width": w} for n, s, w in ports.entries()]


def _ports_from_list(entries: list[dict]) -> Ports:
    ports = Ports()
    covered = 0
    for e in entries:
        name, start, width = str(e["name"]), int(e["start"]), int(e["width"])
        if start == covered:
            ports.append(name, width)
            covered += width
        else:
            ports.alias(name, start, width)
    return ports


def model_to_dict(model: StateSpaceModel) -> dict:
    return {
        "A": model.A.tolist(),
        "B": model.B.tolist(),
        "C": model.C.tolist(),
        "D": model.D.tolist(),
        "input_ports": _ports_to_list(model.inputs),
        "output_ports": _ports_to_list(model.outputs),
    }


def model_from_dict(d: dict) -> StateSpaceModel:
    try:
        return StateSpaceModel(
            _matrix(d["A"], "A"), _matrix(d["B"], "B"),
            _matrix(d["C"], "C"), _matrix(d["D"], "D"),
            _ports_from_list(d["input_ports"]), _ports_from_list(d["output_ports"]))
    except KeyError as exc:
        raise ValidationError(f"realization missing field {exc}") from None


def controller_from_dict(d: dict):
    """Parse a controller file; returns (scheme, controller, options).

    The ``scheme`` field selects the interconnection: ``mf1``/``mf2``
    (classical, with optional homodyne selector lists ``measure`` /
    ``measure_feedback``/``measure_evaluation``), ``cf1``/``cf2``
    (quantum), or ``direct`` (proportional feedback, field ``tau``).
    """
    if not isinstance(d, dict) or "scheme" not in d:
        raise ValidationError("controller description needs a 'scheme' field")
    scheme = str(d["scheme"])
    opts: dict[str, Any] = {}
    if scheme == "mf1":
        ctrl = ClassicalController(_matrix(d.get("A_K", []), "A_K"),
                                   _matrix(d.get("B_K", []), "B_K"),
                                   C_K=_matrix(d["C_K"], "C_K") if "C_K" in d else None)
        opts["measure"] = d.get("measure", "P")
    elif scheme == "mf2":
        ctrl = ClassicalController(
            _matrix(d.get("A_K", []), "A_K"), _matrix(d.get("B_K", []), "B_K"),
            C_K1=_matrix(d["C_K1"], "C_K1") if "C_K1" in d else None,
            C_K2=_matrix(d["C_K2"], "C_K2") if "C_K2" in d else None)
        opts["measure_feedback"] = d.get("measure_feedback", "P")
        opts["measure_evaluation"] = d.get("measure_evaluation", "P")
    elif scheme == "cf1":
        ctrl = QuantumController(_matrix(d["G_K"], "G_K"),
                                 C1=_matrix(d["C1"], "C1"),
                                 C2=_matrix(d["C2"], "C2"))
    elif scheme == "cf2":
        ctrl = QuantumController(_matrix(d["G_K"], "G_K"),
                                 C_K=_matrix(d["C_K"], "C_K"),
                                 S=_matrix(d["S"], "S") if "S" in d else None)
    elif scheme == "direct":
        ctrl = None
        opts["tau"] = float(d.get("tau", 0.0))
    else:
        raise ValidationError(
            f"unknown scheme {scheme!r}; expected mf1, mf2, cf1, cf2, or direct")
    return scheme, ctrl, opts


def verdict_to_dict(v: GoalVerdict) -> dict:
    return {
        "goal": v.goal,
        "achieved": v.achieved,
        "witnesses": [w.tolist() for w in v.witnesses],
        # an infinite obstruction gap (no candidate directions) becomes null
        "residual": v.residual if np.isfinite(v.residual) else None,
        "method_agreement": v.method_agreement,
        "dims": v.dims,
        "tolerance": v.tolerance,
    }
