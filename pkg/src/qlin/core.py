"""Quadrature-space representation of open linear quantum systems.

Conventions used throughout the package:

* ``hbar = 1``.
* Quadratures are interleaved, ``x = [q1, p1, q2, p2, ...]``, so the
  commutation matrix is block diagonal with ``[[0, 1], [-1, 0]]`` blocks.
* A system with Hamiltonian matrix ``G`` (symmetric, ``H = x^T G x / 2``)
  and field coupling matrix ``C`` (``2m x 2n``) has drift
  ``A = Sigma_n (G + C^T Sigma_m C / 2)`` and noise input matrix
  ``B = Sigma_n C^T Sigma_m``; the output fields are ``W_out = C x + W``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

__all__ = [
    "ShapeError",
    "ValidationError",
    "PortLookupError",
    "sigma",
    "Channel",
    "Ports",
    "StateSpaceModel",
    "MeasurementSplit",
    "QuantumLinearSystem",
    "build_system",
    "homodyne_split",
    "augment_with_vacuum",
    "complex_to_quadrature",
    "quadrature_to_complex",
    "realizability_defect",
]

# Relative tolerance accepted when symmetrising a Hamiltonian matrix.
SYMMETRY_RTOL = 1e-12
# Tolerance scale for the homodyne-split identities (scaled by channel count).
SPLIT_TOL = 1e-12
# Orthonormality tolerance for subspace bases.
ORTHO_TOL = 1e-12


class ShapeError(ValueError):
    """Matrix dimensions are inconsistent."""


class ValidationError(ValueError):
    """Input violates a model invariant (symmetry, realizability, finiteness)."""


class PortLookupError(KeyError):
    """Unknown input or output port name."""


def sigma(n: int) -> np.ndarray:
    """Commutation matrix of ``n`` modes: block diagonal of [[0,1],[-1,0]]."""
    if n < 0:
        raise ShapeError(f"mode count must be nonnegative, got {n}")
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _as_matrix(name: str, arr, rows: Optional[int] = None, cols: Optional[int] = None) -> np.ndarray:
    out = np.atleast_2d(np.asarray(arr, dtype=float))
    if out.ndim != 2:
        raise ShapeError(f"{name} must be a 2-D matrix, got ndim={out.ndim}")
    if rows is not None and out.shape[0] != rows:
        raise ShapeError(f"{name} must have {rows} rows, got {out.shape[0]}")
    if cols is not None and out.shape[1] != cols:
        raise ShapeError(f"{name} must have {cols} columns, got {out.shape[1]}")
    if not np.all(np.isfinite(out)):
        raise ValidationError(f"{name} contains non-finite entries")
    return out


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Channel:
    """One input-output field channel with a role tag.

    Roles distinguish how a channel is used in a type-2 configuration:
    ``feedback`` channels close the loop, ``evaluation`` channels carry the
    measured signal, ``environment`` channels are pure decoherence.
    """

    label: str
    role: str = "environment"

    def __post_init__(self):
        if self.role not in ("feedback", "evaluation", "environment"):
            raise ValidationError(f"unknown channel role {self.role!r}")


class Ports:
    """Ordered registry mapping port names to contiguous index ranges.

    Sub-ports (e.g. the single quadrature ``"W1.Q"`` inside the two-wide
    channel port ``"W1"``) may overlap their parent range.
    """

    def __init__(self, entries: Iterable[tuple[str, int]] = ()):
        self._ranges: dict[str, tuple[int, int]] = {}
        self._order: list[str] = []
        self._total = 0
        for name, width in entries:
            self.append(name, width)

    def append(self, name: str, width: int) -> None:
        """Register a new primary port occupying the next `width` indices."""
        if name in self._ranges:
            raise ValidationError(f"duplicate port name {name!r}")
        if width < 0:
            raise ShapeError(f"port {name!r} has negative width")
        self._ranges[name] = (self._total, self._total + width)
        self._order.append(name)
        self._total += width

    def alias(self, name: str, start: int, width: int) -> None:
        """Register a sub-port referring to an existing index range."""
        if name in self._ranges:
            raise ValidationError(f"duplicate port name {name!r}")
        if start < 0 or start + width > self._total:
            raise ShapeError(f"sub-port {name!r} range out of bounds")
        self._ranges[name] = (start, start + width)
        self._order.append(name)

    def __contains__(self, name: str) -> bool:
        return name in self._ranges

    def slice(self, name: str) -> slice:
        try:
            lo, hi = self._ranges[name]
        except KeyError:
            raise PortLookupError(
                f"unknown port {name!r}; available: {sorted(self._ranges)}") from None
        return slice(lo, hi)

    def indices(self, names: Union[str, Sequence[str]]) -> np.ndarray:
        if isinstance(names, str):
            names = [names]
        idx: list[int] = []
        for name in names:
            s = self.slice(name)
            idx.extend(range(s.start, s.stop))
        return np.asarray(idx, dtype=int)

    def width(self, name: str) -> int:
        s = self.slice(name)
        return s.stop - s.start

    @property
    def total(self) -> int:
        return self._total

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._order)

    def entries(self) -> list[tuple[str, int, int]]:
        """(name, start, width) triples in registration order."""
        return [(n, self._ranges[n][0], self._ranges[n][1] - self._ranges[n][0])
                for n in self._order]

    def __repr__(self):
        return f"Ports({self.entries()!r})"


@dataclass(frozen=True)
class StateSpaceModel:
    """Real LTI realization dx/dt = A x + B u, y = C x + D u with named ports."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    inputs: Ports
    outputs: Ports

    def __post_init__(self):
        A = _as_matrix("A", self.A)
        if A.shape[0] != A.shape[1]:
            raise ShapeError(f"A must be square, got {A.shape}")
        n = A.shape[0]
        B = _as_matrix("B", self.B, rows=n) if np.size(self.B) else np.zeros((n, 0))
        C = _as_matrix("C", self.C, cols=n) if np.size(self.C) else np.zeros((0, n))
        D = _as_matrix("D", self.D, rows=C.shape[0], cols=B.shape[1]) \
            if np.size(self.D) else np.zeros((C.shape[0], B.shape[1]))
        if self.inputs.total != B.shape[1]:
            raise ShapeError(
                f"input ports cover {self.inputs.total} columns, B has {B.shape[1]}")
        if self.outputs.total != C.shape[0]:
            raise ShapeError(
                f"output ports cover {self.outputs.total} rows, C has {C.shape[0]}")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B", _frozen(B))
        object.__setattr__(self, "C", _frozen(C))
        object.__setattr__(self, "D", _frozen(D))

    @property
    def nstates(self) -> int:
        return self.A.shape[0]

    def b(self, port: Union[str, Sequence[str]]) -> np.ndarray:
        """Input-matrix columns of one or more input ports."""
        return self.B[:, self.inputs.indices(port)]

    def c(self, port: Union[str, Sequence[str]]) -> np.ndarray:
        """Output-matrix rows of one or more output ports."""
        return self.C[self.outputs.indices(port), :]

    def d(self, output_port, input_port) -> np.ndarray:
        rows = self.outputs.indices(output_port)
        cols = self.inputs.indices(input_port)
        return self.D[np.ix_(rows, cols)]

    def similar(self, T: np.ndarray) -> "StateSpaceModel":
        """Realization in the coordinates x' = T^{-1} x (ports unchanged)."""
        T = _as_matrix("T", T, rows=self.nstates, cols=self.nstates)
        Tinv = np.linalg.inv(T)
        return StateSpaceModel(Tinv @ self.A @ T, Tinv @ self.B,
                               self.C @ T, self.D, self.inputs, self.outputs)


@dataclass(frozen=True)
class MeasurementSplit:
    """Homodyne selector pair: y = M1 W_out is measured, M2 W_out is conjugate.

    M = [M1; M2] is symplectic and orthogonal, which is equivalent to the
    identity set  M1 Sigma M1^T = 0,  M1 M1^T = I,  M2 Sigma M2^T = 0,
    M2 M2^T = I,  M1 Sigma M2^T = I,  M1 M2^T = 0,  M1^T M1 + M2^T M2 = I.
    """

    m: int
    M1: np.ndarray
    M2: np.ndarray

    def __post_init__(self):
        M1 = _as_matrix("M1", self.M1, rows=self.m, cols=2 * self.m)
        M2 = _as_matrix("M2", self.M2, rows=self.m, cols=2 * self.m)
        tol = SPLIT_TOL * max(self.m, 1)
        S = sigma(self.m)
        eye = np.eye(self.m)
        checks = {
            "M1 Sigma M1^T = 0": M1 @ S @ M1.T,
            "M2 Sigma M2^T = 0": M2 @ S @ M2.T,
            "M1 M1^T = I": M1 @ M1.T - eye,
            "M2 M2^T = I": M2 @ M2.T - eye,
            "M1 Sigma M2^T = I": M1 @ S @ M2.T - eye,
            "M1 M2^T = 0": M1 @ M2.T,
            "M1^T M1 + M2^T M2 = I": M1.T @ M1 + M2.T @ M2 - np.eye(2 * self.m),
        }
        for label, defect in checks.items():
            worst = float(np.max(np.abs(defect))) if defect.size else 0.0
            if worst > tol:
                raise ValidationError(
                    f"measurement split violates {label} (defect {worst:.3e})")
        object.__setattr__(self, "M1", _frozen(M1))
        object.__setattr__(self, "M2", _frozen(M2))


def homodyne_split(m: int, measured) -> MeasurementSplit:
    """Build the (M1, M2) selector pair for per-channel homodyne detection.

    Parameters
    ----------
    m : int
        Number of field channels.
    measured : str, float, or sequence thereof
        Per-channel quadrature selector: ``"Q"``, ``"P"``, or an angle theta
        in radians measuring ``cos(theta) Q + sin(theta) P``.  A scalar is
        broadcast to all channels.

    Returns
    -------
    MeasurementSplit
        Satisfies all seven selector identities by construction.
    """
    if m < 1:
        raise ShapeError("channel count must be >= 1")
    if isinstance(measured, (str, int, float)):
        measured = [measured] * m
    if len(measured) != m:
        raise ShapeError(f"need one selector per channel, got {len(measured)} for m={m}")
    M1 = np.zeros((m, 2 * m))
    M2 = np.zeros((m, 2 * m))
    for j, sel in enumerate(measured):
        if sel == "Q":
            theta = 0.0
        elif sel == "P":
            theta = np.pi / 2
        else:
            theta = float(sel)
        c, s = np.cos(theta), np.sin(theta)
        M1[j, 2 * j:2 * j + 2] = (c, s)
        M2[j, 2 * j:2 * j + 2] = (-s, c)
    return MeasurementSplit(m, M1, M2)


def realizability_defect(A: np.ndarray, C: np.ndarray) -> float:
    """Asymmetry of Sigma_n^T A - C^T Sigma_m C / 2, relative to its norm.

    Zero (up to rounding) iff (A, C) can be produced by some symmetric G;
    the symmetric part is that G.
    """
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    n2 = A.shape[0]
    m2 = C.shape[0]
    G = sigma(n2 // 2).T @ A - C.T @ sigma(m2 // 2) @ C / 2.0
    scale = max(np.linalg.norm(G), 1.0)
    return float(np.linalg.norm(G - G.T) / scale)


@dataclass(frozen=True)
class QuantumLinearSystem:
    """Open linear quantum system in the quadrature representation.

    Attributes
    ----------
    G : ndarray
        Symmetric 2n x 2n Hamiltonian matrix (stored symmetrised).
    C : ndarray
        2m x 2n field coupling matrix; rows are grouped per channel as
        (Q, P) pairs.
    channels : tuple of Channel
        Labels and role tags for the m channels.
    force : ndarray or None
        Optional 2n drive direction for the classical force input.
    mode_labels : tuple of str
        Names for the (q_i, p_i) pairs.
    """

    G: np.ndarray
    C: np.ndarray
    channels: tuple[Channel, ...]
    force: Optional[np.ndarray] = None
    mode_labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        G = _as_matrix("G", self.G)
        if G.shape[0] != G.shape[1] or G.shape[0] % 2:
            raise ShapeError(f"G must be square with even size, got {G.shape}")
        n2 = G.shape[0]
        scale = max(np.linalg.norm(G), 1.0)
        if np.linalg.norm(G - G.T) > SYMMETRY_RTOL * scale:
            raise ValidationError(
                "G is not symmetric within tolerance; refusing to symmetrise "
                "an asymmetric Hamiltonian matrix")
        G = (G + G.T) / 2.0
        C = _as_matrix("C", self.C, cols=n2) if np.size(self.C) else np.zeros((0, n2))
        if C.shape[0] % 2:
            raise ShapeError(f"C must have an even row count, got {C.shape[0]}")
        m = C.shape[0] // 2
        channels = tuple(self.channels) if self.channels else tuple(
            Channel(f"W{j + 1}") for j in range(m))
        if len(channels) != m:
            raise ShapeError(f"{len(channels)} channel labels for {m} channels")
        if len(set(ch.label for ch in channels)) != m:
            raise ValidationError("channel labels must be unique")
        force = self.force
        if force is not None:
            force = np.asarray(force, dtype=float).reshape(-1)
            if force.shape[0] != n2:
                raise ShapeError(f"force must have length {n2}, got {force.shape[0]}")
            if not np.all(np.isfinite(force)):
                raise ValidationError("force contains non-finite entries")
            force = _frozen(force)
        labels = tuple(self.mode_labels) if self.mode_labels else tuple(
            f"mode{i + 1}" for i in range(n2 // 2))
        if len(labels) != n2 // 2:
            raise ShapeError(f"{len(labels)} mode labels for {n2 // 2} modes")
        object.__setattr__(self, "G", _frozen(G))
        object.__setattr__(self, "C", _frozen(C))
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "force", force)
        object.__setattr__(self, "mode_labels", labels)

    @property
    def n(self) -> int:
        """Mode count."""
        return self.G.shape[0] // 2

    @property
    def m(self) -> int:
        """Channel count."""
        return self.C.shape[0] // 2

    @property
    def A(self) -> np.ndarray:
        """Drift matrix Sigma_n (G + C^T Sigma_m C / 2)."""
        return sigma(self.n) @ (self.G + self.C.T @ sigma(self.m) @ self.C / 2.0)

    @property
    def B(self) -> np.ndarray:
        """Noise input matrix Sigma_n C^T Sigma_m."""
        return sigma(self.n) @ self.C.T @ sigma(self.m)

    def channel_rows(self, label: str) -> slice:
        for j, ch in enumerate(self.channels):
            if ch.label == label:
                return slice(2 * j, 2 * j + 2)
        raise PortLookupError(f"unknown channel {label!r}")

    def channels_by_role(self, role: str) -> list[Channel]:
        return [ch for ch in self.channels if ch.role == role]

    def to_state_space(self, split: Optional[MeasurementSplit] = None,
                       include_force: bool = True) -> StateSpaceModel:
        """Named-port LTI realization of the system.

        Without a split the inputs are the raw field quadratures (ports
        ``"<label>"`` of width 2 with sub-ports ``".Q"``/``".P"``) and the
        outputs are the field quadratures ``"<label>.out"`` with D = I.

        With a split covering all channels the inputs are the measured
        noise ``"Q"`` and its conjugate ``"P"`` (width m each) and the
        outputs are ``"y"`` (measured signal), ``"ybar"`` (conjugate
        signal) and the full field ``"Wout"``.

        The classical force enters through port ``"F"`` when present.
        """
        A = self.A
        B = self.B
        m = self.m
        has_force = include_force and self.force is not None
        if split is None:
            inputs = Ports()
            for j, ch in enumerate(self.channels):
                inputs.append(ch.label, 2)
                inputs.alias(ch.label + ".Q", 2 * j, 1)
                inputs.alias(ch.label + ".P", 2 * j + 1, 1)
            Bfull = B
            if has_force:
                inputs.append("F", 1)
                Bfull = np.hstack([B, self.force.reshape(-1, 1)])
            outputs = Ports()
            for j, ch in enumerate(self.channels):
                outputs.append(ch.label + ".out", 2)
                outputs.alias(ch.label + ".out.Q", 2 * j, 1)
                outputs.alias(ch.label + ".out.P", 2 * j + 1, 1)
            D = np.zeros((2 * m, Bfull.shape[1]))
            D[:, :2 * m] = np.eye(2 * m)
            return StateSpaceModel(A, Bfull, self.C, D, inputs, outputs)

        if split.m != m:
            raise ShapeError(f"split has {split.m} channels, system has {m}")
        M1, M2 = split.M1, split.M2
        inputs = Ports([("Q", m), ("P", m)])
        cols = [B @ M1.T, B @ M2.T]
        if has_force:
            inputs.append("F", 1)
            cols.append(self.force.reshape(-1, 1))
        Bfull = np.hstack(cols) if cols else np.zeros((2 * self.n, 0))
        outputs = Ports([("y", m), ("ybar", m), ("Wout", 2 * m)])
        for j, ch in enumerate(self.channels):
            outputs.alias(ch.label + ".out.Q", 2 * m + 2 * j, 1)
            outputs.alias(ch.label + ".out.P", 2 * m + 2 * j + 1, 1)
        Cfull = np.vstack([M1 @ self.C, M2 @ self.C, self.C])
        D = np.zeros((4 * m, Bfull.shape[1]))
        D[:m, :m] = np.eye(m)                      # y carries the measured noise
        D[m:2 * m, m:2 * m] = np.eye(m)            # ybar carries the conjugate
        D[2 * m:, :m] = M1.T
        D[2 * m:, m:2 * m] = M2.T
        return StateSpaceModel(A, Bfull, Cfull, D, inputs, outputs)


def build_system(G, C, channels=None, force=None, mode_labels=None) -> QuantumLinearSystem:
    """Construct and validate an open linear quantum system.

    Parameters
    ----------
    G : array_like
        Symmetric 2n x 2n Hamiltonian matrix (rejected if asymmetric beyond
        1e-12 relative).
    C : array_like
        2m x 2n coupling matrix with per-channel (Q, P) row pairs.
    channels : sequence of Channel or (label, role) pairs, optional
    force : array_like, optional
        2n drive direction of the classical force.
    mode_labels : sequence of str, optional

    Returns
    -------
    QuantumLinearSystem
        The validated system; the drift ``A`` and noise input ``B`` are
        exposed as accessors.
    """
    chs = None
    if channels is not None:
        chs = tuple(ch if isinstance(ch, Channel) else Channel(*ch) if isinstance(ch, (tuple, list))
                    else Channel(str(ch)) for ch in channels)
    return QuantumLinearSystem(np.asarray(G, dtype=float), np.asarray(C, dtype=float),
                               chs or (), force=force,
                               mode_labels=tuple(mode_labels) if mode_labels else ())


def augment_with_vacuum(sys: QuantumLinearSystem, extra_channels: int) -> QuantumLinearSystem:
    """Append uncoupled vacuum channels (zero coupling rows).

    The drift is unchanged since zero rows contribute no Ito correction;
    the widened output enables simultaneous dual-homodyne readout of all
    quadratures through a width-2m split on the joint field.
    ``extra_channels = 0`` returns the system unchanged.
    """
    if extra_channels < 0:
        raise ShapeError("extra_channels must be >= 0")
    if extra_channels == 0:
        return sys
    existing = {ch.label for ch in sys.channels}
    new_labels = []
    k = 1
    while len(new_labels) < extra_channels:
        lbl = f"vac{k}"
        if lbl not in existing:
            new_labels.append(lbl)
        k += 1
    C_aug = np.vstack([sys.C, np.zeros((2 * extra_channels, 2 * sys.n))])
    channels = sys.channels + tuple(Channel(lbl, "environment") for lbl in new_labels)
    return QuantumLinearSystem(sys.G, C_aug, channels, force=sys.force,
                               mode_labels=sys.mode_labels)


def complex_to_quadrature(complex_drift, complex_couplings,
                          channels=None, force=None, mode_labels=None) -> QuantumLinearSystem:
    """Convert an annihilation-operator description to quadrature form.

    The complex dynamics ``da/dt = F a + (noise)`` with couplings
    ``L_j = l_j . a`` maps to the quadrature system through the block
    substitution ``F_ij -> [[Re, -Im], [Im, Re]]``; channel rows become
    ``[Re(l), -Im(l)]`` and ``[Im(l), Re(l)]`` per mode.

    Raises
    ------
    ValidationError
        If the converted drift is not physically realizable, i.e. no
        symmetric G reproduces it with the converted coupling.
    """
    F = np.atleast_2d(np.asarray(complex_drift, dtype=complex))
    if F.shape[0] != F.shape[1]:
        raise ShapeError(f"complex drift must be square, got {F.shape}")
    n = F.shape[0]
    A = np.zeros((2 * n, 2 * n))
    A[0::2, 0::2] = F.real
    A[0::2, 1::2] = -F.imag
    A[1::2, 0::2] = F.imag
    A[1::2, 1::2] = F.real
    rows = []
    for l in complex_couplings:
        l = np.asarray(l, dtype=complex).reshape(-1)
        if l.shape[0] != n:
            raise ShapeError(f"coupling vector must have length {n}, got {l.shape[0]}")
        rq = np.zeros(2 * n)
        rp = np.zeros(2 * n)
        rq[0::2], rq[1::2] = l.real, -l.imag
        rp[0::2], rp[1::2] = l.imag, l.real
        rows.extend([rq, rp])
    C = np.asarray(rows) if rows else np.zeros((0, 2 * n))
    m = C.shape[0] // 2
    G = sigma(n).T @ A - C.T @ sigma(m) @ C / 2.0
    scale = max(np.linalg.norm(G), 1.0)
    if np.linalg.norm(G - G.T) > 1e-10 * scale:
        raise ValidationError(
            "complex description converts to a non-realizable drift "
            f"(asymmetry {np.linalg.norm(G - G.T) / scale:.3e})")
    G = (G + G.T) / 2.0
    return build_system(G, C, channels=channels, force=force, mode_labels=mode_labels)


def quadrature_to_complex(sys: QuantumLinearSystem, tol: float = 1e-10):
    """Inverse of :func:`complex_to_quadrature` for complex-linear systems.

    Returns ``(F, couplings)``.  Fails if the drift or coupling does not
    commute with the complex structure (i.e. the dynamics mixes ``a`` and
    ``a*``), which is the case e.g. for squeezing Hamiltonians.
    """
    A = sys.A
    n = sys.n
    re1, im1 = A[0::2, 0::2], A[1::2, 0::2]
    re2, im2 = A[1::2, 1::2], -A[0::2, 1::2]
    scale = max(np.linalg.norm(A), 1.0)
    if np.linalg.norm(re1 - re2) > tol * scale or np.linalg.norm(im1 - im2) > tol * scale:
        raise ValidationError("drift is not complex-linear; no annihilation-operator form")
    F = re1 + 1j * im1
    couplings = []
    cscale = max(np.linalg.norm(sys.C), 1.0)
    for j in range(sys.m):
        rq = sys.C[2 * j]
        rp = sys.C[2 * j + 1]
        l = rq[0::2] + 1j * rp[0::2]
        if (np.linalg.norm(rq[1::2] + l.imag) > tol * cscale
                or np.linalg.norm(rp[1::2] - l.real) > tol * cscale):
            raise ValidationError(f"channel {j} coupling is not complex-linear")
        couplings.append(l)
    return F, couplings
