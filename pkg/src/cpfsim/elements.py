"""Single-photon transformations of every optical element in the setup.

Phase conventions are frozen in :mod:`cpfsim.conventions`; see that module for
the full list.  Every constructor returns a :class:`~cpfsim.modes.ModeTransform`
acting on the designated path(s) and as the identity elsewhere.

Element descriptors serialize as ``NAME(key=value,...) @ path[,path...]``,
e.g. ``HWP(angle=0.3927) @ A`` or ``PBS(in=[A,B],out=[C,D])``; the same grammar
is consumed by the netlist parser.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import conventions as conv
from .errors import SpaceMismatch, UnknownElement
from .modes import (
    KIND_PROJECTOR,
    KIND_UNITARY,
    Mode,
    ModeSpace,
    ModeTransform,
    POLS,
    compose_transforms,
)

OVERFLOW = object()  # sentinel: image of a mode leaves the truncation window


def _single_path(space: ModeSpace, path: str, fn, kind, provenance) -> ModeTransform:
    """Build identity-everywhere transform from a per-(pol, oam) map on one path.

    ``fn(pol, oam)`` returns an iterable of (pol', oam', amplitude) staying on
    the same path, or the OVERFLOW sentinel.
    """
    if path not in space.paths:
        raise SpaceMismatch(f"path {path!r} not in space")
    m = np.eye(space.dim, dtype=complex)
    overflow = set()
    for j in space.path_indices(path):
        mode = space.mode(int(j))
        images = fn(mode.pol, mode.oam)
        m[:, j] = 0.0
        if images is OVERFLOW:
            overflow.add(int(j))
            continue
        for pol2, oam2, amp in images:
            i = space.index(Mode(path, pol2, oam2))
            m[i, j] += amp
    return ModeTransform(space, m, kind, provenance, frozenset(overflow))


def _pol_matrix_element(space, path, pol_matrix, provenance, kind=KIND_UNITARY):
    def fn(pol, oam):
        col = pol_matrix[:, POLS.index(pol)]
        return [(POLS[i], oam, col[i]) for i in range(2) if abs(col[i]) > 0]

    return _single_path(space, path, fn, kind, provenance)


def hwp_matrix(angle: float) -> np.ndarray:
    """Half-wave plate Jones matrix at fast-axis angle ``angle``."""
    c, s = math.cos(2 * angle), math.sin(2 * angle)
    return np.array([[c, s], [s, -c]], dtype=complex)


def qwp_matrix(angle: float) -> np.ndarray:
    """Quarter-wave plate Jones matrix, R(a) diag(i, 1) R(-a)."""
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return rot @ np.diag([1j, 1.0]) @ rot.T


def hwp(space, path, angle) -> ModeTransform:
    return _pol_matrix_element(space, path, hwp_matrix(angle), f"HWP(angle={angle:g}) @ {path}")


def qwp(space, path, angle) -> ModeTransform:
    return _pol_matrix_element(space, path, qwp_matrix(angle), f"QWP(angle={angle:g}) @ {path}")


_R = np.array([1.0, 1j]) / math.sqrt(2)  # R in (H, V) amplitudes
_L = np.array([1.0, -1j]) / math.sqrt(2)


def qplate(space, path, q) -> ModeTransform:
    """q-plate: swaps circular polarization handedness and shifts l by +-2q."""
    shift = 2 * q
    if abs(shift - round(shift)) > 1e-12:
        raise UnknownElement(
            f"QP(q={q}) shifts l by {shift}, not an integer; fractional charges "
            "are handled by direct state constructors instead"
        )
    shift = int(round(shift))
    lim = space.truncation

    def fn(pol, oam):
        e = np.zeros(2, dtype=complex)
        e[POLS.index(pol)] = 1.0
        r_amp = np.vdot(_R, e)  # <R|pol>
        l_amp = np.vdot(_L, e)
        images = []
        for amp, out_vec, new_oam in (
            (r_amp, _L, oam + shift),   # R component -> L, l + 2q
            (l_amp, _R, oam - shift),   # L component -> R, l - 2q
        ):
            if abs(amp) == 0:
                continue
            if abs(new_oam) > lim:
                return OVERFLOW
            for i in range(2):
                a = amp * out_vec[i]
                if abs(a) > 0:
                    images.append((POLS[i], new_oam, a))
        return images

    return _single_path(space, path, fn, KIND_UNITARY, f"QP(q={q}) @ {path}")


def spp(space, path, dl) -> ModeTransform:
    """Spiral phase plate: shifts the azimuthal index by the integer ``dl``."""
    dl = int(dl)
    lim = space.truncation

    def fn(pol, oam):
        if abs(oam + dl) > lim:
            return OVERFLOW
        return [(pol, oam + dl, 1.0)]

    return _single_path(space, path, fn, KIND_UNITARY, f"SPP(dl={dl}) @ {path}")


def dove_prism(space, path, angle) -> ModeTransform:
    """Dove prism at angle g: |l> -> i exp(2igl) |-l>."""

    def fn(pol, oam):
        return [(pol, -oam, 1j * np.exp(2j * angle * oam))]

    return _single_path(space, path, fn, KIND_UNITARY, f"DP(angle={angle:g}) @ {path}")


def mirror(space, path) -> ModeTransform:
    """Mirror: fixed reflection phase and an OAM sign flip."""

    def fn(pol, oam):
        return [(pol, -oam, conv.MIRROR_PHASE)]

    return _single_path(space, path, fn, KIND_UNITARY, f"MIRROR @ {path}")


def phase_plate(space, path, phase=conv.PHASE_PLATE_DEFAULT) -> ModeTransform:
    def fn(pol, oam):
        return [(pol, oam, np.exp(1j * phase))]

    return _single_path(space, path, fn, KIND_UNITARY, f"PP(phase={phase:g}) @ {path}")


def delay_line(space, path) -> ModeTransform:
    """Delay line, identity: its experimental role is temporal overlap."""

    def fn(pol, oam):
        return [(pol, oam, 1.0)]

    return _single_path(space, path, fn, KIND_UNITARY, f"DL @ {path}")


def path_phase(space, path, phase) -> ModeTransform:
    """Fixed phase on one path; used for interferometer-arm jitter."""

    def fn(pol, oam):
        return [(pol, oam, np.exp(1j * phase))]

    return _single_path(space, path, fn, KIND_UNITARY, f"PATHPHASE(phase={phase:g}) @ {path}")


def oam_phase(space, path, phases: dict) -> ModeTransform:
    """Diagonal phases per azimuthal index on one path; used for dephasing."""

    def fn(pol, oam):
        return [(pol, oam, np.exp(1j * phases.get(oam, 0.0)))]

    return _single_path(space, path, fn, KIND_UNITARY, f"OAMPHASE @ {path}")


def polarizer(space, path, angle) -> ModeTransform:
    """Linear polarizer projecting onto cos(a) H + sin(a) V."""
    c, s = math.cos(angle), math.sin(angle)
    vec = np.array([c, s], dtype=complex)
    proj = np.outer(vec, vec.conj())
    m = np.eye(space.dim, dtype=complex)
    for j in space.path_indices(path):
        mode = space.mode(int(j))
        col = proj[:, POLS.index(mode.pol)]
        m[:, j] = 0.0
        for i in range(2):
            if abs(col[i]) > 0:
                m[space.index(Mode(path, POLS[i], mode.oam)), j] = col[i]
    return ModeTransform(space, m, KIND_PROJECTOR, f"POL(angle={angle:g}) @ {path}")


def pbs(space, in_ports, out_ports) -> ModeTransform:
    """Polarizing beam splitter across two beamlines.

    H transmits (first in -> first out, second in -> second out); V reflects
    into the crossed output with phase ``PBS_REFLECT_PHASE`` and an OAM sign
    flip.  Ports may overlap (a beamline may keep its path label); leftover
    path labels are wired back so the full matrix stays unitary, which never
    matters because those ports are unoccupied where the element is placed.
    """
    a, b = in_ports
    c, d = out_ports
    involved = []
    for p in (a, b, c, d):
        if p is not None and p not in involved:
            involved.append(p)
    for p in involved:
        if p not in space.paths:
            raise SpaceMismatch(f"path {p!r} not in space")

    m = np.eye(space.dim, dtype=complex)
    for p in involved:
        m[:, space.path_indices(p)] = 0.0

    used_rows: set[int] = set()
    defined_cols: set[int] = set()
    r = conv.PBS_REFLECT_PHASE

    def wire(src, pol, dst, amp, flip):
        for j in space.path_indices(src):
            mode = space.mode(int(j))
            if mode.pol != pol:
                continue
            i = space.index(Mode(dst, pol, -mode.oam if flip else mode.oam))
            m[i, j] = amp
            used_rows.add(i)
            defined_cols.add(int(j))

    for src, t_dst, r_dst in ((a, c, d), (b, d, c)):
        if src is None:
            continue
        wire(src, "H", t_dst, 1.0, flip=False)
        wire(src, "V", r_dst, r, flip=True)

    # Complete the permutation structure for leftover ports (never occupied).
    free_cols = [
        int(j)
        for p in involved
        for j in space.path_indices(p)
        if int(j) not in defined_cols
    ]
    free_rows = [
        int(i)
        for p in involved
        for i in space.path_indices(p)
        if int(i) not in used_rows
    ]
    by_mode = {}
    for i in free_rows:
        mode = space.mode(i)
        by_mode.setdefault((mode.pol, mode.oam), []).append(i)
    for j in free_cols:
        mode = space.mode(j)
        candidates = by_mode.get((mode.pol, mode.oam)) or by_mode.get(
            (mode.pol, -mode.oam)
        )
        i = candidates.pop(0)
        m[i, j] = 1.0 if space.mode(i).oam == mode.oam else r

    prov = f"PBS(in=[{a},{b}],out=[{c},{d}])"
    return ModeTransform(space, m, KIND_UNITARY, prov)


def parity_interferometer(space, path, angle) -> ModeTransform:
    """Dove-prism interferometer: DP(+g) on H, DP(-g) on V, HWP(pi/4) swap.

    Acts as H|l> -> exp(+2igl) V|-l>, V|l> -> exp(-2igl) H|-l>; the Dove
    prisms' common factor i sits in the frozen path phase.
    """
    g = conv.PARITY_INTERFEROMETER_PHASE

    def fn(pol, oam):
        if pol == "H":
            return [("V", -oam, g * 1j * np.exp(2j * angle * oam))]
        return [("H", -oam, g * 1j * np.exp(-2j * angle * oam))]

    return _single_path(
        space, path, fn, KIND_UNITARY, f"INTERF(angle={angle:g}) @ {path}"
    )


def o1_cnot(space, path) -> ModeTransform:
    """Polarization-OAM CNOT of order 1: HWP(pi/8), interferometer(pi/4), HWP(pi/8)."""
    seq = [
        hwp(space, path, math.pi / 8),
        parity_interferometer(space, path, math.pi / 4),
        hwp(space, path, math.pi / 8),
    ]
    t = compose_transforms(seq)
    t.provenance = f"O1CNOT @ {path}"
    return t


def o2_cnot(space, path) -> ModeTransform:
    """Polarization-OAM CNOT of order 2: HWP(pi/8), interferometer(pi/8), QWP(pi/4)."""
    seq = [
        hwp(space, path, math.pi / 8),
        parity_interferometer(space, path, math.pi / 8),
        qwp(space, path, math.pi / 4),
    ]
    t = compose_transforms(seq)
    t.provenance = f"O2CNOT @ {path}"
    return t


# ---------------------------------------------------------------------------
# Descriptor grammar


@dataclass(frozen=True)
class ElementSpec:
    """Parsed element descriptor: kind, parameters, and path bindings."""

    kind: str
    params: tuple = field(default_factory=tuple)  # ((key, value), ...)
    paths: tuple = field(default_factory=tuple)

    def param(self, key, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default

    def descriptor(self) -> str:
        inner = ",".join(
            f"{k}={_format_value(v)}" for k, v in self.params
        )
        text = f"{self.kind}({inner})"
        if self.paths:
            text += " @ " + ",".join(self.paths)
        return text


def _format_value(v):
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(str(x) for x in v) + "]"
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


_DESCRIPTOR_RE = re.compile(
    r"^\s*(?P<kind>[A-Za-z][A-Za-z0-9_]*)\s*"
    r"\(\s*(?P<params>[^)]*)\)\s*"
    r"(?:@\s*(?P<paths>[A-Za-z0-9_,\s]+))?\s*$"
)
_LIST_RE = re.compile(r"^\[(.*)\]$")


class DescriptorError(ValueError):
    """Malformed element descriptor; carries a column offset for diagnostics."""

    def __init__(self, message, col=0):
        super().__init__(message)
        self.col = col


def parse_descriptor(text: str) -> ElementSpec:
    m = _DESCRIPTOR_RE.match(text)
    if not m:
        short = text.strip()
        if "(" in short and not short.rstrip().endswith(")"):
            raise DescriptorError("unterminated parameter list", text.find("("))
        raise DescriptorError(f"cannot parse element descriptor {short!r}")
    params = []
    body = m.group("params").strip()
    if body:
        depth = 0
        parts, cur = [], ""
        for ch in body:
            if ch == "," and depth == 0:
                parts.append(cur)
                cur = ""
                continue
            if ch == "[":
                depth += 1
            elif ch == "]":
                depth -= 1
            cur += ch
        parts.append(cur)
        for part in parts:
            if "=" not in part:
                raise DescriptorError(
                    f"parameter {part.strip()!r} is not key=value", text.find(part)
                )
            key, _, raw = part.partition("=")
            key, raw = key.strip(), raw.strip()
            if not raw:
                raise DescriptorError(
                    f"missing parameter value for {key!r}", text.find(part)
                )
            lm = _LIST_RE.match(raw)
            if lm:
                value = tuple(x.strip() for x in lm.group(1).split(",") if x.strip())
            else:
                try:
                    value = int(raw)
                except ValueError:
                    try:
                        value = float(raw)
                    except ValueError:
                        value = raw
            params.append((key, value))
    paths = ()
    if m.group("paths"):
        paths = tuple(p.strip() for p in m.group("paths").split(",") if p.strip())
    return ElementSpec(m.group("kind").upper(), tuple(params), paths)


_FIXED_ARITY = {
    "HWP": ("angle",),
    "QWP": ("angle",),
    "QP": ("q",),
    "SPP": ("dl",),
    "DP": ("angle",),
    "POL": ("angle",),
    "PATHPHASE": ("phase",),
    "INTERF": ("angle",),
}


def element_transform(spec: ElementSpec | str, space: ModeSpace) -> ModeTransform:
    """Build the transform for one element descriptor.

    Raises UnknownElement for unrecognized kinds and SpaceMismatch for
    unbound or undeclared paths.
    """
    if isinstance(spec, str):
        spec = parse_descriptor(spec)
    kind = spec.kind

    def one_path():
        if len(spec.paths) != 1:
            raise SpaceMismatch(f"{kind} needs exactly one path binding")
        return spec.paths[0]

    if kind in _FIXED_ARITY:
        (pname,) = _FIXED_ARITY[kind]
        value = spec.param(pname)
        if value is None:
            raise UnknownElement(f"{kind} requires parameter {pname!r}")
        value = float(value)
        path = one_path()
        builder = {
            "HWP": hwp,
            "QWP": qwp,
            "QP": qplate,
            "SPP": spp,
            "DP": dove_prism,
            "POL": polarizer,
            "PATHPHASE": path_phase,
            "INTERF": parity_interferometer,
        }[kind]
        return builder(space, path, value)
    if kind == "PP":
        return phase_plate(space, one_path(), float(spec.param("phase", conv.PHASE_PLATE_DEFAULT)))
    if kind == "MIRROR":
        return mirror(space, one_path())
    if kind == "DL":
        return delay_line(space, one_path())
    if kind == "PBS":
        ins = spec.param("in")
        outs = spec.param("out")
        if ins is None or outs is None or len(ins) != 2 or len(outs) != 2:
            raise UnknownElement("PBS requires in=[a,b] and out=[c,d]")
        return pbs(space, tuple(ins), tuple(outs))
    if kind == "O1CNOT":
        return o1_cnot(space, one_path())
    if kind == "O2CNOT":
        return o2_cnot(space, one_path())
    raise UnknownElement(f"unknown element kind {kind!r}")
