"""Concrete d=4 realization of the heralded controlled phase-flip gate.

Qudit encoding: levels (0, 1, 2, 3) live in OAM components (-2, -1, 0, +1)
of horizontally polarized photons.  The auxiliary two-level subspace uses
p = 1, so the auxiliaries occupy l = -1 and l = +1.

The module assembles, from the element library and the frozen conventions:

* the polarization-OAM CNOT composites of orders 1 and 2,
* the OAM beam splitter (routing l = +1 across, all other alphabet
  components straight through), checkable line by line against golden
  transcripts,
* the input-state preparation table and the auxiliary preparation,
* the OAM-to-polarization conversion plus Bell-measurement stage,
* the full four-photon heralded pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import conventions as conv
from . import elements as el
from .errors import EmptyPostSelection, EncodingError, TruncationOverflow
from .fock import (
    DetectionPattern,
    MultiPhotonState,
    from_joint_amplitudes,
    group_basis_vector,
    apply_transform,
    post_select,
    project_group,
)
from .modes import (
    Mode,
    ModeSpace,
    ModeTransform,
    SinglePhotonState,
    apply_to_single_photon,
    compose_transforms,
)
from .noise import IDEAL_DRAW, NoiseDraw, NoiseSpec
from .protocol import BellOutcome, QuditState, correction_factors

# Qudit alphabet: level index -> azimuthal index.
LEVEL_TO_OAM = (-2, -1, 0, 1)
OAM_TO_LEVEL = {l: i for i, l in enumerate(LEVEL_TO_OAM)}
AUX_P = 1        # auxiliary subspace index; l = -1
AUX_TOP = 3      # top level d-1; l = +1
DEFAULT_TRUNCATION = 4


# ---------------------------------------------------------------------------
# O_k-CNOT composites


@dataclass(frozen=True)
class OkCnot:
    """Single-photon polarization-OAM entangling composite of order k."""

    k: int
    transform: ModeTransform


def build_ok_cnot(k: int, space: ModeSpace, path: str) -> OkCnot:
    if k == 1:
        return OkCnot(1, el.o1_cnot(space, path))
    if k == 2:
        return OkCnot(2, el.o2_cnot(space, path))
    raise ValueError(f"CNOT order k={k} not in {{1, 2}}")


# ---------------------------------------------------------------------------
# OAM beam splitter assembly


@dataclass(frozen=True)
class SplitterPaths:
    """Path labels of one beam splitter: inputs a/b, loop arms, outputs c/d."""

    a: str = "A"
    b: str = "B"
    p1: str = "P1"
    p2: str = "P2"
    c: str = "C"
    d: str = "D"
    dump: str = "X"

    def as_dict(self):
        return {
            "A": self.a, "B": self.b, "P1": self.p1, "P2": self.p2,
            "C": self.c, "D": self.d, "X": self.dump,
        }


@dataclass
class Stage:
    label: str
    transform: ModeTransform


@dataclass
class HdBeamSplitter:
    """OAM beam splitter: alphabet components of port A exit at C except
    l = +1, which exits at D; port B (l = -1, +1 only) routes oppositely."""

    space: ModeSpace
    paths: SplitterPaths
    stages: list
    transform: ModeTransform
    has_b_leg: bool
    has_d_tail: bool

    def apply(self, state):
        if isinstance(state, SinglePhotonState):
            for st in self.stages:
                state = apply_to_single_photon(st.transform, state)
            return state
        for st in self.stages:
            state = apply_transform(st.transform, state)
        return state


def build_hd_beamsplitter(
    space: ModeSpace,
    paths: SplitterPaths = SplitterPaths(),
    include_b_leg: bool = True,
    include_d_tail: bool = True,
) -> HdBeamSplitter:
    """Assemble the splitter from its element chain.

    ``include_b_leg=False`` omits the port-B conversion leg (used when the
    auxiliary is prepared directly in its converted form); ``include_d_tail``
    controls the final port-D composite that restores horizontal polarization
    and the original azimuthal indices.
    """
    if space.truncation < 2:
        raise TruncationOverflow("splitter needs truncation >= 2")
    p = paths
    quarter = math.pi / 4
    stages = [Stage("O1@A", el.o1_cnot(space, p.a))]
    if include_b_leg:
        stages.append(Stage("BLEG@B", compose_transforms([
            el.o2_cnot(space, p.b),
            el.hwp(space, p.b, quarter),
            el.dove_prism(space, p.b, 0.0),
            el.phase_plate(space, p.b),
        ])))
    stages += [
        Stage("PBS1", el.pbs(space, (p.a, None), (p.p1, p.p2))),
        Stage("O2@P2", el.o2_cnot(space, p.p2)),
        Stage("PBS2", el.pbs(space, (p.p2, p.b), (p.d, p.p2))),
        Stage("O2MP@P2", compose_transforms([
            el.o2_cnot(space, p.p2),
            el.mirror(space, p.p2),
            el.phase_plate(space, p.p2),
        ])),
        Stage("PBS3", el.pbs(space, (p.p1, p.p2), (p.c, p.dump))),
        Stage("O1@C", el.o1_cnot(space, p.c)),
    ]
    if include_d_tail:
        stages.append(Stage("DTAIL@D", compose_transforms([
            el.mirror(space, p.d),
            el.o2_cnot(space, p.d),
            el.hwp(space, p.d, quarter),
            el.dove_prism(space, p.d, quarter),
        ])))
    transform = compose_transforms([st.transform for st in stages])
    return HdBeamSplitter(space, paths, stages, transform,
                          include_b_leg, include_d_tail)


# ---------------------------------------------------------------------------
# Golden transcript check


@dataclass
class TranscriptEntry:
    port: str
    label: str
    max_deviation: float

    @property
    def ok(self) -> bool:
        return self.max_deviation <= 1e-10


@dataclass
class TranscriptReport:
    entries: list

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.entries)

    def first_divergence(self):
        for e in self.entries:
            if not e.ok:
                return e
        return None

    def lines(self):
        out = []
        for e in self.entries:
            status = "ok" if e.ok else "DIVERGED"
            out.append(f"port {e.port}  {e.label:<10s} max|d|={e.max_deviation:.3e}  {status}")
        return out


def _load_transcript(port: str) -> list:
    """Parse a packaged golden transcript into (label, {(path, pol, l): amp})."""
    text = resources.files("cpfsim.data").joinpath(
        f"transcript_port_{port.lower()}.txt"
    ).read_text()
    sections = []
    label = None
    terms: dict = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("==="):
            if label is not None:
                sections.append((label, terms))
            label = line.lstrip("= ").strip()
            terms = {}
            continue
        mode_s, re_s, im_s = line.rsplit(" ", 2)
        path, pol, oam = mode_s.split(":")
        terms[(path, pol, int(oam))] = complex(float(re_s), float(im_s))
    if label is not None:
        sections.append((label, terms))
    return sections


def _fixture_state(space, role_map, terms) -> SinglePhotonState:
    return SinglePhotonState.from_terms(
        space,
        {Mode(role_map[path], pol, oam): amp for (path, pol, oam), amp in terms.items()},
    )


def transcript_check(bs: HdBeamSplitter, ports=("A", "B")) -> TranscriptReport:
    """Run each port's chain element group by element group and compare every
    intermediate state against the golden transcript, amplitude exact."""
    role_map = bs.paths.as_dict()
    entries = []
    for port in ports:
        sections = _load_transcript(port)
        label0, input_terms = sections[0]
        if label0 != "input":
            raise ValueError("transcript fixture must start with an input section")
        state = _fixture_state(bs.space, role_map, input_terms)
        checkpoints = {label: terms for label, terms in sections[1:]}
        for st in bs.stages:
            state = apply_to_single_photon(st.transform, state)
            if st.label in checkpoints:
                expect = _fixture_state(bs.space, role_map, checkpoints[st.label])
                dev = float(np.max(np.abs(state.amps - expect.amps)))
                entries.append(TranscriptEntry(port, st.label, dev))
    return TranscriptReport(entries)


# ---------------------------------------------------------------------------
# Input and auxiliary preparation


@dataclass(frozen=True)
class PreparationRecipe:
    """Element chain preparing one alphabet state from |H, l=0>.

    ``direct`` rows (the fractional q-plate preparations) construct their
    target superposition analytically instead of running elements.
    """

    key: str
    target: tuple                    # qudit amplitudes, length 4
    elements: tuple = ()             # descriptor strings, in application order
    postselect_h: bool = True
    direct: bool = False


def _recipe(key, target, elements=(), direct=False):
    return PreparationRecipe(
        key=key,
        target=tuple(complex(x) for x in target),
        elements=tuple(elements),
        direct=direct,
    )


_S = 1.0 / math.sqrt(2.0)
_PI4 = math.pi / 4
_PI8 = math.pi / 8

#: Table of preparation rows keyed by state name.  The four single-l rows,
#: the four same-parity superpositions, and the two neighbour superpositions
#: prepared directly (their wave-plate route needs a fractional q-plate).
PREPARATION_TABLE = {
    "z0": _recipe("z0", (1, 0, 0, 0), (
        f"QWP(angle={-_PI4}) @ S", "QP(q=0.5) @ S", f"QWP(angle={-_PI4}) @ S",
        "SPP(dl=-1) @ S")),
    "z1": _recipe("z1", (0, 1, 0, 0), (
        f"QWP(angle={-_PI4}) @ S", "QP(q=0.5) @ S", f"QWP(angle={-_PI4}) @ S")),
    "z2": _recipe("z2", (0, 0, 1, 0), (
        f"QWP(angle={_PI4}) @ S", "QP(q=0.5) @ S", f"QWP(angle={_PI4}) @ S",
        "SPP(dl=-1) @ S")),
    "z3": _recipe("z3", (0, 0, 0, 1), (
        f"QWP(angle={_PI4}) @ S", "QP(q=0.5) @ S", f"QWP(angle={_PI4}) @ S")),
    "x02+": _recipe("x02+", (_S, 0, _S, 0), (
        f"HWP(angle={_PI8}) @ S", f"QWP(angle={_PI4}) @ S", "QP(q=0.5) @ S",
        f"QWP(angle={_PI4}) @ S", f"HWP(angle={-_PI8}) @ S", "SPP(dl=-1) @ S")),
    "x02-": _recipe("x02-", (_S, 0, -_S, 0), (
        f"HWP(angle={-_PI8}) @ S", f"QWP(angle={_PI4}) @ S", "QP(q=0.5) @ S",
        f"QWP(angle={_PI4}) @ S", f"HWP(angle={-_PI8}) @ S", "SPP(dl=-1) @ S")),
    "x13+": _recipe("x13+", (0, _S, 0, _S), (
        f"HWP(angle={_PI8}) @ S", f"QWP(angle={_PI4}) @ S", "QP(q=0.5) @ S",
        f"QWP(angle={_PI4}) @ S", f"HWP(angle={-_PI8}) @ S")),
    "x13-": _recipe("x13-", (0, _S, 0, -_S), (
        f"HWP(angle={-_PI8}) @ S", f"QWP(angle={_PI4}) @ S", "QP(q=0.5) @ S",
        f"QWP(angle={_PI4}) @ S", f"HWP(angle={-_PI8}) @ S")),
    "s12": _recipe("s12", (0, _S, _S, 0), direct=True),
    "s23": _recipe("s23", (0, 0, _S, _S), direct=True),
}

Z_KEYS = ("z0", "z1", "z2", "z3")
X_KEYS = ("x02+", "x02-", "x13+", "x13-")


def _prep_space() -> ModeSpace:
    return ModeSpace(("S",), DEFAULT_TRUNCATION)


def encode_qudit_vector(space: ModeSpace, path: str, levels) -> SinglePhotonState:
    """H-polarized photon with the given qudit-level amplitudes on one path."""
    levels = np.asarray(levels, dtype=complex)
    terms = {
        Mode(path, "H", LEVEL_TO_OAM[i]): levels[i]
        for i in range(4)
        if abs(levels[i]) > 0
    }
    return SinglePhotonState.from_terms(space, terms, normalize=False)


def qudit_amplitudes(state: SinglePhotonState, path: str | None = None) -> np.ndarray:
    """Extract level amplitudes from an H-polarized alphabet photon."""
    levels = np.zeros(4, dtype=complex)
    seen_path = None
    for mode, amp in state.terms():
        if path is not None and mode.path != path:
            raise EncodingError(f"photon occupies path {mode.path!r}, expected {path!r}")
        if seen_path is None:
            seen_path = mode.path
        elif mode.path != seen_path:
            raise EncodingError("photon spread over several paths")
        if mode.pol != "H" or mode.oam not in OAM_TO_LEVEL:
            raise EncodingError(f"mode {mode} outside the H-polarized alphabet")
        levels[OAM_TO_LEVEL[mode.oam]] = amp
    return levels


def prepare_input(recipe: PreparationRecipe | str):
    """Run one preparation row; return (state, success probability).

    The state lives on a single-path space ("S") and matches the row's target
    up to a global phase.
    """
    if isinstance(recipe, str):
        try:
            recipe = PREPARATION_TABLE[recipe]
        except KeyError:
            raise KeyError(f"unknown preparation row {recipe!r}") from None
    space = _prep_space()
    if recipe.direct:
        return encode_qudit_vector(space, "S", recipe.target), 1.0
    state = SinglePhotonState.from_terms(space, {Mode("S", "H", 0): 1.0})
    for desc in recipe.elements:
        state = apply_to_single_photon(el.element_transform(desc, space), state)
    if recipe.postselect_h:
        state = apply_to_single_photon(el.polarizer(space, "S", 0.0), state)
    prob = state.norm2()
    amps = state.amps / math.sqrt(prob)
    return SinglePhotonState(space, amps, normalized=True), prob


def prepare_auxiliary(space: ModeSpace | None = None, path: str = "S") -> SinglePhotonState:
    """Auxiliary photon (|V,-1> + |H,+1>)/sqrt(2), up to a global phase.

    Built from the q-plate and quarter-wave plate chain; the trailing Dove
    prism pair trims the residual relative phase the wave-plate conventions
    leave between the two components (frozen conventions, see
    :mod:`cpfsim.conventions`).
    """
    if space is None:
        space = _prep_space()
    state = SinglePhotonState.from_terms(space, {Mode(path, "H", 0): 1.0})
    for t in (
        el.qplate(space, path, 0.5),
        el.qwp(space, path, _PI4),
        el.dove_prism(space, path, _PI8),
        el.dove_prism(space, path, 0.0),
    ):
        state = apply_to_single_photon(t, state)
    return state


AUX_TARGET_TERMS = {("V", -1): _S, ("H", 1): _S}


def auxiliary_target(space: ModeSpace, path: str) -> SinglePhotonState:
    return SinglePhotonState.from_terms(
        space, {Mode(path, pol, oam): amp for (pol, oam), amp in AUX_TARGET_TERMS.items()}
    )


# ---------------------------------------------------------------------------
# Bell-measurement stage


@dataclass
class BsmStage:
    """OAM-to-polarization conversion arms, measurement splitter, decoder.

    Stage input: photons on the two D paths in the converted form
    |p> = |V, l=-1>, |d-1> = |H, l=+1>.  The photon-3 arm folds the two-level
    Hadamard into its exit plate; the Dove-prism pairs set the arm phases so
    the coincidence patterns decode the PhiPlus and PhiMinus branches (the
    Psi branches bunch into one output port and stay ambiguous).
    """

    space: ModeSpace
    d_paths: tuple
    out_paths: tuple
    photon2_arm: ModeTransform
    photon3_arm: ModeTransform
    transform: ModeTransform

    PATTERN_TO_OUTCOME = {
        ("+", "+"): BellOutcome.PhiPlus,
        ("-", "-"): BellOutcome.PhiPlus,
        ("+", "-"): BellOutcome.PhiMinus,
        ("-", "+"): BellOutcome.PhiMinus,
    }

    def decode(self, pattern: tuple) -> BellOutcome | None:
        """Map one analyzer coincidence pattern to a Bell outcome, or None."""
        return self.PATTERN_TO_OUTCOME.get(tuple(pattern))

    def analyzer_basis(self, path: str) -> list:
        """Diagonal polarization basis at l = 0 on one output path."""
        plus = group_basis_vector(
            self.space, (path,),
            {(Mode(path, "H", 0),): _S, (Mode(path, "V", 0),): _S},
        )
        minus = group_basis_vector(
            self.space, (path,),
            {(Mode(path, "H", 0),): _S, (Mode(path, "V", 0),): -_S},
        )
        return [("+", plus), ("-", minus)]

    @property
    def distinguishable(self) -> frozenset:
        return frozenset({BellOutcome.PhiPlus, BellOutcome.PhiMinus})


def build_bsm_stage(
    space: ModeSpace, d_paths=("D1", "D2"), out_paths=("E1", "E2")
) -> BsmStage:
    d1, d2 = d_paths
    arm2 = compose_transforms([
        el.qwp(space, d1, -_PI4),
        el.qplate(space, d1, 0.5),
        el.qwp(space, d1, _PI4),
    ])
    arm2.provenance = f"BSM arm 2 @ {d1}"
    arm3 = compose_transforms([
        el.qwp(space, d2, -_PI4),
        el.qplate(space, d2, 0.5),
        el.qwp(space, d2, 0.0),
        el.phase_plate(space, d2, conv.BSM_ARM3_TRIM),
    ])
    arm3.provenance = f"BSM arm 3 @ {d2}"
    lam2 = compose_transforms([
        el.dove_prism(space, d1, _PI8),
        el.dove_prism(space, d1, 0.0),
    ])
    lam3 = compose_transforms([
        el.dove_prism(space, d2, _PI4),
        el.dove_prism(space, d2, 0.0),
    ])
    measurement_pbs = el.pbs(space, (d1, d2), out_paths)
    transform = compose_transforms([lam2, arm2, lam3, arm3, measurement_pbs])
    transform.provenance = "BSM stage"
    return BsmStage(space, tuple(d_paths), tuple(out_paths), arm2, arm3, transform)


# ---------------------------------------------------------------------------
# Full four-photon pipeline


@dataclass
class HeraldedRun:
    """Outcome of one analytic pipeline run."""

    per_outcome: dict            # BellOutcome -> (QuditState, probability)
    pattern_probs: dict          # analyzer pattern -> probability
    accepted: frozenset
    port_pattern_prob: float     # one photon in each of C1, C2, E1, E2

    @property
    def heralding_probability(self) -> float:
        return float(sum(p for _, p in self.per_outcome.values()))

    def heralded_state(self, outcome: BellOutcome) -> QuditState:
        return self.per_outcome[outcome][0]


class CpfPipeline:
    """The assembled four-photon gate: two splitter cores, fold mirrors, the
    Bell-measurement stage, port post-selection, decoding, and corrections."""

    PORTS = ("C1", "C2", "E1", "E2")

    def __init__(self, truncation: int = DEFAULT_TRUNCATION):
        paths = (
            "A1", "B1", "P11", "P21", "C1", "D1", "X1",
            "A2", "B2", "P12", "P22", "C2", "D2", "X2",
            "E1", "E2",
        )
        self.space = ModeSpace(paths, truncation)
        self.bs1_paths = SplitterPaths("A1", "B1", "P11", "P21", "C1", "D1", "X1")
        self.bs2_paths = SplitterPaths("A2", "B2", "P12", "P22", "C2", "D2", "X2")
        self.stage = build_bsm_stage(self.space, ("D1", "D2"), ("E1", "E2"))

        def core(paths):
            bs = build_hd_beamsplitter(
                self.space, paths, include_b_leg=False, include_d_tail=False
            )
            labels = {st.label: st.transform for st in bs.stages}
            pre = compose_transforms([
                labels["O1@A"], labels["PBS1"], labels["O2@P2"],
                labels["PBS2"], labels["O2MP@P2"],
            ])
            post = compose_transforms([labels["PBS3"], labels["O1@C"]])
            return pre, post

        pre1, post1 = core(self.bs1_paths)
        pre2, post2 = core(self.bs2_paths)
        folds = compose_transforms([
            el.mirror(self.space, "D1"), el.mirror(self.space, "D2"),
        ])
        # Segments split where arm-phase jitter enters (inside each loop,
        # ahead of the recombining splitter).
        self._pre = compose_transforms([pre1, pre2])
        self._post = compose_transforms([post1, post2, folds, self.stage.transform])
        # Noise enters as diagonal phases, so the overflow set of the composed
        # chain is draw independent.
        self._overflow = compose_transforms([self._pre, self._post]).overflow
        self._jitter_paths = ("P21", "P22")
        self._analyzers = {
            ("E1",): self.stage.analyzer_basis("E1"),
            ("E2",): self.stage.analyzer_basis("E2"),
        }
        self._pattern = DetectionPattern.from_dict({p: 1 for p in self.PORTS})

    # -- state assembly ----------------------------------------------------

    def inject(self, c_matrix: np.ndarray) -> MultiPhotonState:
        """Four-photon input: joint data amplitudes c[m, n] plus auxiliaries."""
        c_matrix = np.asarray(c_matrix, dtype=complex)
        if c_matrix.shape != (4, 4):
            raise EncodingError("joint input must be a 4x4 amplitude matrix")
        aux = [(Mode(b, "V", LEVEL_TO_OAM[AUX_P]), Mode(b, "H", LEVEL_TO_OAM[AUX_TOP]))
               for b in ("B1", "B2")]
        slots = [
            [Mode("A1", "H", LEVEL_TO_OAM[m]) for m in range(4)],
            list(aux[0]),
            list(aux[1]),
            [Mode("A2", "H", LEVEL_TO_OAM[n]) for n in range(4)],
        ]
        tensor = np.einsum(
            "mn,a,b->mabn",
            c_matrix,
            np.full(2, _S, dtype=complex),
            np.full(2, _S, dtype=complex),
        )
        return from_joint_amplitudes(self.space, slots, tensor)

    def _draw_matrix(self, draw: NoiseDraw) -> np.ndarray:
        pre = self._pre.matrix
        post = self._post.matrix
        if draw.trivial:
            return post @ pre
        col_scale = np.ones(self.space.dim, dtype=complex)
        for photon_axis, path in ((0, "A1"), (1, "A2")):
            for level, phi in enumerate(draw.dephasing[photon_axis]):
                if phi:
                    idx = self.space.index(Mode(path, "H", LEVEL_TO_OAM[level]))
                    col_scale[idx] = np.exp(1j * phi)
        for phi, path in zip(draw.aux_phases, ("B1", "B2")):
            if phi:
                idx = self.space.index(Mode(path, "H", 1))
                col_scale[idx] = np.exp(1j * phi)
        row_scale = np.ones(self.space.dim, dtype=complex)
        for z, path in zip(draw.zeta, self._jitter_paths):
            if z:
                row_scale[self.space.path_indices(path)] = np.exp(1j * z)
        return post @ (row_scale[:, None] * pre * col_scale[None, :])

    def _composed(self, draw: NoiseDraw) -> ModeTransform:
        return ModeTransform(self.space, self._draw_matrix(draw), "unitary",
                             "pipeline", self._overflow)

    # -- runs ----------------------------------------------------------------

    def run(
        self,
        c_matrix: np.ndarray,
        accepted=frozenset({BellOutcome.PhiPlus}),
        draw: NoiseDraw = IDEAL_DRAW,
    ) -> HeraldedRun:
        accepted = frozenset(accepted)
        unknown = accepted - self.stage.distinguishable
        if unknown:
            raise EncodingError(
                f"outcomes {sorted(o.value for o in unknown)} are not"
                " unambiguously distinguished by the measurement stage"
            )
        if draw.lost:
            return HeraldedRun({}, {}, accepted, 0.0)
        state = self.inject(c_matrix)
        state = apply_transform(self._composed(draw), state)
        try:
            selected, p_ports = post_select(state, self._pattern)
        except EmptyPostSelection:
            return HeraldedRun({}, {}, accepted, 0.0)
        pattern_probs = {}
        collected: dict[BellOutcome, list] = {}
        for s1, v1 in self._analyzers[("E1",)]:
            partial, p1 = project_group(selected, ("E1",), v1)
            if p1 <= 0.0:
                continue
            for s2, v2 in self._analyzers[("E2",)]:
                reduced, p2 = project_group(partial, ("E2",), v2)
                joint = p_ports * p1 * p2
                if joint <= 1e-30:
                    continue
                pattern_probs[(s1, s2)] = joint
                outcome = self.stage.decode((s1, s2))
                if outcome is None or outcome not in accepted:
                    continue
                amps = self._reduced_to_qudits(reduced) * math.sqrt(joint)
                collected.setdefault(outcome, []).append(amps)
        per_outcome = {}
        for outcome, chunks in collected.items():
            prob = float(sum(np.sum(np.abs(c) ** 2) for c in chunks))
            u1, u4 = correction_factors(outcome, 4)
            rep = u1 @ chunks[0] @ u4.T
            rep = rep / np.linalg.norm(rep)
            per_outcome[outcome] = (QuditState.from_matrix(rep), prob)
        return HeraldedRun(per_outcome, pattern_probs, accepted, p_ports)

    def _reduced_to_qudits(self, reduced: MultiPhotonState) -> np.ndarray:
        """Two-photon state on (C1, C2) as a 4x4 qudit amplitude matrix."""
        out = np.zeros((4, 4), dtype=complex)
        for cfg, amp in reduced.terms.items():
            levels = {}
            for i in cfg:
                mode = self.space.mode(i)
                if mode.pol != "H" or mode.oam not in OAM_TO_LEVEL:
                    raise EncodingError(f"heralded photon left the alphabet: {mode}")
                levels[mode.path] = OAM_TO_LEVEL[mode.oam]
            out[levels["C1"], levels["C2"]] = amp
        return out

    def transfer_operators(self, draw: NoiseDraw = IDEAL_DRAW) -> dict:
        """Unnormalized heralded transfer matrix per Bell outcome and pattern.

        Returns {(outcome, pattern): K} with K the 16x16 matrix taking joint
        input amplitudes to corrected heralded amplitudes; Kraus operators of
        the heralded channel up to the common normalization.
        """
        if draw.lost:
            return {}
        composed = self._composed(draw)
        kraus: dict = {}
        for m in range(4):
            for n in range(4):
                c = np.zeros((4, 4), dtype=complex)
                c[m, n] = 1.0
                state = apply_transform(composed, self.inject(c))
                try:
                    selected, p_ports = post_select(state, self._pattern)
                except EmptyPostSelection:
                    continue
                for s1, v1 in self._analyzers[("E1",)]:
                    partial, p1 = project_group(selected, ("E1",), v1)
                    if p1 <= 0.0:
                        continue
                    for s2, v2 in self._analyzers[("E2",)]:
                        reduced, p2 = project_group(partial, ("E2",), v2)
                        joint = p_ports * p1 * p2
                        if joint <= 1e-30:
                            continue
                        outcome = self.stage.decode((s1, s2))
                        if outcome is None:
                            continue
                        u1, u4 = correction_factors(outcome, 4)
                        block = u1 @ (self._reduced_to_qudits(reduced)
                                      * math.sqrt(joint)) @ u4.T
                        key = (outcome, (s1, s2))
                        k = kraus.setdefault(key, np.zeros((16, 16), dtype=complex))
                        k[:, m * 4 + n] = block.reshape(-1)
        return kraus


_PIPELINE_CACHE: dict = {}


def pipeline(truncation: int = DEFAULT_TRUNCATION) -> CpfPipeline:
    if truncation not in _PIPELINE_CACHE:
        _PIPELINE_CACHE[truncation] = CpfPipeline(truncation)
    return _PIPELINE_CACHE[truncation]


def _coerce_input(in1, in4, joint) -> np.ndarray:
    if joint is not None:
        c = np.asarray(joint, dtype=complex)
        if c.shape == (16,):
            c = c.reshape(4, 4)
        if c.shape != (4, 4):
            raise EncodingError("joint input must be 4x4 or length 16")
        return c
    def amps(x):
        if isinstance(x, SinglePhotonState):
            return qudit_amplitudes(x)
        v = np.asarray(x, dtype=complex)
        if v.shape != (4,):
            raise EncodingError("single-photon input must have 4 level amplitudes")
        return v
    return np.outer(amps(in1), amps(in4))


def run_cpf_d4(
    in1=None,
    in4=None,
    *,
    joint=None,
    accepted=frozenset({BellOutcome.PhiPlus}),
    noise: NoiseSpec | None = None,
    draw: NoiseDraw | None = None,
) -> HeraldedRun:
    """Run the d=4 heralded gate on a product or joint two-qudit input.

    Analytic single-shot run; ``noise`` draws one imperfection sample, or
    pass an explicit ``draw``.  Inputs are H-polarized alphabet photons (as
    SinglePhotonState or 4 level amplitudes) or a joint 4x4 amplitude matrix.
    """
    c = _coerce_input(in1, in4, joint)
    norm = np.linalg.norm(c)
    if abs(norm - 1.0) > 1e-9:
        c = c / norm
    if draw is None:
        if noise is not None:
            noise.validate()
            draw = noise.draw(noise.rng())
        else:
            draw = IDEAL_DRAW
    return pipeline().run(c, accepted=accepted, draw=draw)
