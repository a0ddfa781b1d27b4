"""Sparse multi-photon bosonic states: evolution, post-selection, sampling.

States are stored as a sparse map from occupation configurations to complex
amplitudes.  A configuration is a sorted tuple of dense mode indices, one
entry per photon; amplitudes are coefficients in the orthonormal Fock basis,
so the sqrt(k!) factors of k-fold occupied modes live in the basis convention
and the stored vector has unit norm when the state is normalized.

Evolution substitutes each creation operator by the transform columns,
a_j+ -> sum_k M[k, j] a_k+, expanding photon by photon into a running map
keyed by partially built sorted configurations.  Merging partial keys as we
go keeps the branch count bounded by the number of distinct multisets rather
than the product of column supports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .conventions import NORM_TOL, PRUNE_TOL
from .errors import (
    BasisIncomplete,
    EmptyPostSelection,
    SpaceMismatch,
    TruncationOverflow,
)
from .modes import (
    KIND_PROJECTOR,
    KIND_UNITARY,
    Mode,
    ModeSpace,
    ModeTransform,
    SinglePhotonState,
)


@dataclass(frozen=True)
class OccupationConfig:
    """Sorted multiset of modes holding the photons of one basis term."""

    indices: tuple

    def modes(self, space: ModeSpace):
        return tuple(space.mode(i) for i in self.indices)

    def label(self, space: ModeSpace) -> str:
        return ",".join(str(m) for m in self.modes(space))


def _sqrt_fact(config: tuple) -> float:
    out = 1.0
    run = 1
    for i in range(1, len(config) + 1):
        if i < len(config) and config[i] == config[i - 1]:
            run += 1
        else:
            out *= math.factorial(run)
            run = 1
    return math.sqrt(out)


def _insert_sorted(config: tuple, k: int) -> tuple:
    lo, hi = 0, len(config)
    while lo < hi:
        mid = (lo + hi) // 2
        if config[mid] < k:
            lo = mid + 1
        else:
            hi = mid
    return config[:lo] + (k,) + config[lo:]


class MultiPhotonState:
    """Sparse n-photon state over a ModeSpace."""

    def __init__(self, space: ModeSpace, n: int, terms: Mapping[tuple, complex],
                 normalized: bool | None = None):
        for cfg in terms:
            if len(cfg) != n:
                raise ValueError(f"config {cfg} does not hold {n} photons")
        self.space = space
        self.n = n
        self.terms = dict(terms)
        if normalized is None:
            normalized = abs(self.norm2() - 1.0) <= NORM_TOL
        self.normalized = normalized

    def norm2(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.terms.values()))

    def overlap(self, other: "MultiPhotonState") -> complex:
        """<other|self>."""
        if self.space != other.space or self.n != other.n:
            raise SpaceMismatch("overlap of incompatible states")
        acc = 0.0 + 0.0j
        if len(self.terms) <= len(other.terms):
            for cfg, a in self.terms.items():
                b = other.terms.get(cfg)
                if b is not None:
                    acc += np.conj(b) * a
        else:
            for cfg, b in other.terms.items():
                a = self.terms.get(cfg)
                if a is not None:
                    acc += np.conj(b) * a
        return complex(acc)

    def pruned(self, tol: float = PRUNE_TOL) -> "MultiPhotonState":
        terms = {c: a for c, a in self.terms.items() if abs(a) > tol}
        return MultiPhotonState(self.space, self.n, terms, normalized=self.normalized)

    def normalized_copy(self) -> "MultiPhotonState":
        nrm = math.sqrt(self.norm2())
        if nrm == 0.0:
            raise EmptyPostSelection("cannot normalize the zero state")
        return MultiPhotonState(
            self.space, self.n,
            {c: a / nrm for c, a in self.terms.items()}, normalized=True,
        )

    def configs(self):
        for cfg, amp in sorted(self.terms.items()):
            yield OccupationConfig(cfg), amp

    def path_counts(self, cfg: tuple) -> dict:
        counts: dict[str, int] = {}
        for i in cfg:
            p = self.space.mode(i).path
            counts[p] = counts.get(p, 0) + 1
        return counts

    def to_text(self) -> str:
        """Canonical text form, one line per term: modes then re and im."""
        lines = []
        for cfg, amp in sorted(self.terms.items()):
            label = OccupationConfig(cfg).label(self.space)
            lines.append(f"{label} {amp.real:.15g} {amp.imag:.15g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, space: ModeSpace, text: str) -> "MultiPhotonState":
        terms: dict[tuple, complex] = {}
        n = None
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            label, re_s, im_s = line.rsplit(" ", 2)
            idx = tuple(sorted(space.index(Mode.parse(tok)) for tok in label.split(",")))
            if n is None:
                n = len(idx)
            terms[idx] = terms.get(idx, 0.0) + complex(float(re_s), float(im_s))
        if n is None:
            raise ValueError("no terms in text")
        return cls(space, n, terms, normalized=None)


def inject_product(photons: Sequence[SinglePhotonState]) -> MultiPhotonState:
    """Symmetrized product of single-photon states, normalized.

    Photons with disjoint supports give the plain product of amplitudes;
    overlapping supports pick up the correct bosonic enhancement factors.
    """
    if not photons:
        raise ValueError("need at least one photon")
    space = photons[0].space
    for ph in photons:
        if ph.space != space:
            raise SpaceMismatch("photons on different mode spaces")
    branches: dict[tuple, complex] = {(): 1.0 + 0.0j}
    for ph in photons:
        nz = np.flatnonzero(np.abs(ph.amps) > PRUNE_TOL)
        new: dict[tuple, complex] = {}
        for partial, pamp in branches.items():
            for k in nz:
                key = _insert_sorted(partial, int(k))
                new[key] = new.get(key, 0.0) + pamp * ph.amps[k]
        branches = new
    terms = {
        cfg: amp * _sqrt_fact(cfg)
        for cfg, amp in branches.items()
        if abs(amp) > PRUNE_TOL
    }
    state = MultiPhotonState(space, len(photons), terms, normalized=None)
    return state.normalized_copy()


def from_joint_amplitudes(
    space: ModeSpace,
    slots: Sequence[Sequence[Mode]],
    tensor: np.ndarray,
) -> MultiPhotonState:
    """Build an n-photon state from a joint amplitude tensor.

    ``slots[i]`` lists the modes available to photon i; ``tensor`` has one
    axis per photon.  Intended for entangled inputs whose photons occupy
    disjoint paths, where no bosonic factors arise.
    """
    tensor = np.asarray(tensor, dtype=complex)
    terms: dict[tuple, complex] = {}
    it = np.nditer(tensor, flags=["multi_index"])
    for amp in it:
        if abs(amp) <= PRUNE_TOL:
            continue
        cfg = tuple(
            sorted(space.index(slots[axis][j]) for axis, j in enumerate(it.multi_index))
        )
        terms[cfg] = terms.get(cfg, 0.0) + complex(amp)
    return MultiPhotonState(space, tensor.ndim, terms, normalized=None)


def apply_transform(t: ModeTransform, s: MultiPhotonState) -> MultiPhotonState:
    """Linear-optical evolution of a multi-photon state."""
    if t.space != s.space:
        raise SpaceMismatch("transform and state on different spaces")
    if t.kind == KIND_PROJECTOR:
        raise ValueError("projectors act through post_select or project_group")
    cols = t.columns()
    if t.overflow:
        for cfg in s.terms:
            for i in cfg:
                if i in t.overflow:
                    raise TruncationOverflow(
                        f"photon in {s.space.mode(i)} would shift out of the window"
                    )
    out: dict[tuple, complex] = {}
    for cfg, amp in s.terms.items():
        base = amp / _sqrt_fact(cfg)
        branches: dict[tuple, complex] = {(): base}
        for m in cfg:
            rows, amps = cols[m]
            new: dict[tuple, complex] = {}
            for partial, pamp in branches.items():
                for k, a in zip(rows, amps):
                    key = _insert_sorted(partial, int(k))
                    v = new.get(key)
                    new[key] = pamp * a if v is None else v + pamp * a
            branches = new
        for key, v in branches.items():
            prev = out.get(key)
            out[key] = v if prev is None else prev + v
    terms = {}
    for cfg, v in out.items():
        v = v * _sqrt_fact(cfg)
        if abs(v) > PRUNE_TOL:
            terms[cfg] = v
    return MultiPhotonState(
        s.space, s.n, terms,
        normalized=s.normalized and t.kind == KIND_UNITARY,
    )


@dataclass(frozen=True)
class DetectionPattern:
    """Required photon count per path; other paths are unconstrained.

    With ``marginalize_pol_oam`` (the default) only path occupation counts
    matter; when False the keys of ``required`` are full ``path:pol:l`` mode
    strings and counts apply per mode.
    """

    required: tuple  # ((key, count), ...)
    marginalize_pol_oam: bool = True

    @classmethod
    def from_dict(cls, required: Mapping[str, int], marginalize_pol_oam: bool = True):
        items = tuple(sorted(required.items()))
        for _, c in items:
            if c < 0:
                raise ValueError("photon counts must be non-negative")
        return cls(items, marginalize_pol_oam)


def post_select(
    s: MultiPhotonState, p: DetectionPattern
) -> tuple[MultiPhotonState, float]:
    """Keep configurations matching the pattern; return (state, probability)."""
    required = dict(p.required)
    if sum(required.values()) > s.n:
        raise EmptyPostSelection(
            f"pattern needs {sum(required.values())} photons, state holds {s.n}"
        )
    kept: dict[tuple, complex] = {}
    for cfg, amp in s.terms.items():
        if p.marginalize_pol_oam:
            counts = s.path_counts(cfg)
            ok = all(counts.get(path, 0) == c for path, c in required.items())
        else:
            counts: dict[str, int] = {}
            for i in cfg:
                key = str(s.space.mode(i))
                counts[key] = counts.get(key, 0) + 1
            ok = all(counts.get(key, 0) == c for key, c in required.items())
        if ok:
            kept[cfg] = amp
    prob = float(sum(abs(a) ** 2 for a in kept.values()))
    total = s.norm2()
    if total > 0:
        prob = prob / total
    if prob <= 0.0 or not kept:
        raise EmptyPostSelection("no amplitude matches the detection pattern")
    state = MultiPhotonState(s.space, s.n, kept, normalized=False).normalized_copy()
    return state, prob


def _occupied_paths(s: MultiPhotonState) -> dict[str, int]:
    """Common per-path occupation across all terms (requires it be uniform)."""
    ref = None
    for cfg in s.terms:
        counts = s.path_counts(cfg)
        if ref is None:
            ref = counts
        elif counts != ref:
            raise BasisIncomplete(
                "state has varying path occupation; post-select on a pattern first"
            )
    return ref or {}


def _group_vector_index(space, paths, modes_by_path):
    """Dense index of a product |m_1, m_2, ...> over the group's path blocks."""
    block = 2 * (2 * space.truncation + 1)
    idx = 0
    for path in paths:
        local = space.index(modes_by_path[path]) - space.path_indices(path)[0]
        idx = idx * block + local
    return idx


def project_group(
    s: MultiPhotonState, paths: Sequence[str], vector: np.ndarray
) -> tuple[MultiPhotonState, float]:
    """Project the photons on ``paths`` (one per path) onto a joint vector.

    Returns the reduced state on the remaining paths and the outcome
    probability.  ``vector`` lives on the tensor product of the (pol, oam)
    blocks of the listed paths, in listed order.
    """
    occ = _occupied_paths(s)
    for path in paths:
        if occ.get(path, 0) != 1:
            raise BasisIncomplete(f"path {path!r} does not hold exactly one photon")
    paths = tuple(paths)
    reduced: dict[tuple, complex] = {}
    for cfg, amp in s.terms.items():
        group_modes = {}
        rest = []
        for i in cfg:
            mode = s.space.mode(i)
            if mode.path in paths:
                group_modes[mode.path] = mode
            else:
                rest.append(i)
        j = _group_vector_index(s.space, paths, group_modes)
        proj = np.conj(vector[j]) * amp
        if abs(proj) <= PRUNE_TOL:
            continue
        key = tuple(rest)
        reduced[key] = reduced.get(key, 0.0) + proj
    prob = float(sum(abs(a) ** 2 for a in reduced.values()))
    if not reduced or prob <= 0.0:
        return MultiPhotonState(s.space, s.n - len(paths), {}, normalized=False), 0.0
    state = MultiPhotonState(
        s.space, s.n - len(paths), reduced, normalized=False
    ).normalized_copy()
    return state, prob


def group_basis_vector(space: ModeSpace, paths: Sequence[str], terms: Mapping[tuple, complex]) -> np.ndarray:
    """Joint basis vector over path blocks from {(Mode, ...): amplitude}."""
    block = 2 * (2 * space.truncation + 1)
    vec = np.zeros(block ** len(paths), dtype=complex)
    for modes, amp in terms.items():
        by_path = {m.path: m for m in modes}
        vec[_group_vector_index(space, tuple(paths), by_path)] += amp
    return vec


def outcome_distribution(s: MultiPhotonState, resolution: Mapping) -> dict:
    """Joint outcome probabilities for a grouped projective readout.

    ``resolution`` maps a tuple of path labels to a list of
    ``(label, joint vector)`` pairs forming an orthonormal basis of the
    occupied subspace of that group.  Every occupied path must appear in
    exactly one group and hold exactly one photon.
    """
    if not s.normalized:
        s = s.normalized_copy()
    occ = _occupied_paths(s)
    groups = [tuple(g) for g in resolution]
    covered = [p for g in groups for p in g]
    if sorted(covered) != sorted(set(covered)):
        raise BasisIncomplete("a path appears in more than one resolution group")
    missing = [p for p, c in occ.items() if c > 0 and p not in covered]
    if missing:
        raise BasisIncomplete(f"paths {missing} are occupied but not resolved")

    dist: dict[tuple, float] = {}

    def recurse(state, remaining, outcome, prob):
        if prob <= 1e-30:
            return
        if not remaining:
            key = outcome if len(outcome) > 1 else outcome[0]
            dist[key] = dist.get(key, 0.0) + prob
            return
        group = remaining[0]
        for label, vector in resolution[group]:
            sub, p = project_group(state, group, vector)
            if p <= 0.0:
                continue
            recurse(sub, remaining[1:], outcome + (label,), prob * p)

    recurse(s, groups, (), 1.0)
    total = sum(dist.values())
    if abs(total - 1.0) > 1e-10:
        raise BasisIncomplete(
            f"resolution captures probability {total:.6f}, not 1; basis incomplete"
        )
    return dist


def path_count_distribution(s: MultiPhotonState) -> dict:
    """Probability of each per-path occupation pattern (counts as sorted tuple)."""
    if not s.normalized:
        s = s.normalized_copy()
    dist: dict[tuple, float] = {}
    for cfg, amp in s.terms.items():
        key = tuple(sorted(s.path_counts(cfg).items()))
        dist[key] = dist.get(key, 0.0) + abs(amp) ** 2
    return dist


def sample_counts(dist: Mapping, shots: int, seed: int, experiment_id: int = 0) -> dict:
    """Multinomial draw from an outcome distribution.

    Reproducible: the counter-based generator is keyed by (seed, experiment
    id), so shot batches can run in parallel without coordination.
    """
    if shots < 0:
        raise ValueError("shots must be non-negative")
    keys = sorted(dist.keys(), key=repr)
    if shots == 0 or not keys:
        return {k: 0 for k in keys}
    probs = np.array([max(float(dist[k]), 0.0) for k in keys])
    probs = probs / probs.sum()
    rng = np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF,
                                                    experiment_id & 0xFFFFFFFFFFFFFFFF]))
    counts = rng.multinomial(shots, probs)
    return {k: int(c) for k, c in zip(keys, counts)}
