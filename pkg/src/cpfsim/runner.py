"""Experiment orchestration: execute a parsed netlist, emit results.

``execute`` is a pure function of (netlist, seed): repeated runs produce
byte-identical JSON.  Floats are emitted at 12 significant digits with sorted
keys throughout.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import full_fidelity_report
from .elements import element_transform
from .errors import CpfSimError, EmptyPostSelection
from .fock import (
    DetectionPattern,
    apply_transform,
    inject_product,
    path_count_distribution,
    post_select,
    sample_counts,
)
from .gate_d4 import prepare_auxiliary, prepare_input, qudit_amplitudes, run_cpf_d4
from .locking import DriftModel, LockParams, PidGains, simulate_lock
from .modes import ModeSpace
from .netlist import Netlist, ParseResult, parse_netlist, serialize
from .noise import NoiseSpec


class NetlistError(CpfSimError):
    """Execution was handed an invalid netlist."""


@dataclass
class RunResult:
    task: str
    heralding_probability: float | None
    tallies: dict
    fidelity: dict | None
    states: dict | None
    trace_csv: str | None
    summary: dict
    provenance: dict

    def to_json(self) -> str:
        payload = {
            "task": self.task,
            "heralding_probability": self.heralding_probability,
            "tallies": {str(k): v for k, v in sorted(self.tallies.items(), key=lambda kv: str(kv[0]))},
            "fidelity": self.fidelity,
            "states": self.states,
            "summary": self.summary,
            "provenance": self.provenance,
        }
        return json.dumps(_round_floats(payload), sort_keys=True, indent=2) + "\n"


def _round_floats(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def _provenance(nl: Netlist) -> dict:
    text = serialize(nl)
    return {
        "netlist_sha256": hashlib.sha256(text.encode()).hexdigest(),
        "seed": nl.seed,
        "tool_version": __version__,
    }


def _noise_spec(nl: Netlist) -> NoiseSpec | None:
    if not nl.noise:
        return None
    spec = NoiseSpec(
        sigma_zeta=float(nl.noise.get("sigma_zeta", 0.0)),
        oam_dephasing=float(nl.noise.get("oam_dephasing", 0.0)),
        loss=float(nl.noise.get("loss", 0.0)),
        visibility=float(nl.noise.get("visibility", 1.0)),
        seed=nl.seed,
    )
    spec.validate()
    return None if spec.trivial else spec


def _state_complex(state) -> list:
    return state.to_json_entries()


def execute(netlist: Netlist | ParseResult) -> RunResult:
    """Dispatch one netlist to the matching engine."""
    if isinstance(netlist, ParseResult):
        if not netlist.ok:
            raise NetlistError(
                "netlist has errors: "
                + "; ".join(str(d) for d in netlist.diagnostics)
            )
        netlist = netlist.netlist
    nl = netlist
    try:
        if nl.task == "cpf_d4":
            return _run_cpf(nl)
        if nl.task == "fidelity":
            return _run_fidelity(nl)
        if nl.task == "lock":
            return _run_lock(nl)
        if nl.task == "circuit":
            return _run_circuit(nl)
    except CpfSimError as e:
        raise NetlistError(f"{nl.task}: {e}") from e
    raise NetlistError(f"unknown task {nl.task!r}")


def _input_vector(recipe: str) -> np.ndarray:
    state, _prob = prepare_input(recipe)
    return qudit_amplitudes(state)


def _run_cpf(nl: Netlist) -> RunResult:
    for name in ("photon2", "photon3"):
        src = nl.sources.get(name)
        if src is not None and src.recipe != "aux":
            raise NetlistError(f"source {name!r} must use the auxiliary recipe")
    for name in ("photon1", "photon4"):
        if name not in nl.sources:
            raise NetlistError(f"task cpf_d4 requires a [source {name}] block")
        if nl.sources[name].recipe == "aux":
            raise NetlistError(f"source {name!r} must be a data-state recipe")
    v1 = _input_vector(nl.sources["photon1"].recipe)
    v4 = _input_vector(nl.sources["photon4"].recipe)
    noise = _noise_spec(nl)
    run = run_cpf_d4(v1, v4, accepted=frozenset(nl.accept),
                     noise=noise)
    tallies: dict = {}
    if nl.mode == "shots" and nl.shots:
        dist = dict(run.pattern_probs)
        dist[("no-herald",)] = max(1.0 - sum(dist.values()), 0.0)
        tallies = {
            "|".join(k): v
            for k, v in sample_counts(dist, nl.shots, nl.seed).items()
        }
    states = {
        outcome.value: _state_complex(state)
        for outcome, (state, _p) in run.per_outcome.items()
    }
    summary = {
        "accepted": [o.value for o in nl.accept],
        "per_outcome_probability": {
            o.value: p for o, (_s, p) in run.per_outcome.items()
        },
        "port_pattern_probability": run.port_pattern_prob,
    }
    return RunResult(
        "cpf_d4", run.heralding_probability, tallies, None, states, None,
        summary, _provenance(nl),
    )


def _run_fidelity(nl: Netlist) -> RunResult:
    noise = _noise_spec(nl)
    shots = nl.shots if nl.mode == "shots" else 0
    report = full_fidelity_report(
        shots=shots, noise=noise, accepted=frozenset(nl.accept),
        n_draws=int(nl.noise.get("draws", 32)), seed=nl.seed,
    )
    fid = report.to_json_dict()
    fid["outcome_rows"] = [
        {"basis": b, "input": i, "outcome": o, "probability": p,
         "count": c}
        for b, i, o, p, c in report.outcome_rows()
    ]
    summary = {"bounds": fid["bounds"], "f_zx": report.f_zx, "f_xz": report.f_xz}
    return RunResult(
        "fidelity", report.herald_probability, {}, fid, None, None,
        summary, _provenance(nl),
    )


def _run_lock(nl: Netlist) -> RunResult:
    params = LockParams(**{
        k: float(v) for k, v in nl.lock.items()
        if k in ("mod_depth", "mod_freq", "demod_phase", "e0h", "e0v",
                 "lpf_cutoff", "dt")
    })
    drift = DriftModel(
        kind=str(nl.drift.get("kind", "random-walk")),
        magnitude=float(nl.drift.get("magnitude", 0.5)),
        period=float(nl.drift.get("period", 1.0)),
        step_time=float(nl.drift.get("step_time", 0.0)),
    )
    gains = PidGains(
        kp=float(nl.pid.get("kp", PidGains.kp)),
        ki=float(nl.pid.get("ki", PidGains.ki)),
        kd=float(nl.pid.get("kd", PidGains.kd)),
    )
    trace = simulate_lock(params, drift, gains, duration=nl.duration,
                          setpoint=nl.setpoint, seed=nl.seed)
    summary = {
        "rms_open": trace.rms_open(),
        "rms_closed": trace.rms_closed(),
        "diverged": trace.diverged,
        "setpoint": trace.setpoint,
    }
    return RunResult("lock", None, {}, None, None, trace.to_csv(),
                     summary, _provenance(nl))


def _run_circuit(nl: Netlist) -> RunResult:
    if not nl.paths:
        raise NetlistError("circuit task needs a [space] block")
    space = ModeSpace(nl.paths, nl.truncation)
    photons = []
    for name in sorted(nl.sources):
        src = nl.sources[name]
        if src.recipe == "aux":
            photons.append(prepare_auxiliary(space, src.path))
        else:
            levels = _input_vector(src.recipe)
            from .gate_d4 import encode_qudit_vector

            photons.append(encode_qudit_vector(space, src.path, levels))
    if not photons:
        raise NetlistError("circuit task needs at least one source")
    state = inject_product(photons)
    for spec in nl.elements:
        state = apply_transform(element_transform(spec, space), state)
    herald = None
    if nl.pattern:
        try:
            state, herald = post_select(
                state, DetectionPattern.from_dict(nl.pattern))
        except EmptyPostSelection:
            return RunResult("circuit", 0.0, {}, None, None, None,
                             {"note": "post-selection kept no amplitude"},
                             _provenance(nl))
    dist = path_count_distribution(state)
    readable = {
        "/".join(f"{p}:{c}" for p, c in key): prob for key, prob in dist.items()
    }
    tallies = {}
    if nl.mode == "shots" and nl.shots:
        tallies = {
            "/".join(f"{p}:{c}" for p, c in key): v
            for key, v in sample_counts(dist, nl.shots, nl.seed).items()
        }
    return RunResult("circuit", herald, tallies, None, None, None,
                     {"distribution": readable}, _provenance(nl))


# ---------------------------------------------------------------------------
# Emission


def emit(result: RunResult, fmt: str, out_dir: str | Path, stem: str) -> list:
    """Write result files; returns the written paths.

    Output is bit-stable for fixed inputs: sorted keys and 12-significant-
    digit floats.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def write(name: str, text: str):
        path = out_dir / name
        path.write_text(text)
        written.append(path)

    if fmt in ("json", "both"):
        write(f"{stem}.json", result.to_json())
    if fmt in ("csv", "both"):
        lines = ["outcome,count"]
        for key in sorted(result.tallies, key=str):
            lines.append(f"{key},{result.tallies[key]}")
        write(f"{stem}_tallies.csv", "\n".join(lines) + "\n")
        if result.fidelity is not None:
            for name in ("matrix_zx", "matrix_xz"):
                rows = result.fidelity[name]
                text = "\n".join(
                    ",".join(f"{x:.12g}" for x in row) for row in rows
                )
                write(f"{stem}_{name}.csv", text + "\n")
            lines = ["basis,input,outcome,probability,count"]
            for rec in result.fidelity.get("outcome_rows", ()):
                count = "" if rec["count"] is None else rec["count"]
                lines.append(f"{rec['basis']},{rec['input']},{rec['outcome']},"
                             f"{rec['probability']:.12g},{count}")
            write(f"{stem}_outcomes.csv", "\n".join(lines) + "\n")
        if result.trace_csv is not None:
            write(f"{stem}_trace.csv", result.trace_csv)
    return written


def load_netlist(path: str | Path) -> ParseResult:
    """Parse a netlist file; ``.json`` files use the JSON front-end."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        from .netlist import parse_netlist_json

        return parse_netlist_json(text)
    return parse_netlist(text)
