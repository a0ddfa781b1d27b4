"""Discrete-time simulation of the interferometer phase-locking loop.

A modulated locking beam carries phase ``mod_depth * sin(mod_freq * t)`` on
its H component while the V component picks up the interferometer phase
``zeta``; both interfere on a diagonal polarizer in front of the detector.
Mixing the detected intensity with ``cos(mod_freq * t + demod_phase)`` and
low-pass filtering yields an error signal proportional (for small modulation
depth) to ``sin(zeta) * sin(demod_phase)``, fed to a PID servo that drives
the compensating phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InsufficientTrace


@dataclass(frozen=True)
class LockParams:
    """Locking-beam and demodulation parameters.

    mod_depth    modulation depth (radians)
    mod_freq     modulation angular frequency (rad/s)
    demod_phase  phase offset of the mixer reference (radians)
    e0h, e0v     field amplitudes of the two polarization components
    lpf_cutoff   low-pass cutoff (Hz); default mod_freq / (2 pi * 50)
    dt           sample interval (s); default 64 samples per modulation period
    """

    mod_depth: float = 0.2
    mod_freq: float = 2 * math.pi * 1000.0
    demod_phase: float = math.pi / 2
    e0h: float = 1.0
    e0v: float = 1.0
    lpf_cutoff: float | None = None
    dt: float | None = None

    @property
    def mod_period(self) -> float:
        return 2 * math.pi / self.mod_freq

    @property
    def sample_dt(self) -> float:
        return self.dt if self.dt is not None else self.mod_period / 64.0

    @property
    def cutoff_hz(self) -> float:
        if self.lpf_cutoff is not None:
            return self.lpf_cutoff
        return self.mod_freq / (2 * math.pi * 50.0)

    def validate(self):
        if self.mod_depth < 0:
            raise ValueError("mod_depth must be non-negative")
        if self.mod_freq <= 0:
            raise ValueError("mod_freq must be positive")
        if self.cutoff_hz >= self.mod_freq / (2 * math.pi):
            raise ValueError("low-pass cutoff must sit below the modulation frequency")
        if self.sample_dt >= self.mod_period / 10.0:
            raise ValueError("dt must resolve the modulation (>= 10 samples/period)")


def intensity(t, zeta, p: LockParams):
    """Detected intensity after the diagonal polarizer.

    Closed form  I = (E0H^2 + E0V^2 + 2 E0H E0V cos(theta sin(Omega t) - zeta)) / 4,
    equal to evaluating the interfering complex fields directly.
    """
    t = np.asarray(t, dtype=float)
    phase = p.mod_depth * np.sin(p.mod_freq * t) - zeta
    return 0.25 * (p.e0h ** 2 + p.e0v ** 2 + 2 * p.e0h * p.e0v * np.cos(phase))


class _SinglePoleLpf:
    """First-order IIR low-pass, y += alpha (x - y)."""

    def __init__(self, cutoff_hz: float, dt: float, y0: float = 0.0):
        rc = 1.0 / (2 * math.pi * cutoff_hz)
        self.alpha = dt / (rc + dt)
        self.y = y0

    def run(self, samples: np.ndarray) -> np.ndarray:
        out = np.empty_like(samples)
        y = self.y
        a = self.alpha
        for i, x in enumerate(samples):
            y += a * (x - y)
            out[i] = y
        self.y = y
        return out


def demodulate_error(samples: np.ndarray, p: LockParams, t0: float = 0.0) -> float:
    """Mix an intensity trace with the reference and low-pass filter it.

    The trace must span at least 10 modulation periods; the returned error is
    the filter output averaged over the trailing quarter of the trace,
    rounded down to whole periods.
    """
    samples = np.asarray(samples, dtype=float)
    dt = p.sample_dt
    per_period = max(int(round(p.mod_period / dt)), 1)
    n_periods = len(samples) // per_period
    if n_periods < 10:
        raise InsufficientTrace(
            f"trace spans {n_periods} modulation periods, need at least 10"
        )
    t = t0 + dt * np.arange(len(samples))
    mixed = samples * np.cos(p.mod_freq * t + p.demod_phase)
    filtered = _SinglePoleLpf(p.cutoff_hz, dt).run(mixed)
    tail_periods = max(n_periods // 4, 1)
    tail = filtered[len(samples) - tail_periods * per_period:]
    return float(np.mean(tail))


def measured_error(zeta: float, p: LockParams, n_periods: int = 200) -> float:
    """Generate a trace at fixed interferometer phase and demodulate it."""
    dt = p.sample_dt
    n = int(round(n_periods * p.mod_period / dt))
    t = dt * np.arange(n)
    return demodulate_error(intensity(t, zeta, p), p)


def calibrate_gain(p: LockParams, n_periods: int = 200) -> float:
    """Error-signal gain G in  error = G sin(zeta) sin(demod_phase).

    Measured at zeta = pi/2 with the mixer reference in quadrature, where the
    product of sines is one.
    """
    quad = replace(p, demod_phase=math.pi / 2)
    return measured_error(math.pi / 2, quad, n_periods)


# ---------------------------------------------------------------------------
# Drift and PID


@dataclass(frozen=True)
class DriftModel:
    """Open-loop phase disturbance.

    kind       'random-walk' (magnitude in rad/sqrt(s)), 'sinusoidal'
               (magnitude in rad, with ``period`` in s), or 'step'
               (magnitude in rad at ``step_time`` s)
    """

    kind: str = "random-walk"
    magnitude: float = 0.5
    period: float = 1.0
    step_time: float = 0.0

    def validate(self):
        if self.magnitude < 0:
            raise ValueError("drift magnitude must be non-negative")
        if self.kind not in ("random-walk", "sinusoidal", "step"):
            raise ValueError(f"unknown drift kind {self.kind!r}")

    def path(self, n: int, dt: float, rng: np.random.Generator) -> np.ndarray:
        t = dt * np.arange(n)
        if self.kind == "random-walk":
            steps = rng.normal(0.0, self.magnitude * math.sqrt(dt), size=n)
            steps[0] = 0.0
            return np.cumsum(steps)
        if self.kind == "sinusoidal":
            return self.magnitude * np.sin(2 * math.pi * t / self.period)
        return np.where(t >= self.step_time, self.magnitude, 0.0)


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.3
    ki: float = 250.0
    kd: float = 0.0
    out_min: float = -50.0
    out_max: float = 50.0

    def validate(self):
        for g in (self.kp, self.ki, self.kd):
            if not math.isfinite(g):
                raise ValueError("gains must be finite")
        if self.out_min >= self.out_max:
            raise ValueError("output limits must be ordered")


@dataclass
class PidState:
    integral: float = 0.0
    prev_error: float | None = None


def pid_update(state: PidState, error: float, dt: float,
               gains: PidGains) -> tuple[PidState, float]:
    """One PID step; integral anti-windup clamps at the output limits."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    derivative = 0.0
    if state.prev_error is not None and gains.kd:
        derivative = (error - state.prev_error) / dt
    integral = state.integral + error * dt
    u = gains.kp * error + gains.ki * integral + gains.kd * derivative
    if u > gains.out_max:
        u = gains.out_max
        integral = state.integral  # hold the integrator while saturated
    elif u < gains.out_min:
        u = gains.out_min
        integral = state.integral
    return PidState(integral, error), u


# ---------------------------------------------------------------------------
# Closed-loop simulation


@dataclass
class LockTrace:
    t: np.ndarray
    zeta_open: np.ndarray
    zeta_closed: np.ndarray
    error: np.ndarray
    actuation: np.ndarray
    setpoint: float
    diverged: bool

    def rms_open(self) -> float:
        return float(np.sqrt(np.mean((self.zeta_open - self.setpoint) ** 2)))

    def rms_closed(self) -> float:
        return float(np.sqrt(np.mean((self.zeta_closed - self.setpoint) ** 2)))

    def to_csv(self) -> str:
        lines = ["t,zeta_open,zeta_closed,error,actuation"]
        for row in zip(self.t, self.zeta_open, self.zeta_closed,
                       self.error, self.actuation):
            lines.append(",".join(f"{x:.12g}" for x in row))
        return "\n".join(lines) + "\n"


def simulate_lock(
    p: LockParams,
    drift: DriftModel,
    gains: PidGains,
    duration: float = 4.0,
    setpoint: float = 0.0,
    seed: int = 0,
    zeta0: float = 0.0,
    loop_cutoff: float | None = None,
    warmup: int = 8,
) -> LockTrace:
    """Co-simulate the free-running and servo-locked interferometer phase.

    The loop runs one PID update per modulation period: the intensity over
    the period is sampled with the current closed-loop phase, mixed and
    filtered (the filter holds state across periods), compared against the
    DC offset that encodes the setpoint, and fed to the PID whose output adds
    to the compensating phase.  The servo path uses a faster filter corner
    than the reporting demodulator (default one eighth of the modulation
    frequency) so it does not dominate the loop delay; the first ``warmup``
    periods only settle the filter, with the actuator held.
    """
    p.validate()
    drift.validate()
    gains.validate()
    dt = p.sample_dt
    per_period = max(int(round(p.mod_period / dt)), 1)
    control_dt = per_period * dt
    n_steps = max(int(duration / control_dt), 1)
    rng = np.random.default_rng(seed)
    drift_path = drift.path(n_steps, control_dt, rng)

    gain = calibrate_gain(p)
    offset = gain * math.sin(setpoint) * math.sin(p.demod_phase)
    # error ~ G sin(zeta) sin(tau); divide out the measured slope so the
    # servo sign does not depend on the hardware constants.
    slope = gain * math.sin(p.demod_phase)

    if loop_cutoff is None:
        loop_cutoff = p.mod_freq / (2 * math.pi * 8.0)
    lpf = _SinglePoleLpf(loop_cutoff, dt)
    pid = PidState()
    actuation = 0.0
    sub_t = dt * np.arange(per_period)

    t_out = np.empty(n_steps)
    zeta_open = np.empty(n_steps)
    zeta_closed = np.empty(n_steps)
    error_out = np.empty(n_steps)
    act_out = np.empty(n_steps)
    diverged = False
    for k in range(n_steps):
        t0 = k * control_dt
        open_phase = zeta0 + drift_path[k]
        closed_phase = open_phase + actuation
        trace = intensity(t0 + sub_t, closed_phase, p)
        mixed = trace * np.cos(p.mod_freq * (t0 + sub_t) + p.demod_phase)
        filtered = lpf.run(mixed)
        # average over the whole period: suppresses carrier ripple that a
        # fixed-phase sample would alias into a systematic offset
        raw_error = float(np.mean(filtered))
        norm_error = (raw_error - offset) / slope
        if k >= warmup:
            pid, u = pid_update(pid, -norm_error, control_dt, gains)
            actuation = u
        t_out[k] = t0
        zeta_open[k] = open_phase
        zeta_closed[k] = closed_phase
        error_out[k] = raw_error
        act_out[k] = actuation
        if not math.isfinite(actuation) or abs(closed_phase - setpoint) > 10.0:
            diverged = True
    return LockTrace(t_out, zeta_open, zeta_closed, error_out, act_out,
                     setpoint, diverged)
