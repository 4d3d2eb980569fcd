"""Neuron dynamics and nanodevice-neuron calibration.

Neurons integrate total synaptic current with explicit Euler at the global
timestep, fire on a threshold crossing, reset, and emit their configured
spike shapes: post1 back to the incoming synapses, post2 forward as the
next layer's pre-spike, and an optional inhibitory spike toward peers.
The leak constant and threshold can be recovered from measured
firing-frequency-vs-pulse-width device data.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from spikeforge import expr
from spikeforge.waveform import ScheduledWaveform, Waveform


@dataclass(frozen=True)
class SpikeWaveforms:
    """The spike shapes one neuron type emits (and accepts, for layer 0)."""

    pre: Waveform | None = None
    post1: Waveform | None = None
    post2: Waveform | None = None
    inhib: Waveform | None = None


@dataclass(frozen=True)
class NeuronModel:
    """Leaky integrate-and-fire parameters plus device-specific hooks.

    state_eqs, when given, replaces the default leak equation with a user
    dV/dt expression over {V, I, dt, tau, thres, r_mem}; power_expr
    accumulates dynamic energy with the same vocabulary.
    """

    tau: float
    thres: float
    v_reset: float = 0.0
    t_refrac: float = 0.0
    r_mem: float = 1.0
    state_eqs: expr.Expression | None = None
    power_expr: expr.Expression | None = None
    waveforms: SpikeWaveforms = SpikeWaveforms()
    pulse_convert_table: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.thres > self.v_reset:
            raise ValueError(
                f"thres must exceed v_reset, got {self.thres} <= {self.v_reset}")
        if self.t_refrac < 0:
            raise ValueError(f"t_refrac must be >= 0, got {self.t_refrac}")
        table = self.pulse_convert_table
        if table is not None:
            xs = [x for x, _ in table]
            if len(xs) < 2 or any(b <= a for a, b in zip(xs, xs[1:])):
                raise ValueError("pulse_convert_table input column must be "
                                 "strictly increasing with at least two rows")


@dataclass
class NeuronState:
    """Per-neuron mutable state owned by the simulation engine."""

    v: float = 0.0
    refractory_until: float = 0.0
    spike_times: list[float] = field(default_factory=list)
    energy: float = 0.0

    def copy(self) -> "NeuronState":
        return NeuronState(self.v, self.refractory_until,
                           list(self.spike_times), self.energy)


@dataclass(frozen=True)
class SpikeEmission:
    """Scheduled output spikes produced by one threshold crossing."""

    post1: ScheduledWaveform | None
    post2: ScheduledWaveform | None
    inhib: ScheduledWaveform | None
    t: float


def _state_env(model: NeuronModel, state: NeuronState, current: float,
               dt: float) -> dict[str, float]:
    return {"V": state.v, "I": current, "dt": dt,
            "tau": model.tau, "thres": model.thres, "r_mem": model.r_mem}


def integrate(model: NeuronModel, state: NeuronState, current: float,
              t: float, dt: float) -> None:
    """One Euler step of the membrane equation.

    Inside the refractory window the membrane is pinned at v_reset. Energy
    accumulates as dt * power_expr evaluated on the start-of-step state.
    """
    if model.power_expr is not None:
        state.energy += dt * expr.evaluate(
            model.power_expr, _state_env(model, state, current, dt))
    if t < state.refractory_until:
        state.v = model.v_reset
        return
    if model.state_eqs is None:
        dv = (model.r_mem * current - state.v) / model.tau
    else:
        dv = expr.evaluate(model.state_eqs, _state_env(model, state, current, dt))
    v = state.v + dt * dv
    if not math.isfinite(v):
        raise ValueError(f"membrane potential diverged to {v} at t={t}")
    state.v = v


def fire_check(model: NeuronModel, state: NeuronState, t: float,
               dt: float) -> SpikeEmission | None:
    """Threshold test after integration; fires at V >= thres.

    On a spike the membrane resets, the refractory window opens, and the
    emitted waveforms are scheduled one timestep later (origin t + dt) so
    downstream observers never see a spike in the step that caused it.
    """
    if state.v < model.thres:
        return None
    state.spike_times.append(t)
    state.v = model.v_reset
    state.refractory_until = t + model.t_refrac
    origin = t + dt
    wf = model.waveforms

    def sched(w):
        return ScheduledWaveform(w, origin) if w is not None else None

    return SpikeEmission(sched(wf.post1), sched(wf.post2), sched(wf.inhib), t)


def pulse_convert(model: NeuronModel, value: float) -> float:
    """Width/amplitude conversion through the device's measured table.

    Piecewise-linear between knots; values outside the table clamp to the
    end knots with a warning.
    """
    table = model.pulse_convert_table
    if table is None:
        raise ValueError("no pulse_convert_table configured for this neuron")
    xs = [x for x, _ in table]
    ys = [y for _, y in table]
    if value < xs[0] or value > xs[-1]:
        warnings.warn(f"pulse_convert input {value} outside table range "
                      f"[{xs[0]}, {xs[-1]}]; clamping", stacklevel=2)
    return float(np.interp(value, xs, ys))


def firing_frequency(width: float, tau: float, thres: float,
                     pulse_amplitude: float, pulse_rate: float) -> float:
    """Forward model: steady firing rate for pulses of a given width.

    Pulses of amplitude A (state-units per second) and width w arriving at
    pulse_rate give an average drive A*w*pulse_rate; a leaky integrator
    under that drive fires periodically once the drive can reach threshold.
    """
    drive = pulse_rate * pulse_amplitude * width
    if drive <= 0:
        return 0.0
    if math.isinf(tau):
        return drive / thres
    x = tau * drive
    if x <= thres:
        return 0.0
    return 1.0 / (tau * math.log(x / (x - thres)))


@dataclass(frozen=True)
class CalibrationResult:
    tau: float
    thres: float
    residual: float  # RMS frequency error of the returned fit


def calibrate_from_frequency(data, pulse_amplitude: float,
                             pulse_rate: float = 1.0) -> CalibrationResult:
    """Recover (tau, thres) from measured (pulse_width, frequency) pairs.

    In the linear regime the rate is pulse_rate*pulse_amplitude*w/thres;
    the leak constant comes from the sub-linear roll-off, so it is only
    fitted when at least four points are available (tau is reported as
    infinity otherwise, i.e. a pure integrate-and-fire).
    """
    pts = sorted((float(w), float(f)) for w, f in data)
    if len(pts) < 2:
        raise ValueError(f"need at least 2 calibration points, got {len(pts)}")
    widths = np.array([w for w, _ in pts])
    freqs = np.array([f for _, f in pts])
    if np.any(widths <= 0):
        raise ValueError("pulse widths must be positive")
    if widths[0] == widths[-1]:
        raise ValueError("degenerate calibration data: all pulse widths equal")
    if np.all(freqs == 0):
        raise ValueError("device never fires: all measured frequencies are zero")
    if np.any(freqs <= 0):
        raise ValueError("measured frequencies must be positive")
    if np.any(np.diff(freqs) < 0):
        raise ValueError("frequency must not decrease with pulse width")

    scale = pulse_rate * pulse_amplitude
    slope = float(np.dot(widths, freqs) / np.dot(widths, widths))
    thres0 = scale / slope

    def rms(tau, thres):
        pred = np.array([firing_frequency(w, tau, thres, pulse_amplitude, pulse_rate)
                         for w in widths])
        return float(np.sqrt(np.mean((pred - freqs) ** 2)))

    if len(pts) < 4:
        return CalibrationResult(math.inf, thres0, rms(math.inf, thres0))

    # affine regression: f ~ (scale/thres) * w - 1/(2 tau) in the rolled-off regime
    a, b = np.polyfit(widths, freqs, 1)
    thres_init = scale / a if a > 0 else thres0
    tau_init = -1.0 / (2.0 * b) if b < 0 else 10.0 / max(freqs)

    def residuals(params):
        tau, thres = np.exp(params)
        return np.array([
            firing_frequency(w, tau, thres, pulse_amplitude, pulse_rate) - f
            for (w, f) in pts])

    x0 = np.log([max(tau_init, 1e-12), max(thres_init, 1e-12)])
    fit = least_squares(residuals, x0)
    tau, thres = (float(v) for v in np.exp(fit.x))
    if rms(tau, thres) <= rms(math.inf, thres0):
        return CalibrationResult(tau, thres, rms(tau, thres))
    return CalibrationResult(math.inf, thres0, rms(math.inf, thres0))


def load_calibration_csv(path) -> list[tuple[float, float]]:
    """Read `width_seconds,frequency_hz` lines."""
    return _load_pairs(path, "width_seconds,frequency_hz")


def load_pulse_convert_csv(path) -> tuple[tuple[float, float], ...]:
    """Read `in,out` conversion-table lines."""
    return tuple(_load_pairs(path, "in,out"))


def _load_pairs(path, what):
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected {what}, got {line!r}")
            try:
                pairs.append((float(parts[0]), float(parts[1])))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad numbers in {line!r}") from None
    return pairs
