"""Synthetic SWaT-like process data with labelled attacks.

Channels are periodic: ``triangle`` mimics a tank level filling and draining,
``spiky`` a differential pressure trace with sharp backwash spikes, and
``boolean`` a pump or valve state. Attacks follow the four-way taxonomy
(single/multi stage x single/multi point) and are built from four effects:
``level_hold``, ``setpoint_shift``, ``frequency_change``, ``stuck_actuator``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .core import InvalidArgument
from .ingest import Dataset, LabelIntervals, read_key_values
from .preprocess import BOOLEAN, CONTINUOUS, FeatureMatrix

WAVEFORMS = ("triangle", "spiky", "boolean")
EFFECTS = ("level_hold", "setpoint_shift", "frequency_change", "stuck_actuator")
ATTACK_KINDS = ("SSSP", "SSMP", "MSSP", "MSMP")
# attack counts per class in the reference data set
SWAT_MIX = {"SSSP": 26, "SSMP": 4, "MSSP": 2, "MSMP": 4}


@dataclass(frozen=True)
class ChannelSpec:
    name: str
    waveform: str
    period: int
    amplitude: float = 1.0
    baseline: float = 0.0
    noise_std: float = 0.0
    phase: int = 0

    def __post_init__(self):
        if self.waveform not in WAVEFORMS:
            raise InvalidArgument(f"{self.name}: waveform must be one of {WAVEFORMS}")
        if self.period < 2:
            raise InvalidArgument(f"{self.name}: period must be >= 2")
        if self.noise_std < 0:
            raise InvalidArgument(f"{self.name}: noise std must be >= 0")


@dataclass(frozen=True)
class ProcessConfig:
    channels: tuple
    length: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if not self.channels:
            raise InvalidArgument("at least one channel is required")
        if self.length < 2:
            raise InvalidArgument("length must be >= 2")
        names = [c.name for c in self.channels]
        if len(set(names)) != len(names):
            raise InvalidArgument("channel names must be unique")


@dataclass(frozen=True)
class AttackSpec:
    """One attack on ``targets`` over the closed step range ``[start, end]``.

    Multi-stage attacks split the range into ``len(effects)`` equal
    consecutive stages; stage ``k`` applies ``effects[k]`` with
    ``magnitudes[k]``. For ``setpoint_shift`` the magnitude is an additive
    offset, for ``frequency_change`` a speed-up factor, for
    ``stuck_actuator`` the value the channel is frozen at.
    """

    kind: str
    targets: tuple
    start: int
    end: int
    effects: tuple
    magnitudes: tuple

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "effects", tuple(self.effects))
        object.__setattr__(self, "magnitudes", tuple(float(m) for m in self.magnitudes))
        if self.kind not in ATTACK_KINDS:
            raise InvalidArgument(f"attack kind must be one of {ATTACK_KINDS}, got {self.kind!r}")
        if len(self.effects) != len(self.magnitudes) or not self.effects:
            raise InvalidArgument("each attack stage needs exactly one effect and one magnitude")
        for eff in self.effects:
            if eff not in EFFECTS:
                raise InvalidArgument(f"unknown effect {eff!r}")
        multi_point = self.kind in ("SSMP", "MSMP")
        multi_stage = self.kind in ("MSSP", "MSMP")
        if multi_point and len(self.targets) < 2:
            raise InvalidArgument(f"{self.kind} needs at least two target channels")
        if not multi_point and len(self.targets) != 1:
            raise InvalidArgument(f"{self.kind} targets exactly one channel")
        if multi_stage and len(self.effects) < 2:
            raise InvalidArgument(f"{self.kind} needs at least two effect stages")
        if not multi_stage and len(self.effects) != 1:
            raise InvalidArgument(f"{self.kind} has a single effect stage")
        if self.start < 0 or self.end < self.start:
            raise InvalidArgument(f"bad attack interval ({self.start}, {self.end})")
        if self.end - self.start + 1 < len(self.effects):
            raise InvalidArgument("attack interval shorter than its stage count")

    def stages(self):
        bounds = np.linspace(self.start, self.end + 1, len(self.effects) + 1).astype(int)
        for k, (eff, mag) in enumerate(zip(self.effects, self.magnitudes)):
            yield int(bounds[k]), int(bounds[k + 1]) - 1, eff, mag


def _shape(waveform: str, u: np.ndarray) -> np.ndarray:
    """Unit-amplitude waveform at phase ``u`` in [0, 1)."""
    if waveform == "triangle":
        return 1.0 - np.abs(2.0 * u - 1.0)
    if waveform == "spiky":
        return (0.35 * np.sin(2.0 * np.pi * u)
                + np.exp(-0.5 * ((u - 0.3) / 0.015) ** 2)
                + 0.5 * np.exp(-0.5 * ((u - 0.75) / 0.03) ** 2))
    return (u < 0.5).astype(np.float64)


def render_channel(spec: ChannelSpec, steps: np.ndarray) -> np.ndarray:
    u = ((steps + spec.phase) % spec.period) / spec.period
    shape = _shape(spec.waveform, u)
    if spec.waveform == "boolean":
        return shape
    return spec.baseline + spec.amplitude * shape


def generate(config: ProcessConfig) -> Dataset:
    """Attack-free process data; deterministic for a given config and seed."""
    steps = np.arange(config.length, dtype=np.float64)
    cols = []
    for c, spec in enumerate(config.channels):
        values = render_channel(spec, steps)
        if spec.waveform != "boolean" and spec.noise_std > 0:
            noise_rng = np.random.default_rng([int(config.seed), c])
            values = values + noise_rng.normal(0.0, spec.noise_std, config.length)
        cols.append(values)
    kinds = [BOOLEAN if s.waveform == "boolean" else CONTINUOUS for s in config.channels]
    features = FeatureMatrix(np.column_stack(cols), [s.name for s in config.channels], kinds)
    return Dataset(features, LabelIntervals.from_per_step(np.zeros(config.length, dtype=np.int64)),
                   source=f"synth:seed={config.seed}")


def _time_compress(original: np.ndarray, s: int, e: int, factor: float) -> np.ndarray:
    """Replay the channel from ``s`` onwards ``factor`` times faster."""
    if not factor > 0:
        raise InvalidArgument("frequency_change magnitude must be positive")
    n = original.shape[0]
    span = max(n - 1 - s, 1)
    src = s + ((np.arange(e - s + 1) * factor) % span)
    return np.interp(src, np.arange(n), original)


def inject_attacks(ds: Dataset, attacks: Sequence[AttackSpec]) -> Dataset:
    """Apply attack effects and set labels to 1 exactly on the attack intervals.

    Effects read the pre-injection signal, so overlapping specs do not feed
    into each other; later specs win where they overlap.
    """
    original = ds.features.values
    values = original.copy()
    labels = ds.labels.per_step.copy()
    n = values.shape[0]
    names = ds.features.names
    for spec in attacks:
        if spec.end >= n:
            raise InvalidArgument(f"attack interval ({spec.start}, {spec.end}) beyond series end {n - 1}")
        for target in spec.targets:
            if target not in names:
                raise InvalidArgument(f"attack targets unknown channel {target!r}")
            col = names.index(target)
            is_bool = ds.features.kinds[col] == BOOLEAN
            for s, e, effect, mag in spec.stages():
                if effect == "level_hold":
                    values[s:e + 1, col] = original[s, col]
                elif effect == "setpoint_shift":
                    if is_bool:
                        raise InvalidArgument(f"setpoint_shift cannot target boolean channel {target!r}")
                    values[s:e + 1, col] = original[s:e + 1, col] + mag
                elif effect == "frequency_change":
                    values[s:e + 1, col] = _time_compress(original[:, col], s, e, mag)
                    if is_bool:
                        values[s:e + 1, col] = np.round(values[s:e + 1, col])
                else:
                    if is_bool and mag not in (0.0, 1.0):
                        raise InvalidArgument("stuck_actuator on a boolean channel needs magnitude 0 or 1")
                    values[s:e + 1, col] = mag
        labels[spec.start:spec.end + 1] = 1
    return Dataset(ds.features.with_values(values), LabelIntervals.from_per_step(labels),
                   ds.timestamps, ds.source)


def default_process(length: int = 200_000, seed: int = 0) -> ProcessConfig:
    return ProcessConfig(channels=(
        ChannelSpec("LIT-101", "triangle", 1500, amplitude=300.0, baseline=500.0, noise_std=2.0),
        ChannelSpec("LIT-301", "triangle", 1000, amplitude=250.0, baseline=800.0, noise_std=2.0),
        ChannelSpec("DPIT-301", "spiky", 2000, amplitude=10.0, baseline=2.0, noise_std=0.3),
        ChannelSpec("P-101", "boolean", 1500),
        ChannelSpec("MV-301", "boolean", 1000),
    ), length=length, seed=seed)


def _pick_effect(rng: np.random.Generator, spec: ChannelSpec) -> tuple[str, float]:
    if spec.waveform == "boolean":
        return "stuck_actuator", float(rng.integers(0, 2))
    effect = ("level_hold", "setpoint_shift", "frequency_change")[int(rng.integers(0, 3))]
    if effect == "setpoint_shift":
        size = max(3.0 * spec.noise_std, spec.amplitude * rng.uniform(0.1, 0.3))
        return effect, float(size if rng.random() < 0.5 else -size)
    if effect == "frequency_change":
        return effect, float(rng.choice([0.5, 1.5, 2.0, 3.0]))
    return effect, 0.0


def swat_mix_attacks(config: ProcessConfig, seed: int, start: int, counts=None,
                      min_duration: int = 500, max_duration: int = 1500) -> list[AttackSpec]:
    """Non-overlapping random attacks in ``[start, length)`` with the reference class counts."""
    counts = dict(SWAT_MIX if counts is None else counts)
    rng = np.random.default_rng([int(seed), 0xA77AC])
    kinds = [k for k in ATTACK_KINDS for _ in range(counts.get(k, 0))]
    kinds = [kinds[i] for i in rng.permutation(len(kinds))]
    if not kinds:
        return []
    slot = (config.length - start) // len(kinds)
    if slot < max_duration + 2:
        raise InvalidArgument("series too short for the requested attack mix")
    channels = list(config.channels)
    out = []
    for k, kind in enumerate(kinds):
        duration = int(rng.integers(min_duration, max_duration + 1))
        s = start + k * slot + int(rng.integers(1, slot - duration))
        n_targets = int(rng.integers(2, 4)) if kind in ("SSMP", "MSMP") else 1
        n_stages = int(rng.integers(2, 4)) if kind in ("MSSP", "MSMP") else 1
        lead = channels[int(rng.integers(0, len(channels)))]
        # targets of one attack share the boolean/continuous family so effects stay valid
        family = [c for c in channels if (c.waveform == "boolean") == (lead.waveform == "boolean")]
        if n_targets > 1:
            n_targets = min(n_targets, len(family))
            if n_targets < 2:
                family = channels
                n_targets = 2
            idx = sorted(int(i) for i in rng.choice(len(family), n_targets, replace=False))
            targets = [family[i] for i in idx]
            lead = targets[0]
        else:
            targets = [lead]
        effects, mags = zip(*[_pick_effect(rng, lead) for _ in range(n_stages)])
        out.append(AttackSpec(kind, tuple(c.name for c in targets), s, s + duration - 1, effects, mags))
    return out


def lit_ten_config(seed: int = 0, length: int = 100_000) -> tuple[ProcessConfig, list[AttackSpec]]:
    """One LIT-like channel with ten single-point attacks after a clean lead-in."""
    noise = 2.0
    cfg = ProcessConfig((ChannelSpec("LIT-301", "triangle", 1000, amplitude=250.0,
                                     baseline=800.0, noise_std=noise),), length=length, seed=seed)
    plan = [
        ("level_hold", 0.0, 700),
        ("setpoint_shift", 30.0, 600),
        ("frequency_change", 2.0, 800),
        ("setpoint_shift", -45.0, 900),
        ("frequency_change", 0.5, 700),
        ("level_hold", 0.0, 1200),
        ("setpoint_shift", 60.0, 500),
        ("frequency_change", 3.0, 600),
        ("setpoint_shift", -20.0, 1000),
        ("frequency_change", 1.5, 900),
    ]
    first = length * 2 // 5
    gap = (length - first) // len(plan)
    attacks = []
    for k, (effect, mag, dur) in enumerate(plan):
        s = first + k * gap + 1234 + 97 * k
        attacks.append(AttackSpec("SSSP", ("LIT-301",), s, s + dur - 1, (effect,), (mag,)))
    return cfg, attacks


def dpit_repeat_config(seed: int = 0, length: int = 30_000, period: int = 250,
                       repeat: bool = True):
    """A DPIT-like channel where the same setpoint shift happens twice.

    The two occurrences start 40 periods apart at the same phase, so each is
    the other's closest match. ``repeat=False`` keeps only the first one,
    which is the control case where the attack is unique.
    """
    cfg = ProcessConfig((ChannelSpec("DPIT-301", "spiky", period, amplitude=10.0, baseline=2.0,
                                     noise_std=0.3),), length=length, seed=seed)
    first = (length // 2 // period) * period + period // 5
    starts = (first, first + 40 * period) if repeat else (first,)
    dur = period + period // 5
    attacks = [AttackSpec("SSSP", ("DPIT-301",), s, s + dur - 1, ("setpoint_shift",), (3.0,))
               for s in starts]
    return cfg, attacks


PRESETS = ("swat-mix", "lit-ten", "dpit-repeat", "clean")


def build_preset(name: str, seed: int, length: int = 0) -> tuple[ProcessConfig, list[AttackSpec]]:
    if name == "swat-mix":
        cfg = default_process(length or 200_000, seed)
        return cfg, swat_mix_attacks(cfg, seed, start=cfg.length * 2 // 5)
    if name == "lit-ten":
        return lit_ten_config(seed, length or 100_000)
    if name == "dpit-repeat":
        return dpit_repeat_config(seed, length or 30_000)
    if name == "clean":
        return default_process(length or 200_000, seed), []
    raise InvalidArgument(f"unknown preset {name!r}; choose from {PRESETS}")


def load_config(path: Union[str, Path]) -> tuple[ProcessConfig, list[AttackSpec]]:
    """Read a ``key=value`` generator config.

    Keys: ``length``, ``seed``, ``channel.<name>=<waveform>,period=..,amplitude=..,
    baseline=..,noise=..,phase=..`` and ``attack.<id>=<kind>,targets=a|b,start=..,
    end=..,effects=e1|e2,magnitudes=m1|m2``.
    """
    raw = read_key_values(path)
    channels, attacks = [], []
    for key, value in raw.items():
        if key.startswith("channel."):
            head, *opts = [p.strip() for p in value.split(",")]
            kv = dict(o.split("=", 1) for o in opts)
            channels.append(ChannelSpec(key[len("channel."):], head, int(kv.get("period", 100)),
                                        float(kv.get("amplitude", 1.0)), float(kv.get("baseline", 0.0)),
                                        float(kv.get("noise", 0.0)), int(kv.get("phase", 0))))
        elif key.startswith("attack."):
            head, *opts = [p.strip() for p in value.split(",")]
            kv = dict(o.split("=", 1) for o in opts)
            try:
                attacks.append(AttackSpec(head, kv["targets"].split("|"), int(kv["start"]),
                                          int(kv["end"]), kv["effects"].split("|"),
                                          [float(v) for v in kv["magnitudes"].split("|")]))
            except KeyError as exc:
                raise InvalidArgument(f"{key}: missing field {exc.args[0]!r}") from None
        elif key not in ("length", "seed"):
            raise InvalidArgument(f"unknown generator key {key!r}")
    cfg = ProcessConfig(channels, int(raw.get("length", 0)), int(raw.get("seed", 0)))
    return cfg, attacks


def synthesize(config: ProcessConfig, attacks: Sequence[AttackSpec]) -> Dataset:
    return inject_attacks(generate(config), attacks)
