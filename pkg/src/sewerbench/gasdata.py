"""Synthetic five-gas sensor-array dataset.

Mixtures are the Cartesian product of per-gas concentration levels with a
humidity and temperature grid. Each of the five cross-sensitive sensors
responds log-linearly to its target gas, modulated by climate, plus smaller
log terms for the other gases and additive Gaussian noise:

    r = gain * log10(1 + C_target/r0)
             * (1 + bh*(H-65)/100 + bt*(T-20)/100)
        + sum_j kappa_j * log10(1 + C_j / r0_j)  + eps,   eps ~ N(0, sigma^2)

clamped at 0 so calibrated responses stay in the physical [0, ~8] band.
A mixture is unsafe (label 1) iff any true concentration strictly exceeds
its gas's upper safety limit; labels never depend on sensor noise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from sewerbench.dataset import Dataset, FEATURE_NAMES
from sewerbench.errors import ConfigError
from sewerbench.rng import RngStream, derive_stream

# stream sub-paths under the config seed
_NOISE_TAG = 1
_LABEL_TAG = 2

GAS_ORDER = ("no2", "co", "h2s", "nh3", "ch4")


@dataclass(frozen=True)
class GasSpec:
    """One gas: its grid of concentration levels and safety band (ppm)."""

    name: str
    levels: tuple
    safety_upper: float
    safety_lower: float

    def __post_init__(self):
        if not self.levels:
            raise ConfigError(f"{self.name}: empty level list")
        lv = tuple(float(v) for v in self.levels)
        object.__setattr__(self, "levels", lv)
        if any(v < 0 for v in lv):
            raise ConfigError(f"{self.name}: negative concentration level")
        if any(b <= a for a, b in zip(lv, lv[1:])):
            raise ConfigError(f"{self.name}: levels must be strictly increasing")
        if self.safety_lower > self.safety_upper:
            raise ConfigError(f"{self.name}: safety_lower exceeds safety_upper")

    def levels_above_limit(self) -> int:
        return sum(1 for v in self.levels if v > self.safety_upper)


@dataclass(frozen=True)
class SensorSpec:
    """One MOS sensor: base-resistance reference, gain, and cross terms."""

    target_gas: str
    r0: float
    range_min: float
    range_max: float
    gain: float
    cross_gain: dict  # gas name -> kappa
    humidity_coeff: float
    temperature_coeff: float
    noise_sigma: float

    def __post_init__(self):
        if self.r0 <= 0:
            raise ConfigError(f"{self.target_gas} sensor: r0 must be positive")
        if self.range_min >= self.range_max:
            raise ConfigError(f"{self.target_gas} sensor: bad range")
        if self.noise_sigma < 0:
            raise ConfigError(f"{self.target_gas} sensor: negative noise sigma")
        for gas, kappa in self.cross_gain.items():
            if kappa < 0 or kappa >= self.gain:
                raise ConfigError(
                    f"{self.target_gas} sensor: cross gain for {gas} "
                    f"must be in [0, gain)"
                )


@dataclass(frozen=True)
class MixtureSample:
    humidity: float
    temperature: float
    concentrations: dict  # gas name -> ppm
    label: int


@dataclass(frozen=True)
class SynthConfig:
    gas_specs: tuple
    sensor_specs: tuple
    humidity_grid: tuple
    temperature_grid: tuple
    seed: int = 42
    label_noise_rate: float = 0.0
    levels_above_limit: int = 1

    def __post_init__(self):
        object.__setattr__(self, "gas_specs", tuple(self.gas_specs))
        object.__setattr__(self, "sensor_specs", tuple(self.sensor_specs))
        object.__setattr__(self, "humidity_grid", tuple(float(h) for h in self.humidity_grid))
        object.__setattr__(self, "temperature_grid", tuple(float(t) for t in self.temperature_grid))
        if len(self.gas_specs) != 5 or len(self.sensor_specs) != 5:
            raise ConfigError("config needs exactly 5 gases and 5 sensors")
        if not self.humidity_grid or not self.temperature_grid:
            raise ConfigError("humidity and temperature grids must be non-empty")
        if not 0.0 <= self.label_noise_rate <= 1.0:
            raise ConfigError("label_noise_rate must be in [0, 1]")
        gas_names = [g.name for g in self.gas_specs]
        if sorted(gas_names) != sorted(s.target_gas for s in self.sensor_specs):
            raise ConfigError("sensor target gases must match the gas specs")
        for g in self.gas_specs:
            if g.levels_above_limit() != self.levels_above_limit:
                raise ConfigError(
                    f"{g.name}: expected exactly {self.levels_above_limit} "
                    f"level(s) above the upper safety limit, "
                    f"got {g.levels_above_limit()}"
                )

    def gas(self, name: str) -> GasSpec:
        for g in self.gas_specs:
            if g.name == name:
                return g
        raise ConfigError(f"unknown gas {name!r}")

    def r0_by_gas(self) -> dict:
        return {s.target_gas: s.r0 for s in self.sensor_specs}


def default_config(
    seed: int = 42,
    humidity_grid=(60.0, 65.0, 70.0, 75.0),
    temperature_grid=(20.0, 30.0, 40.0, 50.0),
    label_noise_rate: float = 0.0,
) -> SynthConfig:
    """Default 4-levels-per-gas configuration (16,384 rows on the full grid).

    One level per gas sits strictly above the upper safety limit, so the
    unsafe fraction over the full grid is exactly 1 - (3/4)^5 = 781/1024.
    Gains put noise-free responses in the same [0, 8] band as the
    calibrated-response tables the layout mirrors.
    """
    gases = (
        GasSpec("no2", (0.0, 1.0, 3.0, 10.0), safety_upper=5.0, safety_lower=3.0),
        GasSpec("co", (10.0, 35.0, 70.0, 200.0), safety_upper=100.0, safety_lower=35.0),
        GasSpec("h2s", (10.0, 30.0, 70.0, 150.0), safety_upper=100.0, safety_lower=50.0),
        GasSpec("nh3", (5.0, 20.0, 35.0, 60.0), safety_upper=40.0, safety_lower=25.0),
        GasSpec("ch4", (1000.0, 3000.0, 7000.0, 12000.0), safety_upper=10000.0, safety_lower=5000.0),
    )
    cross = {g.name: 0.05 for g in gases}

    def sensor(gas, r0, rng, gain):
        return SensorSpec(
            target_gas=gas,
            r0=r0,
            range_min=rng[0],
            range_max=rng[1],
            gain=gain,
            cross_gain={k: v for k, v in cross.items() if k != gas},
            humidity_coeff=0.1,
            temperature_coeff=0.05,
            noise_sigma=0.05,
        )

    sensors = (
        sensor("no2", 0.25, (0.25, 5.0), 4.0),
        sensor("co", 100.0, (20.0, 1000.0), 14.0),
        sensor("h2s", 10.0, (1.0, 100.0), 5.5),
        sensor("nh3", 100.0, (10.0, 300.0), 32.0),
        sensor("ch4", 1000.0, (300.0, 10000.0), 6.0),
    )
    return SynthConfig(gases, sensors, humidity_grid, temperature_grid, seed, label_noise_rate)


def fast_config(seed: int = 42) -> SynthConfig:
    """Reduced 2,048-row grid for the CI profile."""
    return default_config(seed=seed, humidity_grid=(60.0, 75.0), temperature_grid=(30.0,))


def label_sample(concentrations: dict, gas_specs) -> int:
    """1 iff any concentration strictly exceeds its gas's upper limit."""
    by_name = {g.name: g for g in gas_specs}
    for gas in concentrations:
        if gas not in by_name:
            raise ConfigError(f"unknown gas {gas!r} in sample")
    if len(concentrations) != len(by_name):
        raise ConfigError("sample must carry all five configured gases")
    for gas, conc in concentrations.items():
        if conc > by_name[gas].safety_upper:
            return 1
    return 0


def enumerate_mixtures(config: SynthConfig) -> list:
    """All level combinations x humidity x temperature, lexicographic order.

    Gas levels vary slowest (in config order), temperature fastest. Labels
    come from the true concentrations; with label_noise_rate > 0 each label
    is flipped with that probability from the (seed, sample index) stream.
    """
    p_flip = config.label_noise_rate
    names = [g.name for g in config.gas_specs]
    samples = []
    i = 0
    for combo in itertools.product(
        *[g.levels for g in config.gas_specs],
        config.humidity_grid,
        config.temperature_grid,
    ):
        conc = dict(zip(names, combo[:5]))
        label = label_sample(conc, config.gas_specs)
        if p_flip > 0.0:
            if derive_stream(config.seed, (_LABEL_TAG, i)).uniform() < p_flip:
                label = 1 - label
        samples.append(
            MixtureSample(humidity=combo[5], temperature=combo[6], concentrations=conc, label=label)
        )
        i += 1
    return samples


def sensor_response(
    sensor: SensorSpec,
    sample: MixtureSample,
    rng: RngStream | None,
    r0_by_gas: dict,
) -> float:
    """Noisy calibrated response of one sensor to one mixture.

    Deterministic given the stream; pass rng=None for the noise-free value.
    Responses are clamped at 0 (a calibrated delta-R/R0 cannot go negative).
    """
    for gas, conc in sample.concentrations.items():
        if conc < 0:
            raise ConfigError(f"negative concentration for {gas}")
    target_c = sample.concentrations[sensor.target_gas]
    if target_c > 10.0 * sensor.range_max:
        raise ConfigError(
            f"{sensor.target_gas} concentration {target_c} outside 10x sensor range"
        )
    climate = (
        1.0
        + sensor.humidity_coeff * (sample.humidity - 65.0) / 100.0
        + sensor.temperature_coeff * (sample.temperature - 20.0) / 100.0
    )
    r = sensor.gain * math.log10(1.0 + target_c / sensor.r0) * climate
    for gas, kappa in sensor.cross_gain.items():
        r += kappa * math.log10(1.0 + sample.concentrations[gas] / r0_by_gas[gas])
    if rng is not None and sensor.noise_sigma > 0.0:
        r += sensor.noise_sigma * rng.normal()
    return max(0.0, r)


def synthesize_dataset(config: SynthConfig) -> Dataset:
    """One instance per mixture: [humidity, temperature, 5 responses], label.

    Noise for sample i, sensor j comes from the (seed, noise tag, i, j)
    stream, so any grid slice regenerates identically in isolation.
    """
    samples = enumerate_mixtures(config)
    r0s = config.r0_by_gas()
    sensors = {s.target_gas: s for s in config.sensor_specs}
    ordered_sensors = [sensors[g.name] for g in config.gas_specs]
    n = len(samples)
    x = np.empty((n, 7))
    y = np.empty(n, np.int8)
    for i, sample in enumerate(samples):
        x[i, 0] = sample.humidity
        x[i, 1] = sample.temperature
        for j, sensor in enumerate(ordered_sensors):
            rng = derive_stream(config.seed, (_NOISE_TAG, i, j))
            x[i, 2 + j] = sensor_response(sensor, sample, rng, r0s)
        y[i] = sample.label
    return Dataset(feature_names=FEATURE_NAMES, x=x, y=y)


def expected_unsafe_fraction(config: SynthConfig):
    """Exact unsafe fraction over the grid as (numerator, denominator)."""
    safe = 1
    total = 1
    for g in config.gas_specs:
        total *= len(g.levels)
        safe *= sum(1 for v in g.levels if v <= g.safety_upper)
    return total - safe, total
