"""Random network drops, block-fading channels and the coherence-block length.

Cells are indexed ``0 .. I-1`` and the ``k``-th MS of cell ``i`` is ``(i, k)``.
Array layouts used throughout the package:

* ``gains[i, k, j]``  large-scale gain from BS ``j`` to MS ``(i, k)``
* ``H[i, k, j]``      ``N x M`` channel from BS ``j`` to MS ``(i, k)``
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import ConfigError

SPEED_OF_LIGHT = 2.998e8  # m/s
RNG_ALGORITHM = "numpy PCG64 seeded through SeedSequence (spawn keys for drop/block streams)"

__all__ = [
    "Scenario",
    "Network",
    "ChannelRealization",
    "generate_network",
    "coherence_block_length",
    "draw_channels",
    "pathloss_db",
    "square_side",
    "scenario_from_dict",
    "load_scenario",
    "make_rng",
]


@dataclass(frozen=True)
class Scenario:
    """Symmetric network scenario.

    Every BS has ``bs_antennas`` antennas and serves ``mss_per_cell`` MSs,
    each with ``ms_antennas`` antennas and ``streams_per_ms`` streams.
    ``tx_snr_db`` sets ``P / sigma^2`` with ``sigma^2 = 1``.

    ``snr_reference_distance_m`` (optional) divides every large-scale gain
    by the unshadowed path gain at that distance, so that ``tx_snr_db``
    becomes the mean receive SNR of a link at the reference distance.
    """

    num_cells: int = 12
    mss_per_cell: int = 2
    bs_antennas: int = 8
    ms_antennas: int = 2
    streams_per_ms: int = 1
    tx_snr_db: float = 20.0
    beta: float = 0.5
    ms_speed_kmh: float = 30.0
    coherence_bandwidth_hz: float = 300e3
    carrier_freq_hz: float = 2e9
    isd_m: float = 500.0
    ms_distance_m: float = 150.0
    shadow_std_db: float = 8.0
    pathloss_const_db: float = 15.3
    pathloss_slope: float = 37.6
    snr_reference_distance_m: float | None = None

    def __post_init__(self):
        for name in ("num_cells", "mss_per_cell", "bs_antennas", "ms_antennas", "streams_per_ms"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError("must be a positive integer", key=name)
        d = self.streams_per_ms
        if d > min(self.bs_antennas, self.ms_antennas):
            raise ConfigError("streams_per_ms exceeds min(bs_antennas, ms_antennas)", key="streams_per_ms")
        if not 0.0 <= self.beta < 1.0:
            raise ConfigError("must lie in [0, 1)", key="beta")
        for name in ("ms_speed_kmh", "coherence_bandwidth_hz", "carrier_freq_hz", "isd_m", "ms_distance_m"):
            if not getattr(self, name) > 0:
                raise ConfigError("must be strictly positive", key=name)
        if not self.shadow_std_db >= 0:
            raise ConfigError("must be non-negative", key="shadow_std_db")
        ref = self.snr_reference_distance_m
        if ref is not None and not ref > 0:
            raise ConfigError("must be strictly positive", key="snr_reference_distance_m")
        for name in ("tx_snr_db", "pathloss_const_db", "pathloss_slope"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError("must be finite", key=name)

    @classmethod
    def paper(cls, **overrides) -> "Scenario":
        """Reference scenario (3GPP Case 2 flavoured, 12 cells, 8x2 MIMO).

        Gains are normalized at the MS drop distance unless overridden.
        """
        params: dict[str, Any] = {"snr_reference_distance_m": cls.ms_distance_m}
        params.update(overrides)
        if "ms_distance_m" in overrides and "snr_reference_distance_m" not in overrides:
            params["snr_reference_distance_m"] = overrides["ms_distance_m"]
        return cls(**params)

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    @property
    def tx_power(self) -> float:
        return 10.0 ** (self.tx_snr_db / 10.0)

    @property
    def iia_bound(self) -> float:
        """Largest IIA-feasible coalition size ``(M + N - d) / (K d)`` (real)."""
        return (self.bs_antennas + self.ms_antennas - self.streams_per_ms) / (
            self.mss_per_cell * self.streams_per_ms
        )


@dataclass(frozen=True)
class Network:
    """One drop: geometry, large-scale gains and powers (``noise`` is 1)."""

    bs_positions: np.ndarray
    ms_positions: np.ndarray
    gains: np.ndarray
    powers: np.ndarray
    coherence_symbols: int
    noise: float = 1.0

    def __post_init__(self):
        I = self.bs_positions.shape[0]
        if self.ms_positions.shape[:1] != (I,) or self.gains.shape[0] != I or self.gains.shape[2] != I:
            raise ConfigError("inconsistent network array shapes")
        if self.coherence_symbols < 1:
            raise ConfigError("coherence_symbols must be >= 1")

    @property
    def num_cells(self) -> int:
        return self.gains.shape[0]

    @property
    def mss_per_cell(self) -> int:
        return self.gains.shape[1]

    def with_coherence(self, coherence_symbols: int) -> "Network":
        return dataclasses.replace(self, coherence_symbols=int(coherence_symbols))


@dataclass(frozen=True)
class ChannelRealization:
    """Small-scale channels for one coherence block; ``H[i, k, j]`` is ``N x M``."""

    H: np.ndarray = field(repr=False)

    def link(self, i: int, k: int, j: int) -> np.ndarray:
        return self.H[i, k, j]


def make_rng(seed) -> np.random.Generator:
    """Generator from an int, a ``SeedSequence`` or an existing generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def pathloss_db(distance_m, scenario: Scenario):
    """Log-distance path loss in dB."""
    return scenario.pathloss_const_db + scenario.pathloss_slope * np.log10(distance_m)


def square_side(scenario: Scenario) -> float:
    """Side of the square whose area equals ``I`` hexagonal cells of the given ISD."""
    area = scenario.num_cells * (math.sqrt(3.0) / 2.0) * scenario.isd_m**2
    if not area > 0:
        raise ConfigError("non-positive drop area")
    return math.sqrt(area)


def coherence_block_length(ms_speed_kmh: float, coherence_bandwidth_hz: float, carrier_freq_hz: float) -> int:
    """Number of symbols in a coherence block.

    Uses the block-fading equivalence ``f_D = 1 / (2 L_c)`` with normalized
    Doppler ``f_D = L_s v / lambda`` and symbol time ``L_s = 1 / W_c``.
    """
    if not (ms_speed_kmh > 0 and coherence_bandwidth_hz > 0 and carrier_freq_hz > 0):
        raise ConfigError("speed, coherence bandwidth and carrier frequency must be positive")
    symbol_time = 1.0 / coherence_bandwidth_hz
    wavelength = SPEED_OF_LIGHT / carrier_freq_hz
    speed = ms_speed_kmh / 3.6
    doppler = symbol_time * speed / wavelength
    return max(1, int(math.floor(1.0 / (2.0 * doppler))))


def generate_network(scenario: Scenario, rng_seed) -> Network:
    """Drop BSs uniformly in a square and MSs on a circle around their BS.

    Parameters
    ----------
    scenario : Scenario
    rng_seed : int or numpy.random.SeedSequence
        Seed of the drop stream. Channel blocks use separate seeds, so
        redrawing fading never changes the drop.

    Returns
    -------
    Network
    """
    I, K = scenario.num_cells, scenario.mss_per_cell
    side = square_side(scenario)
    radius = scenario.ms_distance_m
    if not radius > 0:
        raise ConfigError("non-positive MS radius", key="ms_distance_m")
    rng = make_rng(rng_seed)

    bs = rng.uniform(0.0, side, size=(I, 2))
    angles = rng.uniform(0.0, 2.0 * np.pi, size=(I, K))
    ms = bs[:, None, :] + radius * np.stack([np.cos(angles), np.sin(angles)], axis=-1)

    dist = np.linalg.norm(ms[:, :, None, :] - bs[None, None, :, :], axis=-1)
    shadow = scenario.shadow_std_db * rng.standard_normal(size=(I, K, I))
    loss_db = pathloss_db(dist, scenario) + shadow
    if scenario.snr_reference_distance_m is not None:
        loss_db = loss_db - pathloss_db(scenario.snr_reference_distance_m, scenario)
    gains = 10.0 ** (-loss_db / 10.0)

    powers = np.full(I, scenario.tx_power)
    Lc = coherence_block_length(scenario.ms_speed_kmh, scenario.coherence_bandwidth_hz, scenario.carrier_freq_hz)
    return Network(bs_positions=bs, ms_positions=ms, gains=gains, powers=powers, coherence_symbols=Lc)


def draw_channels(network: Network, scenario: Scenario, rng_seed) -> ChannelRealization:
    """I.i.d. Rayleigh block fading with per-link variance ``gains[i, k, j]``."""
    I, K = network.num_cells, network.mss_per_cell
    N, M = scenario.ms_antennas, scenario.bs_antennas
    rng = make_rng(rng_seed)
    shape = (I, K, I, N, M)
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    scale = np.sqrt(network.gains / 2.0)[:, :, :, None, None]
    return ChannelRealization(H=scale * z)


_SCENARIO_FIELDS = {f.name: f for f in dataclasses.fields(Scenario)}
_INT_FIELDS = {"num_cells", "mss_per_cell", "bs_antennas", "ms_antennas", "streams_per_ms"}


def scenario_from_dict(values: Mapping[str, Any], *, section: str = "scenario", base: Scenario | None = None) -> Scenario:
    """Build a scenario from a mapping; missing keys come from ``base``.

    Unknown keys raise :class:`ConfigError` carrying the key path.
    """
    base = Scenario.paper() if base is None else base
    changes: dict[str, Any] = {}
    for key, value in values.items():
        path = f"{section}.{key}" if section else key
        if key not in _SCENARIO_FIELDS:
            raise ConfigError("unknown key", key=path)
        if key in _INT_FIELDS:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError("expected an integer", key=path)
        elif key == "snr_reference_distance_m" and value in (None, "none", "off", False):
            value = None
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError("expected a number", key=path)
            value = float(value)
        changes[key] = value
    try:
        return dataclasses.replace(base, **changes)
    except ConfigError as err:
        if err.key is not None and section:
            raise ConfigError(str(err).split(": ", 1)[-1], key=f"{section}.{err.key}") from None
        raise


def _load_toml(path):
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config file: {err}") from err
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"malformed config file: {err}") from err


def load_scenario(path: str | Path) -> Scenario:
    """Read the ``[scenario]`` table of a TOML config file."""
    data = _load_toml(path)
    for key in data:
        if key != "scenario":
            raise ConfigError("unknown section", key=key)
    return scenario_from_dict(data.get("scenario", {}))
