"""Per-subcarrier clustered-multipath MIMO channels.

Every channel is built as a sum of rank-one path contributions

    H(k) = sum_l g_l * exp(j*phi_l) * exp(-j*2*pi*f_k*tau_l) * a_r(l) a_t(l)^H

with uniform square arrays at both ends.  A :class:`SubcarrierChannelSet`
bundles the LOS and NLOS variants for the two NOMA users and the sensing
target together with the per-object blockage loss; channel traces produced
by external tools can be loaded through :func:`load_channel_trace`.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigError, ParseError, SchemaError, ShapeError

# blocker legs crossed by a monostatic echo: out to the object and back
DEFAULT_ECHO_HOPS = 2

OBJECTS = ("user1", "user2", "target")
USERS = ("user1", "user2")

TRACE_MAGIC = "ISACNOMA-TRACE"
TRACE_VERSION = 1


class LinkState(str, enum.Enum):
    LOS = "LOS"
    NLOS = "NLOS"


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform square array with ``n_elements = side**2`` elements."""

    n_elements: int
    spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if self.n_elements < 1 or math.isqrt(self.n_elements) ** 2 != self.n_elements:
            raise ConfigError(f"n_elements={self.n_elements} is not a perfect square")
        if not self.spacing_wavelengths > 0:
            raise ConfigError("spacing_wavelengths must be positive")

    @property
    def side(self) -> int:
        return math.isqrt(self.n_elements)


@dataclass(frozen=True)
class PathParams:
    """One propagation path.  Angles in radians, delay in seconds."""

    gain: complex
    phase_shift: float = 0.0
    delay: float = 0.0
    aoa_azimuth: float = 0.0
    aoa_elevation: float = 0.0
    aod_azimuth: float = 0.0
    aod_elevation: float = 0.0

    def __post_init__(self):
        if self.delay < 0:
            raise ConfigError("path delay must be non-negative")
        for name in ("aoa_elevation", "aod_elevation"):
            v = getattr(self, name)
            if not 0.0 <= v <= math.pi:
                raise ConfigError(f"{name}={v} outside [0, pi]")
        for name in ("aoa_azimuth", "aod_azimuth"):
            v = getattr(self, name)
            if not 0.0 <= v < 2 * math.pi:
                raise ConfigError(f"{name}={v} outside [0, 2*pi)")

    def scaled(self, factor: complex) -> "PathParams":
        return replace(self, gain=self.gain * factor)

    def monostatic(self) -> "PathParams":
        """Same path seen back at the transmitter: arrival angles equal departure angles."""
        return replace(self, aoa_azimuth=self.aod_azimuth, aoa_elevation=self.aod_elevation)


@dataclass(frozen=True)
class LinkSpec:
    paths: tuple
    carrier_freq: float
    is_los: bool

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        if not self.paths:
            raise ConfigError("a link needs at least one path")
        if self.is_los and len(self.paths) != 1:
            raise ConfigError("a LOS link has exactly one path")
        if not self.is_los and len(self.paths) < 2:
            raise ConfigError("an NLOS link has more than one path")
        if not self.carrier_freq > 0:
            raise ConfigError("carrier_freq must be positive")


def wrap_azimuth(phi):
    return np.mod(phi, 2 * np.pi)


def steering_vector(geom: ArrayGeometry, azimuth: float, elevation: float) -> np.ndarray:
    """Unit-norm array response as an ``(n_elements, 1)`` column.

    Element ``(m, n)`` of the ``s x s`` grid sits at raster index ``m*s + n``
    and carries phase ``2*pi*d*(m sin(el) cos(az) + n sin(el) sin(az))``.
    """
    return _steering(geom, np.atleast_1d(azimuth), np.atleast_1d(elevation))[:, :1]


def _steering(geom: ArrayGeometry, az: np.ndarray, el: np.ndarray) -> np.ndarray:
    # columns are paths
    s = geom.side
    m, n = np.divmod(np.arange(geom.n_elements), s)
    u = np.sin(el) * np.cos(az)
    v = np.sin(el) * np.sin(az)
    phase = 2 * np.pi * geom.spacing_wavelengths * (np.outer(m, u) + np.outer(n, v))
    return np.exp(1j * phase) / np.sqrt(geom.n_elements)


def subcarrier_frequencies(carrier_freq: float, bandwidth: float, k_subcarriers: int) -> np.ndarray:
    """Subcarrier centres placed symmetrically around the carrier over the band."""
    if k_subcarriers < 1:
        raise ConfigError("k_subcarriers must be positive")
    k = np.arange(1, k_subcarriers + 1)
    return carrier_freq + (k - (k_subcarriers + 1) / 2) * (bandwidth / k_subcarriers)


def synthesize_channel(link: LinkSpec, tx_geom: ArrayGeometry, rx_geom: ArrayGeometry,
                       subcarrier_freqs: Sequence[float]) -> np.ndarray:
    """Return the stack ``H[k]`` of shape ``(K, rx.n_elements, tx.n_elements)``."""
    paths = link.paths
    if not paths:
        raise ConfigError("a link needs at least one path")
    freqs = np.asarray(subcarrier_freqs, dtype=float).reshape(-1)
    gain = np.array([p.gain * np.exp(1j * p.phase_shift) for p in paths])
    delay = np.array([p.delay for p in paths])
    a_r = _steering(rx_geom, np.array([p.aoa_azimuth for p in paths]),
                    np.array([p.aoa_elevation for p in paths]))
    a_t = _steering(tx_geom, np.array([p.aod_azimuth for p in paths]),
                    np.array([p.aod_elevation for p in paths]))
    coef = gain[None, :] * np.exp(-2j * np.pi * np.outer(freqs, delay))
    return np.einsum("kl,rl,tl->krt", coef, a_r, a_t.conj())


def blockage_amplitude(blockage_db: float) -> float:
    if blockage_db < 0:
        raise ConfigError(f"blockage_db must be non-negative, got {blockage_db}")
    return 10.0 ** (-blockage_db / 20.0)


def apply_blockage(h, blockage_db: float) -> np.ndarray:
    """Scale ``h`` so that received power falls by ``blockage_db`` dB."""
    return blockage_amplitude(blockage_db) * np.asarray(h, dtype=np.complex128)


def random_nlos_paths(rng: np.random.Generator, los: PathParams, *, power: float,
                      n_paths: Optional[int] = None, path_range=(2, 4),
                      max_delay: float = 100e-9, angle_spread: float = math.radians(20),
                      shared_aod: Optional[Sequence[tuple]] = None) -> list:
    """Draw an NLOS path list scattered around the LOS direction.

    Gains are circularly-symmetric Gaussian with ``power / L`` each.  When
    ``shared_aod`` is given (one ``(az, el)`` per path) the departure angles are
    reused, which keeps users of one NOMA cluster in the same beam.
    """
    if shared_aod is not None:
        n_paths = len(shared_aod)
    elif n_paths is None:
        n_paths = int(rng.integers(path_range[0], path_range[1] + 1))
    if n_paths < 2:
        raise ConfigError("NLOS links need at least two paths")
    sigma = math.sqrt(power / n_paths / 2.0)
    paths = []
    for i in range(n_paths):
        g = complex(rng.normal(0.0, sigma), rng.normal(0.0, sigma))
        if shared_aod is not None:
            aod_az, aod_el = shared_aod[i]
        else:
            aod_az, aod_el = _jitter_angles(rng, los.aod_azimuth, los.aod_elevation, angle_spread)
        aoa_az, aoa_el = _jitter_angles(rng, los.aoa_azimuth, los.aoa_elevation, angle_spread)
        paths.append(PathParams(
            gain=g,
            phase_shift=float(rng.uniform(0.0, 2 * math.pi)),
            delay=float(rng.uniform(0.0, max_delay)),
            aoa_azimuth=aoa_az, aoa_elevation=aoa_el,
            aod_azimuth=aod_az, aod_elevation=aod_el,
        ))
    return paths


def _jitter_angles(rng, az, el, spread):
    az = float(wrap_azimuth(az + rng.uniform(-spread, spread)))
    el = float(np.clip(el + rng.uniform(-spread, spread), 0.0, math.pi))
    return az, el


def _frozen(a: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if a is None:
        return None
    a = np.array(a, dtype=np.complex128)
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3:
        raise ShapeError(f"channel stack must be (K, rows, cols), got {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SubcarrierChannelSet:
    """LOS/NLOS channel stacks for user1, user2 and the target.

    ``los[o]`` and ``nlos[o]`` are ``(K, rows, N_t)`` arrays.  ``echo_los`` and
    ``echo_nlos`` optionally hold the BS-side ``(K, N_R, N_t)`` monostatic
    echo channels; when an echo is missing the downlink matrix itself is used,
    which requires ``rows == N_R``.  Blockage only attenuates the LOS variant.
    """

    los: Mapping[str, np.ndarray]
    nlos: Mapping[str, Optional[np.ndarray]]
    active: Mapping[str, LinkState] = field(default_factory=dict)
    blockage_db: Mapping[str, float] = field(default_factory=dict)
    echo_los: Mapping[str, Optional[np.ndarray]] = field(default_factory=dict)
    echo_nlos: Mapping[str, Optional[np.ndarray]] = field(default_factory=dict)

    def __post_init__(self):
        los = {o: _frozen(self.los[o]) for o in OBJECTS}
        nlos = {o: _frozen(self.nlos.get(o)) for o in OBJECTS}
        active = {o: LinkState(self.active.get(o, LinkState.LOS)) for o in OBJECTS}
        blockage = {o: float(self.blockage_db.get(o, 0.0)) for o in OBJECTS}
        echo_los = {o: _frozen(self.echo_los.get(o)) for o in OBJECTS}
        echo_nlos = {o: _frozen(self.echo_nlos.get(o)) for o in OBJECTS}
        k, _, n_t = los["user1"].shape
        n_r = los["user1"].shape[1]
        for o in OBJECTS:
            for label, h in (("LOS", los[o]), ("NLOS", nlos[o])):
                if h is None:
                    continue
                if h.shape[0] != k or h.shape[2] != n_t:
                    raise ShapeError(f"{o} {label} stack has shape {h.shape}, expected (K={k}, *, N_t={n_t})")
                if o in USERS and h.shape[1] != n_r:
                    raise ShapeError(f"{o} {label} has {h.shape[1]} rows, users need N_r={n_r}")
            if blockage[o] < 0:
                raise ConfigError(f"blockage_db[{o}] must be non-negative")
            if active[o] is LinkState.NLOS and nlos[o] is None:
                raise ConfigError(f"{o} is marked NLOS but has no NLOS channel")
        n_radar = los["target"].shape[1]
        for o in OBJECTS:
            for h in (echo_los[o], echo_nlos[o]):
                if h is not None and h.shape != (k, n_radar, n_t):
                    raise ShapeError(f"{o} echo stack has shape {h.shape}, expected {(k, n_radar, n_t)}")
        for name, value in (("los", los), ("nlos", nlos), ("active", active),
                            ("blockage_db", blockage), ("echo_los", echo_los),
                            ("echo_nlos", echo_nlos)):
            object.__setattr__(self, name, value)

    @property
    def k_subcarriers(self) -> int:
        return self.los["user1"].shape[0]

    @property
    def n_t(self) -> int:
        return self.los["user1"].shape[2]

    @property
    def n_r(self) -> int:
        return self.los["user1"].shape[1]

    @property
    def n_radar(self) -> int:
        return self.los["target"].shape[1]

    def has_nlos(self, obj: str) -> bool:
        return self.nlos[obj] is not None

    def channel(self, obj: str) -> np.ndarray:
        """Active downlink stack for ``obj`` with blockage applied to LOS."""
        if self.active[obj] is LinkState.NLOS:
            return self.nlos[obj]
        return blockage_amplitude(self.blockage_db[obj]) * self.los[obj]

    def echo(self, obj: str, hops: int = DEFAULT_ECHO_HOPS) -> np.ndarray:
        """Active BS-side echo stack (without the reflection coefficient).

        ``hops`` counts how many legs of the round trip the blocker attenuates.
        """
        if self.active[obj] is LinkState.NLOS:
            h = self.echo_nlos[obj]
            h = self.nlos[obj] if h is None else h
            amp = 1.0
        else:
            h = self.echo_los[obj]
            h = self.los[obj] if h is None else h
            amp = blockage_amplitude(self.blockage_db[obj]) ** hops
        if h.shape[1] != self.n_radar:
            raise ShapeError(f"no echo channel for {obj} and its downlink has "
                             f"{h.shape[1]} rows, not N_R={self.n_radar}")
        return amp * h

    def with_blockage(self, **blockage_db: float) -> "SubcarrierChannelSet":
        merged = dict(self.blockage_db)
        merged.update(blockage_db)
        return replace(self, blockage_db=merged)

    def with_active(self, **active) -> "SubcarrierChannelSet":
        merged = dict(self.active)
        merged.update({o: LinkState(s) for o, s in active.items()})
        return replace(self, active=merged)


# ---------------------------------------------------------------------------
# trace files
# ---------------------------------------------------------------------------

_HEADER_KEYS = ("version", "K", "N_t", "N_r", "N_R", "carrier_freq_hz", "bandwidth_hz")


def save_channel_trace(channels: SubcarrierChannelSet, path, carrier_freq_hz: float,
                       bandwidth_hz: float, comments=()) -> None:
    """Write ``channels`` in the text trace format.

    Every object needs an NLOS stack; entries are written with ``repr`` so a
    load gives back bit-identical values.  ``comments`` become ``#`` lines
    after the magic line.
    """
    for o in OBJECTS:
        if channels.nlos[o] is None:
            raise SchemaError(f"cannot write a trace without the {o} NLOS section")
    lines = [TRACE_MAGIC]
    lines += [f"# {c}" for c in comments]
    lines += [f"version {TRACE_VERSION}",
             f"K {channels.k_subcarriers}",
             f"N_t {channels.n_t}",
             f"N_r {channels.n_r}",
             f"N_R {channels.n_radar}",
             f"carrier_freq_hz {float(carrier_freq_hz)!r}",
             f"bandwidth_hz {float(bandwidth_hz)!r}"]
    for o in OBJECTS:
        for state, stack in ((LinkState.LOS, channels.los[o]), (LinkState.NLOS, channels.nlos[o])):
            for k in range(channels.k_subcarriers):
                lines.append(f"@ {o} {state.value} {k}")
                for row in stack[k]:
                    lines.append(" ".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_channel_trace(path) -> SubcarrierChannelSet:
    """Parse a channel trace file; see ``docs/trace_format.md`` for the grammar."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(raw)]
    lines = [(n, ln) for n, ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0][1] != TRACE_MAGIC:
        raise ParseError(f"trace must start with {TRACE_MAGIC!r}", line=lines[0][0] if lines else 1)
    pos = 1
    header = {}
    for key in _HEADER_KEYS:
        if pos >= len(lines):
            raise ParseError("trace header ended early", field=key)
        lineno, text = lines[pos]
        parts = text.split()
        if len(parts) != 2 or parts[0] != key:
            raise ParseError(f"expected header entry {key!r}, got {text!r}", line=lineno, field=key)
        try:
            header[key] = float(parts[1]) if key.endswith("_hz") else int(parts[1])
        except ValueError:
            raise ParseError(f"bad value {parts[1]!r}", line=lineno, field=key) from None
        pos += 1
    if header["version"] != TRACE_VERSION:
        raise SchemaError(f"unsupported trace version {header['version']}")
    k_sub, n_t, n_r, n_radar = header["K"], header["N_t"], header["N_r"], header["N_R"]
    if min(k_sub, n_t, n_r, n_radar) < 1:
        raise SchemaError("trace dimensions must be positive")

    stacks = {}
    for o in OBJECTS:
        rows = n_radar if o == "target" else n_r
        for state in LinkState:
            stack = np.empty((k_sub, rows, n_t), dtype=np.complex128)
            for k in range(k_sub):
                want = f"@ {o} {state.value} {k}"
                if pos >= len(lines):
                    raise SchemaError(f"trace is missing section {want[2:]!r}")
                lineno, text = lines[pos]
                if text != want:
                    if text.startswith("@"):
                        raise SchemaError(f"trace is missing section {want[2:]!r} "
                                          f"(found {text[2:]!r} at line {lineno})")
                    raise ParseError(f"expected section header {want!r}", line=lineno)
                pos += 1
                for r in range(rows):
                    if pos >= len(lines) or lines[pos][1].startswith("@"):
                        at = lines[pos][0] if pos < len(lines) else len(raw)
                        raise SchemaError(f"section {want[2:]!r} has {r} rows, header declares {rows} "
                                          f"(line {at})")
                    lineno, text = lines[pos]
                    tokens = text.split()
                    if len(tokens) != n_t:
                        raise SchemaError(f"section {want[2:]!r} row {r} has {len(tokens)} entries, "
                                          f"header declares N_t={n_t} (line {lineno})")
                    for c, tok in enumerate(tokens):
                        stack[k, r, c] = _parse_entry(tok, lineno, c)
                    pos += 1
            stacks[(o, state)] = stack
    if pos != len(lines):
        lineno, text = lines[pos]
        raise SchemaError(f"unexpected trailing content at line {lineno}: {text[:40]!r}")
    return SubcarrierChannelSet(
        los={o: stacks[(o, LinkState.LOS)] for o in OBJECTS},
        nlos={o: stacks[(o, LinkState.NLOS)] for o in OBJECTS},
    )


def _parse_entry(tok: str, lineno: int, col: int) -> complex:
    parts = tok.split(",")
    if len(parts) != 2:
        raise ParseError(f"entry {tok!r} is not a re,im pair", line=lineno, field=f"col {col}")
    try:
        z = complex(float(parts[0]), float(parts[1]))
    except ValueError:
        raise ParseError(f"entry {tok!r} is not numeric", line=lineno, field=f"col {col}") from None
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ParseError(f"entry {tok!r} is not finite", line=lineno, field=f"col {col}")
    return z
