"""Blockage detection from backscatter power ratios and LOS/NLOS switching.

The detector compares the reflected-to-transmitted power ratio of each
object with two reference levels, the unblocked level and the level expected
under the nominal blockage loss, and declares blockage when the measured ratio
lies below their geometric mean.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .channel import DEFAULT_ECHO_HOPS, OBJECTS, USERS, LinkState, SubcarrierChannelSet
from .errors import BlockedWithoutFallback, ConfigError
from .rates import PowerAllocation, ReflectorSet


class Action(str, enum.Enum):
    KEEP_LOS = "KeepLOS"
    SWITCH_TO_NLOS = "SwitchToNLOS"


@dataclass(frozen=True)
class BlockageDecision:
    ratio: float
    expected_unblocked: float
    expected_blocked: float
    declared_blocked: bool
    action: Action
    fallback_missing: bool = False


def reflection_ratio(obj: str, channels: SubcarrierChannelSet, bf, pa: PowerAllocation,
                     reflectors: ReflectorSet, echo_hops: int = DEFAULT_ECHO_HOPS,
                     noise_var: Optional[float] = None,
                     rng: Optional[np.random.Generator] = None) -> float:
    """Reflected power of ``obj`` over transmitted power of the beam lighting it.

    Both powers are summed over subcarriers.  The measurement is exact unless
    ``noise_var`` and ``rng`` are given, in which case complex Gaussian
    receiver noise is added to the combined echo before taking its power.
    """
    beam = bf.f_s if obj == "target" else bf.f_c
    p_beam = pa.p_target if obj == "target" else pa.p1 + pa.p2
    echo = channels.echo(obj, hops=echo_hops)
    rho = reflectors[obj]
    reflected = 0.0
    transmitted = 0.0
    for k in range(bf.k_subcarriers):
        f = beam(k)
        y = np.sqrt(p_beam) * rho * (bf.w_radar.conj().T @ echo[k] @ f)
        if noise_var is not None and rng is not None:
            y = y + np.sqrt(noise_var / 2) * (rng.standard_normal(y.shape)
                                             + 1j * rng.standard_normal(y.shape))
        reflected += float(np.sum(np.abs(y) ** 2))
        transmitted += p_beam * float(np.sum(np.abs(f) ** 2))
    if transmitted <= 0.0:
        raise ConfigError(f"no power transmitted towards {obj}")
    return reflected / transmitted


def decide(ratio: float, expected_unblocked: float, expected_blocked: float,
           nlos_available: bool = True) -> BlockageDecision:
    """Two-hypothesis decision with the log-domain midpoint as threshold.

    A ratio exactly at the midpoint counts as unblocked.  When blockage is
    declared but no NLOS channel exists, the link stays on LOS and a
    :class:`BlockedWithoutFallback` warning is issued.
    """
    if not 0 < expected_blocked < expected_unblocked:
        raise ConfigError("need 0 < expected_blocked < expected_unblocked")
    if ratio < 0:
        raise ConfigError("ratio must be non-negative")
    threshold = 0.5 * (math.log(expected_unblocked) + math.log(expected_blocked))
    blocked = ratio == 0.0 or math.log(ratio) < threshold
    missing = blocked and not nlos_available
    if missing:
        warnings.warn("blockage declared but no NLOS channel is available; keeping LOS",
                      BlockedWithoutFallback, stacklevel=2)
    action = Action.SWITCH_TO_NLOS if blocked and nlos_available else Action.KEEP_LOS
    return BlockageDecision(ratio=ratio, expected_unblocked=expected_unblocked,
                            expected_blocked=expected_blocked, declared_blocked=blocked,
                            action=action, fallback_missing=missing)


def detect(channels: SubcarrierChannelSet, bf, pa: PowerAllocation, reflectors: ReflectorSet,
           reference: Mapping[str, float], nominal_blockage_db: float = 20.0,
           echo_hops: int = DEFAULT_ECHO_HOPS, allow_switch: bool = True,
           noise_var=None, rng=None,
           objects=OBJECTS) -> dict:
    """Run :func:`decide` for each object against its unblocked reference ratio.

    The blocked reference is the unblocked one scaled by the echo power loss
    of ``nominal_blockage_db`` on ``echo_hops`` legs.
    """
    loss = 10.0 ** (-echo_hops * nominal_blockage_db / 10.0)
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BlockedWithoutFallback)
        for o in objects:
            ratio = reflection_ratio(o, channels, bf, pa, reflectors, echo_hops, noise_var, rng)
            ref = reference[o]
            out[o] = decide(ratio, ref, ref * loss, nlos_available=allow_switch and channels.has_nlos(o))
    return out


def apply_switch(channels: SubcarrierChannelSet, decisions: Mapping[str, BlockageDecision]
                 ) -> SubcarrierChannelSet:
    """Move blocked links to NLOS; a blocked user moves its whole NOMA cluster.

    Returns a new set; matrices are shared, only the active flags change.
    """
    switch = {}
    if any(decisions[u].action is Action.SWITCH_TO_NLOS for u in USERS if u in decisions):
        switch.update({u: LinkState.NLOS for u in USERS if channels.has_nlos(u)})
    d = decisions.get("target")
    if d is not None and d.action is Action.SWITCH_TO_NLOS and channels.has_nlos("target"):
        switch["target"] = LinkState.NLOS
    if not switch:
        return channels
    return channels.with_active(**switch)
