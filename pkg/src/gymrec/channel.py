"""Log-distance radio channel with Bernoulli packet loss."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .beacon import Emission
from .codec import IBeaconFrame

MIN_DISTANCE = 0.1


class Placement(NamedTuple):
    x: float
    y: float

    def distance(self, other: "Placement") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class ChannelParams:
    path_loss_exponent: float = 2.0
    reference_rssi_1m: float = -59.0
    noise_sigma: float = 0.0
    base_loss_prob: float = 0.0

    def __post_init__(self):
        if self.path_loss_exponent <= 0:
            raise ValueError("path_loss_exponent must be > 0")
        if not 0.0 <= self.base_loss_prob <= 1.0:
            raise ValueError("base_loss_prob must be within [0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


class Receiver(NamedTuple):
    id: str
    placement: Placement
    listening: bool


@dataclass(frozen=True)
class Reception:
    receiver: str
    frame: IBeaconFrame
    rssi: float
    t: float


def mean_rssi(distance: float, params: ChannelParams) -> float:
    d = max(distance, MIN_DISTANCE)
    return params.reference_rssi_1m - 10.0 * params.path_loss_exponent * math.log10(d)


def compute_rssi(tx: Placement, rx: Placement, params: ChannelParams,
                 rng: np.random.Generator | None = None) -> float:
    """Received power in dBm; draws one standard normal from ``rng`` if given."""
    rssi = mean_rssi(tx.distance(rx), params)
    if rng is not None:
        rssi += params.noise_sigma * rng.standard_normal()
    return rssi


def deliver(emission: Emission, tx: Placement, receivers: Sequence[Receiver],
            params: ChannelParams, rng: np.random.Generator) -> list[Reception]:
    # The rng is advanced identically whether or not a receiver is listening,
    # so receiver duty cycles never shift the random stream of later packets.
    out = []
    for rx in receivers:
        draw = rng.random()
        rssi = compute_rssi(tx, rx.placement, params, rng)
        if rx.listening and draw >= params.base_loss_prob:
            out.append(Reception(rx.id, emission.frame, rssi, emission.t))
    return out
