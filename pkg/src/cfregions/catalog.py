"""Reference channels used throughout the tests and the bundled spec files."""

from __future__ import annotations

import itertools
from importlib import resources
from pathlib import Path

import numpy as np

from .channel import ChannelSpec
from .gflin import GfMatrix


def mod4_adder(p: float, q: int = 5) -> ChannelSpec:
    """Three binary users, ``Y = (X_1 + X_2 + X_3 + Z) mod 4``.

    Z is 0 with probability 1 - p and 1, 2, 3 with probability p/3 each.
    The binary inputs are embedded into F_q (q >= 5 keeps their field sum
    injective on {0, 1, 2, 3}); the field elements >= 2 get zero mass.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"noise level must be in [0, 1], got {p}")
    pz = np.array([1 - p, p / 3, p / 3, p / 3])
    channel = np.zeros((2, 2, 2, 4))
    for x in itertools.product(range(2), repeat=3):
        s = sum(x)
        for z in range(4):
            channel[x + ((s + z) % 4,)] += pz[z]
    pmf = np.zeros((3, q))
    pmf[:, :2] = 0.5
    smap = np.tile(np.arange(q) % 2, (3, 1))
    return ChannelSpec(q, pmf, smap, channel)


def mod4_adder_sum(q: int = 5) -> GfMatrix:
    return GfMatrix([[1, 1, 1]], q)


def binary_adder(noise: float = 0.0) -> ChannelSpec:
    """Two uniform binary users, ``Y = X_1 + X_2`` over the integers.

    With ``noise > 0`` the output is replaced by each of the two wrong values
    with probability noise/2.
    """
    channel = np.zeros((2, 2, 3))
    for x1, x2 in itertools.product(range(2), repeat=2):
        s = x1 + x2
        for y in range(3):
            channel[x1, x2, y] = 1 - noise if y == s else noise / 2
    return ChannelSpec(2, np.full((2, 2), 0.5), np.tile(np.arange(2), (2, 1)), channel)


MOD4_B_LIST = (
    [[1, 1, 1]],
    [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
    [[1, 0, 0], [0, 1, 1]],
    [[0, 1, 0], [1, 0, 1]],
    [[0, 0, 1], [1, 1, 0]],
)


def mod4_b_list(q: int = 5) -> list[GfMatrix]:
    """The five B matrices whose union gives the plotted inner bound."""
    return [GfMatrix(b, q) for b in MOD4_B_LIST]


def bundled_spec_dir() -> Path:
    return Path(str(resources.files("cfregions") / "specs"))


def bundled_spec(name: str) -> Path:
    path = bundled_spec_dir() / name
    if not path.exists():
        raise FileNotFoundError(f"no bundled spec named {name!r} in {bundled_spec_dir()}")
    return path
