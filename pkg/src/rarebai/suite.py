"""Reference instances.

DESK_SUITE mirrors the (gamma, alpha) patterns of the standard four-row
benchmark at gamma = 1e-2 with means in [0.5, 1.5].  Atoms are in scaled
units (real value a gamma^-alpha with probability p gamma^alpha).

DESK_BATCH gives a batch size per suite instance of roughly tau/50 so that
a run spans tens of batches; the default ceil(gamma^-alpha_max) would
mean 10^3 - 10^4 solver calls per trial.

REGIME_INSTANCES holds one instance per small-gamma regime (1..5).
"""

from __future__ import annotations

from .instance import ArmSpec, BanditInstance


def _arms(alphas, atoms, bound):
    return tuple(ArmSpec(a, tuple(at), bound) for a, at in zip(alphas, atoms))


S1 = BanditInstance(1e-2, _arms(
    (1, 1, 1),
    [((2, .3), (4, .15)), ((2, .25), (3, .1)), ((1, .2), (5, .1))], 6), name="S1")

S2 = BanditInstance(1e-2, _arms(
    (1, 1.5, 2),
    [((2, .3), (4, .15)), ((2, .25), (3, .1)), ((1, .2), (4, .1))], 6), name="S2")

S3 = BanditInstance(1e-2, _arms(
    (1, 1, 1, 1, 1),
    [((2, .4), (4, .125)), ((2, .35), (3, .1)), ((1, .3), (5, .12)), ((2, .4),), ((1, .2), (4, .1))],
    6), name="S3")

S4 = BanditInstance(1e-2, _arms(
    (2, 1.5, 2, 2.5, 1),
    [((0.25, 6.0),), ((0.5, 1.6),), ((0.5, 1.4),), ((0.1, 5.0),), ((1.0, 0.6),)], 1), name="S4")

DESK_SUITE = (S1, S2, S3, S4)

DESK_BATCH = {"S1": 25_000, "S2": 400_000, "S3": 60_000, "S4": 100_000}

REGIME_INSTANCES = {
    1: BanditInstance(1e-3, _arms((1, 1.5, 2), [((2.0, .6),), ((1.0, .8),), ((1.0, .5),)], 6), name="R1"),
    2: BanditInstance(1e-3, _arms((2, 1.5, 1), [((2.0, .6),), ((1.0, .8),), ((1.0, .5),)], 6), name="R2"),
    3: BanditInstance(1e-3, _arms((2, 2, 1), [((2.0, .6),), ((1.0, .8),), ((1.0, .5),)], 6), name="R3"),
    4: BanditInstance(1e-3, _arms((2, 1, 2), [((2.0, .6),), ((1.0, .6),), ((1.0, .57),)], 6), name="R4"),
    5: BanditInstance(1e-3, _arms((2, 1, 2), [((2.0, .6),), ((1.0, .6),), ((1.0, .3),)], 6), name="R5"),
}
