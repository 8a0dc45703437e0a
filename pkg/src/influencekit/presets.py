"""Canonical synthetic problem setups shared by the CLI, demos, and tests.

Each preset bundles a train/validation pair with a model config that exhibits
the phenomenon the preset exists to show:

* ``separable-noisy`` : two tangent uniform disks with 50 + 20 flipped labels.
  Trained without an intercept (the clouds are symmetric about the origin, so
  the boundary belongs through it); in that parameterization the flipped
  samples land in the joint-negative influence orthant and trimming them
  recovers both classes. With an intercept the bias coordinate couples every
  sample to every class and boundary-adjacent flips read as tradeoff samples
  instead (verified against leave-one-out retraining).
* ``nonseparable``    : overlapping clouds whose influence vectors collapse
  onto the tradeoff line; nothing is jointly harmful, the ceiling condition.
* ``blobs4``          : four Gaussian blobs where classes 0 and 2 overlap and
  under-perform, the playground for reweighting workflows.
"""

from __future__ import annotations

from .datamodel import (SeparableNoisyGeometry, NonseparableGeometry,
                        VALIDATION, gen_class_blobs, gen_nonseparable,
                        gen_separable_noisy)
from .trainer import ModelConfig

SEPARABLE_NOISY = "separable-noisy"
NONSEPARABLE = "nonseparable"
BLOBS4 = "blobs4"

PRESETS = (SEPARABLE_NOISY, NONSEPARABLE, BLOBS4)

NOISY_GEOMETRY = SeparableNoisyGeometry(blue_center=(-1.5, 0.0),
                                        orange_center=(1.5, 0.0), radius=1.5)
TRADEOFF_GEOMETRY = NonseparableGeometry()

BLOBS4_CENTERS = ((0.0, 1.6), (4.0, 0.0), (0.0, -1.6), (-4.0, 0.0))
BLOBS4_SIGMAS = (1.3, 0.8, 1.3, 0.8)

# validation seeds are offset so the split never shares draws with train
VAL_SEED_OFFSET = 1000


def noisy_config(seed=0):
    return ModelConfig(architecture="logistic", bias=False, learning_rate=0.4,
                       weight_decay=1e-3, batch_size=64, epochs=60, seed=seed)


def tradeoff_config(seed=0):
    return ModelConfig(architecture="logistic", learning_rate=0.4,
                       weight_decay=1e-3, batch_size=64, epochs=60, seed=seed)


def blobs4_config(seed=0):
    return ModelConfig(architecture="logistic", learning_rate=0.3,
                       weight_decay=1e-3, batch_size=32, epochs=8, seed=seed)


def make_separable_noisy(seed=0, n_blue=300, n_orange=300, flips_blue=50,
                         flips_orange=20, n_val=1500):
    train = gen_separable_noisy(n_blue, n_orange, flips_blue, flips_orange,
                                seed=seed, geometry=NOISY_GEOMETRY)
    val = gen_separable_noisy(n_val, n_val, 0, 0, seed=seed + VAL_SEED_OFFSET,
                              geometry=NOISY_GEOMETRY, split_tag=VALIDATION)
    return train, val, noisy_config(seed)


def make_nonseparable(seed=0, n_per_class=350, n_val=350):
    train = gen_nonseparable(n_per_class, seed=seed, geometry=TRADEOFF_GEOMETRY)
    val = gen_nonseparable(n_val, seed=seed + VAL_SEED_OFFSET,
                           geometry=TRADEOFF_GEOMETRY, split_tag=VALIDATION)
    return train, val, tradeoff_config(seed)


def make_blobs4(seed=0, n_per_class=200, n_val=400):
    train = gen_class_blobs(n_per_class, BLOBS4_CENTERS, BLOBS4_SIGMAS, seed=seed)
    val = gen_class_blobs(n_val, BLOBS4_CENTERS, BLOBS4_SIGMAS,
                          seed=seed + VAL_SEED_OFFSET, split_tag=VALIDATION)
    return train, val, blobs4_config(seed)


def make_preset(name, seed=0):
    """(train, val, config) for a named preset."""
    if name == SEPARABLE_NOISY:
        return make_separable_noisy(seed)
    if name == NONSEPARABLE:
        return make_nonseparable(seed)
    if name == BLOBS4:
        return make_blobs4(seed)
    raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
