"""Shared test helpers: random instances built on the package RNG.

Oracles live in the test modules themselves and stay independent of the
code paths they check; this module only manufactures inputs.
"""

import numpy as np

from shortcutlab.activations import ActivationTriple
from shortcutlab.network import Dataset, unflatten, zero_network
from shortcutlab.rng import Rng


def random_dataset(d, m, seed):
    rng = Rng(seed)
    return Dataset(rng.normal_matrix(d, m), rng.normal_matrix(d, m))


def random_network(d, n, R, acts="identity,identity,identity", seed=0, scale=0.5,
                   shortcut=True):
    triple = ActivationTriple.from_names(acts)
    template = zero_network(d, n, R, triple, shortcut=shortcut)
    w = scale * Rng(seed).normal(template.param_count)
    return unflatten(w, template)


def random_symmetric(n, seed, scale=1.0):
    g = scale * Rng(seed).normal_matrix(n, n)
    return 0.5 * (g + g.T)
