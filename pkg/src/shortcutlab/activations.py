"""Element-wise activations and their placement on a transformation path."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_KINDS = ("identity", "relu", "tanh")


@dataclass(frozen=True)
class Activation:
    """One of identity / relu / tanh, with behaviour at 0 queryable.

    All three map 0 to 0. The relu derivative at exactly 0 is defined as
    1: the zero point sits exactly on the kink, and taking the right
    derivative there is what makes the numeric Hessians line up with the
    closed-form ones.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown activation {self.kind!r}; expected one of {_KINDS}")

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "identity":
            return x
        if self.kind == "relu":
            return np.maximum(x, 0.0)
        return np.tanh(x)

    def deriv(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "identity":
            return np.ones_like(x)
        if self.kind == "relu":
            return np.where(x >= 0.0, 1.0, 0.0)
        t = np.tanh(x)
        return 1.0 - t * t

    @property
    def value_at_zero(self) -> float:
        return 0.0

    @property
    def deriv_at_zero(self) -> float:
        return 1.0

    @property
    def second_deriv_at_zero(self) -> float:
        # identity and tanh are odd; relu uses the local polynomial fit
        return 0.0

    @property
    def is_smooth(self) -> bool:
        return self.kind != "relu"


IDENTITY = Activation("identity")
RELU = Activation("relu")
TANH = Activation("tanh")


def activation(kind: str) -> Activation:
    return Activation(kind)


@dataclass(frozen=True)
class ActivationTriple:
    """Activations on a transformation path: before the first weight
    matrix, between consecutive matrices, and after the last one. The mid
    slot is only consulted on paths with two or more matrices."""

    pre: Activation
    mid: Activation
    post: Activation

    @classmethod
    def from_names(cls, names) -> "ActivationTriple":
        if isinstance(names, str):
            names = [s.strip() for s in names.split(",")]
        names = list(names)
        if len(names) != 3:
            raise ValueError(f"expected three activation names, got {names!r}")
        return cls(Activation(names[0]), Activation(names[1]), Activation(names[2]))

    @property
    def names(self) -> tuple[str, str, str]:
        return (self.pre.kind, self.mid.kind, self.post.kind)

    @property
    def all_identity(self) -> bool:
        return self.names == ("identity", "identity", "identity")

    @property
    def all_smooth(self) -> bool:
        return all(a.is_smooth for a in (self.pre, self.mid, self.post))


IDENTITY_TRIPLE = ActivationTriple(IDENTITY, IDENTITY, IDENTITY)
