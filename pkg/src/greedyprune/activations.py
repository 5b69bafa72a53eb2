"""Pointwise activations used by all network types.

Each activation knows its own derivative so that analytic gradients and
finite-difference checks share one definition. ``smooth`` records whether
the derivative is Lipschitz; relu is available but flagged, because the
convergence guarantees downstream assume a smooth activation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

ACTIVATION_KINDS = ("tanh", "sigmoid", "relu")


@dataclass(frozen=True)
class Activation:
    """Elementwise activation selected by name.

    Parameters
    ----------
    kind : str
        One of ``"tanh"``, ``"sigmoid"``, ``"relu"``.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in ACTIVATION_KINDS:
            raise ValueError(
                f"unknown activation {self.kind!r}; expected one of {ACTIVATION_KINDS}"
            )

    @property
    def smooth(self) -> bool:
        """True when the derivative is Lipschitz (tanh, sigmoid)."""
        return self.kind != "relu"

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "tanh":
            return np.tanh(z)
        if self.kind == "sigmoid":
            return expit(z)
        return np.maximum(z, 0.0)

    def deriv(self, z):
        """Elementwise derivative; relu uses the subgradient 0 at z=0."""
        z = np.asarray(z, dtype=float)
        if self.kind == "tanh":
            t = np.tanh(z)
            return 1.0 - t * t
        if self.kind == "sigmoid":
            s = expit(z)
            return s * (1.0 - s)
        return (z > 0.0).astype(float)


TANH = Activation("tanh")
SIGMOID = Activation("sigmoid")
RELU = Activation("relu")


def get_activation(kind) -> Activation:
    if isinstance(kind, Activation):
        return kind
    return Activation(str(kind))
