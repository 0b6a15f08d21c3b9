"""Toolkit for certifying that a quantum channel is not entanglement-breaking.

The trusted-preparation / untrusted-measurement scenario reduces to joint
measurability of the measurements induced on the channel input; this package
provides the induced-measurement machinery, joint-measurability and steering
SDPs, the incompatible/steerable weight monotones, monogamy-game bounds for
one-sided device-independent key distribution, and B92 device certification.
"""

__version__ = "0.1.0"

from . import channels, incompat, io, qkd, qmat, sdp, steering  # noqa: F401
