"""Blind fractional interference alignment: precoders, detectors, estimators and a BER harness."""

__version__ = "0.1.0"

from .constellation import Constellation, make_constellation, parse_constellation
from .precoder import ChannelKind, Scenario, build_precoders, check_alignment, max_spac

__all__ = [
    "__version__",
    "Constellation",
    "make_constellation",
    "parse_constellation",
    "ChannelKind",
    "Scenario",
    "build_precoders",
    "check_alignment",
    "max_spac",
]
