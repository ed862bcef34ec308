"""Certified Julia set rendering with exact dyadic ball arithmetic.

The certified pipeline decides, per pixel, whether the pixel is provably
close to or provably far from the Julia set of a rational map, given a
certificate of non-uniform constants.  Uncertified escape-time and
distance-estimator renderers are included as baselines, along with exact
distance oracles and a conformance harness for the verdict contracts.
"""

from .dyadic import Ball, ComplexDyadic, CoefficientOracle, Dyadic, DyInterval
from .errors import (
    CertificateInvalid,
    CertJuliaError,
    DenominatorVanishes,
    InsufficientSamples,
    InvalidConstants,
    PointInsideCover,
    PrecisionExhausted,
    RootFindingFailure,
)

__version__ = "0.1.0"
