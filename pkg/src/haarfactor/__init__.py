"""Constructive factorization of operators on Haar system Hardy spaces."""
from .dyadic import DyadicInterval
from .spaces import HILBERT, HaarVector, MonteCarlo, SpaceSpec, hshs_norm
from .operators import FactorizationCertificate, HaarMultiplier, OperatorMatrix, random_operator
from .faithful import AlmostFaithfulSystem, associated_almost, associated_faithful, validate
from .diagonalize import DiagonalizationParams, choose_m, search
from .stabilize import StabilizationParams, factorize, stabilize
from .reduce_positive import factor_through_signed, ntilde_min, reduce
from .bounds import corollary_ntilde, nmin, nmin_unconditional

__all__ = [
    "DyadicInterval", "HILBERT", "HaarVector", "MonteCarlo", "SpaceSpec", "hshs_norm",
    "FactorizationCertificate", "HaarMultiplier", "OperatorMatrix", "random_operator",
    "AlmostFaithfulSystem", "associated_almost", "associated_faithful", "validate",
    "DiagonalizationParams", "choose_m", "search", "StabilizationParams", "factorize",
    "stabilize", "factor_through_signed", "ntilde_min", "reduce", "corollary_ntilde", "nmin",
    "nmin_unconditional",
]
