"""Reciprocity products of Lipschitz constants for position and momentum densities.

The Lipschitz constant of a probability density (sup |f'|) measures how sharply
it varies.  For a pure state psi this package computes eta_x for |psi(x)|^2,
eta_p for |phi(p)|^2 and the product sqrt(eta_x eta_p) (hbar = 1).
"""

from .states import SHO, CauchyLorentz, HermiteSuperposition, StudentT
from .lipschitz import LipschitzEstimate, PuncturedDomain, lipschitz_constant, lipschitz_on_punctured
from .reciprocity import ReciprocityResult, reciprocity_product, uncertainty_product
from .haar import SearchConfig, SearchResult, minimize_reciprocity, minimize_uncertainty

__version__ = "0.1.0"

__all__ = [
    "SHO", "CauchyLorentz", "HermiteSuperposition", "StudentT",
    "LipschitzEstimate", "PuncturedDomain", "lipschitz_constant", "lipschitz_on_punctured",
    "ReciprocityResult", "reciprocity_product", "uncertainty_product",
    "SearchConfig", "SearchResult", "minimize_reciprocity", "minimize_uncertainty",
]
