"""Chern-Weil characteristic forms, Pfaffians and zero-locus checks at desk scale."""

from .errors import DegenerateZeroError, DomainError, UnsupportedError, UsageError
from .exterior import Form, FormMatrix, block_diag, dx, wedge
from .invariants import (chern_forms, det_form, euler_form, pfaffian, pfaffian_oracle,
                         polarized_pfaffian, pontryagin_forms, realify_curvature)

__version__ = "0.1.0"

__all__ = [
    "Form", "FormMatrix", "block_diag", "dx", "wedge",
    "pfaffian", "pfaffian_oracle", "polarized_pfaffian", "det_form", "chern_forms",
    "euler_form", "pontryagin_forms", "realify_curvature",
    "UsageError", "DomainError", "DegenerateZeroError", "UnsupportedError",
]
