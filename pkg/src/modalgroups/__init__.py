"""Workbench for modal group theory under the homomorphism semantics."""

import sys as _sys

# Translated and padded formulas are deeply right-nested trees; the default
# interpreter limit is too tight for their recursive walks.
if _sys.getrecursionlimit() < 30000:
    _sys.setrecursionlimit(30000)

__version__ = "0.1.0"
