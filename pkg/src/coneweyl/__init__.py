"""
coneweyl: eigenvalue counting for Robin Laplacians on conical domains.
"""

__version__ = "0.3.0"
