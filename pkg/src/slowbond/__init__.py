"""Exclusion process with a slow bond: simulator, semigroups and estimators."""

__version__ = "0.1.0"
