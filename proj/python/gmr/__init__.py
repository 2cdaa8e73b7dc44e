"""Grouped mixture of regressions."""

from ._core import GmrError, Model, beta_error, fit, nmi, rmse, select_k, simulate

__all__ = ["GmrError", "Model", "beta_error", "fit", "nmi", "rmse", "select_k", "simulate"]
