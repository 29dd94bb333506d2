"""Explainable shear-strength regression for municipal solid waste.

Trains per-target MLP regressors on waste composition features, evaluates
them with MAE/MAPE/R2 under cross-validation, and attributes predictions to
features with exact Shapley values or the kernel approximation. Served
through a CLI, a JSON inference API, and a what-if web UI.
"""

__version__ = "0.1.0"
