"""Imbalanced tabular risk modelling: preprocessing, oversampling, from-scratch
tree ensembles and linear models, grid search, rank-weighted soft voting and
local surrogate explanations."""

__version__ = "0.1.0"
