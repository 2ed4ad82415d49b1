"""Semantic textual similarity features tuned with an artificial bee colony.

Traditional similarity algorithms (character, term, vector-space and
taxonomy based, plus an embedding-service client) produce a feature matrix;
a bee-colony search picks features, their parameter configurations and
regression hyperparameters jointly against stratified cross-validation.
"""

from .abcopt import AbcConfig, BeeColonyRegressor, SearchSpace, bee_colony, optimize
from .corpus import Dataset, Sentence, SentencePair, load_dataset
from .evaluation import finalize, pearson, render_report, stratified_kfold, stratified_split
from .features import FeatureBank, SimilarityFeaturizer, build_bank, default_registry
from .models import (DecisionTreeRegressor, GradientBoostingRegressor, LinearRegression,
                     RandomForestRegressor, RidgeRegression, make_model)

__version__ = "0.1.0"

__all__ = [
    "AbcConfig", "BeeColonyRegressor", "Dataset", "DecisionTreeRegressor", "FeatureBank",
    "GradientBoostingRegressor", "LinearRegression", "RandomForestRegressor",
    "RidgeRegression", "SearchSpace", "Sentence", "SentencePair", "SimilarityFeaturizer",
    "bee_colony", "build_bank", "default_registry", "finalize", "load_dataset", "make_model",
    "optimize", "pearson", "render_report", "stratified_kfold", "stratified_split",
]
