"""Federated models used inside preprocessing: k-Means, k-NN regression, Bayesian linear regression."""

from .blr import BLRHyper, BLRState, blr_predict, h_fed_blr_fit, v_fed_blr_fit
from .kmeans import KMeansState, h_fed_kmeans, h_fed_kmeans_batch
from .knn import h_fed_knn_predict, masked_distance, v_fed_knn_predict

__all__ = [
    "BLRHyper",
    "BLRState",
    "KMeansState",
    "blr_predict",
    "h_fed_blr_fit",
    "h_fed_kmeans",
    "h_fed_kmeans_batch",
    "h_fed_knn_predict",
    "masked_distance",
    "v_fed_blr_fit",
    "v_fed_knn_predict",
]
