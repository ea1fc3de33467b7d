"""Forecast a tennis player's centroid trajectory from past poses, centroids and ball positions."""

__version__ = "0.1.0"
