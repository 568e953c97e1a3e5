"""Proportional covariance matrices: estimation, asymptotics and testing."""
from .kernels import BACKEND

__version__ = "0.1.0"
