"""Sub-vector and sub-matrix selectors for triangular and covariance matrices.

Indices are 1-based, matching the usual matrix notation, because these helpers
exist to make the block formulas in :mod:`propcov.asymptotics` line up with
their written form.  ``p`` is always the matrix order.

=====================  ============================================
``col_head(M, i, j)``  ``(m_1i, ..., m_ji)``
``col_tail(M, i, j)``  ``(m_{j+1,i}, ..., m_pi)``  (empty if j = p)
``row_tail(M, i, j)``  ``(m_{i,j+1}, ..., m_ip)``
``leading(M, i)``      leading principal submatrix of order i
``trailing(M, i)``     M with its first i rows and columns deleted
``corner(M, i, j)``    lower right block starting at ``m_ij``
``unit(p, i)``         i-th unit vector of length p
``selector(p, i)``     (p-i) x p matrix ``[0 | I_{p-i}]``
=====================  ============================================
"""
import numpy as np


def col_head(M, i, j):
    return M[:j, i - 1]


def col_tail(M, i, j):
    return M[j:, i - 1]


def row_tail(M, i, j):
    return M[i - 1, j:]


def leading(M, i):
    return M[:i, :i]


def trailing(M, i):
    return M[i:, i:]


def corner(M, i, j):
    return M[i - 1:, j - 1:]


def unit(p, i):
    e = np.zeros(p)
    e[i - 1] = 1.0
    return e


def selector(p, i):
    return np.eye(p)[i:, :]
