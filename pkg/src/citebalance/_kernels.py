"""Hot resampling kernels with a numba path and a pure-numpy path.

Set ``CITEBALANCE_DISABLE_NUMBA=1`` to force the numpy implementations, e.g.
when numba is not installed or for debugging. Both paths return identical
results for identical inputs; ``tests/test_kernels.py`` checks this.
"""

from __future__ import annotations

import os
import types

import numpy as np

ENV_DISABLE = "CITEBALANCE_DISABLE_NUMBA"


# -- numpy reference implementations ----------------------------------------

def _np_draw_categories(cum_probs, u):
    # cum_probs: (n, 4) running sums; last column is ~1
    return (u[:, None] >= cum_probs[:, :3]).sum(axis=1).astype(np.int64)


def _np_row_category_counts(edge_row, edge_cat, n_rows):
    flat = np.bincount(edge_row * 4 + edge_cat, minlength=n_rows * 4)
    return flat.reshape(n_rows, 4).astype(np.float64)


def _np_row_prob_sums(edge_row, edge_probs, n_rows):
    out = np.zeros((n_rows, 4))
    for k in range(4):
        out[:, k] = np.bincount(edge_row, weights=edge_probs[:, k], minlength=n_rows)
    return out


def _np_null_row_counts(cum_probs, u, edge_row, edge_cited, n_rows):
    cats = _np_draw_categories(cum_probs, u)
    return _np_row_category_counts(edge_row, cats[edge_cited], n_rows)


def _np_group_totals(values, idx, row_group, n_groups):
    # values: (n_rows, k); idx: resampled row indices; -> (n_groups, k)
    groups = row_group[idx]
    k = values.shape[1]
    out = np.zeros((n_groups, k))
    picked = values[idx]
    for j in range(k):
        out[:, j] = np.bincount(groups, weights=picked[:, j], minlength=n_groups)
    return out


def _np_check_loss(resid, weights, tau):
    return float(np.sum(weights * resid * (tau - (resid < 0))))


numpy_impl = types.SimpleNamespace(
    draw_categories=_np_draw_categories,
    row_category_counts=_np_row_category_counts,
    row_prob_sums=_np_row_prob_sums,
    null_row_counts=_np_null_row_counts,
    group_totals=_np_group_totals,
    check_loss=_np_check_loss,
    name="numpy",
)


# -- numba implementations ---------------------------------------------------

def _build_numba():
    from numba import njit

    @njit(cache=True, nogil=True)
    def draw_categories(cum_probs, u):
        n = u.shape[0]
        out = np.empty(n, dtype=np.int64)
        for i in range(n):
            c = 0
            while c < 3 and u[i] >= cum_probs[i, c]:
                c += 1
            out[i] = c
        return out

    @njit(cache=True, nogil=True)
    def row_category_counts(edge_row, edge_cat, n_rows):
        out = np.zeros((n_rows, 4))
        for e in range(edge_row.shape[0]):
            out[edge_row[e], edge_cat[e]] += 1.0
        return out

    @njit(cache=True, nogil=True)
    def row_prob_sums(edge_row, edge_probs, n_rows):
        out = np.zeros((n_rows, 4))
        for e in range(edge_row.shape[0]):
            r = edge_row[e]
            for k in range(4):
                out[r, k] += edge_probs[e, k]
        return out

    @njit(cache=True, nogil=True)
    def null_row_counts(cum_probs, u, edge_row, edge_cited, n_rows):
        cats = draw_categories(cum_probs, u)
        out = np.zeros((n_rows, 4))
        for e in range(edge_row.shape[0]):
            out[edge_row[e], cats[edge_cited[e]]] += 1.0
        return out

    @njit(cache=True, nogil=True)
    def group_totals(values, idx, row_group, n_groups):
        k = values.shape[1]
        out = np.zeros((n_groups, k))
        for t in range(idx.shape[0]):
            r = idx[t]
            g = row_group[r]
            for j in range(k):
                out[g, j] += values[r, j]
        return out

    @njit(cache=True, nogil=True)
    def check_loss(resid, weights, tau):
        total = 0.0
        for i in range(resid.shape[0]):
            r = resid[i]
            if r < 0:
                total += weights[i] * r * (tau - 1.0)
            else:
                total += weights[i] * r * tau
        return total

    return types.SimpleNamespace(
        draw_categories=draw_categories,
        row_category_counts=row_category_counts,
        row_prob_sums=row_prob_sums,
        null_row_counts=null_row_counts,
        group_totals=group_totals,
        check_loss=check_loss,
        name="numba",
    )


def _numba_wanted() -> bool:
    return os.environ.get(ENV_DISABLE, "").strip().lower() in ("", "0", "false", "no")


try:
    numba_impl = _build_numba()
except ImportError:
    numba_impl = None

backend = numba_impl if (numba_impl is not None and _numba_wanted()) else numpy_impl
BACKEND = backend.name


def _as_int(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def _as_float(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def draw_categories(cum_probs, u):
    return backend.draw_categories(_as_float(cum_probs), _as_float(u))


def row_category_counts(edge_row, edge_cat, n_rows):
    return backend.row_category_counts(_as_int(edge_row), _as_int(edge_cat), int(n_rows))


def row_prob_sums(edge_row, edge_probs, n_rows):
    return backend.row_prob_sums(_as_int(edge_row), _as_float(edge_probs), int(n_rows))


def null_row_counts(cum_probs, u, edge_row, edge_cited, n_rows):
    return backend.null_row_counts(_as_float(cum_probs), _as_float(u), _as_int(edge_row),
                                   _as_int(edge_cited), int(n_rows))


def group_totals(values, idx, row_group, n_groups):
    return backend.group_totals(_as_float(values), _as_int(idx), _as_int(row_group), int(n_groups))


def check_loss(resid, weights, tau):
    return float(backend.check_loss(_as_float(resid), _as_float(weights), float(tau)))
