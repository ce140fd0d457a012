"""Posterior draws: the log-likelihood matrix and per-draw log densities.

A :class:`DrawsBundle` is the single input every other module works from.
It holds, for ``S`` draws ``theta_s`` and ``n`` observations,

* ``log_lik[s, i] = log p(y_i | theta_s)``
* ``log_p[s]``: unnormalized log posterior density at ``theta_s``
* ``log_q[s]``: log density of the distribution the draws came from

When the draws are exact posterior draws ``log_q`` equals ``log_p`` up to a
constant. Only differences ``log_p - log_q`` are ever used, inside
self-normalized estimators, so neither needs to be normalized.

Two file formats are supported:

CSV
    header ``log_p,log_q,loglik_0,...,loglik_{n-1}``, one row per draw.
NDJSON
    one object per line, ``{"log_p": f, "log_q": f, "log_lik": [f, ...]}``.

In both, a missing ``log_q`` means ``log_q = log_p``.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.special import logsumexp

from .exceptions import MalformedInputError, ValidationError

__all__ = [
    "DrawsBundle",
    "load_draws",
    "save_draws",
    "full_data_lpd",
    "full_data_lpd_all",
]

DrawsFormat = Literal["csv", "ndjson"]

# columns processed per block in the vectorized all-observation paths
_BLOCK_ELEMENTS = 1 << 22


def _first_nonfinite(arr):
    bad = np.argwhere(~np.isfinite(arr))
    return None if bad.size == 0 else tuple(int(j) for j in bad[0])


@dataclass(frozen=True, eq=False)
class DrawsBundle:
    """Validated, read-only container of posterior draws.

    Parameters
    ----------
    log_lik : array_like, shape (S, n)
        Pointwise log-likelihood, one row per draw. Stored Fortran-ordered
        so that ``log_lik[:, i]`` is contiguous.
    log_p : array_like, shape (S,)
        Unnormalized log posterior density of each draw.
    log_q : array_like, shape (S,), optional
        Log density of the proposal the draws came from. Defaults to
        ``log_p`` (exact posterior draws).
    """

    log_lik: np.ndarray
    log_p: np.ndarray
    log_q: np.ndarray = field(default=None)

    def __post_init__(self):
        log_lik = np.asarray(self.log_lik, dtype=np.float64)
        if log_lik.ndim != 2:
            raise ValidationError(f"log_lik must be 2-D (draws x observations), got shape {log_lik.shape}")
        n_draws, n_obs = log_lik.shape
        if n_draws < 1 or n_obs < 1:
            raise ValidationError(f"log_lik needs at least one draw and one observation, got shape {log_lik.shape}")
        log_p = np.array(self.log_p, dtype=np.float64).reshape(-1)
        log_q = log_p.copy() if self.log_q is None else np.array(self.log_q, dtype=np.float64).reshape(-1)
        for name, vec in (("log_p", log_p), ("log_q", log_q)):
            if vec.shape != (n_draws,):
                raise ValidationError(f"{name} has length {vec.size}, expected {n_draws} (one per draw)")
            bad = _first_nonfinite(vec)
            if bad is not None:
                raise ValidationError(f"{name}[{bad[0]}] is not finite ({vec[bad]})")
        bad = _first_nonfinite(log_lik)
        if bad is not None:
            raise ValidationError(f"log_lik[{bad[0]}, {bad[1]}] is not finite ({log_lik[bad]})")

        log_lik = np.asfortranarray(log_lik)
        if log_lik is self.log_lik:
            log_lik = log_lik.view()
        for arr in (log_lik, log_p, log_q):
            arr.flags.writeable = False
        object.__setattr__(self, "log_lik", log_lik)
        object.__setattr__(self, "log_p", log_p)
        object.__setattr__(self, "log_q", log_q)

    @property
    def n_draws(self) -> int:
        return self.log_lik.shape[0]

    @property
    def n_obs(self) -> int:
        return self.log_lik.shape[1]

    @property
    def log_ratio(self) -> np.ndarray:
        """``log_p - log_q``, the approximation-correction log weights."""
        return self.log_p - self.log_q

    def check_obs(self, i) -> int:
        """Return ``i`` as an int, raising ``IndexError`` if out of range."""
        idx = int(i)
        if not 0 <= idx < self.n_obs:
            raise IndexError(f"observation {i} out of range for n_obs={self.n_obs}")
        return idx

    def __eq__(self, other):
        if not isinstance(other, DrawsBundle):
            return NotImplemented
        return (
            np.array_equal(self.log_lik, other.log_lik)
            and np.array_equal(self.log_p, other.log_p)
            and np.array_equal(self.log_q, other.log_q)
        )

    __hash__ = None


def full_data_lpd(bundle: DrawsBundle, i) -> float:
    """Full-data log predictive density ``log p(y_i | y)`` for one observation.

    Self-normalized importance sampling estimate with weights
    ``exp(log_p - log_q)``; with exact posterior draws this is the plain
    Monte Carlo average of ``p(y_i | theta_s)``. Evaluated in log space.
    """
    i = bundle.check_obs(i)
    lw = bundle.log_ratio
    return float(logsumexp(lw + bundle.log_lik[:, i]) - logsumexp(lw))


def full_data_lpd_all(bundle: DrawsBundle) -> np.ndarray:
    """Vector of :func:`full_data_lpd` over all observations."""
    lw = bundle.log_ratio
    norm = logsumexp(lw)
    out = np.empty(bundle.n_obs)
    step = max(1, _BLOCK_ELEMENTS // bundle.n_draws)
    for start in range(0, bundle.n_obs, step):
        block = bundle.log_lik[:, start : start + step]
        out[start : start + step] = logsumexp(block + lw[:, None], axis=0) - norm
    return out


# -- file I/O -----------------------------------------------------------------


def _infer_format(path) -> str:
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".csv":
        return "csv"
    if ext in (".ndjson", ".jsonl"):
        return "ndjson"
    raise MalformedInputError(f"cannot infer draws format from extension {ext!r}; pass format='csv' or 'ndjson'")


def _check_finite_cells(log_lik, name_cell):
    bad = _first_nonfinite(log_lik)
    if bad is not None:
        raise ValidationError(f"non-finite log-likelihood {log_lik[bad]} at {name_cell(*bad)}")


def _read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise MalformedInputError(f"{path}: empty file, expected a header row")
        header = [h.strip() for h in header]
        if not header or header[0] != "log_p":
            raise MalformedInputError(f"{path}: header must start with 'log_p', got {header[:1]}")
        has_q = len(header) > 1 and header[1] == "log_q"
        first_ll = 2 if has_q else 1
        for j, name in enumerate(header[first_ll:]):
            if name != f"loglik_{j}":
                raise MalformedInputError(
                    f"{path}: header column {first_ll + j + 1} is {name!r}, expected 'loglik_{j}'"
                )
        if len(header) == first_ll:
            raise MalformedInputError(f"{path}: header has no loglik_ columns")

        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(
                    f"{path}: row {lineno} has {len(row)} fields, header has {len(header)}"
                )
            try:
                rows.append(np.array(row, dtype=np.float64))
            except ValueError:
                for col, cell in zip(header, row):
                    try:
                        float(cell)
                    except ValueError:
                        raise MalformedInputError(
                            f"{path}: row {lineno}, column {col!r}: cannot parse {cell!r} as a number"
                        ) from None
                raise
    if not rows:
        raise MalformedInputError(f"{path}: no draw rows after the header")
    data = np.vstack(rows)
    log_lik = data[:, first_ll:]
    # file row = draw index + 2 (1-based, after the header)
    _check_finite_cells(log_lik, lambda s, i: f"row {s + 2}, column {header[first_ll + i]!r}")
    return log_lik, data[:, 0], (data[:, 1] if has_q else None)


def _read_ndjson(path):
    log_p, log_q, log_lik = [], [], []
    n_obs = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as err:
                raise MalformedInputError(f"{path}: line {lineno}: invalid JSON ({err.msg})") from None
            if not isinstance(rec, dict) or "log_p" not in rec or "log_lik" not in rec:
                raise MalformedInputError(f"{path}: line {lineno}: expected object with 'log_p' and 'log_lik'")
            try:
                row = np.array(rec["log_lik"], dtype=np.float64)
                lp = float(rec["log_p"])
                lq = float(rec["log_q"]) if rec.get("log_q") is not None else lp
            except (TypeError, ValueError):
                raise MalformedInputError(f"{path}: line {lineno}: non-numeric field") from None
            if row.ndim != 1 or row.size == 0:
                raise MalformedInputError(f"{path}: line {lineno}: 'log_lik' must be a non-empty flat list")
            if n_obs is None:
                n_obs = row.size
            elif row.size != n_obs:
                raise ValidationError(
                    f"{path}: line {lineno}: log_lik has {row.size} entries, earlier lines have {n_obs}"
                )
            log_p.append(lp)
            log_q.append(lq)
            log_lik.append(row)
    if not log_lik:
        raise MalformedInputError(f"{path}: no draw records")
    log_lik = np.vstack(log_lik)
    _check_finite_cells(log_lik, lambda s, i: f"draw {s} (record {s + 1}), log_lik[{i}]")
    return log_lik, np.array(log_p), np.array(log_q)


def load_draws(path, format: DrawsFormat | None = None) -> DrawsBundle:
    """Read a draws file into a validated :class:`DrawsBundle`.

    Parameters
    ----------
    path : path-like
    format : {"csv", "ndjson"}, optional
        Inferred from the file extension when omitted.

    Raises
    ------
    MalformedInputError
        Unparseable content; the message names the row and column.
    ValidationError
        NaN or infinite values, or rows of inconsistent length.
    """
    fmt = format or _infer_format(path)
    if fmt == "csv":
        log_lik, log_p, log_q = _read_csv(path)
    elif fmt == "ndjson":
        log_lik, log_p, log_q = _read_ndjson(path)
    else:
        raise MalformedInputError(f"unknown draws format {fmt!r}")
    return DrawsBundle(log_lik=log_lik, log_p=log_p, log_q=log_q)


def save_draws(bundle: DrawsBundle, path, format: DrawsFormat | None = None) -> None:
    """Write ``bundle`` losslessly (shortest round-trip float repr)."""
    fmt = format or _infer_format(path)
    ll = bundle.log_lik
    if fmt == "csv":
        header = ["log_p", "log_q"] + [f"loglik_{i}" for i in range(bundle.n_obs)]
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for s in range(bundle.n_draws):
                vals = [bundle.log_p[s], bundle.log_q[s], *ll[s].tolist()]
                fh.write(",".join(map(repr, map(float, vals))) + "\n")
    elif fmt == "ndjson":
        with open(path, "w") as fh:
            for s in range(bundle.n_draws):
                rec = {"log_p": float(bundle.log_p[s]), "log_q": float(bundle.log_q[s]), "log_lik": ll[s].tolist()}
                fh.write(json.dumps(rec) + "\n")
    else:
        raise MalformedInputError(f"unknown draws format {fmt!r}")
