"""Datasets, CSV input/output, and synthetic data generators.

All randomness flows through ``numpy.random.default_rng`` (the PCG64
generator), so a fixed seed reproduces the same data on every platform.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_points

__all__ = ["Dataset", "load_csv", "write_csv", "gen_toy", "gen_spatial",
           "DEFAULT_SURFACES"]


@dataclass
class Dataset:
    """Point rows plus optional response, named covariate columns and row ids."""

    pts: np.ndarray
    y: np.ndarray = None
    covariates: dict = field(default_factory=dict)
    ids: list = None

    def __post_init__(self):
        self.pts = check_points(self.pts, "pts")
        n = self.pts.shape[0]
        if self.y is not None:
            self.y = np.asarray(self.y, dtype=float)
            if self.y.shape != (n,):
                raise ValueError(f"y has shape {self.y.shape}, expected ({n},)")
        for name, column in self.covariates.items():
            column = np.asarray(column, dtype=float)
            if column.shape != (n,):
                raise ValueError(f"covariate {name!r} has length {column.shape}, expected {n}")
            self.covariates[name] = column
        if self.ids is not None and len(self.ids) != n:
            raise ValueError(f"ids has length {len(self.ids)}, expected {n}")

    @property
    def n(self):
        return self.pts.shape[0]

    @property
    def p(self):
        return self.pts.shape[1]

    def rows(self, covariate_names=()):
        """Point rows with the named covariate columns appended, in order."""
        cols = [self.pts]
        for name in covariate_names:
            if name not in self.covariates:
                raise ValueError(f"unknown covariate column {name!r}")
            cols.append(self.covariates[name][:, None])
        return np.hstack(cols)


def _parse_cell(value, line_no, column):
    try:
        parsed = float(value)
    except ValueError:
        raise ValueError(
            f"line {line_no}, column {column!r}: cannot parse {value!r} as a number"
        ) from None
    if not np.isfinite(parsed):
        raise ValueError(
            f"line {line_no}, column {column!r}: missing or non-finite value {value!r}"
        )
    return parsed


def load_csv(path, coords=None, response=None, covariates=(), id_column=None):
    """Load a :class:`Dataset` from a headered CSV file.

    ``coords`` names the coordinate columns; None autodetects the maximal run
    x1, x2, ... present in the header.  ``response``, ``covariates`` and
    ``id_column`` name further columns to extract.  Every referenced cell
    must parse as a finite number; violations raise with the file line number
    and column name.
    """
    with open(path, newline="") as handle:
        raw = list(csv.reader(handle))
    if not raw:
        raise ValueError(f"{path}: empty file, expected a header row")
    header = [name.strip() for name in raw[0]]
    if len(set(header)) != len(header):
        raise ValueError(f"{path}: duplicate column names in header")
    if coords is None:
        coords = []
        j = 1
        while f"x{j}" in header:
            coords.append(f"x{j}")
            j += 1
        if not coords:
            raise ValueError(f"{path}: no coordinate columns found (expected x1, x2, ...)")
    coords = list(coords)
    wanted = coords + ([response] if response else []) + list(covariates)
    missing = [name for name in wanted if name not in header]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}; header is {header}")
    if id_column is not None and id_column not in header:
        raise ValueError(f"{path}: missing id column {id_column!r}")
    position = {name: header.index(name) for name in header}

    records = raw[1:]
    if not records:
        raise ValueError(f"{path}: no data rows")
    n_fields = len(header)
    pts = np.empty((len(records), len(coords)))
    y = np.empty(len(records)) if response else None
    cov_arrays = {name: np.empty(len(records)) for name in covariates}
    ids = [] if id_column is not None else None
    for i, record in enumerate(records):
        line_no = i + 2
        if len(record) != n_fields:
            raise ValueError(
                f"{path}: line {line_no} has {len(record)} fields, expected {n_fields}"
            )
        for j, name in enumerate(coords):
            pts[i, j] = _parse_cell(record[position[name]], line_no, name)
        if response:
            y[i] = _parse_cell(record[position[response]], line_no, response)
        for name in covariates:
            cov_arrays[name][i] = _parse_cell(record[position[name]], line_no, name)
        if ids is not None:
            ids.append(record[position[id_column]])
    return Dataset(pts=pts, y=y, covariates=cov_arrays, ids=ids)


def write_csv(dataset, path, coords=None, response="y", id_column=None):
    """Write a :class:`Dataset` to CSV; floats keep full round-trip precision.

    Column order: id (if any), coordinates, covariates, response (if any).
    ``coords`` defaults to x1..xp.
    """
    if coords is None:
        coords = [f"x{j + 1}" for j in range(dataset.p)]
    if len(coords) != dataset.p:
        raise ValueError(f"need {dataset.p} coordinate names, got {len(coords)}")
    header = []
    if dataset.ids is not None:
        header.append(id_column or "id")
    header += list(coords) + list(dataset.covariates)
    if dataset.y is not None:
        header.append(response)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for i in range(dataset.n):
            record = []
            if dataset.ids is not None:
                record.append(dataset.ids[i])
            record += [repr(float(v)) for v in dataset.pts[i]]
            record += [repr(float(dataset.covariates[name][i])) for name in dataset.covariates]
            if dataset.y is not None:
                record.append(repr(float(dataset.y[i])))
            writer.writerow(record)


def gen_toy(n, p, seed):
    """Uniform covariates on [0,1]^p with y = 2 sin(2 pi x1) plus sd-0.1 noise."""
    n = int(n)
    p = int(p)
    if n < 1 or p < 1:
        raise ValueError("n and p must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, p))
    y = 2.0 * np.sin(2.0 * np.pi * X[:, 0]) + 0.1 * rng.standard_normal(n)
    return Dataset(pts=X, y=y)


def _surface_saddle(t):
    return np.sin(np.pi * t[:, 0]) * np.cos(np.pi * t[:, 1])


def _surface_tilt(t):
    return 0.5 + t[:, 0] - t[:, 1]


def _surface_wave(t):
    return np.cos(np.pi * (t[:, 0] + t[:, 1]))


def _surface_bump(t):
    return np.exp(-8.0 * ((t[:, 0] - 0.5) ** 2 + (t[:, 1] - 0.5) ** 2)) - 0.5


DEFAULT_SURFACES = (_surface_saddle, _surface_tilt, _surface_wave, _surface_bump)


def gen_spatial(n, seed, n_covariates=2, noise_sd=0.1, surfaces=None):
    """Spatially varying-coefficient data on the unit square.

    Locations are uniform on [0,1]^2, covariates z1..zJ are iid standard
    normal, and the response sums the intercept surface with the
    covariate-weighted coefficient surfaces plus Gaussian noise:

        y_i = w_0(t_i) + sum_j x_ji * w_j(t_i) + noise

    ``surfaces`` supplies the J+1 coefficient surfaces as callables mapping
    an (n, 2) location array to n values; defaults come from
    ``DEFAULT_SURFACES``.  Returns ``(dataset, coeffs)`` where column j of
    ``coeffs`` holds the true surface values w_j at the sampled locations.
    """
    n = int(n)
    n_covariates = int(n_covariates)
    if n < 1:
        raise ValueError("n must be >= 1")
    if n_covariates < 0:
        raise ValueError("n_covariates must be >= 0")
    if surfaces is None:
        if n_covariates + 1 > len(DEFAULT_SURFACES):
            raise ValueError(
                f"only {len(DEFAULT_SURFACES)} default surfaces; pass your own"
            )
        surfaces = DEFAULT_SURFACES[: n_covariates + 1]
    if len(surfaces) != n_covariates + 1:
        raise ValueError(f"need {n_covariates + 1} surfaces, got {len(surfaces)}")
    noise_sd = float(noise_sd)
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    rng = np.random.default_rng(seed)
    T = rng.uniform(size=(n, 2))
    design = rng.standard_normal((n, n_covariates))
    coeffs = np.column_stack([surface(T) for surface in surfaces])
    signal = coeffs[:, 0].copy()
    for j in range(n_covariates):
        signal += design[:, j] * coeffs[:, j + 1]
    y = signal if noise_sd == 0 else signal + noise_sd * rng.standard_normal(n)
    covariates = {f"z{j + 1}": design[:, j] for j in range(n_covariates)}
    return Dataset(pts=T, y=y, covariates=covariates), coeffs
