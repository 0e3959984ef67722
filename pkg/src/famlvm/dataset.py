"""Dataset container, validation and deterministic preprocessing.

A :class:`LongitudinalFamilyDataset` holds one row per (family, individual,
time) observation with a phenotype vector of length J (continuous columns
first, then binary) and four covariate blocks:

* ``W`` -- direct fixed-effect covariates acting on each phenotype,
* ``X`` -- indirect covariates acting on the latent severity variable
  (genotype columns are additively coded 0/1/2 minor-allele copies),
* ``Z`` -- family-level random-effect covariates,
* ``Q`` -- subject-level random-effect covariates.

Rows are kept sorted by (family, individual, time); all indexing downstream
relies on this canonical order. Instances are immutable after construction.
"""

from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .exceptions import AllMissingSeries, DimensionMismatch


def _freeze(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LongitudinalFamilyDataset:
    family: np.ndarray          # (n,) int family labels
    individual: np.ndarray      # (n,) int individual labels, unique within family
    time: np.ndarray            # (n,) int time point, 1..T
    y: np.ndarray               # (n, J) phenotype values, NaN where missing
    observed: np.ndarray        # (n, J) bool, False for missing/imputed cells
    binary: np.ndarray          # (J,) bool, True for binary phenotypes
    w: np.ndarray               # (n, p1)
    x: np.ndarray               # (n, p2)
    z: np.ndarray               # (n, q1)
    q: np.ndarray               # (n, q2)
    y_names: tuple = ()
    w_names: tuple = ()
    x_names: tuple = ()
    z_names: tuple = ()
    q_names: tuple = ()
    genotype_cols: tuple = ()   # names of X columns carrying 0/1/2 genotypes

    @classmethod
    def build(cls, family, individual, time, y, binary, w=None, x=None,
              z=None, q=None, observed=None, y_names=None, w_names=None,
              x_names=None, z_names=None, q_names=None, genotype_cols=()):
        """Construct a dataset, sorting rows into canonical order."""
        family = np.asarray(family, dtype=np.int64)
        individual = np.asarray(individual, dtype=np.int64)
        time = np.asarray(time, dtype=np.int64)
        y = np.asarray(y, dtype=float)
        if y.ndim != 2:
            raise DimensionMismatch("y must be 2-D (rows, phenotypes)")
        n, j = y.shape
        binary = np.asarray(binary, dtype=bool)
        if binary.shape != (j,):
            raise DimensionMismatch("binary flags must have length J")

        def block(arr, width_name):
            if arr is None:
                return np.zeros((n, 0))
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 1:
                arr = arr[:, None]
            if arr.shape[0] != n:
                raise DimensionMismatch(f"{width_name} rows != {n}")
            return arr

        w = block(w, "W")
        x = block(x, "X")
        z = block(z, "Z")
        q = block(q, "Q")
        if observed is None:
            observed = ~np.isnan(y)
        observed = np.asarray(observed, dtype=bool)
        if observed.shape != y.shape:
            raise DimensionMismatch("observed mask must match y")
        for name, arr in (("family", family), ("individual", individual),
                          ("time", time)):
            if arr.shape != (n,):
                raise DimensionMismatch(f"{name} must have length {n}")

        order = np.lexsort((time, individual, family))
        def names(given, prefix, width):
            if given is None:
                return tuple(f"{prefix}{k + 1}" for k in range(width))
            given = tuple(given)
            if len(given) != width:
                raise DimensionMismatch(f"{prefix} names length mismatch")
            return given

        return cls(
            family=_freeze(family[order]),
            individual=_freeze(individual[order]),
            time=_freeze(time[order]),
            y=_freeze(y[order]),
            observed=_freeze(observed[order]),
            binary=_freeze(binary),
            w=_freeze(w[order]),
            x=_freeze(x[order]),
            z=_freeze(z[order]),
            q=_freeze(q[order]),
            y_names=names(y_names, "y", j),
            w_names=names(w_names, "w", w.shape[1]),
            x_names=names(x_names, "x", x.shape[1]),
            z_names=names(z_names, "z", z.shape[1]),
            q_names=names(q_names, "q", q.shape[1]),
            genotype_cols=tuple(genotype_cols),
        )

    # --- dimensions -------------------------------------------------------
    @property
    def n_rows(self):
        return self.y.shape[0]

    @property
    def n_phenotypes(self):
        return self.y.shape[1]

    @property
    def n_continuous(self):
        return int(np.sum(~self.binary))

    @property
    def p1(self):
        return self.w.shape[1]

    @property
    def p2(self):
        return self.x.shape[1]

    @property
    def q1(self):
        return self.z.shape[1]

    @property
    def q2(self):
        return self.q.shape[1]

    def family_codes(self):
        """(codes, labels): zero-based family index per row."""
        labels, codes = np.unique(self.family, return_inverse=True)
        return codes, labels

    def individual_codes(self):
        """(codes, keys): zero-based global individual index per row."""
        keys = np.stack([self.family, self.individual], axis=1)
        _, idx, codes = np.unique(keys, axis=0, return_index=True,
                                  return_inverse=True)
        return codes, keys[np.sort(idx)]

    def n_families(self):
        return len(np.unique(self.family))

    def n_individuals(self):
        codes, _ = self.individual_codes()
        return int(codes.max()) + 1 if len(codes) else 0

    def times_per_individual(self):
        codes, _ = self.individual_codes()
        if len(codes) == 0:
            return np.zeros(0, dtype=int)
        return np.bincount(codes)


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok


def validate_dataset(d):
    """Check the identifiability restrictions; returns a report, never raises.

    Violations reported: overlapping W/X covariate names, a constant-1
    intercept column in X, binary cells outside {0, 1}, ragged time series,
    duplicated (family, individual, time) rows, and a continuous phenotype
    listed after a binary one.
    """
    rep = ValidationReport()
    overlap = set(d.w_names) & set(d.x_names)
    if overlap:
        rep.violations.append(f"W and X share covariates: {sorted(overlap)}")
    for k, name in enumerate(d.x_names):
        col = d.x[:, k]
        if len(col) and np.all(col == 1.0):
            rep.violations.append(f"intercept in X: column {name!r} is all ones")
    bin_cols = np.flatnonzero(d.binary)
    for j in bin_cols:
        col = d.y[:, j]
        obs = d.observed[:, j] & ~np.isnan(col)
        bad = obs & ~np.isin(col, (0.0, 1.0))
        if np.any(bad):
            rep.violations.append(
                f"binary range: phenotype {d.y_names[j]!r} has values outside "
                "{0,1}")
    if len(bin_cols) and np.any(~d.binary[bin_cols.min():]):
        rep.violations.append(
            "phenotype order: continuous phenotypes must precede binary ones")
    counts = d.times_per_individual()
    if len(counts) and counts.min() != counts.max():
        rep.violations.append(
            f"ragged T: time-point counts range {counts.min()}..{counts.max()}")
    keys = np.stack([d.family, d.individual, d.time], axis=1)
    if len(keys) != len(np.unique(keys, axis=0)):
        rep.violations.append("duplicate (family, individual, time) rows")
    return rep


def impute_missing(d):
    """Individual-mean imputation of missing phenotype cells.

    Continuous cells take the mean of the individual's observed values for
    that phenotype; binary cells take the rounded mean with ties going to 0.
    The observation mask keeps recording which cells were imputed.
    Raises AllMissingSeries if an individual has no observed value for some
    phenotype.
    """
    missing = ~d.observed | np.isnan(d.y)
    if not missing.any():
        return d
    codes, _ = d.individual_codes()
    n_ind = int(codes.max()) + 1
    y = np.array(d.y)
    observed = np.array(d.observed) & ~np.isnan(d.y)
    for j in range(d.n_phenotypes):
        col = y[:, j]
        obs = observed[:, j]
        miss = ~obs
        if not miss.any():
            continue
        sums = np.bincount(codes[obs], weights=col[obs], minlength=n_ind)
        counts = np.bincount(codes[obs], minlength=n_ind)
        if np.any(counts[np.unique(codes[miss])] == 0):
            raise AllMissingSeries(
                f"phenotype {d.y_names[j]!r}: an individual has no observed value")
        means = sums / np.maximum(counts, 1)
        fill = means[codes[miss]]
        if d.binary[j]:
            fill = (fill > 0.5).astype(float)  # tie (mean == 0.5) -> 0
        col[miss] = fill
    return replace(d, y=_freeze(y), observed=_freeze(observed))


def flatten_index(d):
    """One row per (family, individual, time, phenotype) cell, in canonical
    order (family asc, individual asc, time asc, phenotype asc), with the
    design covariates attached. The mapping is a bijection: the dataset can
    be reconstructed bit-exactly from the frame."""
    n, j = d.y.shape
    frame = {
        "family": np.repeat(d.family, j),
        "individual": np.repeat(d.individual, j),
        "time": np.repeat(d.time, j),
        "phenotype": np.tile(np.arange(1, j + 1), n),
        "value": d.y.ravel(),
        "observed": d.observed.ravel(),
    }
    for block, names in (("w", d.w_names), ("x", d.x_names),
                         ("z", d.z_names), ("q", d.q_names)):
        arr = getattr(d, block)
        for k, name in enumerate(names):
            frame[f"{block}:{name}"] = np.repeat(arr[:, k], j)
    return pd.DataFrame(frame)


def unflatten_index(frame, binary, **name_kwargs):
    """Inverse of :func:`flatten_index` (used by tests and round-trips)."""
    j = len(binary)
    if len(frame) % j:
        raise DimensionMismatch("cell count is not a multiple of J")
    head = frame.iloc[::j]
    y = frame["value"].to_numpy().reshape(-1, j)
    observed = frame["observed"].to_numpy().reshape(-1, j)

    def gather(prefix):
        cols = [c for c in frame.columns if c.startswith(prefix + ":")]
        if not cols:
            return None, None
        names = [c.split(":", 1)[1] for c in cols]
        return head[cols].to_numpy(), names

    w, w_names = gather("w")
    x, x_names = gather("x")
    z, z_names = gather("z")
    q, q_names = gather("q")
    return LongitudinalFamilyDataset.build(
        family=head["family"].to_numpy(),
        individual=head["individual"].to_numpy(),
        time=head["time"].to_numpy(),
        y=y, observed=observed, binary=binary,
        w=w, x=x, z=z, q=q,
        w_names=w_names, x_names=x_names, z_names=z_names, q_names=q_names,
        **name_kwargs)
