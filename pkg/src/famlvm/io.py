"""File formats: dataset CSV, posterior-draw CSV, JSON sidecars, config
files and run manifests.

All writes are atomic (temp file in the destination directory, then rename),
floats are formatted with %.17g so a write/read cycle is bit-exact, and
missing phenotype cells are written as ``NA``.

Dataset CSV schema (one row per (family, individual, time)):

    family_id, individual_id, time,
    y:<name>:cont | y:<name>:bin,     one column per phenotype
    w:<name>, x:<name>[:geno], z:<name>, q:<name>

Config files use INI sections with key=value pairs; any value can be
overridden by an environment variable ``FAMLVM_<SECTION>_<KEY>``.
"""

import configparser
import hashlib
import json
import os
import tempfile
from datetime import datetime, timezone

import numpy as np
import pandas as pd

from .dataset import LongitudinalFamilyDataset
from .exceptions import ConfigError, IoFailure
from .params import ParameterSet

_FMT = "%.17g"
ENV_PREFIX = "FAMLVM"


def atomic_write_text(path, text):
    """Write text to ``path`` via a same-directory temp file and rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path)) or "."
    try:
        fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-",
                                   suffix=os.path.basename(path))
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _fmt(x):
    return _FMT % x


# ---------------------------------------------------------------------------
# dataset CSV
# ---------------------------------------------------------------------------

def write_dataset_csv(d, path):
    """Serialize a dataset to the documented CSV schema."""
    cols = {"family_id": d.family, "individual_id": d.individual,
            "time": d.time}
    for j, name in enumerate(d.y_names):
        kind = "bin" if d.binary[j] else "cont"
        col = np.where(d.observed[:, j] & ~np.isnan(d.y[:, j]),
                       d.y[:, j], np.nan)
        cols[f"y:{name}:{kind}"] = col
    for block, names in (("w", d.w_names), ("x", d.x_names),
                         ("z", d.z_names), ("q", d.q_names)):
        arr = getattr(d, block)
        for k, name in enumerate(names):
            label = f"{block}:{name}"
            if block == "x" and name in d.genotype_cols:
                label += ":geno"
            cols[label] = arr[:, k]
    frame = pd.DataFrame(cols)
    text = frame.to_csv(index=False, na_rep="NA", float_format=_FMT)
    atomic_write_text(path, text)


def read_dataset_csv(path):
    """Parse a dataset CSV back into a LongitudinalFamilyDataset."""
    try:
        frame = pd.read_csv(path, na_values=["NA"], keep_default_na=False,
                            float_precision="round_trip")
    except (OSError, pd.errors.ParserError) as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    for col in ("family_id", "individual_id", "time"):
        if col not in frame.columns:
            raise IoFailure(f"{path}: missing required column {col!r}")
    y_cols, blocks = [], {"w": [], "x": [], "z": [], "q": []}
    geno = []
    for col in frame.columns:
        parts = col.split(":")
        if parts[0] == "y":
            if len(parts) != 3 or parts[2] not in ("cont", "bin"):
                raise IoFailure(f"{path}: bad phenotype column {col!r}")
            y_cols.append((parts[1], parts[2] == "bin", col))
        elif parts[0] in blocks:
            if len(parts) == 3 and parts[0] == "x" and parts[2] == "geno":
                geno.append(parts[1])
            elif len(parts) != 2:
                raise IoFailure(f"{path}: bad covariate column {col!r}")
            blocks[parts[0]].append((parts[1], col))
    if not y_cols:
        raise IoFailure(f"{path}: no phenotype columns")
    y = frame[[c for _, _, c in y_cols]].to_numpy(dtype=float)

    def block(key):
        pairs = blocks[key]
        if not pairs:
            return None, None
        return (frame[[c for _, c in pairs]].to_numpy(dtype=float),
                tuple(n for n, _ in pairs))

    w, w_names = block("w")
    x, x_names = block("x")
    z, z_names = block("z")
    q, q_names = block("q")
    return LongitudinalFamilyDataset.build(
        family=frame["family_id"].to_numpy(dtype=np.int64),
        individual=frame["individual_id"].to_numpy(dtype=np.int64),
        time=frame["time"].to_numpy(dtype=np.int64),
        y=y, binary=np.array([b for _, b, _ in y_cols]),
        w=w, x=x, z=z, q=q,
        y_names=tuple(n for n, _, _ in y_cols),
        w_names=w_names, x_names=x_names, z_names=z_names, q_names=q_names,
        genotype_cols=tuple(geno))


# ---------------------------------------------------------------------------
# posterior draws and results
# ---------------------------------------------------------------------------

def write_draws_csv(chain, path):
    """Retained draws as CSV, one column per recorded quantity."""
    frame = pd.DataFrame(chain.draws, columns=chain.names)
    atomic_write_text(path, frame.to_csv(index=False, float_format=_FMT))


def read_draws_csv(path):
    """Read a draws CSV; returns (names, draws)."""
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError) as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return list(frame.columns), frame.to_numpy(dtype=float)


def write_truth_json(truth, path):
    """Generating parameter values as a JSON sidecar."""
    atomic_write_text(path, json.dumps(truth.to_dict(), indent=2) + "\n")


def read_truth_json(path):
    try:
        with open(path) as fh:
            return ParameterSet.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise IoFailure(f"cannot read truth sidecar {path}: {exc}") from exc


def write_bf_json(result, path):
    """Bayes-factor result (summary plus the per-grid integrand trace)."""
    payload = {
        "log_bf": result.log_bf,
        "se": result.se,
        "target": [result.target[0],
                   (list(np.atleast_1d(result.target[1]).astype(int).tolist())
                    if result.target[0] == "covariate"
                    else int(result.target[1]))],
        "scheme": result.scheme,
        "grid": result.grid.tolist(),
        "ubar": result.ubar.tolist(),
        "ubar_se": result.ubar_se.tolist(),
    }
    atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


# ---------------------------------------------------------------------------
# config and manifest
# ---------------------------------------------------------------------------

def load_config(path, environ=None):
    """Read an INI config into a flat {"section.key": value} dict.

    Environment variables named FAMLVM_<SECTION>_<KEY> (upper case)
    override file values. Raises ConfigError on unreadable/unparsable input.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    flat = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            flat[f"{section}.{key}"] = value
    environ = os.environ if environ is None else environ
    for dotted in list(flat):
        env_key = (ENV_PREFIX + "_" + dotted.replace(".", "_")).upper()
        if env_key in environ:
            flat[dotted] = environ[env_key]
    return flat


def config_digest(path):
    """Hex SHA-256 of the raw config file bytes."""
    try:
        with open(path, "rb") as fh:
            return hashlib.sha256(fh.read()).hexdigest()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def write_manifest(path, **fields):
    """JSON run manifest: command, seed, config digest, timestamps, outputs."""
    payload = {"created": datetime.now(timezone.utc).isoformat()}
    payload.update(fields)
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True)
                      + "\n")


def read_manifest(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise IoFailure(f"cannot read manifest {path}: {exc}") from exc
