"""Configuration files and the plain-text data formats.

A config is a ``key = value`` text file; ``#`` starts a comment.  Keys
carry their unit as a suffix (``_nm``, ``_deg``, ``_kms``, ``_mevnm3``)
and a value may repeat the unit (``21 deg``) as long as it matches.
Loading collects every problem before raising.

CSV outputs start with ``# key: value`` provenance lines followed by a
header row; numbers are written with ``repr``-stable ``%.10g``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, constants
from .errors import ConfigError, DataError
from .geometry import GratingGeometry
from .peaks import AngularScan, PeakTable
from .transmission import PATH_MODELS, Species, TransmissionModel, beam_from_wavelength, de_broglie

log = logging.getLogger("slitwave")

UNITS = ("nm", "deg", "kms", "mevnm3")
FLOAT_FORMAT = ".10g"


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


# key: (kind, default, check, description of the check)
_REQUIRED = object()
SCHEMA = {
    "d_nm": ("float", _REQUIRED, _pos, "> 0"),
    "t_nm": ("float", _REQUIRED, _nonneg, ">= 0"),
    "beta_deg": ("float", _REQUIRED, lambda x: 0 <= x < 90, "in [0, 90)"),
    "s0_nm": ("float", _REQUIRED, _pos, "> 0"),
    "theta0_deg": ("float", _REQUIRED, lambda x: abs(x) < 90, "in (-90, 90)"),
    "c3_mevnm3": ("float", constants.C3_DEFAULT, _nonneg, ">= 0"),
    "cutoff_nm": ("float", constants.WALL_CUTOFF_DEFAULT, _pos, "> 0"),
    "path_model": ("str", "diagonal", lambda x: x in PATH_MODELS, f"one of {PATH_MODELS}"),
    "bond_length_nm": ("float", 0.0, _nonneg, ">= 0"),
    "species": ("str", "trimer", lambda x: x in ("atom", "dimer", "trimer"), "atom, dimer or trimer"),
    "velocity_kms": ("float", None, _pos, "> 0"),
    "lambda_nm": ("float", None, _pos, "> 0"),
    "velocities_kms": ("floats", None, lambda x: len(x) >= 1 and min(x) > 0, "positive list"),
    "n_max": ("int", 8, lambda x: 0 <= x <= 50, "in [0, 50]"),
    "method": ("str", "cumulant", lambda x: x in ("cumulant", "exact"), "cumulant or exact"),
    "fit_start": ("str", "scan", lambda x: x in ("scan", "fixed"), "scan or fixed"),
    "fix_gamma": ("bool", False, None, ""),
    "rel_error_floor": ("float", 0.0, _nonneg, ">= 0"),
    "snr_threshold": ("float", 5.0, _pos, "> 0"),
    "peak_width_deg": ("float", 0.004, _pos, "> 0"),
    "scan_step_deg": ("float", 0.0005, _pos, "> 0"),
    "scan_counts": ("float", 1000.0, _pos, "> 0"),
    "scan_background": ("float", 0.0, _nonneg, ">= 0"),
    "noise": ("float", 0.0, _nonneg, ">= 0"),
    "r_max_nm": ("float", None, _pos, "> 0"),
    "r_ground_nm": ("float", 0.96, _nonneg, ">= 0"),
    "r_efimov_nm": ("float", 7.97, _nonneg, ">= 0"),
    "band_plus_nm": ("float", 0.4, _pos, "> 0"),
    "band_minus_nm": ("float", 0.5, _pos, "> 0"),
    "band_centre_nm": ("optfloat", 1.1, _nonneg, ">= 0 or 'none'"),
    "seed": ("int", 0, _nonneg, ">= 0"),
    "output_dir": ("str", ".", None, ""),
}

#: defaults worth telling the user about
NOTICE_DEFAULTS = ("c3_mevnm3",)


def _split_unit(key):
    stem, _, suffix = key.rpartition("_")
    return (stem, suffix) if suffix in UNITS else (key, None)


def _parse_value(key, raw, kind, problems):
    text = raw.strip()
    _, unit = _split_unit(key)
    parts = text.split()
    if kind in ("float", "optfloat", "int") and len(parts) == 2:
        if parts[1] != unit:
            problems.append(f"{key}: unit '{parts[1]}' does not match key suffix '{unit}'")
            return None
        text = parts[0]
    try:
        if kind == "float":
            return float(text)
        if kind == "optfloat":
            return None if text.lower() == "none" else float(text)
        if kind == "int":
            return int(text)
        if kind == "floats":
            return tuple(float(x) for x in text.replace(",", " ").split())
        if kind == "bool":
            if text.lower() in ("true", "yes", "1"):
                return True
            if text.lower() in ("false", "no", "0"):
                return False
            raise ValueError(text)
        return text
    except ValueError:
        problems.append(f"{key}: cannot parse {raw.strip()!r} as {kind}")
        return None


def parse_pairs(pairs, problems, origin="config"):
    """Validate ``(key, raw value)`` pairs against :data:`SCHEMA`."""
    values = {}
    stems = {}
    for key in SCHEMA:
        stem, unit = _split_unit(key)
        if unit:
            stems[stem] = key
    for key, raw in pairs:
        if key not in SCHEMA:
            stem, unit = _split_unit(key)
            if unit is None:
                stem, _, unit = key.rpartition("_")
            if stem in stems:
                problems.append(f"{origin}: key '{key}' has the wrong unit suffix, expected '{stems[stem]}'")
            else:
                problems.append(f"{origin}: unknown key '{key}'")
            continue
        kind, _, check, desc = SCHEMA[key]
        value = _parse_value(key, raw, kind, problems)
        if value is None and kind != "optfloat":
            continue
        if check is not None and value is not None and not check(value):
            problems.append(f"{key} = {raw.strip()}: out of range, must be {desc}")
            continue
        values[key] = value
    return values


def read_pairs(text, problems, origin="config"):
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            problems.append(f"{origin}:{lineno}: expected 'key = value'")
            continue
        pairs.append((key.strip(), value))
    return pairs


@dataclass(frozen=True)
class RunConfig:
    """Validated settings for one command."""

    values: dict
    defaults_used: tuple = ()
    source: str = ""
    source_sha256: str = ""
    inputs: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def geometry(self):
        v = self.values
        return GratingGeometry.from_degrees(v["d_nm"], v["t_nm"], v["beta_deg"], v["s0_nm"], v["theta0_deg"])

    def transmission_model(self, geom=None):
        v = self.values
        return TransmissionModel.for_geometry(geom or self.geometry(), c3=v["c3_mevnm3"],
                                              bond_length=v["bond_length_nm"],
                                              wall_cutoff=v["cutoff_nm"], path_model=v["path_model"])

    @property
    def species(self):
        return Species.parse(self.values["species"])

    def beam(self):
        v = self.values
        if v["lambda_nm"] is not None:
            return beam_from_wavelength(self.species, v["lambda_nm"])
        if v["velocity_kms"] is None:
            raise ConfigError("one of velocity_kms or lambda_nm is required")
        return de_broglie(self.species, v["velocity_kms"])

    def velocities(self):
        vs = self.values["velocities_kms"]
        if not vs:
            raise ConfigError("velocities_kms is required")
        return vs

    @property
    def output_dir(self):
        return Path(self.values["output_dir"])

    def echo(self):
        """Effective config for output metadata."""
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(self.values.items())}


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def default_config_text():
    return resources.files("slitwave").joinpath("data/default.cfg").read_text()


def load_config(path=None, overrides=(), inputs=None):
    """Read, merge and validate a config.

    ``path=None`` uses the packaged default configuration.  ``overrides``
    are ``"key=value"`` strings applied on top.  ``inputs`` maps names to
    files that must exist.  All problems are reported together in one
    :class:`ConfigError`.
    """
    problems = []
    if path is None:
        text, source = default_config_text(), "<default>"
    else:
        try:
            text, source = Path(path).read_text(), str(path)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    digest = hashlib.sha256(text.encode()).hexdigest()
    values = parse_pairs(read_pairs(text, problems, source), problems, source)
    over = []
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            problems.append(f"override '{item}': expected key=value")
        else:
            over.append((key.strip(), value))
    values.update(parse_pairs(over, problems, "override"))

    defaults = []
    for key, (_, default, _, _) in SCHEMA.items():
        if key in values:
            continue
        if default is _REQUIRED:
            problems.append(f"missing required key '{key}'")
            continue
        values[key] = default
        if default is not None:
            defaults.append(key)
            if key in NOTICE_DEFAULTS:
                log.warning("%s not set, using default %s", key, default)
    if values.get("velocity_kms") is not None and values.get("lambda_nm") is not None:
        problems.append("set only one of velocity_kms and lambda_nm")
    if all(k in values for k in ("t_nm", "beta_deg", "theta0_deg")):
        t, beta, theta0 = values["t_nm"], values["beta_deg"], values["theta0_deg"]
        if t > 0 and theta0 <= beta:
            problems.append(f"theta0_deg = {theta0} <= beta_deg = {beta}: shadowing regime not supported")
    if "s0_nm" in values and "d_nm" in values and values["s0_nm"] >= values["d_nm"]:
        problems.append("s0_nm must be smaller than d_nm")
    hashes = {}
    for name, file in (inputs or {}).items():
        if not Path(file).is_file():
            problems.append(f"input '{file}' for {name} does not exist")
        else:
            hashes[name] = {"path": str(file), "sha256": sha256_file(file)}
    if problems:
        raise ConfigError(problems)
    return RunConfig(values, tuple(defaults), source, digest, hashes)


# --- CSV / JSON ---------------------------------------------------------------

def fmt(x):
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return "nan" if math.isnan(x) else format(x, FLOAT_FORMAT)
    if hasattr(x, "item"):
        return fmt(x.item())
    return str(x)


def _json_default(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, (tuple, set)):
        return list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def provenance(config, command):
    return {"command": command, "version": __version__, "config_source": config.source,
            "config_sha256": config.source_sha256, "inputs": config.inputs, "config": config.echo()}


def csv_text(columns, rows, meta=None):
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        if isinstance(value, (dict, list)):
            value = json.dumps(value, sort_keys=True, default=_json_default)
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(x) for x in row])
    return buf.getvalue()


def write_text(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def write_csv(path, columns, rows, meta=None):
    return write_text(path, csv_text(columns, rows, meta))


def write_json(path, obj):
    return write_text(path, json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n")


def _convert(cell):
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        return float(cell)
    except ValueError:
        return cell


def read_csv(path, required=()):
    """Return ``(meta, columns, rows)`` with numeric cells converted."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    table = list(csv.reader(body))
    if not table:
        raise DataError(f"{path}: no header row")
    columns, rows = table[0], [[_convert(c) for c in r] for r in table[1:]]
    missing = [c for c in required if c not in columns]
    if missing:
        raise DataError(f"{path}: missing columns {missing}")
    if any(len(r) != len(columns) for r in rows):
        raise DataError(f"{path}: ragged rows")
    return meta, columns, rows


def column(columns, rows, name):
    i = columns.index(name)
    return [r[i] for r in rows]


# --- table layouts ------------------------------------------------------------

PATTERN_COLUMNS = ("n", "theta_deg", "I_rel", "C_n")
CONTRAST_COLUMNS = ("n", "C_n")
PEAK_COLUMNS = ("n", "intensity", "uncertainty", "status")
SCAN_COLUMNS = ("theta_deg", "rate", "rate_err")
SERIES_COLUMNS = ("v_kms", "s_perp_eff_nm", "err_nm", "model_nm")
PROFILE_COLUMNS = ("r_nm", "delta_chi2")
EFIMOV_COLUMNS = ("x_fraction", "inferred_r_nm", "shift_nm")


def pattern_rows(pattern):
    I = dict(zip(pattern.n.tolist(), pattern.intensity.tolist()))
    rows = []
    for o in pattern.orders:
        mirror = I.get(-o.n)
        c = (I[o.n] - mirror) / (I[o.n] + mirror) if mirror is not None else float("nan")
        rows.append((o.n, math.degrees(o.theta), o.intensity, c))
    return rows


def peak_rows(table):
    return list(zip(table.n.tolist(), table.intensity.tolist(), table.uncertainty.tolist(), table.status))


def read_peak_table(path):
    meta, cols, rows = read_csv(path, required=PEAK_COLUMNS[:3])
    status = column(cols, rows, "status") if "status" in cols else ["ok"] * len(rows)
    data = zip(column(cols, rows, "n"), column(cols, rows, "intensity"),
               column(cols, rows, "uncertainty"), status)
    return PeakTable.from_rows([(int(n), float(i), float(e), s) for n, i, e, s in data], meta)


def read_scan(path):
    meta, cols, rows = read_csv(path, required=SCAN_COLUMNS[:2])
    err = [float(x) for x in column(cols, rows, "rate_err")] if "rate_err" in cols else None
    return AngularScan(np.array(column(cols, rows, "theta_deg"), float),
                       np.array(column(cols, rows, "rate"), float),
                       None if err is None else np.array(err), meta)


def read_series(path):
    _, cols, rows = read_csv(path, required=SERIES_COLUMNS[:3])
    return [(float(v), float(s), float(e)) for v, s, e in zip(
        column(cols, rows, "v_kms"), column(cols, rows, "s_perp_eff_nm"), column(cols, rows, "err_nm"))]


def output_path(config, name):
    return os.path.join(config.values["output_dir"], name)
