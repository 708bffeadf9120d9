"""Scene files: declarative fixtures naming the objects to build and check.

A scene is a flat, sectioned key-value file (INI syntax, no value
interpolation).  Matrix-valued entries are written one row per key with
``;`` separating the expressions of a row, e.g.::

    [base_metric]
    row1 = 1; 0
    row2 = 0; exp(2*x1)

The full grammar lives in docs/scene-format.md.  Loading a scene
constructs and validates every object it mentions, so a returned
SceneFile is ready for the verification suites.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import dfield, fields, horizon, metrics
from .bigcore import parse_components
from .points import sample_box

SUITE_NAMES = ("canonical", "triple", "horizontal", "metric", "double")

_SCENE_KEYS = {"m", "seed", "samples", "mc_samples", "tol", "suites", "box", "perturb_s"}


class SceneError(ValueError):
    """Unparsable or inconsistent scene file; message carries the location."""


def _fail(path, where, msg):
    raise SceneError(f"{path}: [{where}]: {msg}")


def _rows(cfg, path, section, prefix, m, count=None):
    """Collect keys prefix1..prefixN as a list of ``;``-split rows."""
    count = m if count is None else count
    rows = []
    for i in range(1, count + 1):
        key = f"{prefix}{i}"
        if not cfg.has_option(section, key):
            _fail(path, section, f"missing key {key}")
        row = [s.strip() for s in cfg.get(section, key).split(";")]
        if len(row) != m:
            _fail(path, section, f"{key} has {len(row)} entries, expected {m}")
        rows.append(row)
    return rows


def _parse_grid(rows, m, allowed, path, where):
    flat = [e for row in rows for e in row]
    try:
        comps = parse_components(flat, m, allowed, where, count=len(flat))
    except Exception as exc:
        _fail(path, where, str(exc))
    return np.array(comps, dtype=object).reshape(len(rows), m)


@dataclass
class SceneFile:
    """A parsed and validated scene: raw tables plus constructed objects."""

    path: str
    m: int
    seed: int = 0
    samples: int = 20
    mc_samples: int = 4000
    tol: float = 1e-8
    suites: tuple = SUITE_NAMES
    box: tuple | None = None
    perturb_s: float = 0.0
    tol_overrides: dict = dc_field(default_factory=dict)
    base_metric: np.ndarray | None = None
    lagrangian: str | None = None
    vector_fields: dict = dc_field(default_factory=dict)
    bundle: horizon.HorizontalBundle | None = None
    big_metric: "metrics.BigMetric | None" = None
    lagrangian_metric: "metrics.BigMetric | None" = None
    spray: "horizon.SecondOrderField | None" = None
    double_field: "dfield.DoubleField | None" = None

    def suite_tol(self, name: str, override: float | None = None) -> float:
        if override is not None:
            return override
        return self.tol_overrides.get(name, self.tol)


def _load_scalar_options(cfg, path, sc):
    sec = "scene"
    for key in cfg.options(sec):
        if key not in _SCENE_KEYS:
            _fail(path, sec, f"unknown key {key}")
    try:
        sc.seed = cfg.getint(sec, "seed", fallback=sc.seed)
        sc.samples = cfg.getint(sec, "samples", fallback=sc.samples)
        sc.mc_samples = cfg.getint(sec, "mc_samples", fallback=sc.mc_samples)
        sc.tol = cfg.getfloat(sec, "tol", fallback=sc.tol)
        # negative-control switch: adds eps * dx^1 (x) dz_1 to the
        # canonical tensor S before the canonical suite runs
        sc.perturb_s = cfg.getfloat(sec, "perturb_s", fallback=sc.perturb_s)
    except ValueError as exc:
        _fail(path, sec, str(exc))
    if cfg.has_option(sec, "suites"):
        names = cfg.get(sec, "suites").replace(",", " ").split()
        for name in names:
            if name not in SUITE_NAMES:
                _fail(path, sec, f"unknown suite {name!r}")
        sc.suites = tuple(names)
    if cfg.has_option(sec, "box"):
        pairs = []
        for part in cfg.get(sec, "box").split(";"):
            vals = part.split()
            if len(vals) != 2:
                _fail(path, sec, f"box interval {part!r} is not 'lo hi'")
            lo, hi = float(vals[0]), float(vals[1])
            if not lo < hi:
                _fail(path, sec, f"empty box interval {part!r}")
            pairs.append((lo, hi))
        if len(pairs) != 3 * sc.m:
            _fail(path, sec, f"box needs {3 * sc.m} intervals, got {len(pairs)}")
        sc.box = tuple(pairs)


def _load_bundle(cfg, path, sc):
    """Resolve the horizontal bundle from the most specific data given."""
    m = sc.m
    if cfg.has_section("horizontal_bundle"):
        sec = "horizontal_bundle"
        has_t = cfg.has_option(sec, "t1")
        has_tau = cfg.has_option(sec, "tau1")
        try:
            if has_t and has_tau:
                t = _rows(cfg, path, sec, "t", m)
                tau = _rows(cfg, path, sec, "tau", m)
                return horizon.HorizontalBundle(np.array(t, dtype=object),
                                                np.array(tau, dtype=object), m)
            if has_t:
                return horizon.lift_from_tm(_rows(cfg, path, sec, "t", m), m)
            if has_tau:
                return horizon.lift_from_cotm(_rows(cfg, path, sec, "tau", m), m)
        except SceneError:
            raise
        except Exception as exc:
            _fail(path, sec, str(exc))
        _fail(path, sec, "needs t1.. rows, tau1.. rows, or both")
    if cfg.has_section("connection"):
        sec = "connection"
        gamma = []
        for i in range(1, m + 1):
            block = []
            for j in range(1, m + 1):
                key = f"c{i}_{j}"
                if not cfg.has_option(sec, key):
                    _fail(path, sec, f"missing key {key}")
                row = [s.strip() for s in cfg.get(sec, key).split(";")]
                if len(row) != m:
                    _fail(path, sec, f"{key} has {len(row)} entries, expected {m}")
                block.append(row)
            gamma.append(block)
        try:
            return horizon.from_linear_connection(gamma, m)
        except Exception as exc:
            _fail(path, sec, str(exc))
    if sc.base_metric is not None:
        return horizon.from_linear_connection(
            metrics.base_christoffels(sc.base_metric, m), m
        )
    if sc.spray is not None:
        return sc._spray_bundle
    return horizon.flat_bundle(m)


def load_scene(path: str) -> SceneFile:
    """Parse, validate, and pre-construct a scene file.

    Raises SceneError with the offending section (and key where it
    helps) on any problem; missing files surface as OSError.
    """
    cfg = configparser.ConfigParser(interpolation=None)
    with open(path) as fh:
        try:
            cfg.read_file(fh)
        except configparser.Error as exc:
            raise SceneError(f"{path}: {exc}") from exc
    if not cfg.has_section("scene"):
        _fail(path, "scene", "missing [scene] section")
    for sec in cfg.sections():
        if sec not in (
            "scene",
            "base_metric",
            "connection",
            "lagrangian",
            "vector_fields",
            "horizontal_bundle",
            "double_field",
            "tolerances",
        ):
            _fail(path, sec, "unknown section")
    try:
        m = cfg.getint("scene", "m")
    except (ValueError, configparser.NoOptionError) as exc:
        raise SceneError(f"{path}: [scene]: m: {exc}") from exc
    if not 1 <= m <= 4:
        _fail(path, "scene", f"m must be 1..4, got {m}")

    sc = SceneFile(path=path, m=m)
    _load_scalar_options(cfg, path, sc)

    if cfg.has_section("tolerances"):
        for key in cfg.options("tolerances"):
            if key not in SUITE_NAMES:
                _fail(path, "tolerances", f"unknown suite {key!r}")
            try:
                sc.tol_overrides[key] = cfg.getfloat("tolerances", key)
            except ValueError as exc:
                _fail(path, "tolerances", str(exc))

    if cfg.has_section("base_metric"):
        rows = _rows(cfg, path, "base_metric", "row", m)
        g = _parse_grid(rows, m, {"x"}, path, "base_metric")
        p = sample_box(m, 10, seed=0)
        gv = fields.fvalue(g, p)
        if np.max(np.abs(gv - np.swapaxes(gv, 0, 1))) > 1e-10:
            _fail(path, "base_metric", "metric is not symmetric")
        sc.base_metric = g

    sc._spray_bundle = None
    if cfg.has_section("lagrangian"):
        if not cfg.has_option("lagrangian", "l"):
            _fail(path, "lagrangian", "missing key L")
        sc.lagrangian = cfg.get("lagrangian", "l")
        try:
            sc.spray, sc._spray_bundle = horizon.spray_from_lagrangian(
                sc.lagrangian, m
            )
        except Exception as exc:
            _fail(path, "lagrangian", str(exc))

    sc.bundle = _load_bundle(cfg, path, sc)

    if cfg.has_section("vector_fields"):
        for name in cfg.options("vector_fields"):
            comps = [s.strip() for s in cfg.get("vector_fields", name).split(";")]
            if len(comps) != 3 * m:
                _fail(
                    path,
                    "vector_fields",
                    f"{name} has {len(comps)} components, expected {3 * m}",
                )
            try:
                sc.vector_fields[name] = np.array(
                    parse_components(comps, m, {"x", "y", "z"}, name, count=3 * m),
                    dtype=object,
                )
            except SceneError:
                raise
            except Exception as exc:
                _fail(path, "vector_fields", f"{name}: {exc}")

    g_base = sc.base_metric
    if g_base is None:
        g_base = np.array(
            [[fields.ONE if i == j else fields.ZERO for j in range(m)] for i in range(m)],
            dtype=object,
        )
    try:
        sc.big_metric = metrics.sasaki_type_metric(g_base, sc.bundle)
    except Exception as exc:
        _fail(path, "base_metric", str(exc))
    if sc.lagrangian is not None:
        try:
            sc.lagrangian_metric = metrics.lagrangian_metric(sc.lagrangian, m)
        except Exception as exc:
            _fail(path, "lagrangian", str(exc))

    if cfg.has_section("double_field"):
        sec = "double_field"
        sigma = _rows(cfg, path, sec, "sigma", m)
        psi = _rows(cfg, path, sec, "psi", m) if cfg.has_option(sec, "psi1") else None
        density = cfg.get(sec, "density", fallback=None)
        try:
            sc.double_field = dfield.DoubleField(sc.bundle, sigma, psi, density)
        except Exception as exc:
            _fail(path, sec, str(exc))
    elif sc.base_metric is not None:
        sc.double_field = dfield.DoubleField(sc.bundle, sc.base_metric)
    elif sc.lagrangian is not None:
        sc.double_field = dfield.field_from_lagrangian(sc.lagrangian, m)
    else:
        eye = [["1" if i == j else "0" for j in range(m)] for i in range(m)]
        sc.double_field = dfield.DoubleField(sc.bundle, eye)
    return sc
