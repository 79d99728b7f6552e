"""Run configuration: INI-style files, defaults, and eager validation.

A config file has flat sections geometry / filter / scheme / solver /
eigensolver / output.  A minimal file needs only a geometry, a target
frequency and a requested pair count; everything else defaults.  Example::

    [geometry]
    kind = square
    n_cells = 64
    order = 2

    [filter]
    omega = 12.0

    [eigensolver]
    n_requested = 24

Validation happens at load time and reports the offending key (with its line
number when it came from a file).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .filters import SchemeKind
from .wavesolve import SolverKind

GEOMETRY_DIMS = {"interval": 1, "square": 2, "box": 3}

DEFAULTS = dict(
    n_periods=1, n_its=10, cfl=0.9, solver_tol=1e-10, eig_tol=1e-12,
    seed=12345, cluster_rtol=1e-8,
)


@dataclass
class RunConfig:
    """Everything one experiment needs, validated eagerly."""

    # geometry
    kind: str = "square"
    extents: tuple = ((0.0, 1.0),)
    n_cells: tuple = (64,)
    order: int = 2
    bc: str = "dirichlet"
    c: float = 1.0
    # filter
    omega: float = 10.0
    n_periods: int = DEFAULTS["n_periods"]
    adjust_omega: bool = False
    # scheme
    scheme: SchemeKind = SchemeKind.IMPLICIT
    n_its: int = DEFAULTS["n_its"]
    cfl: float = DEFAULTS["cfl"]
    # solver
    solver_kind: str = "auto"
    solver_tol: float = DEFAULTS["solver_tol"]
    solver_max_iter: int = 500
    pre_smooth: int = 2
    post_smooth: int = 1
    # eigensolver
    eigensolver: str = "arnoldi"
    n_requested: int = 16
    n_arnoldi: int = 0          # 0 means the 2*n_requested + 1 default
    eig_tol: float = DEFAULTS["eig_tol"]
    max_restarts: int = 120
    max_sweeps: int = 300
    seed: int = DEFAULTS["seed"]
    # output / reporting
    out_dir: str = "out"
    reference: str = "analytic"     # analytic | dense
    cluster_rtol: float = DEFAULTS["cluster_rtol"]

    def __post_init__(self):
        self.validate()

    @property
    def dim(self):
        return GEOMETRY_DIMS[self.kind]

    @property
    def n_max(self):
        return self.n_arnoldi if self.n_arnoldi else 2 * self.n_requested + 1

    def validate(self):
        def fail(key, msg):
            raise ConfigError(f"config key '{key}': {msg}")

        if self.kind not in GEOMETRY_DIMS:
            fail("geometry.kind", f"must be one of {sorted(GEOMETRY_DIMS)}, "
                                  f"got {self.kind!r}")
        dim = self.dim
        if len(self.n_cells) == 1 and dim > 1:
            self.n_cells = self.n_cells * dim
        if len(self.extents) == 1 and dim > 1:
            self.extents = self.extents * dim
        if len(self.n_cells) != dim or len(self.extents) != dim:
            fail("geometry.n_cells", f"needs {dim} axes for kind={self.kind}")
        for n in self.n_cells:
            if n < 4:
                fail("geometry.n_cells", f"needs at least 4 cells per axis, got {n}")
        for a, b in self.extents:
            if not b > a:
                fail("geometry.extents", f"degenerate interval [{a}, {b}]")
        if self.order not in (2, 4):
            fail("geometry.order", f"must be 2 or 4, got {self.order}")
        if self.bc not in ("dirichlet", "neumann"):
            fail("geometry.bc", f"must be dirichlet or neumann, got {self.bc!r}")
        if self.c <= 0:
            fail("geometry.c", "wave speed must be positive")
        if self.omega <= 0:
            fail("filter.omega", "target frequency must be positive")
        if self.n_periods < 1:
            fail("filter.n_periods", "must be a positive integer")
        if self.scheme == SchemeKind.IMPLICIT:
            if self.n_its < 5:
                fail("scheme.n_its", "implicit time-stepping needs at least 5 "
                                     "steps per period")
        else:
            if not 0 < self.cfl <= 1:
                fail("scheme.cfl", f"must lie in (0, 1], got {self.cfl}")
        if self.solver_kind not in ("auto", "direct", "cg", "multigrid"):
            fail("solver.kind", f"unknown solver {self.solver_kind!r}")
        if self.solver_tol <= 0:
            fail("solver.tolerance", "must be positive")
        if self.eigensolver not in ("arnoldi", "subspace", "power"):
            fail("eigensolver.kind", f"unknown eigensolver {self.eigensolver!r}")
        if self.n_requested < 1:
            fail("eigensolver.n_requested", "must request at least one pair")
        if self.n_arnoldi and self.n_arnoldi < self.n_requested + 1:
            fail("eigensolver.n_arnoldi", "must exceed n_requested")
        if self.eig_tol <= 0:
            fail("eigensolver.tolerance", "must be positive")
        if self.reference not in ("analytic", "dense"):
            fail("output.reference", f"must be analytic or dense, got "
                                     f"{self.reference!r}")
        return self

    def with_overrides(self, **kwargs):
        cfg = replace(self, **kwargs)
        cfg.validate()
        return cfg


# section -> key -> (attribute, parser)
def _parse_extents(text):
    pairs = []
    for chunk in text.split(";"):
        parts = [p for p in chunk.replace(",", " ").split() if p]
        if len(parts) != 2:
            raise ValueError(f"expected 'a, b' pairs separated by ';', got {text!r}")
        pairs.append((float(parts[0]), float(parts[1])))
    return tuple(pairs)


def _parse_cells(text):
    return tuple(int(p) for p in text.replace(",", " ").split())


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


_SCHEMA = {
    "geometry": {
        "kind": ("kind", str),
        "extents": ("extents", _parse_extents),
        "n_cells": ("n_cells", _parse_cells),
        "order": ("order", int),
        "bc": ("bc", str),
        "c": ("c", float),
    },
    "filter": {
        "omega": ("omega", float),
        "n_periods": ("n_periods", int),
        "adjust_omega": ("adjust_omega", _parse_bool),
    },
    "scheme": {
        "kind": ("scheme", lambda s: SchemeKind(s.strip().lower())),
        "n_its": ("n_its", int),
        "cfl": ("cfl", float),
    },
    "solver": {
        "kind": ("solver_kind", str),
        "tolerance": ("solver_tol", float),
        "max_iterations": ("solver_max_iter", int),
        "pre_smooth": ("pre_smooth", int),
        "post_smooth": ("post_smooth", int),
    },
    "eigensolver": {
        "kind": ("eigensolver", str),
        "n_requested": ("n_requested", int),
        "n_arnoldi": ("n_arnoldi", int),
        "tolerance": ("eig_tol", float),
        "max_restarts": ("max_restarts", int),
        "max_sweeps": ("max_sweeps", int),
        "seed": ("seed", int),
    },
    "output": {
        "out_dir": ("out_dir", str),
        "reference": ("reference", str),
        "cluster_tol": ("cluster_rtol", float),
    },
}


def _key_line(lines, section, key):
    """Best-effort line number of ``key`` inside ``section`` for error messages."""
    current = None
    for i, raw in enumerate(lines, start=1):
        text = raw.strip()
        if text.startswith("[") and text.endswith("]"):
            current = text[1:-1].strip().lower()
        elif current == section and (text.split("=")[0].split(":")[0].strip()
                                     == key):
            return i
    return None


def parse_config(path):
    """Load and validate a run configuration from an INI-style file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        parser.read_string(text, source=str(path))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}")
    lines = text.splitlines()

    def err(section, key, msg):
        line = _key_line(lines, section, key)
        where = f"{path}:{line}" if line else str(path)
        raise ConfigError(f"{where}: [{section}] {key}: {msg}")

    values = {}
    explicit = set()
    for section in parser.sections():
        sec = section.strip().lower()
        if sec not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}] "
                              f"(expected one of {sorted(_SCHEMA)})")
        for key, raw in parser.items(sec):
            if key not in _SCHEMA[sec]:
                err(sec, key, f"unknown key (expected one of "
                              f"{sorted(_SCHEMA[sec])})")
            attr, conv = _SCHEMA[sec][key]
            try:
                values[attr] = conv(raw)
            except (ValueError, KeyError) as exc:
                err(sec, key, f"bad value {raw!r}: {exc}")
            explicit.add((sec, key))

    if ("scheme", "n_its") in explicit and values.get("scheme") == SchemeKind.EXPLICIT:
        err("scheme", "n_its", "contradicts kind=explicit (use cfl instead)")
    if ("scheme", "cfl") in explicit and values.get("scheme", SchemeKind.IMPLICIT) \
            == SchemeKind.IMPLICIT and ("scheme", "kind") in explicit:
        err("scheme", "cfl", "contradicts kind=implicit (use n_its instead)")

    try:
        return RunConfig(**values)
    except ConfigError as exc:
        # attach a line number when the failing key is identifiable
        msg = str(exc)
        for sec, keys in _SCHEMA.items():
            for key, (attr, _) in keys.items():
                if f"'{sec}.{key}'" in msg and (sec, key) in explicit:
                    line = _key_line(lines, sec, key)
                    if line:
                        raise ConfigError(f"{path}:{line}: {msg}") from exc
        raise
