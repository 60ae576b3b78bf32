"""Run configuration: sectioned ``key = value`` files with CLI overrides.

Schema (every key optional; defaults shown by :func:`RunConfig.defaults`)::

    [scheme]    p, c, kappa, flux, tau, tau_mult, s, beta, nodes, b
    [mesh]      x_min, x_max, elements, meshes
    [time]      dt_policy, dt, cfl, t_final, dt_safety
    [problem]   boundary, initial
    [search]    seed, levels, first_step, u_max
    [spectral]  k_points, seed_dt, tolerance
    [sweep]     c_list, kappa_list, tau_mults, ldg_column
    [output]    out, every

``tau``/``s`` left empty mean "multiplier times the provable threshold".
``dt_policy = auto`` is ``cfl`` for solve/find-tau and ``vn_max`` for
convergence; an empty search ``seed`` is bracketed automatically.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields, replace
from math import pi

from esfrlab.correction import PRESET_NAMES, make_param
from esfrlab.flux import FluxFamily
from esfrlab.mesh import NodeFamily


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _names(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _opt_float(text: str):
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


def _bool(text: str) -> bool:
    key = text.strip().lower()
    if key in ("1", "true", "yes", "on"):
        return True
    if key in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _length(text: str) -> float:
    """A float, optionally written as a multiple of pi ('2pi', '0.5*pi')."""
    t = text.strip().lower().replace(" ", "")
    if t.endswith("pi"):
        head = t[:-2].rstrip("*")
        return (float(head) if head else 1.0) * pi
    return float(t)


@dataclass(frozen=True)
class Key:
    section: str
    parse: object
    dump: object = str


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def _fmt_opt(v) -> str:
    return "" if v is None else repr(float(v))


def _fmt_seq(v) -> str:
    return ",".join(_fmt(x) for x in v)


_SCHEMA: dict[str, Key] = {
    "p": Key("scheme", int),
    "c": Key("scheme", str),
    "kappa": Key("scheme", str),
    "flux": Key("scheme", str),
    "tau": Key("scheme", _opt_float, _fmt_opt),
    "tau_mult": Key("scheme", float, _fmt),
    "s": Key("scheme", _opt_float, _fmt_opt),
    "beta": Key("scheme", float, _fmt),
    "nodes": Key("scheme", str),
    "b": Key("scheme", float, _fmt),
    "x_min": Key("mesh", _length, _fmt),
    "x_max": Key("mesh", _length, _fmt),
    "elements": Key("mesh", int),
    "meshes": Key("mesh", _ints, _fmt_seq),
    "dt_policy": Key("time", str),
    "dt": Key("time", _opt_float, _fmt_opt),
    "cfl": Key("time", float, _fmt),
    "t_final": Key("time", float, _fmt),
    "dt_safety": Key("time", float, _fmt),
    "boundary": Key("problem", str),
    "initial": Key("problem", str),
    "seed": Key("search", _opt_float, _fmt_opt),
    "levels": Key("search", int),
    "first_step": Key("search", float, _fmt),
    "u_max": Key("search", float, _fmt),
    "k_points": Key("spectral", int),
    "seed_dt": Key("spectral", float, _fmt),
    "tolerance": Key("spectral", float, _fmt),
    "c_list": Key("sweep", _names, _fmt_seq),
    "kappa_list": Key("sweep", _names, _fmt_seq),
    "tau_mults": Key("sweep", _floats, _fmt_seq),
    "ldg_column": Key("sweep", _bool, lambda v: "true" if v else "false"),
    "out": Key("output", str),
    "every": Key("output", int),
}
SECTIONS = ("scheme", "mesh", "time", "problem", "search", "spectral", "sweep", "output")


@dataclass(frozen=True)
class RunConfig:
    p: int = 2
    c: str = "DG"
    kappa: str = "DG"
    flux: str = "ip"
    tau: float | None = None
    tau_mult: float = 1.0
    s: float | None = None
    beta: float = 0.5
    nodes: str = "lgl"
    b: float = 1.0
    x_min: float = 0.0
    x_max: float = 2.0 * pi
    elements: int = 32
    meshes: tuple[int, ...] = (32, 64, 128)
    dt_policy: str = "auto"
    dt: float | None = None
    cfl: float = 0.05
    t_final: float = 2.0
    dt_safety: float = 0.99
    boundary: str = "dirichlet"
    initial: str = "model"
    seed: float | None = None
    levels: int = 3
    first_step: float = 1.0
    u_max: float = 2.0
    k_points: int = 629
    seed_dt: float = 1.0
    tolerance: float = 1e-4
    c_list: tuple[str, ...] = PRESET_NAMES
    kappa_list: tuple[str, ...] = ("DG", "PLUS")
    tau_mults: tuple[float, ...] = (1.0, 1.1, 1.5)
    ldg_column: bool = False
    out: str = "-"
    every: int = 1
    _origin: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls()

    def validate(self) -> "RunConfig":
        def fail(key, msg):
            where = self._origin.get(key)
            prefix = f"{where}: " if where else ""
            raise ConfigError(f"{prefix}{key}: {msg}")

        if self.p < 1:
            fail("p", f"polynomial degree must be >= 1, got {self.p}")
        for key in ("c", "kappa"):
            try:
                make_param(getattr(self, key), self.p)
            except ValueError as exc:
                fail(key, str(exc))
        for key in ("c_list", "kappa_list"):
            for name in getattr(self, key):
                try:
                    make_param(name, self.p)
                except ValueError as exc:
                    fail(key, str(exc))
        try:
            FluxFamily.parse(self.flux)
        except ValueError:
            fail("flux", f"expected one of ldg, ip, br2, got {self.flux!r}")
        try:
            NodeFamily.parse(self.nodes)
        except ValueError:
            fail("nodes", f"expected one of lgl, gl, equi, got {self.nodes!r}")
        if self.elements < 2:
            fail("elements", f"need at least 2 elements, got {self.elements}")
        if any(n < 2 for n in self.meshes) or not self.meshes:
            fail("meshes", "every mesh needs at least 2 elements")
        if not self.t_final > 0:
            fail("t_final", f"must be positive, got {self.t_final}")
        if not self.x_max > self.x_min:
            fail("x_max", "must exceed x_min")
        if self.dt_policy not in ("auto", "fixed", "cfl", "vn_max"):
            fail("dt_policy", f"expected auto, fixed, cfl or vn_max, got {self.dt_policy!r}")
        if self.dt_policy == "fixed" and (self.dt is None or self.dt <= 0):
            fail("dt", "a positive dt is required with dt_policy = fixed")
        if self.cfl <= 0 or self.dt_safety <= 0 or self.b <= 0:
            fail("cfl", "cfl, dt_safety and b must be positive")
        if self.boundary not in ("dirichlet", "periodic"):
            fail("boundary", f"expected dirichlet or periodic, got {self.boundary!r}")
        if self.initial not in ("model", "zero"):
            fail("initial", f"expected model or zero, got {self.initial!r}")
        if self.k_points < 3:
            fail("k_points", "need at least 3 wavenumbers")
        if self.levels < 1 or self.every < 1:
            fail("levels", "levels and every must be >= 1")
        return self

    def updated(self, **changes) -> "RunConfig":
        origin = dict(self._origin)
        for k in changes:
            origin[k] = "command line"
        return replace(self, _origin=origin, **changes)

    def to_text(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        for sec in SECTIONS:
            parser.add_section(sec)
        for f in fields(self):
            if f.name.startswith("_"):
                continue
            key = _SCHEMA[f.name]
            parser.set(key.section, f.name, key.dump(getattr(self, f.name)))
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values, origin = {}, {}
    lines = text.splitlines()
    for sec in parser.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        for name, raw in parser.items(sec):
            key = _SCHEMA.get(name)
            where = _locate(lines, name, source)
            if key is None or key.section != sec:
                raise ConfigError(f"{where}: unknown key {name!r} in [{sec}]")
            try:
                values[name] = key.parse(raw)
            except ValueError as exc:
                raise ConfigError(f"{where}: {name}: cannot parse {raw!r} ({exc})") from None
            origin[name] = where
    return RunConfig(**values, _origin=origin)


def _locate(lines, name: str, source: str) -> str:
    for i, line in enumerate(lines, 1):
        head = line.split("=", 1)[0].strip()
        if head == name:
            return f"{source}:{i}"
    return source


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path)
