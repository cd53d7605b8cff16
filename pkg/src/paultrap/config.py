"""Run configuration files.

A configuration is an INI-style file with flat sections.  Numeric values
may be arithmetic expressions in numbers and ``pi`` (``t_final = 500*pi``);
``auto`` marks values derived from others at load time.  Every key is
checked against the schema below and unknown keys are errors.
"""
import ast
import configparser
import dataclasses
from dataclasses import dataclass, field, fields, replace
import math
import re

import numpy as np

from .errors import ConfigError
from .model import DRIVE_PERIOD, PhysicalSetup, TrapConfig, mathieu_exponent
from .quantum import Grid

KINDS = ("poincare", "evolve", "floquet", "sweep", "plan")
_AUTO = {"auto": True}


@dataclass(frozen=True)
class RunSection:
    kind: str = ""
    seed: int = 0
    workers: int = 1
    out_dir: str = "out"
    write_snapshot: bool = False


@dataclass(frozen=True)
class EnsembleSection:
    count: int = 4096
    sigma_x2: float = field(default=None, metadata=_AUTO)
    center_x: float = 0.0
    center_p: float = 0.0


@dataclass(frozen=True)
class TimeSection:
    t_final: float = 500 * np.pi
    dt: float = DRIVE_PERIOD / 512
    samples_per_period: int = 8
    snapshots_per_period: int = 8
    window_center: float = 475 * np.pi
    window_width: float = 50 * np.pi
    order: int = 4

    @property
    def window(self):
        half = self.window_width / 2
        return (self.window_center - half, self.window_center + half)


@dataclass(frozen=True)
class HistogramSection:
    position_bins: int = 200
    position_min: float = -30.0
    position_max: float = 30.0
    momentum_bins: int = 200
    momentum_min: float = -25.0
    momentum_max: float = 25.0

    @property
    def position(self):
        return self.position_bins, (self.position_min, self.position_max)

    @property
    def momentum(self):
        return self.momentum_bins, (self.momentum_min, self.momentum_max)


@dataclass(frozen=True)
class BasisSection:
    nu: float = field(default=None, metadata=_AUTO)
    size: int = 200
    dt: float = DRIVE_PERIOD / 1024
    packet_sigma_x2: float = field(default=None, metadata=_AUTO)
    report_modes: int = 8


@dataclass(frozen=True)
class SweepSection:
    start: float = 0.0
    stop: float = 0.7
    step: float = 0.01
    doublet_tolerance: float = 0.02

    def couplings(self):
        n = int(round((self.stop - self.start) / self.step))
        return self.start + self.step * np.arange(n + 1)


@dataclass(frozen=True)
class PoincareSettings:
    seeds: tuple = ((np.pi, 0.0), (0.1, 0.0))
    n_periods: int = 500
    phase: float = 0.0


@dataclass(frozen=True)
class PlanSection:
    target_hbar: float = 0.3


@dataclass(frozen=True)
class RunConfig:
    run: RunSection
    trap: TrapConfig = TrapConfig()
    grid: Grid = Grid()
    ensemble: EnsembleSection = EnsembleSection()
    time: TimeSection = TimeSection()
    histogram: HistogramSection = HistogramSection()
    basis: BasisSection = BasisSection()
    sweep: SweepSection = SweepSection()
    poincare: PoincareSettings = PoincareSettings()
    plan: PlanSection = PlanSection()
    setup: PhysicalSetup = None

    @property
    def kind(self):
        return self.run.kind


SECTIONS = {f.name: f for f in fields(RunConfig)}
_SECTION_TYPES = {
    "run": RunSection, "trap": TrapConfig, "grid": Grid, "ensemble": EnsembleSection,
    "time": TimeSection, "histogram": HistogramSection, "basis": BasisSection,
    "sweep": SweepSection, "poincare": PoincareSettings, "plan": PlanSection,
    "setup": PhysicalSetup,
}


# --------------------------------------------------------------------------
# value parsing

_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)


def _eval(node):
    if isinstance(node, ast.Constant) and type(node.value) in (int, float):
        return node.value
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and isinstance(node.op, _BINOPS):
        left, right = _eval(node.left), _eval(node.right)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        if isinstance(node.op, ast.Div):
            return left / right
        return left ** right
    if isinstance(node, ast.Tuple):
        return tuple(_eval(e) for e in node.elts)
    raise ValueError("only numbers, pi and + - * / ** are allowed")


def evaluate(text):
    """Evaluate a numeric expression such as ``pi/512`` or ``(pi, 0), (0.1, 0)``."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError:
        raise ValueError(f"cannot parse {text!r}") from None
    return _eval(tree.body)


def _convert(text, typ, auto):
    raw = text.strip()
    if auto and raw.lower() == "auto":
        return None
    if typ is str:
        if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "'\"":
            raw = raw[1:-1]
        return raw
    if typ is bool:
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    try:
        value = evaluate(raw)
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        kind = "points" if typ is tuple else "a number"
        raise ValueError(f"expected {kind}, got {raw!r} ({exc})") from None
    if typ is tuple:
        if isinstance(value, tuple) and value and not isinstance(value[0], tuple):
            value = (value,)
        if (not isinstance(value, tuple)
                or any(not isinstance(v, tuple) or len(v) != 2 for v in value)):
            raise ValueError(f"expected (x, p) pairs, got {raw!r}")
        return tuple((float(a), float(b)) for a, b in value)
    if isinstance(value, tuple):
        raise ValueError(f"expected a single number, got {raw!r}")
    if typ is int:
        if isinstance(value, float):
            if not value.is_integer():
                raise ValueError(f"expected an integer, got {raw!r}")
            value = int(value)
        return value
    return float(value)


def _locate(text):
    """Map section names and (section, key) pairs to 1-based line numbers."""
    where = {}
    section = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            where.setdefault(section, i)
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip()), i)
    return where


# --------------------------------------------------------------------------
# parse / emit


def parse_config(text):
    """Parse configuration text into a validated :class:`RunConfig`."""
    parser = configparser.ConfigParser(interpolation=None, default_section="\0",
                                       inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any section", exc.lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(exc.message.split(":")[-1].strip() or str(exc), exc.lineno,
                          getattr(exc, "option", None)) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", line) from None
    where = _locate(text)
    values = {}
    for name in parser.sections():
        if name not in _SECTION_TYPES:
            raise ConfigError(f"unknown section [{name}]; expected one of "
                              f"{', '.join(_SECTION_TYPES)}", where.get(name))
        cls = _SECTION_TYPES[name]
        schema = {f.name: f for f in fields(cls)}
        items = {}
        for key, raw in parser.items(name):
            line = where.get((name, key))
            if key not in schema:
                raise ConfigError(f"unknown key in [{name}]; allowed: "
                                  f"{', '.join(schema)}", line, key)
            f = schema[key]
            try:
                items[key] = _convert(raw, f.type, f.metadata.get("auto", False))
            except ValueError as exc:
                raise ConfigError(str(exc), line, key) from None
        values[name] = items
    if "run" not in values or not values["run"].get("kind"):
        raise ConfigError("missing [run] kind", where.get("run"), "kind")
    kind = values["run"]["kind"]
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {', '.join(KINDS)}, got {kind!r}",
                          where.get(("run", "kind")), "kind")
    sections = {}
    for name, items in values.items():
        try:
            sections[name] = _SECTION_TYPES[name](**items)
        except TypeError as exc:
            raise ConfigError(f"incomplete section [{name}]: {exc}", where.get(name)) from None
        except ValueError as exc:
            raise ConfigError(f"invalid section [{name}]: {exc}", where.get(name)) from None
    if kind == "plan" and "setup" not in sections:
        raise ConfigError("plan runs need a [setup] section")
    return resolve(RunConfig(**sections))


def resolve(cfg):
    """Fill ``auto`` values and validate cross-section constraints."""
    hbar = cfg.trap.hbar
    ens = cfg.ensemble
    if ens.sigma_x2 is None:
        ens = replace(ens, sigma_x2=hbar)
    basis = cfg.basis
    if basis.packet_sigma_x2 is None:
        basis = replace(basis, packet_sigma_x2=hbar)
    if basis.nu is None:
        res = mathieu_exponent(cfg.trap.a, cfg.trap.q)
        if not res.stable or res.mu <= 0:
            raise ConfigError("basis nu = auto needs a stable (a, q); set nu explicitly",
                              key="nu")
        basis = replace(basis, nu=float(res.mu))
    cfg = replace(cfg, ensemble=ens, basis=basis)
    _validate(cfg)
    return cfg


def _validate(cfg):
    checks = [
        (cfg.run.workers >= 1, "workers", "must be at least 1"),
        (cfg.ensemble.count >= 1, "count", "must be at least 1"),
        (cfg.ensemble.sigma_x2 > 0, "sigma_x2", "must be positive"),
        (cfg.time.dt > 0, "dt", "must be positive"),
        (cfg.time.t_final > 0, "t_final", "must be positive"),
        (cfg.time.order in (2, 4), "order", "must be 2 or 4"),
        (cfg.time.window_width >= 0, "window_width", "must be non-negative"),
        (cfg.basis.nu > 0, "nu", "must be positive"),
        (cfg.basis.size >= 1, "size", "must be positive"),
        (cfg.basis.dt > 0, "dt", "must be positive"),
        (cfg.basis.packet_sigma_x2 > 0, "packet_sigma_x2", "must be positive"),
        (cfg.sweep.step > 0, "step", "must be positive"),
        (cfg.sweep.stop >= cfg.sweep.start, "stop", "must not be below start"),
        (cfg.poincare.n_periods >= 0, "n_periods", "must be non-negative"),
        (len(cfg.poincare.seeds) >= 1, "seeds", "need at least one seed"),
        (cfg.plan.target_hbar > 0, "target_hbar", "must be positive"),
        (cfg.histogram.position_bins >= 1 and cfg.histogram.momentum_bins >= 1,
         "position_bins", "bins must be positive"),
    ]
    for ok, key, msg in checks:
        if not ok:
            raise ConfigError(msg, key=key)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def _emit_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(f"({x!r}, {p!r})" for x, p in value)
    return str(value)


def emit_config(cfg):
    """Serialize a :class:`RunConfig`; ``parse_config(emit_config(c)) == c``."""
    out = []
    for name in SECTIONS:
        section = getattr(cfg, name)
        if section is None:
            continue
        out.append(f"[{name}]")
        for f in fields(section):
            out.append(f"{f.name} = {_emit_value(getattr(section, f.name))}")
        out.append("")
    return "\n".join(out)


def as_dict(cfg):
    return {name: dataclasses.asdict(getattr(cfg, name))
            for name in SECTIONS if getattr(cfg, name) is not None}


def with_overrides(cfg, seed=None, workers=None, out_dir=None, dt=None):
    """Apply command-line overrides; ``dt`` replaces the step of the run's kind."""
    run = cfg.run
    if seed is not None:
        run = replace(run, seed=int(seed))
    if workers is not None:
        run = replace(run, workers=int(workers))
    if out_dir is not None:
        run = replace(run, out_dir=str(out_dir))
    cfg = replace(cfg, run=run)
    if dt is not None:
        if cfg.kind in ("floquet", "sweep"):
            cfg = replace(cfg, basis=replace(cfg.basis, dt=float(dt)))
        else:
            cfg = replace(cfg, time=replace(cfg.time, dt=float(dt)))
    _validate(cfg)
    return cfg
