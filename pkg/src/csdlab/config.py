"""Run configuration: a flat ``key = value`` document plus command-line overrides.

Lines are ``key = value``; ``#`` starts a comment; blank lines are ignored.
Flags override the file.  A repeated key keeps its last value and emits a
ConfigWarning.  Unknown keys, unparsable values and missing required keys
raise ConfigError naming the key.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

COMMANDS = ("simulate", "probe", "convergence", "selftest")
_RUN = ("simulate", "convergence")


class ConfigError(ValueError):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class ConfigWarning(UserWarning):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float(text: str) -> float:
    t = text.strip().lower()
    if t in ("pi", "2pi", "2*pi"):
        return math.pi * (2 if "2" in t else 1)
    value = float(t)
    if not math.isfinite(value):
        raise ValueError("not finite")
    return value


def _opt_float(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("", "none", "auto") else _float(text)


def _int_list(text: str) -> tuple:
    items = [x for x in text.replace(" ", "").split(",") if x]
    if not items:
        raise ValueError("empty list")
    return tuple(int(x) for x in items)


def _choice(*options) -> Callable[[str], str]:
    def parse(text: str) -> str:
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return t
    parse.options = options
    return parse


@dataclass(frozen=True)
class Key:
    name: str
    parse: Callable[[str], Any]
    default: Any
    commands: tuple
    doc: str
    required: bool = False


PROBE_NAMES = ("bilinear_strichartz", "N_estimate", "product_rule", "homogeneous_product",
               "trilinear", "transference")

SCHEMA = {k.name: k for k in [
    Key("seed", int, 0, ("simulate", "probe", "convergence"), "master seed for random data and probe trials"),
    Key("outdir", str, None, ("simulate", "probe", "convergence"), "output directory", required=True),
    # simulation
    Key("N", int, 64, _RUN + ("probe",), "grid points per axis (power of two); probes default to 256"),
    Key("L", _float, 2 * math.pi, _RUN + ("probe",), "torus side length"),
    Key("T", _float, 1.0, _RUN, "final time"),
    Key("dt", _float, 1e-3, _RUN, "time step (shrunk so that T is hit exactly)"),
    Key("m", _float, 0.0, _RUN, "mass"),
    Key("s", _opt_float, None, _RUN + ("probe",),
        "Sobolev exponent (run default 0.5; probe default is probe-specific)"),
    Key("stride", int, 100, ("simulate",), "steps between written snapshots"),
    Key("data", _choice("gaussian", "random"), "gaussian", _RUN, "initial data family"),
    Key("norm", _float, 1.0, _RUN, "H^s norm of the initial data"),
    Key("width", _float, 0.6, _RUN, "Gaussian width"),
    Key("kx", _float, 2.0, _RUN, "Gaussian carrier wavenumber, x component"),
    Key("ky", _float, 1.0, _RUN, "Gaussian carrier wavenumber, y component"),
    Key("nonlinear", _bool, True, _RUN, "include the cubic term (false gives the linear flow)"),
    Key("regime", _choice("theorem", "explore"), "theorem", _RUN + ("probe",),
        "theorem: enforce 1/4 < s < 1 for runs and the probe's exponent range; explore: no check"),
    Key("snapshots", _bool, True, ("simulate",), "write CSDF snapshot files"),
    # probes
    Key("probe", _choice(*PROBE_NAMES), None, ("probe",), "probe name", required=True),
    Key("a", _float, 0.0, ("probe",), "fractional derivative order (Strichartz, transference)"),
    Key("q", _opt_float, None, ("probe",), "time exponent (default from 1/q + 1/(2r) = 1/2)"),
    Key("r", _float, 2.0, ("probe",), "space exponent"),
    Key("alpha", _float, 0.5, ("probe",), "derivative order on g in the product rule"),
    Key("s1", _opt_float, None, ("probe",), "homogeneous product: exponent of the product"),
    Key("s2", _opt_float, None, ("probe",), "homogeneous product: exponent of f"),
    Key("s3", _opt_float, None, ("probe",), "homogeneous product: exponent of g"),
    Key("trials", int, 100, ("probe",), "trials per dyadic scale"),
    Key("scales", _int_list, (1, 2, 4, 8, 16, 32, 64), ("probe",), "comma-separated dyadic scales"),
    Key("interval", _float, 1.0, ("probe",), "length of the time interval [0, I]"),
    Key("nt", int, 64, ("probe",), "time samples on the interval"),
    Key("workers", int, 1, ("probe",), "worker processes for trials (capped by CSD_THREADS)"),
]}

COMMAND_DEFAULTS = {"probe": {"N": 256}}


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.values["seed"]

    @property
    def outdir(self) -> Optional[Path]:
        v = self.values.get("outdir")
        return None if v is None else Path(v)

    @property
    def stride(self) -> Optional[int]:
        return self.values.get("stride")

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def replace(self, **changes) -> "RunConfig":
        values = dict(self.values)
        for k, v in changes.items():
            if k not in values:
                raise ConfigError(f"unknown key {k!r} for command {self.command}", k)
            values[k] = v
        return RunConfig(self.command, values)

    def lines(self) -> list[str]:
        from .io import _fmt
        out = [f"# resolved configuration for '{self.command}'", f"command = {self.command}"]
        for k, v in self.values.items():
            out.append(f"{k} = {'none' if v is None else _fmt(v)}")
        return out

    def echo(self, directory=None) -> Path:
        """Write the resolved configuration as ``config.resolved`` into the output directory."""
        directory = Path(directory if directory is not None else self.outdir)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / "config.resolved"
        path.write_text("\n".join(self.lines()) + "\n")
        return path


def keys_for(command: str) -> list[Key]:
    return [k for k in SCHEMA.values() if command in k.commands]


def parse_text(text: str) -> dict[str, str]:
    """Raw key -> value strings from a config document."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {body!r}")
        key, value = (x.strip() for x in body.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in raw:
            warnings.warn(f"duplicate key {key!r} on line {lineno}: last occurrence wins",
                          ConfigWarning, stacklevel=3)
        raw[key] = value
    return raw


def _convert(command: str, key: str, value) -> Any:
    spec = SCHEMA.get(key)
    if spec is None or command not in spec.commands:
        raise ConfigError(f"unknown key {key!r} for command {command}", key)
    if not isinstance(value, str):
        return value
    try:
        return spec.parse(value)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot parse {value!r} ({exc})", key) from None


def _validate(cfg: RunConfig):
    v = cfg.values
    positive_int = ["N", "stride", "trials", "nt", "workers"]
    for k in positive_int:
        if k in v and v[k] < 1:
            raise ConfigError(f"key {k!r} must be at least 1", k)
    if "N" in v and v["N"] & (v["N"] - 1):
        raise ConfigError("key 'N' must be a power of two", "N")
    for k in ("L", "T", "dt", "interval"):
        if k in v and v[k] <= 0:
            raise ConfigError(f"key {k!r} must be positive", k)
    if "scales" in v and any(x < 1 or x & (x - 1) for x in v["scales"]):
        raise ConfigError("key 'scales' must list powers of two", "scales")
    if cfg.command in _RUN:
        if v["s"] is None:
            v["s"] = 0.5
        if v["regime"] == "theorem" and not 0.25 < v["s"] < 1:
            raise ConfigError(f"key 's' = {v['s']} lies outside (1/4, 1) required in theorem regime", "s")


def parse_config(command: str, file=None, flags: Optional[dict] = None, text: Optional[str] = None) -> RunConfig:
    """Resolve a configuration: defaults, then the document, then ``flags``.

    The document is read from the path ``file`` or given directly as ``text``.
    ``flags`` maps keys to strings or already-typed values; None values are
    ignored.
    """
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}", "command")
    values = {k.name: COMMAND_DEFAULTS.get(command, {}).get(k.name, k.default) for k in keys_for(command)}
    if file is not None:
        try:
            text = Path(file).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}", "config") from None
    if text is not None:
        for key, value in parse_text(text).items():
            if key == "command":
                if value != command:
                    raise ConfigError(f"config is for command {value!r}, not {command!r}", key)
                continue
            values[key] = _convert(command, key, value)
    for key, value in (flags or {}).items():
        if value is not None:
            values[key] = _convert(command, key, value)
    for k in keys_for(command):
        if k.required and values.get(k.name) is None:
            raise ConfigError(f"missing required key {k.name!r}", k.name)
    cfg = RunConfig(command, values)
    _validate(cfg)
    return cfg
