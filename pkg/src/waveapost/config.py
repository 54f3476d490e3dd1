"""Run configuration: flat ``key = value`` files plus CLI overrides."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .errors import ConfigError

DEFAULT_H_SWEEP = (0.3, 0.15, 0.075, 0.0375)


@dataclass
class RunConfig:
    """Experiment parameters; defaults reproduce the Gaussian-pulse setup."""

    a: float = -10.0
    b: float = 10.0
    H: float = 0.3
    cfl: float = 0.52            # tau = cfl * H (up to rounding T/N)
    T: float = 1.0
    window_lo: float = -1.9
    window_hi: float = 3.9
    use_window: bool = True
    move_window: bool = True
    theta: float = 0.75
    mass: str = "lumped"
    degree: int = 1
    problem: str = "gaussian_pulse"
    mu0_space: str = "printed"
    stability_check: bool = True
    out: str = "out"
    h_sweep: tuple = field(default_factory=lambda: DEFAULT_H_SWEEP)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.b <= self.a:
            raise ConfigError("domain needs b > a")
        if self.H <= 0 or self.cfl <= 0 or self.T < 0:
            raise ConfigError("H, cfl must be positive and T non-negative")
        if not 0.0 < self.theta < 1.0:
            raise ConfigError("theta must lie in (0, 1)")
        if self.mass not in ("lumped", "consistent"):
            raise ConfigError("mass must be 'lumped' or 'consistent'")
        if self.degree != 1:
            raise ConfigError("only degree 1 is supported")
        if self.use_window and not (self.a <= self.window_lo < self.window_hi <= self.b):
            raise ConfigError("window must be a non-empty subinterval of the domain")
        if self.mu0_space not in ("printed", "shifted"):
            raise ConfigError("mu0_space must be 'printed' or 'shifted'")

    @property
    def window0(self):
        return (self.window_lo, self.window_hi) if self.use_window else None


_BOOL = {"true": True, "1": True, "yes": True, "on": True,
         "false": False, "0": False, "no": False, "off": False}


def _convert(name: str, raw: str, kind):
    raw = raw.strip()
    try:
        if kind is bool:
            return _BOOL[raw.lower()]
        if kind is float:
            return float(raw)
        if kind is int:
            return int(raw)
        if kind is tuple:
            return tuple(float(v) for v in raw.replace(",", " ").split())
        return raw
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad value for '{name}': {raw!r}") from exc


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional file and CLI override dict."""
    kinds = {f.name: (bool if f.name in ("use_window", "move_window",
                                         "stability_check")
                      else tuple if f.name == "h_sweep"
                      else str if f.name in ("mass", "problem", "mu0_space", "out")
                      else int if f.name == "degree" else float)
             for f in fields(RunConfig)}
    values: dict = {}
    if path:
        try:
            text = open(path, encoding="utf-8").read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in kinds:
                raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
            values[key] = _convert(key, raw, kinds[key])
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in kinds:
            raise ConfigError(f"unknown config key '{key}'")
        values[key] = val if not isinstance(val, str) else _convert(key, val, kinds[key])
    return RunConfig(**values)
