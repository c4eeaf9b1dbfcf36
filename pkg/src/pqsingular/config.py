"""Run configuration: an INI file with one section per module, plus overrides.

Every key can be overridden on the command line as ``--section.key=value``.
Lists are comma-separated.  Unknown sections or keys are rejected so that a
typo in a sweep script fails before any compute starts.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .domain_mesh import INTERVAL, RADIAL, Domain
from .energy_solver import SolverSettings
from .weights import ProblemSpec

DEFAULTS = {
    "problem": {
        "p": "2",
        "q": "1.5",
        "delta": "0.5",
        "beta": "0.2",
        "c_f": "1",
        "domain": INTERVAL,
        "extent": "1",
        "dim": "1",
    },
    "mesh": {"n": "2048", "grading": "3"},
    "solver": {
        "mu_schedule": ",".join(repr(10.0**-k) for k in range(1, 9)),
        "newton_tol": "1e-10",
        "newton_max_iter": "200",
        "picard_tol": "1e-9",
        "picard_max_iter": "400",
        "line_search_shrink": "0.5",
        "method": "newton",
    },
    "continuation": {"eps0": "1e-2", "ratio": "0.1", "steps": "4"},
    "solve": {"eps": "1e-6"},
    "oracle": {"rho": "1", "alpha": "1", "h": "auto", "r_max": "0.05", "r_probe": "auto", "scale_alpha": "2"},
    "probe": {
        "eps": "1e-6",
        "window": "1e-4,1e-2",
        "L": "",
        "rho": "0.8,1.2",
        "levels": "512,1024,2048,4096",
        "grading": "3",
        "c_pair": "1,2",
        "exploratory": "false",
        "gaps": "0.5,0.2,0.1,0.05",
        "gammas": "1,2",
        "nonexistence_levels": "512,1024,2048",
        "nonexistence_grading": "6",
    },
    "output": {"dir": "runs/latest"},
}


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _ints(text: str) -> tuple:
    return tuple(int(t) for t in text.split(",") if t.strip())


@dataclass
class RunConfig:
    raw: dict
    spec: ProblemSpec
    settings: SolverSettings
    n: int
    grading: float
    eps0: float
    ratio: float
    steps: int
    output_dir: Path

    def get(self, section: str, key: str) -> str:
        return self.raw[section][key]

    def getfloat(self, section, key) -> float:
        return float(self.raw[section][key])

    def getfloats(self, section, key) -> tuple:
        return _floats(self.raw[section][key])

    def getints(self, section, key) -> tuple:
        return _ints(self.raw[section][key])

    def getbool(self, section, key) -> bool:
        return self.raw[section][key].strip().lower() in ("1", "true", "yes", "on")

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        parser.read_dict(self.raw)
        lines = []
        for sec in parser.sections():
            lines.append(f"[{sec}]")
            lines.extend(f"{k} = {v}" for k, v in parser[sec].items())
            lines.append("")
        return "\n".join(lines)


def parse_override(arg: str) -> tuple[str, str, str]:
    if not arg.startswith("--") or "=" not in arg or "." not in arg.split("=", 1)[0]:
        raise ConfigError(f"overrides look like --section.key=value, got {arg!r}")
    lhs, value = arg[2:].split("=", 1)
    section, key = lhs.split(".", 1)
    return section, key, value


def load_config(path=None, overrides=()) -> RunConfig:
    raw = {sec: dict(vals) for sec, vals in DEFAULTS.items()}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        parser.optionxform = str
        if not parser.read(path):
            raise ConfigError(f"cannot read config file {path}")
        for sec in parser.sections():
            for key, val in parser[sec].items():
                _set(raw, sec, key, val)
    for arg in overrides:
        _set(raw, *parse_override(arg))
    return _validate(raw)


def _set(raw, section, key, value):
    if section not in raw:
        raise ConfigError(f"unknown config section [{section}]")
    if key not in raw[section]:
        raise ConfigError(f"unknown key {key!r} in [{section}]")
    raw[section][key] = value.strip()


def _validate(raw) -> RunConfig:
    try:
        pr = raw["problem"]
        kind = pr["domain"]
        if kind == INTERVAL:
            domain = Domain.interval(float(pr["extent"]))
        elif kind == RADIAL:
            domain = Domain.ball(float(pr["extent"]), int(pr["dim"]))
        else:
            raise ConfigError(f"unknown domain {kind!r}")
        spec = ProblemSpec(
            p=float(pr["p"]),
            q=float(pr["q"]),
            delta=float(pr["delta"]),
            beta=float(pr["beta"]),
            c_f=float(pr["c_f"]),
            domain=domain,
        )
        so = raw["solver"]
        settings = SolverSettings(
            mu_schedule=_floats(so["mu_schedule"]),
            newton_tol=float(so["newton_tol"]),
            newton_max_iter=int(so["newton_max_iter"]),
            picard_tol=float(so["picard_tol"]),
            picard_max_iter=int(so["picard_max_iter"]),
            line_search_shrink=float(so["line_search_shrink"]),
        )
        if so["method"] not in ("newton", "picard"):
            raise ConfigError("solver.method must be newton or picard")
        co = raw["continuation"]
        eps0, ratio, steps = float(co["eps0"]), float(co["ratio"]), int(co["steps"])
        if not eps0 > 0 or not 0 < ratio < 1 or steps < 0:
            raise ConfigError("continuation needs eps0 > 0, 0 < ratio < 1, steps >= 0")
        n, grading = int(raw["mesh"]["n"]), float(raw["mesh"]["grading"])
        if n < 2 or grading < 1:
            raise ConfigError("mesh needs n >= 2 and grading >= 1")
        for sec, key in (("probe", "window"), ("probe", "rho"), ("probe", "c_pair"), ("probe", "gaps"),
                         ("probe", "gammas")):
            _floats(raw[sec][key])
        for key in ("levels", "nonexistence_levels"):
            _ints(raw["probe"][key])
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(raw, spec, settings, n, grading, eps0, ratio, steps, Path(raw["output"]["dir"]))
