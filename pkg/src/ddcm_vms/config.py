"""Run specifications and the flat ``key = value`` configuration format.

Lines hold one ``key = value`` pair; ``#`` starts a comment. Lists are
comma separated. Unset stabilization constants fall back to the
benchmark defaults of the chosen formulation.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, fields, replace

from .errors import ConfigWarning, InvalidConfig, ParseError
from .formulation import BC_MODES, FORMULATIONS, METHODS, ProblemConfig, make_config

COMMANDS = ("mms", "inclusion", "mesh-gen")
K_KEYS = ("k_u", "k_e", "k_s", "k_lam", "k_mu")


@dataclass(frozen=True)
class RunSpec:
    command: str = "mms"
    formulation: str | None = None
    method: str = "asgs"
    degree: int = 1
    bc_mode: str | None = None
    meshes: tuple = (10, 20, 40, 80)
    kappa: float = 1.0
    zeta: float | None = None
    ell: float = 1.0
    k_u: float | None = None
    k_e: float | None = None
    k_s: float | None = None
    k_lam: float | None = None
    k_mu: float | None = None
    noise: tuple = (0.0,)
    seed: int | None = None
    out: str = "."
    n: int = 40
    inclusion: bool = False

    @property
    def example(self):
        return 2 if self.command == "inclusion" else 1

    def problem_config(self, formulation=None):
        """ProblemConfig for ``formulation`` (default: this run's formulation, else primal)."""
        form = formulation or self.formulation or "primal"
        kw = {k: getattr(self, k) for k in K_KEYS if getattr(self, k) is not None}
        if self.bc_mode is not None:
            kw["bc_mode"] = self.bc_mode
        zeta = self.zeta if self.zeta is not None else (1000.0 if self.example == 2 else 1.0)
        return make_config(form, self.method, example=self.example, degree=self.degree,
                           kappa=self.kappa, zeta=zeta, ell=self.ell, **kw)

    def validate(self):
        if self.command not in COMMANDS:
            raise InvalidConfig(f"unknown command {self.command!r}")
        if self.formulation is not None and self.formulation not in FORMULATIONS:
            raise InvalidConfig(f"formulation must be one of {FORMULATIONS}")
        if self.method not in METHODS:
            raise InvalidConfig(f"method must be one of {METHODS}")
        if self.bc_mode is not None and self.bc_mode not in BC_MODES:
            raise InvalidConfig(f"bc_mode must be one of {BC_MODES}")
        if not self.meshes or any(m < 1 for m in self.meshes):
            raise InvalidConfig("meshes must be positive integers")
        if any(d < 0 for d in self.noise):
            raise InvalidConfig("noise levels must be non-negative")
        if self.n < 1:
            raise InvalidConfig("n must be a positive integer")
        if self.command == "inclusion" and self.seed is None:
            raise InvalidConfig("the inclusion run requires a seed")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConfigWarning)
            for form in (FORMULATIONS if self.formulation is None else (self.formulation,)):
                self.problem_config(form)  # raises InvalidConfig on bad constants
        return self


def _int_list(v):
    return tuple(int(t) for t in v.split(",") if t.strip())


def _float_list(v):
    return tuple(float(t) for t in v.split(",") if t.strip())


def _opt_float(v):
    return None if v.lower() == "none" else float(v)


def _opt_str(v):
    return None if v.lower() == "none" else v


def _bool(v):
    if v.lower() in ("1", "true", "yes", "on"):
        return True
    if v.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(v)


PARSERS = {
    "command": str, "formulation": _opt_str, "method": str, "degree": int,
    "bc_mode": _opt_str, "meshes": _int_list, "kappa": float, "zeta": _opt_float,
    "ell": float, "k_u": _opt_float, "k_e": _opt_float, "k_s": _opt_float,
    "k_lam": _opt_float, "k_mu": _opt_float, "noise": _float_list,
    "seed": lambda v: None if v.lower() == "none" else int(v, 0),
    "out": str, "n": int, "inclusion": _bool,
}
assert set(PARSERS) == {f.name for f in fields(RunSpec)}


def parse_config_values(text):
    """Parse the config text into a dict of typed values (no defaults applied)."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", lineno)
        key, value = (t.strip() for t in line.split("=", 1))
        if key not in PARSERS:
            raise ParseError(f"unknown key {key!r}", lineno)
        if key in out:
            raise ParseError(f"duplicate key {key!r}", lineno)
        try:
            out[key] = PARSERS[key](value)
        except ValueError:
            raise ParseError(f"cannot parse value {value!r} for {key!r}", lineno) from None
    return out


def parse_config(text, base=None):
    """RunSpec from config text; ``base`` supplies values the file leaves unset."""
    spec = replace(base or RunSpec(), **parse_config_values(text))
    return spec.validate()


def _fmt(v):
    if isinstance(v, tuple):
        return ",".join(repr(t) for t in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_config_text(spec):
    """Serialize so that ``parse_config(to_config_text(s)) == s``."""
    lines = ["# ddcm run settings"]
    for k, v in asdict(spec).items():
        lines.append(f"{k} = {'none' if v is None else _fmt(v)}")
    return "\n".join(lines) + "\n"


def problem_config_fields():
    return tuple(f.name for f in fields(ProblemConfig))
