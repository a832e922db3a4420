"""Run configuration: INI sections with a fixed key set.

Every key is optional and has a default.  Unknown sections or keys, values
that fail to parse and values outside their domain raise
:class:`~slidingdisk.errors.ConfigError` naming the offending
``section.key``.  ``parse(cfg.to_ini())`` reproduces ``cfg`` exactly.
"""
from dataclasses import dataclass
import configparser
import math

import numpy as np

from .controls import ControlPath
from .disk import DiskParams, Potential, State
from .errors import ConfigError, SlidingDiskError
from .integrate import SCHEMES, SchemeSpec
from .noise import JumpComponent, LevyCharacteristics
from .stats import OBSERVABLES, EnsembleSpec

MAX_SEED = (1 << 64) - 1


def _float(text):
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _floats(text):
    text = text.strip()
    if not text:
        return ()
    return tuple(_float(t) for t in text.split(","))


def _seed(text):
    v = int(text, 0)
    if not 0 <= v <= MAX_SEED:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return v


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return parse


def _fmt(v):
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _optional(parse):
    def inner(text):
        return None if text == "default" else parse(text)

    return inner


def _jumps(text):
    """``family:rate:params`` items separated by ``;``.

    ``fixed:rate:z1,z2`` or ``gaussian:rate:m1,m2:s1,s2``.
    """
    out = []
    for item in filter(None, (s.strip() for s in text.split(";"))):
        parts = [s.strip() for s in item.split(":")]
        if parts[0] == "fixed" and len(parts) == 3:
            out.append(("fixed", _float(parts[1]), _floats(parts[2])))
        elif parts[0] == "gaussian" and len(parts) == 4:
            out.append(("gaussian", _float(parts[1]), _floats(parts[2]), _floats(parts[3])))
        else:
            raise ValueError(f"cannot read jump component {item!r}")
    return tuple(out)


def _fmt_jumps(jumps):
    items = []
    for j in jumps:
        items.append(":".join([j[0], repr(j[1])] + [",".join(repr(x) for x in part) for part in j[2:]]))
    return "; ".join(items)


# section -> key -> (parser, default)
SCHEMA = {
    "model": {
        "sigma_ratio": (_float, 1.0),
        "c": (_float, 0.1),
        "alpha": (_float, 5.0),
        "potential.kind": (_choice("cosine", "constant"), "cosine"),
        "potential.amplitude": (_float, 1.0),
        "potential.period": (_float, 1.0),
    },
    "integrator": {
        "scheme": (_choice(*SCHEMES), "baoab_split"),
        "h": (_float, 0.01),
        "T": (_float, 10.0),
        "stride": (int, 1),
    },
    "noise": {
        "kind": (_choice("brownian", "levy"), "brownian"),
        "dim": (int, 2),
        "drift": (_floats, ()),
        "gauss": (_floats, ()),
        "jumps": (_jumps, ()),
    },
    "ensemble": {
        "n_init": (int, 64),
        "n_noise": (int, 32),
        "init": (_choice("gibbs", "rest"), "gibbs"),
        "observable": (_choice(*OBSERVABLES), "x"),
        "record_dt": (_float, 1.0),
        "centering": (_choice("two_level", "single_level"), "two_level"),
        "fit.t0": (_float, 10.0),
        "fit.t1": (_float, 200.0),
    },
    "seed": {
        "master": (_seed, 0),
    },
    "simulate": {
        "start": (_floats, (0.0, 0.0, 0.0, 0.0)),
    },
    "control": {
        "start": (_floats, (0.0, 0.0, 0.0, 0.0)),
        "target": (_floats, (0.3, 2.0, 0.5, -0.2)),
        "t_total": (_float, 20.0),
        "n_knots": (int, 16),
        "eps": (_float, 1e-2),
        "gain": (_optional(_float), None),
        "n_starts": (int, 8),
        "suite.n": (int, 20),
        "suite.offset": (_float, 1.0),
    },
    "jacobian": {
        "t": (_float, 0.5),
        "h": (_float, 1e-3),
        "delta": (_float, 1e-4),
        "x0": (_optional(_float), None),
    },
    "tube": {
        "epsilon": (_float, 1.0),
        "horizon": (_float, 1.0),
        "n_samples": (int, 100000),
        "phi.slope": (_floats, ()),
    },
    "gibbs": {
        "n": (int, 10000),
        "T": (_float, 10.0),
    },
}

_FORMATTERS = {("noise", "jumps"): _fmt_jumps}


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration; ``values[section][key]`` holds typed values."""

    values: dict

    def get(self, section, key):
        return self.values[section][key]

    def with_seed(self, master):
        vals = {s: dict(kv) for s, kv in self.values.items()}
        vals["seed"]["master"] = _seed(str(master))
        return RunConfig(vals)

    @property
    def master_seed(self):
        return self.values["seed"]["master"]

    def to_ini(self):
        lines = []
        for section, keys in SCHEMA.items():
            lines.append(f"[{section}]")
            for key in keys:
                v = self.values[section][key]
                fmt = _FORMATTERS.get((section, key))
                text = fmt(v) if fmt else ("default" if v is None else _fmt(v))
                lines.append(f"{key} = {text}")
            lines.append("")
        return "\n".join(lines)

    # builders -----------------------------------------------------------

    def disk_params(self):
        m = self.values["model"]
        if m["potential.kind"] == "cosine":
            pot = Potential.cosine(m["potential.amplitude"], m["potential.period"])
        else:
            pot = Potential.constant()
        return DiskParams(m["sigma_ratio"], m["c"], m["alpha"], pot)

    def scheme(self):
        i = self.values["integrator"]
        return SchemeSpec(i["scheme"], i["h"])

    def noise(self):
        """``None`` for standard Brownian noise, else :class:`LevyCharacteristics`."""
        n = self.values["noise"]
        dim = n["dim"]
        if n["kind"] == "brownian" and not n["drift"] and not n["gauss"]:
            return None
        drift = np.array(n["drift"] or (0.0,) * dim)
        gauss = np.array(n["gauss"]).reshape(dim, dim) if n["gauss"] else np.eye(dim)
        jumps = []
        for j in n["jumps"] if n["kind"] == "levy" else ():
            if j[0] == "fixed":
                jumps.append(JumpComponent.fixed(j[1], j[2]))
            else:
                jumps.append(JumpComponent.gaussian(j[1], j[2], j[3]))
        return LevyCharacteristics(dim, drift, gauss, tuple(jumps))

    def ensemble(self):
        e = self.values["ensemble"]
        return EnsembleSpec(
            n_init=e["n_init"], n_noise=e["n_noise"], init=e["init"], observable=e["observable"],
            T=self.values["integrator"]["T"], record_dt=e["record_dt"],
        )

    def start_state(self):
        return State(*self.values["simulate"]["start"])

    def tube_path(self):
        slope = self.values["tube"]["phi.slope"] or (0.0,) * self.values["noise"]["dim"]
        return ControlPath.line(self.values["tube"]["horizon"], slope)


def default_config():
    return RunConfig({s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()})


def _check_domain(cfg):
    """Range checks that need no numerics; raise ConfigError naming the key."""
    v = cfg.values
    positive = [
        ("model", "sigma_ratio"), ("model", "potential.period"), ("integrator", "h"), ("integrator", "T"),
        ("ensemble", "record_dt"), ("control", "t_total"), ("control", "eps"), ("jacobian", "t"),
        ("jacobian", "h"), ("jacobian", "delta"), ("tube", "epsilon"), ("tube", "horizon"), ("gibbs", "T"),
        ("control", "suite.offset"),
    ]
    for s, k in positive:
        if not v[s][k] > 0:
            raise ConfigError(f"{s}.{k} must be > 0, got {v[s][k]!r}", f"{s}.{k}")
    at_least = [
        ("model", "c", 0.0), ("integrator", "stride", 1), ("noise", "dim", 1), ("ensemble", "n_init", 2),
        ("ensemble", "n_noise", 2), ("control", "n_knots", 8), ("control", "n_starts", 1), ("control", "suite.n", 1),
        ("tube", "n_samples", 100), ("gibbs", "n", 1000),
    ]
    for s, k, lo in at_least:
        if v[s][k] < lo:
            raise ConfigError(f"{s}.{k} must be >= {lo}, got {v[s][k]!r}", f"{s}.{k}")
    if v["model"]["alpha"] == 0:
        raise ConfigError("model.alpha must be non-zero", "model.alpha")
    for s in ("simulate", "control"):
        for k in ("start", "target") if s == "control" else ("start",):
            if len(v[s][k]) != 4:
                raise ConfigError(f"{s}.{k} needs four numbers (x, theta, v, omega)", f"{s}.{k}")
    n = v["noise"]
    dim = n["dim"]
    if n["drift"] and len(n["drift"]) != dim:
        raise ConfigError(f"noise.drift needs {dim} entries", "noise.drift")
    if n["gauss"] and len(n["gauss"]) != dim * dim:
        raise ConfigError(f"noise.gauss needs {dim * dim} entries (row-major)", "noise.gauss")
    if n["kind"] == "brownian" and n["jumps"]:
        raise ConfigError("noise.jumps given but noise.kind is brownian", "noise.jumps")
    for j in n["jumps"]:
        if j[1] < 0:
            raise ConfigError(f"noise.jumps rate must be >= 0, got {j[1]!r}", "noise.jumps")
        if any(len(part) != dim for part in j[2:]):
            raise ConfigError(f"noise.jumps sizes need {dim} entries", "noise.jumps")
        if j[0] == "gaussian" and any(s <= 0 for s in j[3]):
            raise ConfigError("noise.jumps gaussian sd must be > 0", "noise.jumps")
    if v["integrator"]["scheme"] == "baoab_split" and (n["kind"] == "levy" or n["drift"] or n["gauss"]):
        raise ConfigError(
            "integrator.scheme baoab_split needs standard Brownian noise; use euler_maruyama", "integrator.scheme"
        )
    if n["kind"] == "levy" or n["drift"] or n["gauss"]:
        try:
            cfg.noise()
        except SlidingDiskError as err:
            raise ConfigError(f"noise: {err}", "noise.gauss") from err
    e = v["ensemble"]
    if not e["fit.t0"] < e["fit.t1"]:
        raise ConfigError("ensemble.fit.t0 must be < ensemble.fit.t1", "ensemble.fit.t0")


def parse(text):
    """Parse INI text into a validated :class:`RunConfig`."""
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"cannot parse config: {err}") from err
    values = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", section)
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}", f"{section}.{key}")
            parser = SCHEMA[section][key][0]
            try:
                values[section][key] = parser(raw.strip())
            except (ValueError, TypeError) as err:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r} ({err})", f"{section}.{key}") from err
    cfg = RunConfig(values)
    _check_domain(cfg)
    return cfg


def load(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse(text)
