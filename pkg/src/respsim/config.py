"""Run configuration: one YAML document (JSON is accepted as a subset).

All quantities are in dimensionless model units: times in units of the
inverse frequency scale used by the Hamiltonian, rates in the reciprocal.
Missing optional keys take the defaults listed in ``SCHEMA``; unknown keys
are errors.  Complex matrices are written as ``{real: [[...]], imag: [[...]]}``
or as a plain nested list when real.
"""

import copy
import difflib
import hashlib
import inspect
import json
import math
from dataclasses import dataclass

import numpy as np
import yaml

from . import models

PRESETS = {
    "example1": models.preset_example1,
    "example2": models.preset_example2,
    "single_emitter": models.single_emitter,
}
AUTO = "auto"


@dataclass(frozen=True)
class ConfigIssue:
    path: str
    message: str
    line: int = None

    def __str__(self):
        where = f"line {self.line}: " if self.line else ""
        return f"{where}{self.path}: {self.message}" if self.path else f"{where}{self.message}"


class ConfigError(ValueError):
    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {i}" for i in self.issues))


@dataclass(frozen=True)
class Field:
    kind: str
    default: object = None
    required: bool = False
    positive: bool = False
    choices: tuple = None


SCHEMA = {
    "model": {
        "preset": Field("str", choices=tuple(PRESETS)),
        "params": Field("mapping", {}),
        "inline": Field("mapping"),
        "manifold_cap": Field("int", 1, positive=True),
        "n_max": Field("int", 1, positive=True),
    },
    "grid": {
        "dt": Field("float", required=True, positive=True),
        "t_max_m": Field("float_or_auto", AUTO),
        "t_max_int": Field("float_or_auto", AUTO),
    },
    "pulse": {
        "t_gamma": Field("float", positive=True),
        "n_gamma": Field("float", positive=True),
        "gamma": Field("float", positive=True),
        "same_time_coeff": Field("float", 0.5),
    },
    "aux": {
        "chi": Field("float", positive=True),
        "chi_sq": Field("float", positive=True),
    },
    "wavepacket": {
        "shape": Field("str", "gaussian", choices=("gaussian",)),
        "sigma_t": Field("float", 100.0, positive=True),
        "t0": Field("float", 100.0),
        "t_eval": Field("float", 200.0),
        "times": Field("range"),
        "span": Field("float", 6.0, positive=True),
    },
    "sampling": {
        "enabled": Field("bool", False),
        "N": Field("int", 10000, positive=True),
        "seed": Field("int", 0),
    },
    "convolve": {
        "source": Field("str", "exact", choices=("exact", "protocol", "sampled")),
        "quadrature": Field("str", "trapezoid", choices=("trapezoid", "riemann")),
        "reference_dt": Field("float", 0.5, positive=True),
        "scale": Field("str", "peak", choices=("peak", "reference")),
    },
    "auxcheck": {
        "chi_sq": Field("float_list", [0.5, 5.0, 50.0]),
        "t_probe": Field("float", 100.0, positive=True),
        "times": Field("range"),
    },
    "budget": {
        "target_sigma": Field("float", 0.01, positive=True),
        "dt": Field("float", 10.0, positive=True),
        "domain": Field("float", 1000.0, positive=True),
        "p_typical": Field("float", 0.01, positive=True),
        "n_gamma": Field("float", 1.0, positive=True),
    },
    "sweep": {
        "axes": Field("mapping", {}),
        "quantity": Field("str", "population", choices=("population", "greens_point")),
        "t_m": Field("float", 50.0),
        "t_int": Field("float", 250.0),
    },
    "output": {
        "dir": Field("str", "out"),
    },
}
REQUIRED_SECTIONS = ("model", "grid")
INLINE_KEYS = {
    "hamiltonian": True,
    "coupling": True,
    "grading": True,
    "dissipators": False,
    "omega0": False,
    "measured_state": False,
    "ground_state": False,
    "env_dim": False,
    "name": False,
}
# short names accepted by sweeps and overrides
AXIS_ALIASES = {
    "dt": "grid.dt",
    "t_gamma": "pulse.t_gamma",
    "n_gamma": "pulse.n_gamma",
    "chi": "aux.chi",
    "chi_sq": "aux.chi_sq",
    "sigma_t": "wavepacket.sigma_t",
    "t_eval": "wavepacket.t_eval",
    "N": "sampling.N",
    "seed": "sampling.seed",
}


def _suggest(key, options):
    close = difflib.get_close_matches(key, list(options), n=1, cutoff=0.5)
    return f"; did you mean {close[0]!r}?" if close else ""


def _line_index(text):
    """Map dotted key paths to 1-based source lines."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    lines = {}

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}.{k.value}" if prefix else str(k.value)
                lines[path] = k.start_mark.line + 1
                walk(v, path)

    walk(root, "")
    return lines


def _coerce(field, value, path, issues):
    kind = field.kind
    bad = lambda what: issues.append(ConfigIssue(path, f"expected {what}, got {value!r}"))  # noqa: E731
    if kind == "float" or (kind == "float_or_auto" and value != AUTO):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return bad("a number" + (" or 'auto'" if kind == "float_or_auto" else ""))
        value = float(value)
        if not math.isfinite(value):
            return bad("a finite number")
        if field.positive and value <= 0:
            issues.append(ConfigIssue(path, f"must be positive (model time/rate units), got {value!r}"))
        return value
    if kind == "float_or_auto":
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            return bad("an integer")
        if field.positive and value <= 0:
            issues.append(ConfigIssue(path, f"must be positive, got {value!r}"))
        return value
    if kind == "bool":
        return value if isinstance(value, bool) else bad("true or false")
    if kind == "str":
        if not isinstance(value, str):
            return bad("a string")
        if field.choices and value not in field.choices:
            issues.append(ConfigIssue(path, f"must be one of {list(field.choices)}, got {value!r}" + _suggest(value, field.choices)))
        return value
    if kind == "mapping":
        return copy.deepcopy(value) if isinstance(value, dict) else bad("a mapping")
    if kind == "float_list":
        if isinstance(value, str):
            try:
                return parse_axis_values(value)
            except ValueError as exc:
                return issues.append(ConfigIssue(path, str(exc)))
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            return bad("a list of numbers")
        return [float(v) for v in value]
    if kind == "range":
        if isinstance(value, list):
            return _coerce(Field("float_list"), value, path, issues)
        if not isinstance(value, dict) or set(value) != {"start", "stop", "step"}:
            return bad("a list of numbers or {start, stop, step}")
        out = {k: _coerce(Field("float"), value[k], f"{path}.{k}", issues) for k in ("start", "stop", "step")}
        if out["step"] is not None and out["step"] <= 0:
            issues.append(ConfigIssue(f"{path}.step", "must be positive"))
        return out
    raise AssertionError(kind)


def expand_range(spec):
    if spec is None:
        return None
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    n = int(math.floor((spec["stop"] - spec["start"]) / spec["step"] + 1e-9)) + 1
    return spec["start"] + spec["step"] * np.arange(max(n, 0))


def parse_axis_values(text):
    """``"1,2.5,4"`` or ``"5..50"`` (unit step) or ``"5..50:2.5"``."""
    text = str(text).strip()
    try:
        if ".." in text:
            lo, _, rest = text.partition("..")
            hi, _, step = rest.partition(":")
            lo, hi, step = float(lo), float(hi), float(step) if step else 1.0
            if step <= 0 or hi < lo:
                raise ValueError
            return [float(v) for v in expand_range({"start": lo, "stop": hi, "step": step})]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"cannot parse axis values {text!r}; use 'a,b,c' or 'lo..hi[:step]'") from None


def _complex_matrix(value, path, issues):
    try:
        if isinstance(value, dict):
            extra = set(value) - {"real", "imag"}
            if extra or "real" not in value:
                raise ValueError("needs 'real' and optional 'imag'")
            re = np.asarray(value["real"], dtype=float)
            im = np.asarray(value.get("imag", np.zeros_like(re)), dtype=float)
            if re.shape != im.shape:
                raise ValueError("real and imag parts differ in shape")
            m = re + 1j * im
        else:
            m = np.asarray(value, dtype=float).astype(complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"must be a square matrix, got shape {m.shape}")
        return m
    except (ValueError, TypeError) as exc:
        issues.append(ConfigIssue(path, f"bad matrix: {exc}"))
        return None


def _check_model(sec, issues):
    preset, inline, params = sec.get("preset"), sec.get("inline"), sec.get("params") or {}
    if (preset is None) == (inline is None):
        issues.append(ConfigIssue("model", "give exactly one of 'preset' or 'inline'"))
        return
    if preset is not None and preset in PRESETS:
        names = [p for p in inspect.signature(PRESETS[preset]).parameters if p != "overrides"]
        if preset == "example2":
            names += list(models.EXAMPLE2_PARAMS)
        for key in params:
            if key not in names:
                issues.append(ConfigIssue(f"model.params.{key}", f"unknown parameter for preset {preset!r}" + _suggest(key, names)))
    if inline is not None:
        if params:
            issues.append(ConfigIssue("model.params", "only valid with a preset"))
        for key in inline:
            if key not in INLINE_KEYS:
                issues.append(ConfigIssue(f"model.inline.{key}", "unknown key" + _suggest(key, INLINE_KEYS)))
        for key, req in INLINE_KEYS.items():
            if req and key not in inline:
                issues.append(ConfigIssue(f"model.inline.{key}", "required key missing"))


def _normalize(raw, issues):
    data = {}
    for section, fields in SCHEMA.items():
        sec_raw = raw.get(section)
        if sec_raw is None:
            sec_raw = {}
        if not isinstance(sec_raw, dict):
            issues.append(ConfigIssue(section, f"expected a mapping, got {sec_raw!r}"))
            sec_raw = {}
        sec = {}
        for key, value in sec_raw.items():
            if value is None and key in fields:
                continue
            if key not in fields:
                issues.append(ConfigIssue(f"{section}.{key}", "unknown key" + _suggest(str(key), fields)))
                continue
            sec[key] = _coerce(fields[key], value, f"{section}.{key}", issues)
        for key, f in fields.items():
            if key not in sec:
                if f.required and section in raw:
                    issues.append(ConfigIssue(f"{section}.{key}", "required key missing"))
                sec[key] = copy.deepcopy(f.default)
        data[section] = sec

    if "model" in raw:
        _check_model(data["model"], issues)
    pulse = data["pulse"]
    given = [k for k in ("t_gamma", "n_gamma", "gamma") if pulse[k] is not None]
    if len(given) == 3 and not math.isclose(pulse["gamma"] * pulse["t_gamma"], pulse["n_gamma"], rel_tol=1e-12):
        issues.append(ConfigIssue("pulse", "gamma, t_gamma and n_gamma are inconsistent (need n_gamma = gamma * t_gamma)"))
    elif len(given) < 3 and all(pulse[k] is not None and pulse[k] > 0 for k in given):
        if "gamma" in given and "t_gamma" in given:
            pulse["n_gamma"] = pulse["gamma"] * pulse["t_gamma"]
        elif "gamma" in given and "n_gamma" in given:
            pulse["t_gamma"] = pulse["n_gamma"] / pulse["gamma"]
        else:
            pulse["t_gamma"] = 1.0 if pulse["t_gamma"] is None else pulse["t_gamma"]
            pulse["n_gamma"] = 1.0 if pulse["n_gamma"] is None else pulse["n_gamma"]
        pulse["gamma"] = None
    aux = data["aux"]
    if aux["chi"] is not None and aux["chi_sq"] is not None:
        issues.append(ConfigIssue("aux", "give only one of 'chi' or 'chi_sq'"))
    elif aux["chi"] is None and aux["chi_sq"] is None:
        aux["chi_sq"] = 5.0
    axes = {}
    for name, values in data["sweep"]["axes"].items():
        path = f"sweep.axes.{name}"
        if resolve_axis(name) is None:
            issues.append(ConfigIssue(path, "unknown axis" + _suggest(name, list(AXIS_ALIASES) + _all_paths())))
            continue
        axes[name] = _coerce(Field("float_list"), values, path, issues)
    data["sweep"]["axes"] = axes
    return data


def _all_paths():
    return [f"{s}.{k}" for s, fields in SCHEMA.items() for k in fields]


def resolve_axis(name):
    """Dotted config path for a sweep axis name, or ``None`` if unknown."""
    path = AXIS_ALIASES.get(name, name)
    section, _, key = path.partition(".")
    f = SCHEMA.get(section, {}).get(key)
    if f is None or f.kind not in ("float", "int", "float_or_auto"):
        return None
    return path


def _set_path(tree, path, value):
    *head, last = path.split(".")
    node = tree
    for key in head:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError([ConfigIssue(path, "cannot override inside a non-mapping value")])
    node[last] = value


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Validated configuration; ``data`` holds every key with defaults filled in."""

    data: dict

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.canonical() == other.canonical()

    def __getitem__(self, section):
        return self.data[section]

    def canonical(self):
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def to_text(self):
        return yaml.safe_dump(self.data, sort_keys=True)

    def with_overrides(self, overrides):
        """New config with dotted-path ``{path: value}`` overrides applied."""
        raw = copy.deepcopy(self.data)
        for path, value in overrides.items():
            target = AXIS_ALIASES.get(path, path)
            if target == "aux.chi":
                raw["aux"]["chi_sq"] = None
            elif target == "aux.chi_sq":
                raw["aux"]["chi"] = None
            elif target in ("pulse.t_gamma", "pulse.n_gamma"):
                raw["pulse"]["gamma"] = None
            if isinstance(value, (np.floating, np.integer)):
                value = value.item()
            if target in ("sampling.N", "sampling.seed", "model.manifold_cap", "model.n_max") and isinstance(value, float):
                if not value.is_integer():
                    raise ConfigError([ConfigIssue(target, f"expected an integer, got {value!r}")])
                value = int(value)
            _set_path(raw, target, value)
        return from_mapping(_strip_none(raw))

    # ------------------------------------------------------------ builders
    @property
    def chi(self):
        aux = self.data["aux"]
        return aux["chi"] if aux["chi"] is not None else math.sqrt(aux["chi_sq"])

    def build_model(self):
        sec = self.data["model"]
        if sec["preset"] is not None:
            made = PRESETS[sec["preset"]](**sec["params"])
            model = made[0] if isinstance(made, tuple) else made
        else:
            model = build_inline_model(sec["inline"])
        models.ensure_valid(model)
        return model

    def build_composite(self, model=None):
        sec = self.data["model"]
        return models.CompositeModel(
            model if model is not None else self.build_model(),
            models.ModeSpec(n_max=sec["n_max"]),
            models.AuxSpec(self.chi),
            manifold_cap=sec["manifold_cap"],
        )


def _strip_none(raw):
    """Drop keys whose value is ``None`` so defaults are re-derived."""
    return {s: {k: v for k, v in sec.items() if v is not None} if isinstance(sec, dict) else sec for s, sec in raw.items()}


def build_inline_model(spec):
    issues = []
    h = _complex_matrix(spec["hamiltonian"], "model.inline.hamiltonian", issues)
    l_op = _complex_matrix(spec["coupling"], "model.inline.coupling", issues)
    ys = [_complex_matrix(y, f"model.inline.dissipators[{n}]", issues) for n, y in enumerate(spec.get("dissipators", []))]
    if issues:
        raise ConfigError(issues)
    kwargs = {k: spec[k] for k in ("omega0", "measured_state", "ground_state", "env_dim", "name") if k in spec}
    model = models.MatterModel(hamiltonian=h, coupling=l_op, grading=tuple(spec["grading"]), dissipators=tuple(ys), **kwargs)
    problems = models.validate(model)
    if problems:
        raise ConfigError([ConfigIssue("model.inline", p) for p in problems])
    return model


def from_mapping(raw, lines=None):
    lines = lines or {}
    issues = []
    if not isinstance(raw, dict):
        raise ConfigError([ConfigIssue("", f"top level must be a mapping, got {type(raw).__name__}")])
    if not raw:
        raise ConfigError(
            [ConfigIssue("", f"empty configuration; required sections: {', '.join(REQUIRED_SECTIONS)} (grid.dt is required)")]
        )
    for key in raw:
        if key not in SCHEMA:
            issues.append(ConfigIssue(str(key), "unknown section" + _suggest(str(key), SCHEMA)))
    for section in REQUIRED_SECTIONS:
        if section not in raw:
            issues.append(ConfigIssue(section, "required section missing"))
    data = _normalize(raw, issues)
    if not issues and data["model"]["inline"] is not None:
        try:
            build_inline_model(data["model"]["inline"])
        except ConfigError as exc:
            issues.extend(exc.issues)
    if issues:
        raise ConfigError([_with_line(i, lines) for i in issues])
    return RunConfig(data)


def _with_line(issue, lines):
    path = issue.path
    while path and path not in lines:
        path = path.rpartition(".")[0]
    return ConfigIssue(issue.path, issue.message, lines.get(path))


def parse_config(text):
    """Parse YAML (or JSON) text into a :class:`RunConfig`; raises :class:`ConfigError`."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError([ConfigIssue("", f"syntax error: {getattr(exc, 'problem', exc)}", line)]) from None
    if raw is None:
        raw = {}
    return from_mapping(raw, _line_index(text))


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())
