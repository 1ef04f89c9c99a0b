"""Experiment description files.

An experiment file is INI-style text read with :mod:`configparser`.
Values are Python literals where that parses (``0.6``, ``true`` is also
accepted) and bare strings otherwise; comma-separated values become lists.

Sections
--------
``[experiment]``
    ``mode`` (synthetic_sweep, real_fit or select), ``methods`` (subset of
    joint_vb, single_vb, spectral), ``output`` directory.
``[generator]``
    ``n``, ``K``, ``K_total`` (one per layer), ``families``, ``p`` and
    ``q`` (scalar or one per layer; layer ``l`` gets ``planted_theta(p, q)``),
    ``balanced``, ``redraw``.
``[sweep]``
    ``parameter`` (``q_prime``: the ``q`` of ``eval_layer``), ``values``,
    ``replicates``, ``base_seed``, ``eval_layer`` (1-based).
``[inference]``
    Any :class:`~jointsbm.inference.InferenceOptions` field, plus
    ``spectral_restarts`` for the k-means restarts of the spectral baseline.
``[input.1]``, ``[input.2]``, ...
    ``path`` (or ``paths`` for count averaging), ``format`` (dense_csv or
    edge_list_tsv), ``family``, ``preprocess`` (none, correlation, counts),
    ``threshold`` (``mean`` or a number; correlation only).
``[fit]``
    ``K`` and ``K_total`` for real_fit mode.
``[select]``
    ``K_total_range`` for select mode.

Relative paths are resolved against the directory of the experiment file.
"""

import ast
import configparser
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..generator import GeneratorConfig, planted_theta
from ..inference import InferenceOptions
from ..validation import InvalidConfiguration

__all__ = ["ExperimentSpec", "InputLayer", "SweepSpec", "load_spec", "parse_spec"]

MODES = ("synthetic_sweep", "real_fit", "select")
METHODS = ("joint_vb", "single_vb", "spectral")
_BOOLS = {"true": True, "false": False, "yes": True, "no": False}


def _scalar(text):
    text = text.strip()
    if text.lower() in _BOOLS:
        return _BOOLS[text.lower()]
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _value(text):
    if "," in text:
        return [_scalar(t) for t in text.split(",") if t.strip()]
    return _scalar(text)


def _as_list(v, length=None, name="value"):
    out = list(v) if isinstance(v, (list, tuple)) else [v]
    if length is not None:
        if len(out) == 1:
            out = out * length
        if len(out) != length:
            raise InvalidConfiguration(f"{name} needs 1 or {length} entries, got {len(out)}")
    return out


@dataclass
class SweepSpec:
    parameter: str = "q_prime"
    values: list = field(default_factory=lambda: [0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5])
    replicates: int = 20
    base_seed: int = 0
    eval_layer: int = 2

    def __post_init__(self):
        if self.parameter != "q_prime":
            raise InvalidConfiguration(f"unsupported sweep parameter {self.parameter!r}")
        self.values = [float(v) for v in _as_list(self.values)]
        if not self.values:
            raise InvalidConfiguration("sweep grid is empty")
        if int(self.replicates) < 1:
            raise InvalidConfiguration("replicates must be at least 1")
        self.replicates = int(self.replicates)
        self.base_seed = int(self.base_seed)
        self.eval_layer = int(self.eval_layer)


@dataclass
class InputLayer:
    paths: list
    family: str = "bernoulli"
    format: str = "dense_csv"
    preprocess: str = "none"
    threshold: object = "mean"

    def __post_init__(self):
        if self.format not in ("dense_csv", "edge_list_tsv"):
            raise InvalidConfiguration(f"unknown input format {self.format!r}")
        if self.preprocess not in ("none", "correlation", "counts"):
            raise InvalidConfiguration(f"unknown preprocessing {self.preprocess!r}")
        if not self.paths:
            raise InvalidConfiguration("input layer has no path")
        if self.preprocess != "counts" and len(self.paths) != 1:
            raise InvalidConfiguration("several paths are only allowed with preprocess=counts")


@dataclass
class ExperimentSpec:
    mode: str
    methods: list = field(default_factory=lambda: list(METHODS))
    output: str = "results"
    generator: dict | None = None
    sweep: SweepSpec | None = None
    inference: dict = field(default_factory=dict)
    spectral_restarts: int = 10
    inputs: list = field(default_factory=list)
    fit: dict = field(default_factory=dict)
    select: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidConfiguration(f"mode must be one of {MODES}, got {self.mode!r}")
        self.methods = _as_list(self.methods)
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise InvalidConfiguration(f"methods must be a nonempty subset of {METHODS}")
        self.inference_options()  # validate early
        if self.mode == "synthetic_sweep":
            if self.generator is None:
                raise InvalidConfiguration("synthetic_sweep needs a [generator] section")
            if self.sweep is None:
                self.sweep = SweepSpec()
            self.generator_config(self.sweep.values[0])
            if not 1 <= self.sweep.eval_layer <= len(self.generator["K_total"]):
                raise InvalidConfiguration("eval_layer out of range")
        if self.mode in ("real_fit", "select") and not self.inputs:
            raise InvalidConfiguration(f"{self.mode} needs [input.N] sections")
        if self.mode == "real_fit" and not {"K", "K_total"} <= set(self.fit):
            raise InvalidConfiguration("real_fit needs K and K_total in [fit]")
        if self.mode == "select" and "K_total_range" not in self.select:
            raise InvalidConfiguration("select needs K_total_range in [select]")

    def inference_options(self, seed=None):
        kw = dict(self.inference)
        if seed is not None:
            kw["seed"] = int(seed)
        try:
            return InferenceOptions(**kw)
        except TypeError as exc:
            raise InvalidConfiguration(f"[inference]: {exc}") from None

    def generator_config(self, q_prime=None):
        """GeneratorConfig with the eval layer's ``q`` replaced by ``q_prime``."""
        g = dict(self.generator)
        try:
            K_total = [int(k) for k in _as_list(g["K_total"])]
            L = len(K_total)
            p = [float(x) for x in _as_list(g.get("p", 0.6), L, "p")]
            q = [float(x) for x in _as_list(g.get("q", 0.2), L, "q")]
            if q_prime is not None and self.sweep is not None:
                q[self.sweep.eval_layer - 1] = float(q_prime)
            theta = [planted_theta(pl, ql, k) for pl, ql, k in zip(p, q, K_total)]
            return GeneratorConfig(
                n=int(g["n"]), K=int(g["K"]), K_total=K_total,
                families=_as_list(g.get("families", "bernoulli"), L, "families"),
                theta=theta, balanced=bool(g.get("balanced", False)),
                redraw=g.get("redraw", "private"))
        except KeyError as exc:
            raise InvalidConfiguration(f"[generator] is missing {exc}") from None
        except ValueError as exc:
            raise InvalidConfiguration(f"[generator]: {exc}") from None

    def resolved(self):
        """Plain-data form of the spec for manifests."""
        out = asdict(self)
        out["inference"] = asdict(self.inference_options())
        return out


def parse_spec(text, base_dir="."):
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise InvalidConfiguration(f"cannot parse experiment file: {exc}") from None
    base = Path(base_dir)

    def section(name):
        return {k: _value(v) for k, v in cp[name].items()} if cp.has_section(name) else None

    exp = section("experiment") or {}
    if "mode" not in exp:
        raise InvalidConfiguration("[experiment] must set mode")
    inference = section("inference") or {}
    spectral_restarts = int(inference.pop("spectral_restarts", 10))
    sweep = section("sweep")
    inputs = []
    names = sorted((s for s in cp.sections() if s.startswith("input.")),
                   key=lambda s: int(s.split(".", 1)[1]))
    for name in names:
        d = section(name)
        raw = d.pop("paths", d.pop("path", None))
        paths = [str((base / p).resolve()) for p in _as_list(raw)] if raw is not None else []
        try:
            inputs.append(InputLayer(paths=paths, **d))
        except TypeError as exc:
            raise InvalidConfiguration(f"[{name}]: {exc}") from None
    output = exp.get("output", "results")
    try:
        return ExperimentSpec(
            mode=exp["mode"], methods=exp.get("methods", list(METHODS)), output=str(output),
            generator=section("generator"), sweep=SweepSpec(**sweep) if sweep else None,
            inference=inference, spectral_restarts=spectral_restarts, inputs=inputs,
            fit=section("fit") or {}, select=section("select") or {})
    except TypeError as exc:
        raise InvalidConfiguration(f"unknown key in experiment file: {exc}") from None


def load_spec(path):
    path = Path(path)
    if not path.exists():
        raise InvalidConfiguration(f"{path}: no such experiment file")
    return parse_spec(path.read_text(), base_dir=path.parent)
