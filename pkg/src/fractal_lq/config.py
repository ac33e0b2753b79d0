"""Run configuration: a sectioned key-value text file.

Example (the defaults)::

    [net]
    axis1 = -1, -0.5, 0, 0.5, 1
    axis2 = -1, -0.5, 0, 0.5, 1

    [functions]
    germ = (x^2+y^2)*sin(1/sqrt(1+x^2+y^2))
    base = multiplier
    multiplier = (2-x^2)*y^2
    scaling = 0.3

    [measure]
    p = uniform
    q = 2

    [numerics]
    s = 16
    quadrature = exact
    depth = 4
    mc_n = 1000000
    seed = 0

A ``knots_csv`` key in ``[net]`` replaces the ``axisK`` keys; ``node_data_csv``
attaches node values.  Relative paths resolve against the config file.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import expr as ex
from .funcstore import BaseOperator, FunctionError, ScalingFunction, default_subdivisions, discretize
from .measure import MeasureError, ProbabilityVector, Quadrature
from .net import Net, NetError, build_net, load_net_csv

PAPER_KNOTS = (-1.0, -0.5, 0.0, 0.5, 1.0)
PAPER_GERM = "(x^2+y^2)*sin(1/sqrt(1+x^2+y^2))"
PAPER_MULTIPLIER = "(2-x^2)*y^2"
PAPER_ALPHAS = (0.3, 0.5, 0.7, 0.9)


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


@dataclass(frozen=True)
class RunConfig:
    axes: tuple[tuple[float, ...], ...] = (PAPER_KNOTS, PAPER_KNOTS)
    knots_csv: str = ""
    node_data_csv: str = ""
    germ: str = PAPER_GERM
    base: str = "multiplier"
    multiplier: str = PAPER_MULTIPLIER
    scaling: str = "0.3"
    p: str = "uniform"
    q: float = 2.0
    s: int = 0  # 0 -> default for the dimension
    quadrature: str = "exact"
    depth: int = 4
    mc_n: int = 10**6
    seed: int = 0
    eps_fix: float = 1e-10
    eps_res: float = 1e-6
    eps_inv: float = 1e-6
    max_iter: int = 200
    render_alphas: tuple[float, ...] = PAPER_ALPHAS
    render_size: int = 257
    trials: int = 50
    out: str = "out"
    base_dir: str = field(default=".", compare=False)

    # parsing -----------------------------------------------------------

    @classmethod
    def from_text(cls, text: str, base_dir: str = ".") -> "RunConfig":
        cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
        try:
            cp.read_string(text)
        except configparser.Error as err:
            raise ConfigError(f"cannot parse config: {err}") from None
        known = {
            "net": {"knots_csv", "node_data_csv"},
            "functions": {"germ", "base", "multiplier", "scaling"},
            "measure": {"p", "q"},
            "numerics": {"s", "quadrature", "depth", "mc_n", "seed", "eps_fix", "eps_res",
                         "eps_inv", "max_iter", "trials"},
            "render": {"alphas", "size"},
            "output": {"dir"},
        }
        kw: dict = {}
        for section in cp.sections():
            if section not in known:
                raise ConfigError(f"unknown section [{section}]")
            for key, value in cp.items(section):
                if section == "net" and key.startswith("axis") and key[4:].isdigit():
                    continue
                if key not in known[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                kw[_FIELD.get((section, key), key)] = value
        if cp.has_section("net"):
            axis_keys = sorted(
                (int(k[4:]), k) for k in cp.options("net") if k.startswith("axis") and k[4:].isdigit()
            )
            if axis_keys:
                if [i for i, _ in axis_keys] != list(range(1, len(axis_keys) + 1)):
                    raise ConfigError("axis keys must be axis1, axis2, ... without gaps")
                kw["axes"] = tuple(_floats(cp.get("net", k)) for _, k in axis_keys)
        return cls._coerce(kw, base_dir)

    @classmethod
    def _coerce(cls, kw: dict, base_dir: str) -> "RunConfig":
        types = {f.name: f.type for f in fields(cls)}
        out = {}
        for key, value in kw.items():
            if key == "axes":
                out[key] = value
                continue
            t = types[key]
            try:
                if key == "render_alphas":
                    out[key] = _floats(value)
                elif t == "int":
                    out[key] = int(value)
                elif t == "float":
                    out[key] = float(value)
                else:
                    out[key] = str(value).strip()
            except ValueError:
                raise ConfigError(f"bad value {value!r} for {key}") from None
        return cls(**out, base_dir=base_dir)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err}") from None
        return cls.from_text(text, base_dir=str(path.parent))

    def dump(self) -> str:
        """Canonical text; ``from_text(dump())`` gives back an equal config."""
        nums = lambda xs: ", ".join(repr(float(x)) for x in xs)  # noqa: E731
        lines = ["[net]"]
        if self.knots_csv:
            lines.append(f"knots_csv = {self.knots_csv}")
        else:
            lines += [f"axis{k} = {nums(ax)}" for k, ax in enumerate(self.axes, 1)]
        if self.node_data_csv:
            lines.append(f"node_data_csv = {self.node_data_csv}")
        lines += [
            "", "[functions]",
            f"germ = {self.germ}", f"base = {self.base}",
            f"multiplier = {self.multiplier}", f"scaling = {self.scaling}",
            "", "[measure]", f"p = {self.p}", f"q = {self.q!r}",
            "", "[numerics]",
            f"s = {self.s}", f"quadrature = {self.quadrature}", f"depth = {self.depth}",
            f"mc_n = {self.mc_n}", f"seed = {self.seed}", f"eps_fix = {self.eps_fix!r}",
            f"eps_res = {self.eps_res!r}", f"eps_inv = {self.eps_inv!r}",
            f"max_iter = {self.max_iter}", f"trials = {self.trials}",
            "", "[render]", f"alphas = {nums(self.render_alphas)}", f"size = {self.render_size}",
            "", "[output]", f"dir = {self.out}", "",
        ]
        return "\n".join(lines)

    def digest(self) -> str:
        """Hash of every setting that affects results (the output directory does not)."""
        return hashlib.sha256(replace(self, out="").dump().encode()).hexdigest()[:16]

    def override(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    # building library objects -----------------------------------------

    def _path(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def build_net(self) -> Net:
        try:
            if self.knots_csv:
                nodes = self._path(self.node_data_csv) if self.node_data_csv else None
                return load_net_csv(self._path(self.knots_csv), nodes)
            if self.node_data_csv:
                from .net import read_node_data_csv

                return build_net(self.axes, read_node_data_csv(self._path(self.node_data_csv), len(self.axes)))
            return build_net(self.axes)
        except (OSError, NetError) as err:
            raise ConfigError(f"bad net: {err}") from None

    def subdivisions(self, net: Net) -> int:
        return self.s if self.s > 0 else default_subdivisions(net.dim)

    def build_p(self, net: Net) -> ProbabilityVector:
        try:
            if self.p.strip().lower() == "uniform":
                return ProbabilityVector.uniform(net)
            return ProbabilityVector(net, _floats(self.p))
        except (MeasureError, ValueError) as err:
            raise ConfigError(f"bad probability vector: {err}") from None

    def build_base(self, net: Net) -> BaseOperator:
        kind = self.base.strip().lower()
        if kind == "identity":
            return BaseOperator.identity()
        if kind == "multiplier":
            try:
                return BaseOperator.multiply(self.multiplier, net)
            except (ex.ExprError, FunctionError) as err:
                raise ConfigError(f"bad multiplier: {err}") from None
        raise ConfigError(f"base must be 'identity' or 'multiplier', got {self.base!r}")

    def build_scaling(self, net: Net, spec: str | None = None) -> ScalingFunction:
        spec = self.scaling if spec is None else spec
        try:
            return ScalingFunction.build(spec, net, self.subdivisions(net))
        except (ex.ExprError, FunctionError) as err:
            raise ConfigError(f"bad scaling function: {err}") from None

    def germ_spec(self, net: Net):
        return "nodes" if self.germ.strip() == "nodes" else self.germ

    def build_germ(self, net: Net, s: int | None = None):
        try:
            return discretize(self.germ_spec(net), net, s or self.subdivisions(net))
        except (ex.ExprError, FunctionError) as err:
            raise ConfigError(f"bad germ: {err}") from None

    def quadrature_method(self) -> Quadrature:
        if self.quadrature == "exact":
            return Quadrature.exact(self.depth)
        if self.quadrature == "mc":
            return Quadrature.mc(self.mc_n, self.seed)
        raise ConfigError(f"quadrature must be 'exact' or 'mc', got {self.quadrature!r}")

    def fractal_config(self, alpha: str | None = None, s: int | None = None, base: BaseOperator | None = None):
        from .rb import FractalConfig

        net = self.build_net()
        s = s or self.subdivisions(net)
        cfg = replace(self, s=s)
        try:
            return FractalConfig(
                net,
                cfg.build_scaling(net, alpha),
                q=self.q,
                germ=cfg.build_germ(net, s),
                base=base if base is not None else self.build_base(net),
                s=s,
                p=self.build_p(net),
                depth=self.depth,
                eps_fix=self.eps_fix,
                eps_res=self.eps_res,
                eps_inv=self.eps_inv,
                max_iter=self.max_iter,
            )
        except (ValueError, FunctionError) as err:
            if isinstance(err, ConfigError):
                raise
            raise ConfigError(str(err)) from None


_FIELD = {
    ("render", "alphas"): "render_alphas",
    ("render", "size"): "render_size",
    ("output", "dir"): "out",
}
