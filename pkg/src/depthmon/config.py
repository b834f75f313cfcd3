"""Run configuration shared by the CLI and config files."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from depthmon.benchmarks import BENCHMARK_LABELS, BenchmarkMethod, CentralityScorer
from depthmon.charting import ChartConfig
from depthmon.depth import DEPTH_LABELS, DepthSpec
from depthmon.errors import ConfigError
from depthmon.pipeline import ReferencePlan, ReferenceStrategy, resolve_method
from depthmon.simulate import TOY_ARCH

COMMANDS = ("toy", "monitor", "timing", "montecarlo", "simulate")
METHOD_GROUPS = {
    "depths": DEPTH_LABELS,
    "benchmarks": BENCHMARK_LABELS,
    "all": DEPTH_LABELS + BENCHMARK_LABELS,
}
DEFAULT_METHODS = {
    "toy": DEPTH_LABELS,
    "monitor": ("MD",),
    "timing": ("MD", "PDa2"),
    "montecarlo": ("MD",),
    "simulate": (),
}
DEFAULT_BATCH = 5


def expand_methods(items) -> tuple[str, ...]:
    """Split comma lists, expand group names and canonicalize labels."""
    out: list[str] = []
    for item in items:
        for part in str(item).split(","):
            part = part.strip()
            if not part:
                continue
            if part.lower() in METHOD_GROUPS:
                out.extend(METHOD_GROUPS[part.lower()])
            else:
                out.append(resolve_method(part).label)
    seen = set()
    return tuple(m for m in out if not (m in seen or seen.add(m)))


@dataclass(frozen=True)
class RunConfig:
    """Every parameter of one CLI invocation.

    Instances are canonical: defaults are resolved and method lists
    expanded at construction, so ``RunConfig.from_dict(c.to_dict()) == c``.
    """

    command: str
    input: str | None = None
    output_dir: str = "out"
    seed: int = 0
    alpha: float = 0.05
    chart: str = "r"
    n: int | None = None
    methods: tuple[str, ...] = ()
    reference: str = "confidence"
    size: int | None = None
    ridge: bool = False
    leave_one_out: bool = False
    runs: int = 10
    svg: bool = True
    queries: int | None = None
    arch: tuple[int, ...] = TOY_ARCH
    # depth parameters
    direction_budget: int | None = None
    restarts: int = 10
    max_iterations: int = 100
    convergence_tol: float = 1e-6
    depth_seed: int = 0
    smoothing: float = 1.0
    # benchmark parameters
    lof_k: int = 20
    kdeos_kernel: str = "gaussian"
    kdeos_k_min: int = 5
    kdeos_k_max: int = 20
    iforest_trees: int = 100
    iforest_subsample: int = 256

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; choose from {', '.join(COMMANDS)}")
        chart = str(self.chart).lower()
        if chart not in ("r", "q"):
            raise ConfigError(f"chart must be 'r' or 'q', got {self.chart!r}")
        object.__setattr__(self, "chart", chart)
        if self.n is None:
            object.__setattr__(self, "n", 1 if chart == "r" else DEFAULT_BATCH)
        methods = self.methods
        if isinstance(methods, str):
            methods = (methods,)
        methods = expand_methods(methods) if methods else DEFAULT_METHODS[self.command]
        object.__setattr__(self, "methods", tuple(methods))
        object.__setattr__(self, "arch", tuple(int(a) for a in self.arch))
        if self.reference not in {s.value for s in ReferenceStrategy}:
            raise ConfigError(f"reference must be one of confidence, random, merged; got {self.reference!r}")
        if self.runs < 2 and self.command == "montecarlo":
            raise ConfigError("montecarlo needs runs >= 2")
        if self.queries is not None and self.queries < 1:
            raise ConfigError("queries must be positive")
        # validate everything that downstream objects would reject later
        self.chart_config()
        self.reference_plan()
        self.method_objects()

    # ------------------------------------------------------------ derived

    def chart_config(self) -> ChartConfig:
        return ChartConfig(self.chart, self.alpha, self.n)

    def reference_plan(self, seed: int | None = None) -> ReferencePlan:
        return ReferencePlan(self.reference, self.size, self.seed if seed is None else seed, self.ridge)

    def depth_kwargs(self) -> dict[str, Any]:
        return {
            "direction_budget": self.direction_budget,
            "restarts": self.restarts,
            "max_iterations": self.max_iterations,
            "convergence_tol": self.convergence_tol,
            "rng_seed": self.depth_seed,
            "smoothing": self.smoothing,
        }

    def benchmark_params(self, method: BenchmarkMethod) -> dict[str, Any]:
        return {
            BenchmarkMethod.LOF: {"k": self.lof_k},
            BenchmarkMethod.KDEOS: {
                "kernel": self.kdeos_kernel,
                "k_min": self.kdeos_k_min,
                "k_max": self.kdeos_k_max,
            },
            BenchmarkMethod.IFOREST: {
                "trees": self.iforest_trees,
                "subsample": self.iforest_subsample,
                "seed": self.seed,
            },
        }.get(method, {})

    def method_objects(self) -> list:
        out = []
        for label in self.methods:
            if label in BENCHMARK_LABELS:
                m = BenchmarkMethod(label)
                out.append(CentralityScorer(m, self.benchmark_params(m)))
            else:
                out.append(DepthSpec.from_label(label, **self.depth_kwargs()))
        return out

    # ------------------------------------------------------------ serialization

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["methods"] = list(self.methods)
        d["arch"] = list(self.arch)
        return d

    def render(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        d = dict(d)
        for key in ("methods", "arch"):
            if key in d and isinstance(d[key], list):
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))


def load_config_file(path: str | os.PathLike) -> dict[str, Any]:
    """Read a JSON config file into a plain dict."""
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {p}: {exc}") from None
    try:
        data = json.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config file {p}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {p} must hold an object")
    return data
