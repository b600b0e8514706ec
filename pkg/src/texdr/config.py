"""Pipeline configuration files.

A config is an INI-style file read with :mod:`configparser`::

    [input]
    source = synthetic          ; synthetic | spectral-standin | file
    side = 32                   ; generator size (synthetic, spectral-standin)
    channels = 2
    noise_sd = 0.05             ; synthetic only
    block = 2                   ; synthetic only
    seed = 0
    path = cube.bin             ; file only, relative to the config file
    format = flat-binary        ; file only, optional (csv | flat-binary)
    labels = gt.csv             ; optional, file only

    [preprocess]
    mode = none                 ; none | gaussian-filter | normalize
    sigma = 5                   ; gaussian-filter
    ksize = 3                   ; gaussian-filter
    normalize = min-max         ; normalize: min-max | z-score

    [distance]
    kind = chamfer
    radius = 1
    weighting = uniform         ; uniform | gaussian
    sigma =                     ; gaussian weighting, defaults to radius / 2
    border = clamp              ; clamp | mirror
    bins =                      ; qf-histogram only, defaults to the Rice rule
    ridge =                     ; bhattacharyya only

    [tsne]
    perplexity = 20
    iterations = 1000
    k =                         ; defaults to 3 * ceil(perplexity)
    seed = 0
    ...                         ; any other TsneParams field

    [evaluation]
    k_max = 63

    [output]
    directory = out/texdr
    embedding = embedding.csv
    recolor = recolor.ppm       ; .png writes PNG
    curve = neighbor_hit.csv
    trace = trace.csv
    knn =                       ; optional knn dump

Empty values mean "use the default". Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

from .distances import KINDS, DistanceKind
from .image import NeighborhoodSpec
from .tsne import TsneParams

__all__ = [
    "ConfigError",
    "InputConfig",
    "PreprocessConfig",
    "EvaluationConfig",
    "OutputConfig",
    "PipelineConfig",
    "load_config",
    "parse_config",
]


class ConfigError(ValueError):
    """The configuration is malformed or refers to missing files."""


SOURCES = ("synthetic", "spectral-standin", "file")
PREPROCESS = ("none", "gaussian-filter", "normalize")


@dataclass(frozen=True)
class InputConfig:
    source: str = "synthetic"
    side: int = 32
    channels: int = 2
    noise_sd: float = 0.05
    block: int = 2
    seed: int = 0
    path: Path | None = None
    format: str | None = None
    labels: Path | None = None


@dataclass(frozen=True)
class PreprocessConfig:
    mode: str = "none"
    sigma: float = 5.0
    ksize: int = 3
    normalize: str = "min-max"


@dataclass(frozen=True)
class EvaluationConfig:
    k_max: int | None = None


@dataclass(frozen=True)
class OutputConfig:
    directory: Path = Path("out")
    embedding: str = "embedding.csv"
    recolor: str | None = "recolor.ppm"
    curve: str | None = "neighbor_hit.csv"
    trace: str | None = "trace.csv"
    knn: str | None = None

    def path(self, name: str | None) -> Path | None:
        return None if name is None else self.directory / name


@dataclass(frozen=True)
class PipelineConfig:
    input: InputConfig
    preprocess: PreprocessConfig
    distance: DistanceKind
    tsne: TsneParams
    k: int
    evaluation: EvaluationConfig
    output: OutputConfig
    source: Path | None = None

    def with_output_dir(self, directory) -> "PipelineConfig":
        return dataclasses.replace(
            self, output=dataclasses.replace(self.output, directory=Path(directory))
        )

    def to_dict(self) -> dict:
        """Fully resolved settings, as recorded in the run manifest."""
        nb = self.distance.neighborhood

        def plain(obj):
            return {k: (str(v) if isinstance(v, Path) else v)
                    for k, v in dataclasses.asdict(obj).items()}

        return {
            "input": plain(self.input),
            "preprocess": plain(self.preprocess),
            "distance": {
                "kind": self.distance.tag,
                "radius": nb.radius if nb else 0,
                "weighting": nb.weighting if nb else None,
                "sigma": nb.sigma if nb else None,
                "border": nb.border if nb else None,
                "bins": self.distance.resolved_bins,
                "ridge": self.distance.ridge,
            },
            "tsne": dataclasses.asdict(self.tsne) | {"k": self.k},
            "evaluation": plain(self.evaluation),
            "output": plain(self.output),
        }


_KEYS = {
    "input": {"source", "side", "channels", "noise_sd", "block", "seed", "path", "format", "labels"},
    "preprocess": {"mode", "sigma", "ksize", "normalize"},
    "distance": {"kind", "radius", "weighting", "sigma", "border", "bins", "ridge"},
    "tsne": {f.name for f in dataclasses.fields(TsneParams)} | {"k"},
    "evaluation": {"k_max"},
    "output": {"directory", "embedding", "recolor", "curve", "trace", "knn"},
}


class _Section:
    """Typed, validated access to one section; empty values count as absent."""

    def __init__(self, parser: configparser.ConfigParser, name: str):
        self.name = name
        self.raw = dict(parser[name]) if parser.has_section(name) else {}
        unknown = set(self.raw) - _KEYS[name]
        if unknown:
            raise ConfigError(f"[{name}]: unknown keys {sorted(unknown)}")

    def get(self, key, cast=str, default=None):
        v = self.raw.get(key, "").strip()
        if v == "":
            return default
        try:
            return cast(v)
        except ValueError as exc:
            raise ConfigError(f"[{self.name}] {key} = {v!r}: {exc}") from None


def _choice(value, allowed, where):
    if value not in allowed:
        raise ConfigError(f"{where} must be one of {', '.join(allowed)}, got {value!r}")
    return value


def parse_config(text: str, base_dir=None, source=None) -> PipelineConfig:
    """Parse config text; relative input paths resolve against ``base_dir``."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    unknown = set(parser.sections()) - set(_KEYS)
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    s = {name: _Section(parser, name) for name in _KEYS}

    def rel(p):
        return None if p is None else (base / p if not Path(p).is_absolute() else Path(p))

    si = s["input"]
    inp = InputConfig(
        source=_choice(si.get("source", default="synthetic"), SOURCES, "[input] source"),
        side=si.get("side", int, 32 if si.get("source") != "spectral-standin" else 24),
        channels=si.get("channels", int, 2 if si.get("source") != "spectral-standin" else 200),
        noise_sd=si.get("noise_sd", float, 0.05),
        block=si.get("block", int, 2),
        seed=si.get("seed", int, 0),
        path=rel(si.get("path")),
        format=si.get("format"),
        labels=rel(si.get("labels")),
    )
    if inp.source == "file":
        if inp.path is None:
            raise ConfigError("[input] source = file needs a path")
        if not inp.path.exists():
            raise ConfigError(f"input image {inp.path} does not exist")
        if inp.format is not None:
            _choice(inp.format, ("flat-binary", "csv"), "[input] format")
    elif inp.path is not None or inp.labels is not None:
        raise ConfigError("[input] path and labels are only used with source = file")
    if inp.labels is not None and not inp.labels.exists():
        raise ConfigError(f"label file {inp.labels} does not exist")
    if inp.side < 1 or inp.channels < 1:
        raise ConfigError("[input] side and channels must be positive")
    if inp.source == "synthetic" and inp.channels != 2:
        raise ConfigError("[input] the synthetic generator has two channels")

    sp = s["preprocess"]
    pre = PreprocessConfig(
        mode=_choice(sp.get("mode", default="none"), PREPROCESS, "[preprocess] mode"),
        sigma=sp.get("sigma", float, 5.0),
        ksize=sp.get("ksize", int, 3),
        normalize=_choice(sp.get("normalize", default="min-max"), ("min-max", "z-score"),
                          "[preprocess] normalize"),
    )
    if pre.sigma <= 0 or pre.ksize < 1 or pre.ksize % 2 == 0:
        raise ConfigError("[preprocess] needs sigma > 0 and an odd ksize")

    sd = s["distance"]
    tag = _choice(sd.get("kind", default="euclidean-sq"), KINDS, "[distance] kind")
    extra = {}
    if sd.get("bins") is not None:
        extra["bins"] = sd.get("bins", int)
    if sd.get("ridge") is not None:
        extra["ridge"] = sd.get("ridge", float)
    try:
        if tag == "euclidean-sq":
            if sd.get("radius", int, 0) != 0:
                raise ConfigError("[distance] euclidean-sq has no neighborhood radius")
            nb = None
        else:
            nb = NeighborhoodSpec(
                radius=sd.get("radius", int, 1),
                weighting=sd.get("weighting", default="uniform"),
                sigma=sd.get("sigma", float),
                border=sd.get("border", default="clamp"),
            )
        kind = DistanceKind(tag, nb, **extra)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[distance]: {exc}") from None

    st = s["tsne"]
    kw = {}
    for f in dataclasses.fields(TsneParams):
        cast = float if f.type in ("float", float) else int
        v = st.get(f.name, cast)
        if v is not None:
            kw[f.name] = v
    try:
        params = TsneParams(**kw)
    except ValueError as exc:
        raise ConfigError(f"[tsne]: {exc}") from None
    k = st.get("k", int, 3 * math.ceil(params.perplexity))
    if k <= params.perplexity:
        raise ConfigError(f"[tsne] k = {k} must exceed the perplexity")

    ev = EvaluationConfig(k_max=s["evaluation"].get("k_max", int))
    if ev.k_max is not None and ev.k_max < 1:
        raise ConfigError("[evaluation] k_max must be positive")

    so = s["output"]
    out = OutputConfig(
        directory=Path(so.get("directory", default="out")),
        embedding=so.get("embedding", default="embedding.csv"),
        recolor=so.get("recolor", default="recolor.ppm"),
        curve=so.get("curve", default="neighbor_hit.csv"),
        trace=so.get("trace", default="trace.csv"),
        knn=so.get("knn"),
    )
    if out.recolor is not None and Path(out.recolor).suffix.lower() not in (".ppm", ".png"):
        raise ConfigError("[output] recolor must end in .ppm or .png")
    return PipelineConfig(inp, pre, kind, params, k, ev, out, source)


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=path.parent, source=path)
