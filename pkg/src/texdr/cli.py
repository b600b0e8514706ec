"""Command-line entry point: ``texdr {synth,embed,eval,recolor,bench,validate}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .bench import bench_sweep
from .config import ConfigError, PipelineConfig, load_config
from .distances import NumericalSingularityError
from .evaluation import (
    SyntheticSpec,
    generate_spectral_standin,
    generate_synthetic,
    load_embedding_csv,
    neighbor_hit,
    recolor,
    save_curve_csv,
    save_embedding_csv,
    save_trace_csv,
    write_png,
    write_ppm,
)
from .image import (
    ImageFormatError,
    gaussian_filter,
    load_image,
    load_labels,
    normalize_channels,
    save_image,
    save_labels,
)
from .knn import build_knn, save_knn_csv
from .tsne import CalibrationError, TsneDivergenceError, joint_probabilities, run_tsne

__all__ = ["main", "run_pipeline", "PipelineError", "set_threads"]

log = logging.getLogger("texdr")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
THREADS_ENV = "TEXDR_THREADS"


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException, code: int):
        super().__init__(f"{stage}: {cause}")
        self.stage, self.cause, self.code = stage, cause, code


def _exit_code(exc: BaseException) -> int:
    # numerical errors first: some of them are ValueError subclasses
    if isinstance(exc, (NumericalSingularityError, CalibrationError, TsneDivergenceError,
                        FloatingPointError, ArithmeticError)):
        return EXIT_NUMERIC
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    return EXIT_DATA


@contextmanager
def _stage(name: str):
    log.info("stage %s", name)
    t0 = time.perf_counter()
    try:
        yield
    except PipelineError:
        raise
    except (ValueError, OSError, ArithmeticError, ImageFormatError) as exc:
        raise PipelineError(name, exc, _exit_code(exc)) from exc
    log.info("stage %s done in %.2fs", name, time.perf_counter() - t0)


def set_threads(n: int | None):
    """Pin numba and BLAS worker counts; returns the threadpoolctl limiter or None."""
    if n is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        try:
            n = int(env) if env else None
        except ValueError:
            raise ConfigError(f"{THREADS_ENV}={env!r} is not an integer") from None
    if n is None:
        return None
    if n < 1:
        raise ConfigError("thread count must be positive")
    import numba
    from threadpoolctl import threadpool_limits

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    return threadpool_limits(limits=n)


def _versions() -> dict:
    import numba
    import scipy

    return {"texdr": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "python": platform.python_version()}


# ---------------------------------------------------------------------------
# pipeline


def _load_input(cfg: PipelineConfig):
    inp = cfg.input
    if inp.source == "synthetic":
        spec = SyntheticSpec(side=inp.side, noise_sd=inp.noise_sd, block=inp.block, seed=inp.seed)
        return generate_synthetic(spec)
    if inp.source == "spectral-standin":
        return generate_spectral_standin(inp.side, inp.channels, inp.seed)
    image = load_image(inp.path, inp.format)
    labels = load_labels(inp.labels) if inp.labels is not None else None
    if labels is not None and (labels.width, labels.height) != (image.width, image.height):
        raise ValueError(f"labels are {labels.width}x{labels.height}, "
                         f"image is {image.width}x{image.height}")
    return image, labels


def _preprocess(cfg: PipelineConfig, image):
    pre = cfg.preprocess
    if pre.mode == "gaussian-filter":
        return gaussian_filter(image, pre.sigma, pre.ksize)
    if pre.mode == "normalize":
        return normalize_channels(image, pre.normalize)
    return image


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Run every stage and write the requested artifacts plus ``manifest.json``.

    On failure every file written so far is removed and a
    :class:`PipelineError` naming the stage is raised.
    """
    out = cfg.output
    written: list[Path] = []
    created_dir = not out.directory.exists()

    def emit(name, writer, *args):
        path = out.path(name)
        if path is None:
            return None
        writer(*args, path)
        written.append(path)
        return str(path)

    try:
        with _stage("load"):
            image, labels = _load_input(cfg)
            n = image.n
            if not cfg.k < n:
                raise ValueError(f"k = {cfg.k} needs more than {n} pixels")
            k_max = cfg.evaluation.k_max or cfg.k
            if labels is not None and not k_max < n:
                raise ValueError(f"k_max = {k_max} needs more than {n} pixels")
        with _stage("preprocess"):
            image = _preprocess(cfg, image)
        with _stage("knn"):
            graph = build_knn(image, cfg.distance, cfg.k)
        with _stage("affinities"):
            P = joint_probabilities(graph, cfg.tsne.perplexity)
        with _stage("tsne"):
            emb = run_tsne(P, cfg.tsne)
        curve = None
        if labels is not None:
            with _stage("evaluate"):
                curve = neighbor_hit(emb.coords, labels, k_max)
        with _stage("write"):
            out.directory.mkdir(parents=True, exist_ok=True)
            artifacts = {"embedding": emit(out.embedding, save_embedding_csv, emb.coords)}
            if out.recolor is not None:
                rgb = recolor(emb.coords, image.width, image.height)
                writer = write_png if out.recolor.lower().endswith(".png") else write_ppm
                artifacts["recolor"] = emit(out.recolor, writer, rgb)
            if curve is not None:
                artifacts["curve"] = emit(out.curve, save_curve_csv, curve)
            artifacts["trace"] = emit(out.trace, save_trace_csv, emb.trace)
            artifacts["knn"] = emit(out.knn, save_knn_csv, graph)
            manifest = {
                "config": cfg.to_dict(),
                "config_file": str(cfg.source) if cfg.source else None,
                "seed": cfg.tsne.seed,
                "threads": _threads_in_use(),
                "versions": _versions(),
                "artifacts": {k: v for k, v in artifacts.items() if v is not None},
                "summary": {
                    "n": n,
                    "final_kl": float(emb.trace[-1, 1]),
                    "neighbor_hit_at_k_max": curve.at(curve.k_max) if curve else None,
                },
            }
            path = out.directory / "manifest.json"
            path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
            written.append(path)
        return manifest
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        if created_dir and out.directory.exists() and not any(out.directory.iterdir()):
            out.directory.rmdir()
        raise


def _threads_in_use() -> int:
    import numba

    return numba.get_num_threads()


# ---------------------------------------------------------------------------
# subcommands


def _int_list(text: str):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def cmd_synth(args) -> int:
    if args.standin:
        image, labels = generate_spectral_standin(args.side or 24, args.channels, args.seed)
    else:
        spec = SyntheticSpec(side=args.side or 32, noise_sd=args.noise_sd, block=args.block,
                             seed=args.seed)
        image, labels = generate_synthetic(spec)
    save_image(image, args.out, args.format)
    if args.labels:
        save_labels(labels, args.labels)
    return EXIT_OK


def cmd_embed(args) -> int:
    cfg = load_config(args.config)
    if args.out_dir is not None:
        cfg = cfg.with_output_dir(args.out_dir)
    manifest = run_pipeline(cfg)
    s = manifest["summary"]
    msg = f"n={s['n']} final KL={s['final_kl']:.6g}"
    if s["neighbor_hit_at_k_max"] is not None:
        msg += f" neighbor hit@{cfg.evaluation.k_max or cfg.k}={s['neighbor_hit_at_k_max']:.4f}"
    print(msg)
    return EXIT_OK


def cmd_eval(args) -> int:
    coords = load_embedding_csv(args.embedding)
    labels = load_labels(args.labels)
    curve = neighbor_hit(coords, labels, args.kmax)
    save_curve_csv(curve, args.out)
    print(f"neighbor hit@{args.kmax}={curve.at(args.kmax):.4f}")
    return EXIT_OK


def cmd_recolor(args) -> int:
    coords = load_embedding_csv(args.embedding)
    rgb = recolor(coords, args.width, args.height)
    (write_png if str(args.out).lower().endswith(".png") else write_ppm)(rgb, args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    report = bench_sweep(args.kind, etas=args.eta, channels=args.channels,
                         bins=args.bins or (None,), side=args.side, n_pairs=args.pairs,
                         repetitions=args.repetitions, seed=args.seed)
    if args.out:
        report.to_csv(args.out)
    else:
        report.write(sys.stdout)
    return EXIT_OK


def cmd_validate(args) -> int:
    for path in args.configs:
        cfg = load_config(path)
        print(f"{path}: ok ({cfg.distance.tag}, k={cfg.k})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="texdr", description="Texture-aware t-SNE for high-dimensional images.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default: ${THREADS_ENV} or numba's default)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write the synthetic benchmark image and labels")
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--labels", type=Path)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--side", type=int, default=None)
    s.add_argument("--noise-sd", type=float, default=0.05)
    s.add_argument("--block", type=int, default=2)
    s.add_argument("--format", choices=("flat-binary", "csv"))
    s.add_argument("--standin", action="store_true", help="spectral field-mosaic stand-in instead")
    s.add_argument("--channels", type=int, default=200, help="stand-in channel count")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("embed", help="run the pipeline from a config file")
    s.add_argument("config", type=Path)
    s.add_argument("--out-dir", type=Path, default=None)
    s.set_defaults(func=cmd_embed)

    s = sub.add_parser("eval", help="neighbor-hit curve of an embedding")
    s.add_argument("--embedding", required=True, type=Path)
    s.add_argument("--labels", required=True, type=Path)
    s.add_argument("--kmax", type=int, default=63)
    s.add_argument("--out", type=Path, default=Path("neighbor_hit.csv"))
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("recolor", help="map an embedding back to pixels through a 2D colormap")
    s.add_argument("--embedding", required=True, type=Path)
    s.add_argument("--width", required=True, type=int)
    s.add_argument("--height", required=True, type=int)
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=cmd_recolor)

    s = sub.add_parser("bench", help="time a distance kernel over a parameter sweep")
    s.add_argument("--kind", required=True)
    s.add_argument("--eta", type=_int_list, default=(1,))
    s.add_argument("--channels", type=_int_list, default=(2,))
    s.add_argument("--bins", type=_int_list, default=None)
    s.add_argument("--side", type=int, default=48)
    s.add_argument("--pairs", type=int, default=2000)
    s.add_argument("--repetitions", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("validate", help="parse and check config files without running them")
    s.add_argument("configs", nargs="+", type=Path)
    s.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        limiter = set_threads(args.threads)
        try:
            return args.func(args)
        finally:
            if limiter is not None:
                limiter.restore_original_limits()
    except PipelineError as exc:
        print(f"texdr: {exc.stage} failed: {exc.cause}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"texdr: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError, ArithmeticError) as exc:
        code = _exit_code(exc)
        print(f"texdr: {'numerical' if code == EXIT_NUMERIC else 'data'} error: {exc}",
              file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
