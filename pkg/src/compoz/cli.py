"""Command-line surface: extraction, mixing, masking, distances, planning, batch.

Every command is deterministic given explicit seeds, emits key=value
lines for pipeline callers, and uses the exit-code contract 0=success,
1=record/validation failure, 2=usage error. Config precedence:
flags > config file (--config, JSON) > environment (COMPOZ_*) > defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .batch import BatchManifest, read_batch_manifest, run_batch
from .bundle import (
    BundleFormatError,
    ConditionWeights,
    MaskSynthParams,
    apply_mask,
    extract_bundle,
    load_bundle,
    mix_bundles,
    save_bundle,
    struct_to_u16,
    synth_mask,
)
from .colordist import SlicParams, color_distribution_map
from .colorspace import lab_to_srgb, load_rgb, srgb_to_lab
from .filtering import KernelSchedule, sample_k
from .metrics import ProvenanceError, cycle_consistency
from .planner import (
    EndpointError,
    ExemplarTriplet,
    build_index,
    make_llm_client,
    plan_composition,
    read_manifest,
)
from .structure import SALIENCY_SCALE, saliency_global, saliency_local

log = logging.getLogger(__name__)

# shared settings that honor config file and environment fallbacks
DEFAULTS = {
    "seed": 0,
    "min_k": 193,
    "max_k": 321,
    "step": 16,
    "slic_region": 128,
    "slic_iters": 20,
    "compactness": 10.0,
    "blur_k": 257,
    "workers": 1,
    "n": 32,
    "retries": 2,
    "llm": "",
    "llm_model": "",
    "llm_token": "",
}


def resolve_config(args: argparse.Namespace) -> dict:
    """flags > config file > environment > defaults."""
    file_cfg = {}
    if getattr(args, "config", None):
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValueError(f"cannot read config file {args.config}: {exc}") from exc
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
    cfg = {}
    for key, default in DEFAULTS.items():
        value = getattr(args, key, None)
        if value is None:
            value = file_cfg.get(key)
        if value is None:
            value = os.environ.get(f"COMPOZ_{key.upper()}")
        if value is None:
            value = default
        cfg[key] = type(default)(value)
    return cfg


def _schedule(cfg: dict) -> KernelSchedule:
    return KernelSchedule(min_k=cfg["min_k"], max_k=cfg["max_k"], step=cfg["step"])


def _slic(cfg: dict) -> SlicParams:
    return SlicParams(
        region_size=cfg["slic_region"],
        iterations=cfg["slic_iters"],
        compactness=cfg["compactness"],
        blur_k=cfg["blur_k"],
    )


def _emit(**kv) -> None:
    for key, value in kv.items():
        print(f"{key}={value}")


def _save_gray16(path, values: np.ndarray, scale: float) -> None:
    Image.fromarray(struct_to_u16(values, scale)).save(path, format="PNG")


def cmd_extract(args, cfg) -> int:
    rgb = load_rgb(args.image)
    timings: dict = {}
    bundle = extract_bundle(
        rgb,
        schedule=_schedule(cfg),
        slic=_slic(cfg),
        seed=cfg["seed"],
        k=args.k,
        sigma=args.sigma,
        weights=ConditionWeights(args.w_struct, args.w_color),
        timings=timings,
    )
    save_bundle(bundle, args.out)
    _emit(
        status="ok",
        out=args.out,
        k=bundle.struct_map.k,
        sigma=f"{bundle.struct_map.sigma:.6g}",
        seed=cfg["seed"],
        source_sha256=bundle.provenance["source_sha256"],
        struct_s=f"{timings['struct_s']:.4f}",
        color_s=f"{timings['color_s']:.4f}",
    )
    return 0


def cmd_structure(args, cfg) -> int:
    rgb = load_rgb(args.image)
    lab = srgb_to_lab(rgb)
    k = args.k
    if k is None:
        k = sample_k(_schedule(cfg), np.random.default_rng(cfg["seed"]))
    if args.variant == "global":
        sal = saliency_global(lab, k, args.sigma)
    else:
        sal = saliency_local(lab, k, args.sigma)
    scale = 1.0 if sal.normalized else SALIENCY_SCALE
    _save_gray16(args.out, sal.values, scale)
    _emit(status="ok", out=args.out, variant=args.variant, k=sal.k,
          sigma=f"{sal.sigma:.6g}", scale=scale)
    return 0


def cmd_colordist(args, cfg) -> int:
    rgb = load_rgb(args.image)
    cmap = color_distribution_map(srgb_to_lab(rgb), _slic(cfg))
    Image.fromarray(lab_to_srgb(cmap.values)).save(args.out, format="PNG")
    distinct = len(np.unique(cmap.values.reshape(-1, 3), axis=0))
    _emit(status="ok", out=args.out, region_size=cmap.params.region_size,
          iterations=cmap.params.iterations, blur_k=cmap.params.blur_k,
          distinct_colors=distinct)
    return 0


def cmd_mix(args, cfg) -> int:
    struct_src = load_bundle(args.struct_bundle)
    color_src = load_bundle(args.color_bundle)
    mixed = mix_bundles(struct_src, color_src)
    save_bundle(mixed, args.out)
    _emit(status="ok", out=args.out, struct_from=args.struct_bundle, color_from=args.color_bundle)
    return 0


def cmd_mask(args, cfg) -> int:
    bundle = load_bundle(args.bundle)
    if args.mask_file:
        mask = np.asarray(Image.open(args.mask_file).convert("L")) > 0
    else:
        params = MaskSynthParams(
            shape=args.shape,
            min_frac=args.min_frac,
            max_frac=args.max_frac,
            invert_prob=args.invert_prob,
        )
        mask = synth_mask(bundle.width, bundle.height, params, np.random.default_rng(cfg["seed"]))
    masked = apply_mask(bundle, mask, target=args.target)
    save_bundle(masked, args.out)
    _emit(status="ok", out=args.out, target=args.target,
          active_fraction=f"{mask.mean():.4f}")
    return 0


def cmd_distance(args, cfg) -> int:
    bundle = load_bundle(args.bundle)
    generated = load_rgb(args.image)
    report = cycle_consistency(bundle, generated)
    for line in report.lines():
        print(line)
    return 0


def _load_theme_embedding(path) -> np.ndarray:
    text = Path(path).read_text().strip()
    if text.startswith("["):
        return np.asarray(json.loads(text), dtype=np.float64)
    import base64

    return np.frombuffer(base64.b64decode(text), dtype="<f4").astype(np.float64)


def cmd_plan(args, cfg) -> int:
    index = build_index(read_manifest(args.index), source=args.index)
    theme_embedding = _load_theme_embedding(args.theme_embedding)
    exemplars = []
    if args.exemplars:
        for rec in json.loads(Path(args.exemplars).read_text()):
            exemplars.append(ExemplarTriplet(**rec))
    if not cfg["llm"]:
        raise ValueError("no LVLM endpoint: pass --llm or set COMPOZ_LLM")
    llm = make_llm_client(cfg["llm"], model=cfg["llm_model"], token=cfg["llm_token"])
    result = plan_composition(
        args.theme,
        theme_embedding,
        index,
        llm,
        n=cfg["n"],
        exemplars=exemplars,
        retries=cfg["retries"],
    )
    chosen_score = next(c.score for c in result.candidates if c.entry.id == result.chosen.id)
    _emit(
        status="ok",
        chosen_id=result.chosen.id,
        chosen_caption=result.chosen.caption,
        chosen_image=result.chosen.image_path,
        match=result.match_method,
        score=f"{chosen_score:.6f}",
        candidates=len(result.candidates),
    )
    return 0


def cmd_batch(args, cfg) -> int:
    manifest = BatchManifest(
        records=read_batch_manifest(args.manifest),
        out_dir=args.out_dir,
        root=args.root or "",
        workers=cfg["workers"],
        schedule=_schedule(cfg),
        slic=_slic(cfg),
        seed=cfg["seed"],
    )
    report = run_batch(manifest)
    lines = report.lines()
    for line in lines:
        print(line)
    if args.report:
        Path(args.report).write_text("\n".join(lines) + "\n")
    return 1 if report.failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="compoz",
        description="Semantic-agnostic composition extraction, transfer conditioning, and planning.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON config file (flags override it)")
    parser.add_argument("--print-config", action="store_true", help="dump resolved config and exit")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="cmd")

    def add_shared(p, *names):
        for name in names:
            flag = "--" + name.replace("_", "-")
            kind = type(DEFAULTS[name])
            p.add_argument(flag, type=kind, default=None, dest=name)

    p = sub.add_parser("extract", help="extract a condition bundle from an image")
    p.add_argument("image")
    p.add_argument("--out", required=True, help="bundle output directory")
    p.add_argument("--k", type=int, default=None, help="pin the structure window size")
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--w-struct", type=float, default=1.0)
    p.add_argument("--w-color", type=float, default=1.0)
    add_shared(p, "seed", "min_k", "max_k", "step", "slic_region", "slic_iters",
               "compactness", "blur_k")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("structure", help="write a 16-bit structure map")
    p.add_argument("image")
    p.add_argument("--out", required=True, help="output PNG")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--variant", choices=("local", "global"), default="local")
    add_shared(p, "seed", "min_k", "max_k", "step")
    p.set_defaults(func=cmd_structure)

    p = sub.add_parser("colordist", help="write an 8-bit color-distribution map")
    p.add_argument("image")
    p.add_argument("--out", required=True, help="output PNG")
    add_shared(p, "slic_region", "slic_iters", "compactness", "blur_k")
    p.set_defaults(func=cmd_colordist)

    p = sub.add_parser("mix", help="structure from one bundle, color from another")
    p.add_argument("struct_bundle")
    p.add_argument("color_bundle")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("mask", help="synthesize or load a mask and apply it")
    p.add_argument("bundle")
    p.add_argument("--out", required=True)
    p.add_argument("--target", choices=("struct", "color", "both"), default="both")
    p.add_argument("--mask-file", default=None, help="PNG mask (nonzero = active)")
    p.add_argument("--shape", choices=("ellipse", "rectangle", "random"), default="random")
    p.add_argument("--min-frac", type=float, default=0.10)
    p.add_argument("--max-frac", type=float, default=0.60)
    p.add_argument("--invert-prob", type=float, default=0.5)
    add_shared(p, "seed")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("distance", help="cycle-consistency distances bundle vs image")
    p.add_argument("bundle")
    p.add_argument("image")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("plan", help="pick a composition reference for a theme")
    p.add_argument("--theme", required=True)
    p.add_argument("--index", required=True, help="line-delimited embedding manifest")
    p.add_argument("--theme-embedding", required=True,
                   help="file with a JSON float array or base64 float32 vector")
    p.add_argument("--llm", default=None, help="http(s)://endpoint or stub:fixture.json")
    p.add_argument("--exemplars", default=None, help="JSON list of exemplar triplets")
    add_shared(p, "n", "retries", "llm_model", "llm_token")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("batch", help="extract bundles for a manifest of images")
    p.add_argument("manifest", help="line-delimited records with image_path")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--root", default=None, help="prefix for relative image paths")
    p.add_argument("--report", default=None, help="also write the report here")
    add_shared(p, "seed", "workers", "min_k", "max_k", "step", "slic_region",
               "slic_iters", "compactness", "blur_k")
    p.set_defaults(func=cmd_batch)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        if args.print_config:
            for key in sorted(cfg):
                print(f"{key}={cfg[key]}")
            return 0
        if args.cmd is None:
            parser.print_help()
            return 2
        return args.func(args, cfg)
    except (ValueError, BundleFormatError, ProvenanceError, EndpointError, OSError) as exc:
        print(f"status=error kind={type(exc).__name__}", file=sys.stderr)
        print(f"message={exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
