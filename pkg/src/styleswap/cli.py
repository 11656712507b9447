"""Command-line entry points.

Exit codes: 0 success, 1 validation error (bad arguments, malformed inputs),
2 runtime or numerical failure (diverged training, failed solve, failed
verification). Every subcommand prints a one-line diagnostic on failure and
is deterministic given its seed arguments.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import verify as verify_mod
from .baseline import baseline_swap
from .compositing import SolverError
from .geometry import (LandmarkSet, ReferenceFace, align_to_reference,
                       default_reference)
from .image import (load_image, load_luminance, load_mask, save_image,
                    save_luminance, save_mask)
from .lightnet import LightNetConfig, LightTrainConfig, train_lightnet
from .pipeline import swap
from .synth import (lighting_pairs, make_face_corpus, make_relight_dataset,
                    make_scene)
from .trainer import (TrainConfig, TrainingDiverged, load_style_dir,
                      load_train_data, train_stage)
from .transformnet import TransformNet, build


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the contract reserves 2 for
    # runtime failures, so downgrade usage problems to the validation code
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _reference_for(args, resolution: int | None = None) -> ReferenceFace:
    if getattr(args, "reference", None):
        ref = ReferenceFace.from_json(args.reference)
        return ref if resolution is None else ref.scaled(resolution)
    return default_reference(resolution if resolution else 128)


def _cmd_align(args) -> int:
    img = load_image(args.input)
    lm = LandmarkSet.from_json(args.landmarks)
    ref = _reference_for(args, args.resolution)
    aligned, _, t = align_to_reference(img, lm, ref)
    save_image(args.out, aligned, bit_depth=args.bit_depth)
    if args.transform:
        with open(args.transform, "w") as f:
            json.dump(t.to_dict(), f, indent=2)
    print(f"aligned {args.input} -> {args.out} ({ref.resolution}px)")
    return 0


def _cmd_train(args) -> int:
    config = TrainConfig.from_json(args.config)
    if args.resume:
        net = TransformNet.load(args.resume)
    elif config.net_widths:
        from .transformnet import BranchSpec
        net = build(config.resolution,
                    BranchSpec(widths=config.net_widths), seed=config.net_seed)
    else:
        net = build(config.resolution, seed=config.net_seed)
    data = load_train_data(config)
    net, rows, info = train_stage(config, net, data)
    last = rows[-1]
    print(f"trained {config.iterations} iterations, final total loss "
          f"{last['total']:.6f} (beta={info['beta']:.6g})")
    if "final_checkpoint" in info:
        print(f"checkpoint: {info['final_checkpoint']}")
    return 0


def _cmd_grow(args) -> int:
    net = TransformNet.load(args.checkpoint)
    grown = net.grow(2 * net.resolution, width=args.width, seed=args.seed)
    grown.save(args.out)
    print(f"grew {net.resolution}px -> {grown.resolution}px: "
          f"{net.param_count()} -> {grown.param_count()} parameters "
          f"({grown.frozen_param_count()} frozen)")
    return 0


def _cmd_swap(args) -> int:
    net = TransformNet.load(args.model)
    img = load_image(args.input)
    lm = LandmarkSet.from_json(args.landmarks)
    mask = load_mask(args.mask)
    ref = _reference_for(args, net.resolution)
    out = swap(img, lm, mask, net, ref)
    save_image(args.out, out, bit_depth=args.bit_depth)
    print(f"swapped {args.input} -> {args.out}")
    return 0


def _cmd_baseline(args) -> int:
    img = load_image(args.input)
    lm = LandmarkSet.from_json(args.landmarks)
    mask = load_mask(args.mask)
    ref = _reference_for(args, args.resolution)
    styles = load_style_dir(args.styledir, ref, use_flips=not args.no_flips)
    out = baseline_swap(img, lm, styles, mask)
    save_image(args.out, out, bit_depth=args.bit_depth)
    print(f"baseline-swapped {args.input} -> {args.out} "
          f"({len(styles)} style candidates)")
    return 0


def _cmd_lightnet_gen(args) -> int:
    ds = make_relight_dataset(args.seed, resolution=args.resolution,
                              n_identities=args.identities,
                              n_lights=args.lights, holdout=args.holdout)
    os.makedirs(args.out, exist_ok=True)
    files = {}
    for i in range(ds.images.shape[0]):
        for l in range(ds.images.shape[1]):
            name = f"id{i:03d}_light{l:03d}.png"
            save_luminance(os.path.join(args.out, name), ds.images[i, l])
            files[f"{i},{l}"] = name
    manifest = {
        "resolution": args.resolution,
        "identities": args.identities,
        "lights": args.lights,
        "seed": args.seed,
        "train_identities": list(ds.train_ids),
        "holdout_identities": list(ds.holdout_ids),
        "files": files,
    }
    with open(os.path.join(args.out, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2)
    print(f"wrote {len(files)} images + manifest.json to {args.out}")
    return 0


def _load_relight_dir(data_dir: str):
    manifest_path = os.path.join(data_dir, "manifest.json")
    if not os.path.isfile(manifest_path):
        raise ValueError(f"no manifest.json in {data_dir}")
    with open(manifest_path) as f:
        manifest = json.load(f)
    n_i, n_l = manifest["identities"], manifest["lights"]
    res = manifest["resolution"]
    images = np.empty((n_i, n_l, res, res))
    for key, name in manifest["files"].items():
        i, l = (int(v) for v in key.split(","))
        images[i, l] = load_luminance(os.path.join(data_dir, name))
    from .synth import RelightDataset
    return RelightDataset(images=images, lights=np.zeros((n_l, 3)),
                          train_ids=tuple(manifest["train_identities"]),
                          holdout_ids=tuple(manifest["holdout_identities"]),
                          seed=manifest["seed"])


def _cmd_lightnet_train(args) -> int:
    ds = _load_relight_dir(args.data)
    overrides = {}
    if args.config:
        with open(args.config) as f:
            overrides = json.load(f)
    resolution = ds.images.shape[2]
    net_config = LightNetConfig(
        resolution=resolution,
        channels=tuple(overrides.get("channels", (8, 16, 32, 64))),
        embed_dim=overrides.get("embed_dim", 64),
        seed=overrides.get("net_seed", 0))
    train_config = LightTrainConfig(
        epochs=overrides.get("epochs", 8),
        batch_size=overrides.get("batch_size", 64),
        lr=overrides.get("lr", 1e-3),
        margin=overrides.get("margin", 1.0),
        seed=overrides.get("seed", 0))
    n_pairs = overrides.get("pairs", 1024)
    pairs = lighting_pairs(ds, ds.train_ids, n_pairs, train_config.seed + 1)
    net, curve = train_lightnet(pairs, train_config, net_config=net_config)
    net.save(args.out)
    print(f"trained on {n_pairs} pairs for {train_config.epochs} epochs: "
          f"loss {curve[0]['loss']:.4f} -> {curve[-1]['loss']:.4f}; saved {args.out}")
    return 0


def _cmd_toyset(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    style_dir = os.path.join(args.out, "style")
    content_dir = os.path.join(args.out, "content")
    os.makedirs(style_dir, exist_ok=True)
    os.makedirs(content_dir, exist_ok=True)
    styles = make_face_corpus(args.seed, args.n_style, args.resolution)
    contents = make_face_corpus(args.seed + 1, args.n_content, args.resolution)
    for name_dir, faces, prefix in ((style_dir, styles, "style"),
                                    (content_dir, contents, "content")):
        for i, (img, lm) in enumerate(faces):
            base = os.path.join(name_dir, f"{prefix}_{i:03d}")
            save_image(base + ".png", img, bit_depth=16)
            lm.to_json(base + ".json")
    made_scenes = 0
    if args.scenes > 0:
        scene_dir = os.path.join(args.out, "scenes")
        os.makedirs(scene_dir, exist_ok=True)
        rng = np.random.default_rng(args.seed + 2)
        for i in range(args.scenes):
            scene = make_scene(rng, (args.scene_height, args.scene_width))
            base = os.path.join(scene_dir, f"scene_{i:03d}")
            save_image(base + ".png", scene.image, bit_depth=16)
            scene.landmarks.to_json(base + ".json")
            save_mask(base + "_mask.png", scene.mask)
            made_scenes += 1
    print(f"wrote {args.n_style} style + {args.n_content} content faces"
          + (f" + {made_scenes} scenes" if made_scenes else "")
          + f" to {args.out}")
    return 0


def _cmd_verify(args) -> int:
    results = verify_mod.run_suite(args.suite)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 0 if not failed else 2


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="styleswap",
                description="Identity swap via multi-scale feed-forward style transfer.")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("align", help="warp a face into the reference frame")
    sp.add_argument("--input", required=True)
    sp.add_argument("--landmarks", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--transform", default=None,
                    help="where to write the forward transform JSON")
    sp.add_argument("--reference", default=None, help="reference face JSON")
    sp.add_argument("--resolution", type=int, default=128)
    sp.add_argument("--bit-depth", type=int, default=16, choices=(8, 16))
    sp.set_defaults(func=_cmd_align)

    sp = sub.add_parser("train", help="run one training stage from a config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--resume", default=None, help="checkpoint to continue from")
    sp.set_defaults(func=_cmd_train)

    sp = sub.add_parser("grow", help="double a checkpoint's resolution, freezing old branches")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--width", type=int, default=None,
                    help="channel width of the new branch (default: width table)")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=_cmd_grow)

    sp = sub.add_parser("swap", help="end-to-end face swap on one image")
    sp.add_argument("--model", required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--landmarks", required=True)
    sp.add_argument("--mask", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--reference", default=None)
    sp.add_argument("--bit-depth", type=int, default=16, choices=(8, 16))
    sp.set_defaults(func=_cmd_swap)

    sp = sub.add_parser("baseline", help="nearest-landmark swap (no network)")
    sp.add_argument("--styledir", required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--landmarks", required=True)
    sp.add_argument("--mask", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--reference", default=None)
    sp.add_argument("--resolution", type=int, default=128)
    sp.add_argument("--no-flips", action="store_true")
    sp.add_argument("--bit-depth", type=int, default=16, choices=(8, 16))
    sp.set_defaults(func=_cmd_baseline)

    sp = sub.add_parser("lightnet-gen", help="generate the synthetic relighting corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--resolution", type=int, default=128)
    sp.add_argument("--identities", type=int, default=32)
    sp.add_argument("--lights", type=int, default=16)
    sp.add_argument("--holdout", type=int, default=6)
    sp.set_defaults(func=_cmd_lightnet_gen)

    sp = sub.add_parser("lightnet-train", help="train the lighting embedding")
    sp.add_argument("--data", required=True, help="directory from lightnet-gen")
    sp.add_argument("--out", required=True, help="checkpoint path to write")
    sp.add_argument("--config", default=None, help="JSON with training overrides")
    sp.set_defaults(func=_cmd_lightnet_train)

    sp = sub.add_parser("toyset", help="generate a synthetic face corpus for demos/tests")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--resolution", type=int, default=64)
    sp.add_argument("--n-style", type=int, default=4)
    sp.add_argument("--n-content", type=int, default=8)
    sp.add_argument("--scenes", type=int, default=0)
    sp.add_argument("--scene-height", type=int, default=96)
    sp.add_argument("--scene-width", type=int, default=128)
    sp.set_defaults(func=_cmd_toyset)

    sp = sub.add_parser("verify", help="run the numerical self-check suites")
    sp.add_argument("--suite", default="all", choices=verify_mod.SUITE_NAMES)
    sp.set_defaults(func=_cmd_verify)

    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, NotADirectoryError) as exc:
        print(f"error: no such path: {exc.filename or exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SolverError, TrainingDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
