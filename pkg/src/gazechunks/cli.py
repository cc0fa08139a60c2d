"""Command-line surface tying the pipeline together.

Exit codes: 0 success, 2 input/configuration error, 3 insufficient data,
4 training divergence.  Every command accepts --seed and emits JSON
results to stdout or --out.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, io, manipulate, regressor, shiftsim, synth
from .analysis import AnalyzeConfig, SelectionMask, analyze, split_groups
from .core import (
    ConfigError,
    FormatError,
    GazeLabel,
    InsufficientDataError,
    LatentLayout,
    LayoutError,
    TrainingDivergedError,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INSUFFICIENT = 3
EXIT_DIVERGED = 4


def _parse_range(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"range must look like LO:HI, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ConfigError(f"bad range {text!r}: {exc}") from exc


def _parse_chunk_list(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad chunk list {text!r}: {exc}") from exc


def _emit(result: dict, out: str | None) -> None:
    text = json.dumps(result, indent=2, allow_nan=False) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _mask_from_args(args, layout: LatentLayout) -> SelectionMask:
    if getattr(args, "mask_report", None):
        doc = io.read_report(args.mask_report)
        mask = io.mask_from_report_doc(doc)
        if mask.layout != layout:
            raise ConfigError("mask report layout does not match the latent file")
        return mask
    if getattr(args, "chunks", None) is not None:
        return SelectionMask(layout, _parse_chunk_list(args.chunks))
    return SelectionMask(layout, tuple(range(layout.n_chunks)))


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

_SPEC_KEYS = {
    "n_samples",
    "n_layers",
    "layer_dim",
    "chunk_size",
    "planted_chunks",
    "effect_size",
    "nuisance",
    "noise_std",
    "yaw_range",
    "pitch_range",
    "offset",
    "seed",
}


def spec_from_doc(doc: dict) -> synth.SynthSpec:
    if not isinstance(doc, dict):
        raise ConfigError("spec document must be a JSON object")
    unknown = set(doc) - _SPEC_KEYS
    if unknown:
        raise ConfigError(f"unknown spec keys: {sorted(unknown)}")
    if "n_samples" not in doc:
        raise ConfigError("spec requires n_samples")
    layout = LatentLayout(
        doc.get("n_layers", 14), doc.get("layer_dim", 512), doc.get("chunk_size", 16)
    )
    nuisance = tuple(
        synth.NuisanceConfound(
            chunks=tuple(c["chunks"]),
            train_corr=float(c["train_corr"]),
            test_corr=float(c.get("test_corr", 0.0)),
        )
        for c in doc.get("nuisance", [])
    )
    planted = doc.get("planted_chunks")
    try:
        return synth.SynthSpec(
            n_samples=int(doc["n_samples"]),
            layout=layout,
            planted_chunks=tuple(planted) if planted is not None else None,
            effect_size=float(doc.get("effect_size", 1.0)),
            nuisance=nuisance,
            noise_std=float(doc.get("noise_std", 1.0)),
            yaw_range=tuple(doc.get("yaw_range", (-90.0, 90.0))),
            pitch_range=tuple(doc.get("pitch_range", (0.0, 0.0))),
            offset=float(doc.get("offset", 0.0)),
            seed=int(doc.get("seed", 0)),
        )
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"malformed spec: {exc}") from exc


def cmd_synth(args) -> int:
    try:
        doc = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.spec}: invalid JSON ({exc})") from exc
    spec = spec_from_doc(doc)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    dataset = synth.generate(spec)
    latents, labels = io.write_dataset(args.out, dataset)
    _emit(
        {
            "latents": str(latents),
            "labels": str(labels),
            "n_samples": len(dataset),
            "layout": {
                "n_layers": dataset.layout.n_layers,
                "layer_dim": dataset.layout.layer_dim,
                "chunk_size": dataset.layout.chunk_size,
            },
            "seed": spec.seed,
        },
        None,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze / select
# ---------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    dataset = io.load_dataset(args.latents, args.labels)
    config = AnalyzeConfig(
        left_range=_parse_range(args.left_range),
        right_range=_parse_range(args.right_range),
        top_n=args.top,
        alpha=args.alpha if args.top is None else None,
        seed=args.seed,
    )
    report = analyze(dataset, config)
    doc = io.report_to_doc(report, __version__)
    if args.out:
        io.write_report(args.out, doc)
    else:
        _emit(doc, None)
    return EXIT_OK


def cmd_select(args) -> int:
    doc = io.read_report(args.report)
    try:
        layout = LatentLayout(
            doc["layout"]["n_layers"], doc["layout"]["layer_dim"], doc["layout"]["chunk_size"]
        )
        ranks = np.array([c["rank"] for c in doc["chunks"]])
        pvals = np.array([c["p"] for c in doc["chunks"]])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{args.report}: missing field {exc}") from exc
    if args.top is not None:
        if not 0 <= args.top <= layout.n_chunks:
            raise ConfigError(f"--top {args.top} outside [0, {layout.n_chunks}]")
        chosen = np.flatnonzero(ranks <= args.top)
        mode, param = "top_n", float(args.top)
    else:
        if not 0.0 < args.alpha < 1.0:
            raise ConfigError(f"--alpha {args.alpha} outside (0, 1)")
        chosen = np.flatnonzero(pvals < args.alpha)
        mode, param = "alpha", float(args.alpha)
    _emit(
        {
            "layout": doc["layout"],
            "mode": mode,
            "param": param,
            "chunk_indices": [int(i) for i in chosen],
            "seed": args.seed,
        },
        args.out,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# manipulate
# ---------------------------------------------------------------------------


def cmd_manipulate(args) -> int:
    layout, codes = io.read_latent_file(args.latents)
    mask = _mask_from_args(args, layout)

    if args.donor:
        donor_layout, donor_codes = io.read_latent_file(args.donor)
        if donor_layout != layout:
            raise ConfigError("donor layout does not match the base latents")
        if args.donor_index is not None:
            if not 0 <= args.donor_index < donor_codes.shape[0]:
                raise ConfigError(f"--donor-index {args.donor_index} out of range")
            donor: np.ndarray = donor_codes[args.donor_index]
        else:
            if donor_codes.shape[0] != codes.shape[0]:
                raise ConfigError(
                    "donor file must have the same sample count (or pass --donor-index)"
                )
            donor = donor_codes
    elif args.group_mean:
        if not args.labels:
            raise ConfigError("--group-mean requires --labels")
        dataset = io.load_dataset(args.latents, args.labels)
        split = split_groups(
            dataset, _parse_range(args.left_range), _parse_range(args.right_range)
        )
        group = split.left if args.group_mean == "left" else split.right
        donor = manipulate.group_mean_code(dataset, group).values
    else:
        raise ConfigError("pass a donor: --donor FILE or --group-mean left|right")

    out_codes = manipulate.replace_chunks_batch(codes, donor, mask)
    io.write_latent_file(args.out, layout, out_codes)
    _emit(
        {
            "out": args.out,
            "n_samples": int(codes.shape[0]),
            "replaced_chunks": list(mask.chunk_indices),
            "seed": args.seed,
        },
        None,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# train / eval
# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    dataset = io.load_dataset(args.latents, args.labels)
    mask = _mask_from_args(args, dataset.layout)
    config = regressor.TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed if args.seed is not None else 0,
        momentum=args.momentum,
        hidden_dim=args.hidden,
    )
    params = regressor.train(dataset, mask, config)
    labels_rad = np.stack(
        [np.radians(dataset.yaw_deg), np.radians(dataset.pitch_deg)], axis=1
    )
    final_loss, _ = regressor.loss_and_gradients(params, dataset.codes, labels_rad)
    io.write_regressor(args.out, params)
    _emit(
        {
            "model": args.out,
            "n_samples": len(dataset),
            "mask_size": len(mask),
            "final_train_loss": final_loss,
            "train_angular_error_deg": regressor.evaluate(params, dataset),
            "seed": config.seed,
        },
        args.result,
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    dataset = io.load_dataset(args.latents, args.labels)
    params = io.read_regressor(args.model)
    if params.mask.layout != dataset.layout:
        raise ConfigError("model layout does not match the dataset")
    _emit(
        {
            "mean_angular_error_deg": regressor.evaluate(params, dataset),
            "n_samples": len(dataset),
            "seed": args.seed,
        },
        args.out,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# shiftsim
# ---------------------------------------------------------------------------


def _shiftsim_grad_check(seed: int) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(20):
        m = int(rng.integers(4, 24))
        d = int(rng.integers(2, m + 1))
        params = shiftsim.init_pipeline(m, d, seed=seed + i)
        image = rng.standard_normal(m)
        label_yaw = float(rng.uniform(-80, 80))
        label_pitch = float(rng.uniform(-40, 40))
        weights = shiftsim.LossWeights(
            lambda_l2=float(rng.uniform(0, 2)), lambda_gd=float(rng.uniform(0, 2))
        )
        err = shiftsim.grad_check(params, image, GazeLabel(label_yaw, label_pitch), weights)
        worst = max(worst, err)
    return {"max_relative_error": worst, "configurations": 20, "seed": seed}


def cmd_shiftsim(args) -> int:
    seed = args.seed if args.seed is not None else 0
    if args.grad_check:
        result = _shiftsim_grad_check(seed)
        _emit(result, args.out)
        return EXIT_OK

    layout = LatentLayout(args.layers, args.layer_dim, args.chunk_size)
    planted = _parse_chunk_list(args.planted_chunks)
    nuisance: tuple[synth.NuisanceConfound, ...] = ()
    if args.nuisance_chunks:
        nuisance = (
            synth.NuisanceConfound(
                chunks=_parse_chunk_list(args.nuisance_chunks),
                train_corr=args.nuisance_train_corr,
                test_corr=args.nuisance_test_corr,
            ),
        )
    source_spec = synth.SynthSpec(
        n_samples=args.n_source,
        layout=layout,
        planted_chunks=planted,
        effect_size=args.effect_size,
        nuisance=nuisance,
        noise_std=args.noise_std,
        seed=seed,
    )
    pair = synth.DomainPairSpec(
        source_spec, target_n_samples=args.n_target, target_offset=args.target_offset
    )
    source, target = synth.generate_domain_pair(pair)

    src_images = source.codes
    src_labels = np.stack([source.yaw_deg, source.pitch_deg], axis=1)
    n_train = int(round((1.0 - args.holdout) * len(source)))
    if n_train < 1 or n_train >= len(source):
        raise ConfigError("--holdout leaves no training or no holdout samples")
    train_x, train_y = src_images[:n_train], src_labels[:n_train]
    held_x, held_y = src_images[n_train:], src_labels[n_train:]

    config = regressor.TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs_encoder,
        batch_size=args.batch_size,
        seed=seed,
        momentum=args.momentum,
    )
    extractor_config = regressor.TrainConfig(
        learning_rate=args.lr_extractor,
        epochs=args.epochs_extractor,
        batch_size=args.batch_size,
        seed=seed,
        momentum=args.momentum,
    )

    pipeline = shiftsim.init_pipeline(layout.total_dims, args.latent_dim, seed=seed)
    phase1_curve: list[float] = []
    pipeline = shiftsim.train_extractor(
        pipeline, train_x, train_y, extractor_config, history=phase1_curve
    )

    weights = shiftsim.LossWeights(lambda_l2=args.lambda_l2, lambda_gd=args.lambda_gd)
    gd_curve: list[float] = []
    trained = shiftsim.train_encoder(
        pipeline, train_x, train_y, weights, config, history=gd_curve
    )
    result = {
        "seed": seed,
        "image_dim": layout.total_dims,
        "latent_dim": args.latent_dim,
        "lambda_gd": args.lambda_gd,
        "phase1_loss_curve": phase1_curve,
        "phase2_loss_curve": gd_curve,
        "heldout_gaze_distortion": shiftsim.mean_gaze_distortion(trained, held_x, held_y),
        "domain_gap_raw": shiftsim.domain_gap(target.codes, src_images),
        "domain_gap_shifted": shiftsim.domain_gap(
            shiftsim.shift(trained, target.codes), src_images
        ),
    }

    if args.baseline:
        base_weights = shiftsim.LossWeights(lambda_l2=args.lambda_l2, lambda_gd=0.0)
        base_curve: list[float] = []
        baseline = shiftsim.train_encoder(
            pipeline, train_x, train_y, base_weights, config, history=base_curve
        )
        result["baseline_lambda_gd_zero"] = {
            "phase2_loss_curve": base_curve,
            "heldout_gaze_distortion": shiftsim.mean_gaze_distortion(baseline, held_x, held_y),
            "domain_gap_shifted": shiftsim.domain_gap(
                shiftsim.shift(baseline, target.codes), src_images
            ),
        }

    if args.save_model:
        io.write_pipeline(args.save_model, trained)
        result["model"] = args.save_model
    _emit(result, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gazechunks",
        description="Statistical gaze-relevant chunk discovery and manipulation in latent codes",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_seed(p):
        p.add_argument("--seed", type=int, default=None, help="seed echoed into results")

    p = sub.add_parser("synth", help="generate a synthetic dataset from a JSON spec")
    p.add_argument("--spec", required=True, help="JSON spec file")
    p.add_argument("--out", required=True, help="output directory")
    add_seed(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze", help="run the chunk-discovery pipeline")
    p.add_argument("--latents", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--left-range", default="30:90", help="yaw range LO:HI (use --left-range=LO:HI)")
    p.add_argument("--right-range", default="-90:-30")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--top", type=int, default=None, help="select the N best-ranked chunks")
    group.add_argument("--alpha", type=float, default=0.05, help="select chunks with p < alpha")
    p.add_argument("--out", default=None, help="report path (defaults to stdout)")
    add_seed(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("select", help="re-select chunks from an existing report")
    p.add_argument("--report", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--top", type=int, default=None)
    group.add_argument("--alpha", type=float, default=None)
    p.add_argument("--out", default=None)
    add_seed(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("manipulate", help="replace masked chunks from a donor")
    p.add_argument("--latents", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mask-report", default=None, help="report whose selected chunks form the mask")
    p.add_argument("--chunks", default=None, help='explicit chunk list, e.g. "1,2,7" ("" = none)')
    p.add_argument("--donor", default=None, help="donor latent file")
    p.add_argument("--donor-index", type=int, default=None, help="use one donor sample for all")
    p.add_argument("--group-mean", choices=["left", "right"], default=None)
    p.add_argument("--labels", default=None, help="labels (required for --group-mean)")
    p.add_argument("--left-range", default="30:90")
    p.add_argument("--right-range", default="-90:-30")
    add_seed(p)
    p.set_defaults(func=cmd_manipulate)

    p = sub.add_parser("train", help="train the gaze regression head")
    p.add_argument("--latents", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True, help="model output path")
    p.add_argument("--mask-report", default=None)
    p.add_argument("--chunks", default=None, help="chunk list (default: all chunks)")
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--result", default=None, help="JSON result path (defaults to stdout)")
    add_seed(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="mean angular error of a trained model")
    p.add_argument("--latents", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None)
    add_seed(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("shiftsim", help="toy two-phase domain-shift training")
    p.add_argument("--layers", type=int, default=4, help="toy image layout layers")
    p.add_argument("--layer-dim", type=int, default=16)
    p.add_argument("--chunk-size", type=int, default=16)
    p.add_argument("--latent-dim", type=int, default=8)
    p.add_argument("--planted-chunks", default="1,2")
    p.add_argument("--effect-size", type=float, default=1.0)
    p.add_argument("--noise-std", type=float, default=1.0)
    p.add_argument("--nuisance-chunks", default="")
    p.add_argument("--nuisance-train-corr", type=float, default=0.8)
    p.add_argument("--nuisance-test-corr", type=float, default=0.0)
    p.add_argument("--n-source", type=int, default=1200)
    p.add_argument("--n-target", type=int, default=1200)
    p.add_argument("--target-offset", type=float, default=0.5)
    p.add_argument("--holdout", type=float, default=0.25)
    p.add_argument("--lambda-l2", type=float, default=1.0)
    p.add_argument("--lambda-gd", type=float, default=1.0)
    p.add_argument("--epochs-extractor", dest="epochs_extractor", type=int, default=300)
    p.add_argument("--epochs-encoder", dest="epochs_encoder", type=int, default=800)
    p.add_argument("--lr", type=float, default=5e-4)
    p.add_argument("--lr-extractor", type=float, default=0.005)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--baseline", action=argparse.BooleanOptionalAction, default=True,
                   help="also train a lambda_gd=0 baseline for comparison")
    p.add_argument("--save-model", default=None)
    p.add_argument("--grad-check", action="store_true",
                   help="only verify analytic gradients against finite differences")
    p.add_argument("--out", default=None)
    add_seed(p)
    p.set_defaults(func=cmd_shiftsim)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, ConfigError, LayoutError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InsufficientDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


def main() -> int:
    return run()


if __name__ == "__main__":
    sys.exit(main())
