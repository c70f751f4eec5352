"""Command-line entry point: ``python run.py <command> ...``.

Exit codes: 0 success, 1 negative gate decision (validate), 2 usage or input
error, 3 numeric/runtime error. Reports are JSON on stdout (or --report);
progress goes to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Any

import numpy as np

from odx import __version__
from odx.config import (
    DEFAULT_ALPHA,
    DEFAULT_ITERS,
    DEFAULT_LR,
    DEFAULT_TEST,
    AttackConfig,
    TrainConfig,
    default_jobs,
)
from odx.container import load_generator, save_model
from odx.datasets import DATASET_KINDS, ToyDataset, make_toy_dataset
from odx.errors import ConfigurationError, NumericError, OdxError
from odx.gate import gate_report
from odx.harness import (
    EvalRow,
    evaluate,
    export_latents,
    shannon_entropy,
    sweep,
    write_rows_csv,
    write_rows_json,
)
from odx.images import load_image_dir, read_image, write_image
from odx.metrics import MetricsCollector
from odx.models import GeneratorModel
from odx.presets import init_random
from odx.priors import PriorSpec
from odx.search import interpolate, render_frames, search
from odx.storage import dump_json, read_latents, write_json
from odx.train import sample, train_acgan, train_gan


def _log(msg: str) -> None:
    print(f"[cli] {msg}", file=sys.stderr)


def _emit(data: dict[str, Any]) -> None:
    sys.stdout.write(dump_json({"odx_version": __version__, **data}))


def _shape(text: str) -> tuple[int, ...]:
    try:
        shape = tuple(int(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected C,H,W integers, got {text!r}") from None
    if len(shape) != 3 or min(shape) < 1:
        raise argparse.ArgumentTypeError(f"expected three positive sizes, got {text!r}")
    return shape


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _attack_config(prior: PriorSpec, data: dict[str, Any]) -> AttackConfig:
    """Protocol defaults for the prior, overridden by explicit values."""
    names = {f.name for f in dataclasses.fields(AttackConfig)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigurationError(f"unknown attack config keys: {', '.join(unknown)}")
    return AttackConfig.for_prior(prior, **{k: v for k, v in data.items() if v is not None})


def _load_config_file(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"--config {path}: invalid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ConfigurationError(f"--config {path}: expected a JSON object")
    return data


# -- commands ------------------------------------------------------------------


def cmd_init_random(args: argparse.Namespace) -> int:
    model = init_random(
        args.arch,
        latent_dim=args.latent_dim,
        prior=PriorSpec.named(args.prior),
        class_count=args.classes,
        seed=args.seed,
        output_shape=args.shape,
    )
    save_model(model, args.out)
    _log(f"wrote {args.arch} generator ({model.latent_dim}-d {model.prior.short_name}) to {args.out}")
    _emit({
        "command": "model init-random",
        "arch": args.arch,
        "latent_dim": model.latent_dim,
        "prior": model.prior.short_name,
        "class_count": model.class_count,
        "output_shape": list(model.output_shape),
        "seed": args.seed,
        "out": str(args.out),
    })
    return 0


def _training_set(args: argparse.Namespace) -> ToyDataset:
    if args.dataset in DATASET_KINDS:
        return make_toy_dataset(args.dataset, args.count, args.shape, args.seed, labeled=args.acgan)
    return ToyDataset.from_directory(args.dataset)


def cmd_train(args: argparse.Namespace) -> int:
    dataset = _training_set(args)
    cfg = TrainConfig(
        iterations=args.iters,
        batch_size=args.batch_size,
        lr_g=args.lr_g,
        lr_d=args.lr_d,
        latent_dim=args.latent_dim,
        prior=args.prior,
        seed=args.seed,
        class_count=dataset.class_count if args.acgan else None,
        hidden=args.hidden,
        log_every=args.log_every,
    )
    history: list[dict[str, Any]] = []
    trainer = train_acgan if args.acgan else train_gan
    gen, disc = trainer(dataset, cfg, history)
    save_model(gen, args.out)
    if args.out_disc:
        save_model(disc, args.out_disc)
    report = {
        "command": "train",
        "dataset": dataset.name,
        "acgan": args.acgan,
        "config": cfg.to_dict(),
        "log": history,
    }
    if args.log:
        write_json(Path(args.log), report)
    _emit({k: v for k, v in report.items() if k != "log"} | {"out": str(args.out)})
    return 0


def _check_prior_flag(args: argparse.Namespace, model: GeneratorModel) -> None:
    if getattr(args, "prior", None) is not None:
        raise ConfigurationError(
            f"--prior conflicts with the prior declared by {args.model} "
            f"({model.prior.short_name}); drop the flag"
        )


def cmd_invert(args: argparse.Namespace) -> int:
    model = load_generator(args.model)
    _check_prior_flag(args, model)
    target = read_image(args.target)
    cfg = _attack_config(
        model.prior,
        {
            "distance": args.distance,
            "k": args.k,
            "omega": args.omega,
            "eta": args.lr,
            "max_iters": args.iters,
            "clipping": args.clip,
            "seed": args.seed,
        },
    )
    result = search(model, target, cfg, args.class_)
    if args.out_latent:
        export_latents([result.z_hat], args.out_latent)
    if args.out_image:
        write_image(result.x_hat, args.out_image)
    gate = gate_report(result.z_hat, model.prior, DEFAULT_TEST, DEFAULT_ALPHA)
    report = {
        "command": "invert",
        "model": str(args.model),
        "target": str(args.target),
        "class": args.class_,
        "config": cfg.to_dict(),
        "result": result.to_dict(),
        "gate": gate.to_dict(),
        "out_image": str(args.out_image) if args.out_image else None,
        "out_latent": str(args.out_latent) if args.out_latent else None,
    }
    if args.report:
        write_json(Path(args.report), report)
    _log(
        f"best loss {result.best_loss:.6g} at iteration {result.best_iteration}, "
        f"gate {'accepts' if gate.accepted else 'rejects'} (p={gate.p_value:.3f})"
    )
    _emit(report)
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    rows = read_latents(Path(args.latent))
    if not rows:
        raise ConfigurationError(f"--latent {args.latent}: no latent vectors")
    prior = PriorSpec.named(args.prior)
    reports = [gate_report(z, prior, args.test, args.alpha).to_dict() for z in rows]
    accepted = all(r["accepted"] for r in reports)
    report = {
        "command": "validate",
        "latent": str(args.latent),
        "prior": prior.short_name,
        "test": args.test,
        "alpha": args.alpha,
        "accepted": accepted,
        "rows": reports,
    }
    if args.report:
        write_json(Path(args.report), report)
    _emit(report)
    return 0 if accepted else 1


def _eval_setup(
    args: argparse.Namespace, prior: PriorSpec, shape: tuple[int, ...]
) -> tuple[AttackConfig, list[np.ndarray]]:
    cfg = _attack_config(prior, _load_config_file(args.config))
    targets = load_image_dir(args.targets, shape)
    return cfg, targets


def _per_class_rows(row: EvalRow) -> list[EvalRow]:
    return [
        dataclasses.replace(
            row,
            dataset=f"{row.dataset}/class={y}",
            avg_mse=v["avg_mse"],
            test_success_rate=v["test_success_rate"],
            avg_mse_relaxed=v["avg_mse_relaxed"],
            per_class=None,
        )
        for y, v in sorted((row.per_class or {}).items())
    ]


def cmd_evaluate(args: argparse.Namespace) -> int:
    model = load_generator(args.model)
    if args.per_class and not model.conditional:
        raise ConfigurationError(f"--per-class needs a conditional model, {args.model} is not")
    cfg, targets = _eval_setup(args, model.prior, model.output_shape)
    jobs = args.jobs or default_jobs()
    metrics = MetricsCollector(label="evaluate")
    row = evaluate(
        model, targets, cfg, args.alpha, args.test, jobs, Path(args.targets).name, metrics
    )
    metrics.print_report()
    rows = [row] + (_per_class_rows(row) if args.per_class else [])
    if args.out:
        write_rows_csv(rows, args.out)
    if args.latents_out:
        export_latents(row.latents, args.latents_out)
    config = {"attack": cfg.to_dict(), "alpha": args.alpha, "test": args.test, "jobs": jobs}
    if args.report:
        write_rows_json([row], args.report, config)
    _emit({"command": "evaluate", "config": config, "rows": [row.to_dict()]})
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    paths = [p for p in args.models.split(",") if p]
    models = [load_generator(p) for p in paths]
    priors = {m.prior for m in models}
    if len(priors) != 1:
        raise ConfigurationError("--models must share one prior")
    cfg, targets = _eval_setup(args, models[0].prior, models[0].output_shape)
    jobs = args.jobs or default_jobs()
    metrics = MetricsCollector(label="sweep")
    rows = sweep(models, targets, cfg, args.alpha, args.test, jobs, [Path(p).stem for p in paths], metrics)
    metrics.print_report()
    if args.out:
        write_rows_csv(rows, args.out)
    config = {"attack": cfg.to_dict(), "alpha": args.alpha, "test": args.test, "jobs": jobs}
    if args.report:
        write_rows_json(rows, args.report, config)
    _emit({"command": "sweep", "config": config, "rows": [r.to_dict() for r in rows]})
    return 0


def _first_latent(path: str, flag: str) -> np.ndarray:
    rows = read_latents(Path(path))
    if not rows:
        raise ConfigurationError(f"{flag} {path}: no latent vectors")
    return rows[0]


def cmd_interpolate(args: argparse.Namespace) -> int:
    model = load_generator(args.model)
    z_a = _first_latent(args.from_, "--from")
    z_b = _first_latent(args.to, "--to")
    path = interpolate(z_a, z_b, args.steps)
    frames = render_frames(model, path, args.class_)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        write_image(frame, out / f"frame_{i:03d}.ppm")
    export_latents(path, out / "latents.csv")
    _emit({
        "command": "interpolate",
        "model": str(args.model),
        "steps": args.steps,
        "class": args.class_,
        "out": str(out),
    })
    return 0


def cmd_entropy(args: argparse.Namespace) -> int:
    if args.images:
        images = load_image_dir(args.images)
        source = str(args.images)
    else:
        images = make_toy_dataset(args.dataset, args.sample, args.shape, args.seed).images
        source = args.dataset
    if len(images) > args.sample:
        rng = np.random.default_rng(args.seed)
        picks = np.sort(rng.choice(len(images), size=args.sample, replace=False))
        images = [images[i] for i in picks]
    bits = shannon_entropy(images, args.bins)
    _emit({
        "command": "entropy",
        "source": source,
        "images": len(images),
        "bins": args.bins,
        "seed": args.seed,
        "entropy_bits": bits,
    })
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    model = load_generator(args.model)
    _check_prior_flag(args, model)
    images = sample(model, args.n, args.seed, args.class_)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(images):
        write_image(img, out / f"sample_{i:03d}.ppm")
    _emit({
        "command": "sample",
        "model": str(args.model),
        "n": args.n,
        "seed": args.seed,
        "class": args.class_,
        "out": str(out),
    })
    return 0


# -- parser ------------------------------------------------------------------------


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odx", description="Out-domain examples for generative models"
    )
    parser.add_argument("--version", action="version", version=f"odx {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    model = sub.add_parser("model", help="Model file utilities")
    model_sub = model.add_subparsers(dest="model_command", required=True)
    p = model_sub.add_parser("init-random", help="Write a seeded random generator")
    p.add_argument("--arch", required=True, help="Preset (mlp, dcgan, upsample) or JSON file")
    p.add_argument("--latent-dim", type=_positive, required=True)
    p.add_argument("--prior", choices=("normal", "uniform"), default="normal")
    p.add_argument("--classes", type=_positive, default=None)
    p.add_argument("--shape", type=_shape, default=(3, 8, 8), help="Output C,H,W")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init_random)

    p = sub.add_parser("train", help="Train a toy GAN or ACGAN")
    p.add_argument("--dataset", required=True, help="flat, stripes, texture or an image directory")
    p.add_argument("--acgan", action="store_true")
    p.add_argument("--latent-dim", type=_positive, default=16)
    p.add_argument("--prior", choices=("normal", "uniform"), default="normal")
    p.add_argument("--iters", type=int, default=DEFAULT_ITERS)
    p.add_argument("--batch-size", type=_positive, default=32)
    p.add_argument("--lr-g", type=float, default=2e-3)
    p.add_argument("--lr-d", type=float, default=2e-3)
    p.add_argument("--hidden", type=_positive, default=64)
    p.add_argument("--count", type=_positive, default=256, help="Synthetic dataset size")
    p.add_argument("--shape", type=_shape, default=(3, 8, 8))
    p.add_argument("--log-every", type=_positive, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--out-disc", default=None, help="Also write the discriminator")
    p.add_argument("--log", default=None, help="Training log JSON")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("invert", help="Search a latent vector for a target image")
    p.add_argument("--model", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--class", dest="class_", type=int, default=None)
    p.add_argument("--prior", default=None, help="Rejected: model files declare their prior")
    p.add_argument("--distance", choices=("mse", "xe"), default="mse")
    p.add_argument("--k", type=int, default=None, help="Penalized moments (default 4 normal, 6 uniform)")
    p.add_argument("--omega", type=_floats, default=None, help="Moment weights w1,...,wK")
    p.add_argument("--lr", type=float, default=DEFAULT_LR)
    p.add_argument("--iters", type=int, default=DEFAULT_ITERS)
    p.add_argument("--clip", choices=("none", "hard", "stochastic"), default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-latent", default=None)
    p.add_argument("--out-image", default=None)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("validate", help="Gate decision on latent vectors")
    p.add_argument("--latent", required=True)
    p.add_argument("--prior", choices=("normal", "uniform"), default="normal")
    p.add_argument("--test", choices=("ad", "ks", "sw"), default=DEFAULT_TEST)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_validate)

    for name, func in (("evaluate", cmd_evaluate), ("sweep", cmd_sweep)):
        p = sub.add_parser(name, help=f"{name.capitalize()} attacks over a target directory")
        if name == "evaluate":
            p.add_argument("--model", required=True)
            p.add_argument("--per-class", action="store_true")
            p.add_argument("--latents-out", default=None)
        else:
            p.add_argument("--models", required=True, help="Comma-separated GTC files")
        p.add_argument("--targets", required=True)
        p.add_argument("--config", default=None, help="Attack config JSON")
        p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
        p.add_argument("--test", choices=("ad", "ks", "sw"), default=DEFAULT_TEST)
        p.add_argument("--jobs", type=_positive, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--report", default=None)
        p.set_defaults(func=func)

    p = sub.add_parser("interpolate", help="Render a linear latent path")
    p.add_argument("--model", required=True)
    p.add_argument("--from", dest="from_", required=True)
    p.add_argument("--to", required=True)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--class", dest="class_", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("entropy", help="Shannon entropy of an image set")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--images", default=None)
    src.add_argument("--dataset", choices=DATASET_KINDS, default=None)
    p.add_argument("--sample", type=_positive, default=1024)
    p.add_argument("--bins", type=_positive, default=256)
    p.add_argument("--shape", type=_shape, default=(3, 8, 8))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("sample", help="Write generator samples")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=_positive, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--class", dest="class_", type=int, default=None)
    p.add_argument("--prior", default=None, help="Rejected: model files declare their prior")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"[cli] error: file not found: {e.filename or e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"[cli] numeric error: {e}", file=sys.stderr)
        return 3
    except (OdxError, ValueError) as e:
        print(f"[cli] error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"[cli] error: {e}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError) as e:
        print(f"[cli] runtime error: {e}", file=sys.stderr)
        return 3
