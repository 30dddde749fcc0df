"""Command-line entry points for every workflow.

One subcommand per workflow; a single JSON config file (``--config``) can
supply any flag's value, with explicit flags taking precedence.  Every run
that produces an output writes its resolved configuration next to it.
The environment variable ``TURBO_I2I_HOME`` sets the default checkpoint
root.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
import time
from pathlib import Path

import torch

from . import checkpoint as ckpt
from .data import EdgeConfig, SceneSpec, edge_image, extract_edges, load_folder, synth_sketch, write_dataset
from .errors import TurboI2IError, ValidationError
from .generator import ModelConfig, OneStepTranslator
from .images import load_png, save_png
from .objectives import default_feature_net
from .perceptual import dino_struct_dist, fid_between
from .report import LossWeights
from .service import DEFAULT_MAX_BYTES, serve
from .trainer import (ABLATION_VARIANTS, TrainConfig, build_variant, dataset_size_sweep,
                      evaluate_translation, finetune_diversity, pretrain_backbone,
                      rows_to_csv, run_ablation, train_paired, train_unpaired, write_history)


def home_dir() -> Path:
    return Path(os.environ.get("TURBO_I2I_HOME", Path.home() / ".turbo_i2i"))


def resolve_checkpoint(path) -> Path:
    """Interpret a checkpoint argument: a real path as-is, otherwise a name
    under the checkpoint root (TURBO_I2I_HOME)."""
    p = Path(path)
    if p.exists():
        return p
    candidate = home_dir() / str(path)
    if candidate.exists():
        return candidate
    raise ValidationError(f"checkpoint {path!r} not found (also tried {candidate})")


def _write_resolved_config(out_path: Path, resolved: dict) -> None:
    out_path.parent.mkdir(parents=True, exist_ok=True)
    target = out_path / "resolved_config.json" if out_path.is_dir() or not out_path.suffix \
        else out_path.with_suffix(out_path.suffix + ".config.json")
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(resolved, indent=2, sort_keys=True, default=str))


def _train_config(ns: argparse.Namespace) -> TrainConfig:
    weights = LossWeights.paired() if getattr(ns, "paired_weights", False) else LossWeights()
    overrides = {}
    for name in ("lambda_idt", "lambda_gan", "lambda_clip", "lambda_l1", "lambda_lpips"):
        v = getattr(ns, name, None)
        if v is not None:
            overrides[name] = v
    if overrides:
        weights = LossWeights(**{**weights.to_dict(), **overrides})
    return TrainConfig(
        steps=ns.steps, batch_size=ns.batch_size, lr=ns.lr, seed=ns.seed,
        weights=weights, eval_every=ns.eval_every, feature_seed=ns.feature_seed,
    )


def _load_domains(data_dir: Path, size: int, names=None) -> tuple[list, list, tuple[str, str]]:
    manifest_path = data_dir / "manifest.json"
    if names is None:
        if manifest_path.exists():
            names = tuple(json.loads(manifest_path.read_text())["domains"].keys())
        else:
            names = tuple(sorted(p.name for p in data_dir.iterdir() if p.is_dir()))
    if len(names) < 2:
        raise ValidationError(f"need two domain folders under {data_dir}, found {names}")
    xs = load_folder(data_dir / names[0], size)
    ys = load_folder(data_dir / names[1], size)
    return xs, ys, (names[0], names[1])


def _split_eval(images: list, eval_n: int) -> tuple[list, list]:
    if eval_n <= 0 or eval_n >= len(images):
        return images, images[: max(2, min(8, len(images)))]
    return images[:-eval_n], images[-eval_n:]


def _paired_sets(targets: list, kind: str, seed: int) -> tuple[list, list]:
    cfg = EdgeConfig()
    extract = extract_edges if kind == "edge" else synth_sketch
    inputs = [edge_image(extract(img, cfg, seed=seed + i)) for i, img in enumerate(targets)]
    return inputs, targets


# ------------------------------------------------------------------ commands

def cmd_gen_data(ns) -> int:
    spec = SceneSpec(seed=ns.seed, size=ns.size)
    out = Path(ns.out)
    write_dataset(out, ns.n, spec, domains=tuple(ns.domains.split(",")))
    _write_resolved_config(out, {"command": "gen-data", "n": ns.n, "seed": ns.seed,
                                 "size": ns.size, "domains": ns.domains})
    print(f"wrote {ns.n} scenes per domain to {out}")
    return 0


def cmd_pretrain(ns) -> int:
    cfg = _train_config(ns)
    xs, ys, names = _load_domains(Path(ns.data), ns.size)
    model_config = ModelConfig(domains=names, seed=ns.seed)
    model = pretrain_backbone((xs, ys), cfg, model_config,
                              ae_steps=ns.ae_steps, gen_steps=ns.gen_steps)
    out = Path(ns.out)
    ckpt.save_translator(model, out, model_id=ns.model_id)
    _write_resolved_config(out, {"command": "pretrain", "train": cfg.to_dict(),
                                 "model": model_config.to_dict()})
    print(f"pretrained backbone saved to {out}")
    return 0


def cmd_train_unpaired(ns) -> int:
    cfg = _train_config(ns)
    xs, ys, names = _load_domains(Path(ns.data), ns.size)
    train_x, eval_x = _split_eval(xs, ns.eval_n)
    train_y, eval_y = _split_eval(ys, ns.eval_n)
    backbone = ckpt.load_translator(resolve_checkpoint(ns.backbone))
    model = build_variant(backbone, ns.variant)
    model, history = train_unpaired(model, train_x, train_y, cfg, eval_sets=(eval_x, eval_y))
    out = Path(ns.out)
    ckpt.save_translator(model, out, model_id=ns.model_id)
    write_history(history, out / "history.ndjson")
    _write_resolved_config(out, {"command": "train-unpaired", "train": cfg.to_dict(),
                                 "variant": ns.variant, "backbone": str(ns.backbone)})
    final_eval = [h for h in history if h.get("kind") == "eval"]
    if final_eval:
        print(f"final eval: {final_eval[-1]}")
    print(f"model saved to {out}")
    return 0


def cmd_train_paired(ns) -> int:
    ns.paired_weights = True
    cfg = _train_config(ns)
    xs, ys, names = _load_domains(Path(ns.data), ns.size)
    targets = ys if ns.target_domain in (None, names[1]) else xs
    train_t, eval_t = _split_eval(targets, ns.eval_n)
    pairs = _paired_sets(train_t, ns.kind, ns.seed)
    eval_pairs = _paired_sets(eval_t, ns.kind, ns.seed + 10_000)
    backbone = ckpt.load_translator(resolve_checkpoint(ns.backbone))
    model = build_variant(backbone, "FULL")
    model, history = train_paired(model, pairs, cfg, code=ns.target_domain or names[1],
                                  eval_pairs=eval_pairs)
    out = Path(ns.out)
    ckpt.save_translator(model, out, model_id=ns.model_id)
    write_history(history, out / "history.ndjson")
    _write_resolved_config(out, {"command": "train-paired", "train": cfg.to_dict(),
                                 "kind": ns.kind, "backbone": str(ns.backbone)})
    print(f"model saved to {out}")
    return 0


def cmd_finetune_diversity(ns) -> int:
    ns.paired_weights = True
    cfg = _train_config(ns)
    xs, ys, names = _load_domains(Path(ns.data), ns.size)
    targets = ys if ns.target_domain in (None, names[1]) else xs
    pairs = _paired_sets(targets, ns.kind, ns.seed)
    model = ckpt.load_translator(resolve_checkpoint(ns.model))
    model, history = finetune_diversity(model, pairs, cfg, code=ns.target_domain or names[1])
    out = Path(ns.out)
    ckpt.save_translator(model, out, model_id=ns.model_id)
    write_history(history, out / "history.ndjson")
    _write_resolved_config(out, {"command": "finetune-diversity", "train": cfg.to_dict()})
    print(f"model saved to {out}")
    return 0


def cmd_translate(ns) -> int:
    model = ckpt.load_translator(resolve_checkpoint(ns.model))
    img = load_png(ns.infile)
    gen = torch.Generator().manual_seed(ns.seed)
    z = model.sample_noise(img.unsqueeze(0), generator=gen).squeeze(0).unsqueeze(0)
    out = model.translate(img, ns.domain, z=z, gamma=ns.gamma)
    save_png(out, ns.out)
    _write_resolved_config(Path(ns.out), {"command": "translate", "domain": ns.domain,
                                          "gamma": ns.gamma, "seed": ns.seed,
                                          "model": str(ns.model)})
    print(f"translated {ns.infile} -> {ns.out}")
    return 0


def cmd_evaluate(ns) -> int:
    net = default_feature_net(ns.feature_seed)
    source = load_folder(Path(ns.source), ns.size)
    target = load_folder(Path(ns.target), ns.size)
    if ns.model:
        model = ckpt.load_translator(resolve_checkpoint(ns.model))
        metrics = evaluate_translation(model, source, target,
                                       ns.domain or model.config.domains[1], net)
    else:
        dino = sum(float(dino_struct_dist(a, b, net)) for a, b in zip(source, target))
        metrics = {"fid": fid_between(source, target, net),
                   "dino_struct": dino / min(len(source), len(target))}
    print(json.dumps(metrics, indent=2))
    if ns.out:
        Path(ns.out).write_text(json.dumps(metrics, indent=2))
        _write_resolved_config(Path(ns.out), {"command": "evaluate", "source": str(ns.source),
                                              "target": str(ns.target), "model": str(ns.model)})
    return 0


def cmd_ablate(ns) -> int:
    cfg = _train_config(ns)
    xs, ys, names = _load_domains(Path(ns.data), ns.size)
    train_x, eval_x = _split_eval(xs, ns.eval_n)
    train_y, eval_y = _split_eval(ys, ns.eval_n)
    backbone = ckpt.load_translator(resolve_checkpoint(ns.backbone)) if ns.backbone else None
    variants = [v.strip().upper() for v in ns.variants.split(",") if v.strip()]
    rows = run_ablation(variants, (train_x, train_y, eval_x, eval_y), cfg, backbone=backbone)
    rows_to_csv(rows, ns.out)
    _write_resolved_config(Path(ns.out), {"command": "ablate", "train": cfg.to_dict(),
                                          "variants": variants})
    print(f"wrote {len(rows)} rows to {ns.out}")
    return 0


def cmd_sweep(ns) -> int:
    cfg = _train_config(ns)
    xs, ys, names = _load_domains(Path(ns.data), ns.size)
    train_x, eval_x = _split_eval(xs, ns.eval_n)
    train_y, eval_y = _split_eval(ys, ns.eval_n)
    backbone = ckpt.load_translator(resolve_checkpoint(ns.backbone)) if ns.backbone else None
    sizes = [int(s) for s in ns.sizes.split(",") if s.strip()]
    rows = dataset_size_sweep(sizes, (train_x, train_y, eval_x, eval_y), cfg, backbone=backbone)
    rows_to_csv(rows, ns.out)
    _write_resolved_config(Path(ns.out), {"command": "sweep", "train": cfg.to_dict(),
                                          "sizes": sizes})
    print(f"wrote {len(rows)} rows to {ns.out}")
    return 0


def cmd_bench(ns) -> int:
    if ns.reps < 3:
        raise ValidationError(f"bench needs reps >= 3, got {ns.reps}")
    model = ckpt.load_translator(resolve_checkpoint(ns.model)) if ns.model else OneStepTranslator(ModelConfig())
    model.eval()
    x = torch.zeros(1, 3, ns.size, ns.size)
    z = model.sample_noise(x, seed=0)
    with torch.no_grad():
        model(x, model.config.domains[1], z=z, gamma=1.0)  # warmup
        timings = []
        for _ in range(ns.reps):
            t0 = time.perf_counter()
            model(x, model.config.domains[1], z=z, gamma=1.0)
            timings.append((time.perf_counter() - t0) * 1000.0)
    ordered = sorted(timings)
    report = {
        "size": ns.size,
        "reps": ns.reps,
        "timings_ms": timings,
        "median_ms": statistics.median(timings),
        "p95_ms": ordered[max(0, -(-len(ordered) * 95 // 100) - 1)],
    }
    print(json.dumps(report, indent=2))
    if ns.out:
        Path(ns.out).write_text(json.dumps(report, indent=2))
    return 0


def cmd_serve(ns) -> int:
    serve(resolve_checkpoint(ns.model), ns.port, bind=ns.bind, max_bytes=ns.max_bytes)
    return 0


# -------------------------------------------------------------------- parser

def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eval-every", type=int, default=250)
    p.add_argument("--eval-n", type=int, default=24, help="held-out images per domain")
    p.add_argument("--feature-seed", type=int, default=0)
    p.add_argument("--size", type=int, default=64)
    for name in ("lambda-idt", "lambda-gan", "lambda-clip", "lambda-l1", "lambda-lpips"):
        p.add_argument(f"--{name}", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="turbo-i2i",
                                     description="one-step image-to-image translation toolkit")
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON file supplying default values for any flag")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("gen-data", help="generate a synthetic two-domain dataset")
    p.add_argument("--out")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--domains", default="day,night")
    p.set_defaults(func=cmd_gen_data, required_keys=("out",))

    p = sub.add_parser("pretrain", help="pretrain the one-step backbone")
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--model-id", default="backbone")
    p.add_argument("--ae-steps", type=int, default=None)
    p.add_argument("--gen-steps", type=int, default=None)
    _add_train_flags(p)
    p.set_defaults(func=cmd_pretrain, required_keys=("data", "out"))

    p = sub.add_parser("train-unpaired", help="unpaired adaptation (cycle + identity + GAN)")
    p.add_argument("--data")
    p.add_argument("--backbone")
    p.add_argument("--out")
    p.add_argument("--variant", default="FULL", choices=ABLATION_VARIANTS)
    p.add_argument("--model-id", default="unpaired")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train_unpaired, required_keys=("data", "backbone", "out"))

    p = sub.add_parser("train-paired", help="paired adaptation (edge/sketch to image)")
    p.add_argument("--data")
    p.add_argument("--backbone")
    p.add_argument("--out")
    p.add_argument("--kind", default="edge", choices=("edge", "sketch"))
    p.add_argument("--target-domain", default=None)
    p.add_argument("--model-id", default="paired")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train_paired, required_keys=("data", "backbone", "out"))

    p = sub.add_parser("finetune-diversity", help="gamma-varying diversity finetune")
    p.add_argument("--data")
    p.add_argument("--model")
    p.add_argument("--out")
    p.add_argument("--kind", default="edge", choices=("edge", "sketch"))
    p.add_argument("--target-domain", default=None)
    p.add_argument("--model-id", default="diverse")
    _add_train_flags(p)
    p.set_defaults(func=cmd_finetune_diversity, required_keys=("data", "model", "out"))

    p = sub.add_parser("translate", help="translate one image")
    p.add_argument("--in", dest="infile")
    p.add_argument("--out")
    p.add_argument("--model")
    p.add_argument("--domain")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_translate, required_keys=("infile", "out", "model", "domain"))

    p = sub.add_parser("evaluate", help="FID + structure distance between folders")
    p.add_argument("--source")
    p.add_argument("--target")
    p.add_argument("--model", default=None)
    p.add_argument("--domain", default=None)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--feature-seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate, required_keys=("source", "target"))

    p = sub.add_parser("ablate", help="train and score ablation variants")
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--backbone", default=None)
    p.add_argument("--variants", default="A,B,C,D,FULL")
    _add_train_flags(p)
    p.set_defaults(func=cmd_ablate, required_keys=("data", "out"))

    p = sub.add_parser("sweep", help="dataset-size sweep")
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--backbone", default=None)
    p.add_argument("--sizes", default="10,200")
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep, required_keys=("data", "out"))

    p = sub.add_parser("bench", help="single-forward latency")
    p.add_argument("--model", default=None)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--model")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--bind", default="127.0.0.1")
    p.add_argument("--max-bytes", type=int, default=DEFAULT_MAX_BYTES)
    p.set_defaults(func=cmd_serve, required_keys=("model",))

    return parser


def _merge_config_file(ns: argparse.Namespace, argv: list[str]) -> None:
    """Fill flags from the JSON config file; explicit flags win."""
    if not ns.config:
        return
    config = json.loads(Path(ns.config).read_text())
    if not isinstance(config, dict):
        raise ValidationError("--config must contain a JSON object")
    for key, value in config.items():
        attr = key.replace("-", "_")
        flag = "--" + key.replace("_", "-")
        if not hasattr(ns, attr) or flag in argv:
            continue
        current = getattr(ns, attr)
        if isinstance(current, bool):
            value = bool(value)
        elif isinstance(current, int) and not isinstance(value, bool):
            value = int(value)
        elif isinstance(current, float):
            value = float(value)
        setattr(ns, attr, value)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        _merge_config_file(ns, argv)
        for key in getattr(ns, "required_keys", ()):
            if getattr(ns, key, None) in (None, ""):
                raise ValidationError(f"missing required flag --{key.replace('_', '-')}"
                                      " (set it on the command line or in --config)")
        return ns.func(ns)
    except TurboI2IError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
