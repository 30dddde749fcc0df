"""Training loops: backbone pretraining, unpaired/paired adaptation,
diversity finetuning, and the ablation / dataset-size drivers.

All loops are single-threaded over the mutable model, draw every random
number from local seeded generators, and therefore produce bit-identical
checkpoints for identical configs in deterministic mode.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

import numpy as np
import torch

from .adversarial import Discriminator, gan_loss_d, gan_loss_g
from .errors import ValidationError
from .generator import ModelConfig, OneStepTranslator
from .objectives import (UnpairedBatch, default_feature_net, paired_objective,
                         rec_distance, unpaired_objective)
from .perceptual import FeatureNet, dino_struct_dist, fit_stats, frechet_distance
from .report import LossReport, LossWeights

log = logging.getLogger(__name__)

# Reference settings for adapting a full-scale (billion-parameter) backbone;
# kept for documentation, far too small a step size for the toy networks here.
FULL_SCALE_REFERENCE = {"lr": 1e-6, "batch_size": 8}

ABLATION_VARIANTS = ("A", "B", "C", "D", "FULL")


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    batch_size: int = 8
    lr: float = 1e-4
    betas: tuple[float, float] = (0.5, 0.999)
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    gamma_choices: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    eval_every: int = 250
    feature_seed: int = 0
    deterministic: bool = True
    # discriminator heads are tiny compared to the generator; they need a
    # faster clock to supply translation pressure
    d_lr_mult: float = 4.0

    def __post_init__(self):
        if self.steps < 1:
            raise ValidationError(f"steps must be >= 1, got {self.steps}")
        if any(not 0.0 <= g <= 1.0 for g in self.gamma_choices):
            raise ValidationError(f"gamma_choices must lie in [0,1], got {self.gamma_choices}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = self.weights.to_dict()
        d["betas"] = list(self.betas)
        d["gamma_choices"] = list(self.gamma_choices)
        return d


def set_deterministic(enabled: bool = True) -> None:
    torch.use_deterministic_algorithms(enabled)


class _BatchSampler:
    """Seeded with-replacement batch sampler over an in-memory image list."""

    def __init__(self, images: list[torch.Tensor], batch_size: int, rng: np.random.Generator):
        if not images:
            raise ValidationError("empty dataset")
        self.images = images
        self.batch_size = batch_size
        self.rng = rng

    def next(self) -> torch.Tensor:
        idx = self.rng.integers(0, len(self.images), size=self.batch_size)
        return torch.stack([self.images[i] for i in idx])

    def next_indexed(self) -> tuple[torch.Tensor, np.ndarray]:
        idx = self.rng.integers(0, len(self.images), size=self.batch_size)
        return torch.stack([self.images[i] for i in idx]), idx


def evaluate_translation(model: OneStepTranslator, eval_x: list[torch.Tensor],
                         eval_y: list[torch.Tensor], code_y, net: FeatureNet,
                         y_stats=None, batch_size: int = 16) -> dict:
    """Held-out metrics for x->y translation at gamma=1: Fréchet distance of
    translated outputs against the target set, and the mean structure
    distance (x100) between inputs and outputs."""
    translated = []
    dino_total = 0.0
    noise_gen = torch.Generator().manual_seed(1234)  # fixed: evals comparable across runs
    with torch.no_grad():
        for i in range(0, len(eval_x), batch_size):
            xb = torch.stack(eval_x[i : i + batch_size])
            z = None
            if model.branch is not None:
                z = torch.randn(model.latent_shape(xb), generator=noise_gen, dtype=xb.dtype)
            out = model(xb, code_y, z=z)
            for j in range(out.shape[0]):
                translated.append(out[j])
                dino_total += float(dino_struct_dist(xb[j], out[j], net))
    stats_t = fit_stats(translated, net)
    stats_y = y_stats if y_stats is not None else fit_stats(eval_y, net)
    return {
        "fid": frechet_distance(stats_t, stats_y),
        "dino_struct": dino_total / len(eval_x),
    }


def write_history(history: list[dict], path) -> None:
    """Step-indexed newline-delimited JSON records."""
    with open(path, "w") as fh:
        for rec in history:
            fh.write(json.dumps(rec) + "\n")


# ------------------------------------------------------------- pretraining

def pretrain_backbone(data, cfg: TrainConfig, model_config: ModelConfig | None = None,
                      ae_steps: int | None = None, gen_steps: int | None = None) -> OneStepTranslator:
    """Train a toy one-step backbone from scratch on a labeled two-domain set.

    Phase (a) trains the first-stage encoder/decoder as a plain autoencoder
    (skips disabled); phase (b) trains the latent core as a domain-conditional
    one-step generator: it receives a noise-blended latent of a real image
    and must map it to a clean image of that domain, under reconstruction
    (weighted by the remaining signal fraction) plus adversarial pressure.
    The returned model has pretrained=True and all adapter deltas still zero.
    """
    xs, ys = data
    if not xs or not ys:
        raise ValidationError("pretraining needs images from both domains")
    if cfg.deterministic:
        set_deterministic(True)
    model_config = model_config or ModelConfig(seed=cfg.seed)
    model = OneStepTranslator(model_config)
    model.set_trainable(backbone=True, adapters=False)
    net = default_feature_net(cfg.feature_seed)
    rng = np.random.default_rng([cfg.seed, 11])
    torch_gen = torch.Generator().manual_seed(cfg.seed + 11)
    ae_weights = LossWeights(lambda_l1=1.0, lambda_lpips=0.5)

    both = list(xs) + list(ys)
    sampler = _BatchSampler(both, cfg.batch_size, rng)

    # phase (a): autoencode the union of domains through the 8x bottleneck
    ae_params = [p for p in model.encoder.parameters() if p.requires_grad]
    ae_params += [p for p in model.decoder.parameters() if p.requires_grad]
    opt = torch.optim.Adam(ae_params, lr=cfg.lr, betas=cfg.betas)
    for step in range(ae_steps if ae_steps is not None else cfg.steps):
        batch = sampler.next()
        lat, _ = model.encoder(batch)
        recon = model.decoder(lat, taps=None)
        loss = rec_distance(recon, batch, ae_weights, net)
        opt.zero_grad()
        loss.backward()
        opt.step()

    # phase (b): core as a domain-conditional one-step generator
    core_params = [p for p in model.core.parameters() if p.requires_grad]
    core_params += [p for p in model.domains.parameters() if p.requires_grad]
    opt = torch.optim.Adam(core_params, lr=cfg.lr, betas=cfg.betas)
    discs = [Discriminator(net, seed=cfg.seed + 101), Discriminator(net, seed=cfg.seed + 102)]
    # pretraining keeps a gentle discriminator clock: the reconstruction term
    # already anchors the core, and a softer game preserves the backbone's
    # noise-to-structure coupling
    opt_d = torch.optim.Adam([p for d in discs for p in d.head_parameters()],
                             lr=cfg.lr, betas=cfg.betas)
    samplers = [_BatchSampler(list(xs), cfg.batch_size, rng), _BatchSampler(list(ys), cfg.batch_size, rng)]
    noise_levels = (0.25, 0.5, 0.75, 1.0)
    for step in range(gen_steps if gen_steps is not None else cfg.steps):
        dom = step % 2
        batch = samplers[dom].next()
        with torch.no_grad():
            z0, _ = model.encoder(batch)
        t = float(noise_levels[rng.integers(0, len(noise_levels))])
        eps = torch.randn(z0.shape, generator=torch_gen, dtype=z0.dtype)
        z_t = (1.0 - t) * z0 + t * eps
        emb = model.domains(dom, batch.shape[0])
        out = model.decoder(model.core(z_t, emb), taps=None)
        rec = (1.0 - t) * rec_distance(out, batch, ae_weights, net)
        gan = gan_loss_g(discs[dom], out).total_tensor
        opt.zero_grad()
        (rec + 0.5 * gan).backward()
        opt.step()
        opt_d.zero_grad()
        gan_loss_d(discs[dom], batch, out.detach()).total_tensor.backward()
        opt_d.step()

    model.pretrained = True
    model.set_trainable(backbone=False, adapters=True)
    return model


# -------------------------------------------------------------- adaptation

def _make_translate_fn(model: OneStepTranslator, torch_gen: torch.Generator):
    """(x, code) -> image wrapper; branch models draw a fresh noise map per call."""
    if model.branch is None:
        def fn(x, code):
            return model(x, code)
    else:
        def fn(x, code):
            z = torch.randn(model.latent_shape(x), generator=torch_gen,
                            dtype=next(model.parameters()).dtype)
            return model(x, code, z=z)
    return fn


def _eval_record(step, model, eval_x, eval_y, code_y, net, y_stats):
    metrics = evaluate_translation(model, eval_x, eval_y, code_y, net, y_stats=y_stats)
    return {"step": step, "kind": "eval", **metrics}


def train_unpaired(model: OneStepTranslator, xs: list[torch.Tensor], ys: list[torch.Tensor],
                   cfg: TrainConfig, eval_sets=None) -> tuple[OneStepTranslator, list[dict]]:
    """Unpaired adaptation with the full objective and 1:1 G/D alternation.

    Only adapter (and branch) parameters change; the frozen backbone is
    bit-identical afterwards.  `eval_sets`, when given as (eval_x, eval_y),
    adds held-out FID / structure-distance records at the eval cadence,
    including a step-0 baseline before any update.
    """
    code_x, code_y = model.config.domains[:2]
    if code_x == code_y:
        raise ValidationError("source and target domain codes overlap")
    if cfg.deterministic:
        set_deterministic(True)
    net = default_feature_net(cfg.feature_seed)
    model.set_trainable(backbone=False, adapters=True)
    params = [p for p in model.adapter_parameters() if p.requires_grad]
    opt_g = torch.optim.Adam(params, lr=cfg.lr, betas=cfg.betas)
    d_x = Discriminator(net, seed=cfg.seed + 201)
    d_y = Discriminator(net, seed=cfg.seed + 202)
    opt_d = torch.optim.Adam(d_x.head_parameters() + d_y.head_parameters(),
                             lr=cfg.lr * cfg.d_lr_mult, betas=cfg.betas)
    rng = np.random.default_rng([cfg.seed, 21])
    torch_gen = torch.Generator().manual_seed(cfg.seed + 21)
    sampler_x = _BatchSampler(xs, cfg.batch_size, rng)
    sampler_y = _BatchSampler(ys, cfg.batch_size, rng)
    g_fn = _make_translate_fn(model, torch_gen)

    history: list[dict] = []
    y_stats = None
    if eval_sets is not None:
        eval_x, eval_y = eval_sets
        y_stats = fit_stats(eval_y, net)
        history.append(_eval_record(0, model, eval_x, eval_y, code_y, net, y_stats))

    for step in range(cfg.steps):
        batch = UnpairedBatch(sampler_x.next(), sampler_y.next(), code_x, code_y)
        report = unpaired_objective(g_fn, d_x, d_y, batch, cfg.weights, net)
        opt_g.zero_grad()
        report.total_tensor.backward()
        opt_g.step()

        d_report = LossReport({
            "d_y": gan_loss_d(d_y, batch.y, report.extras["fake_y"]).total_tensor,
            "d_x": gan_loss_d(d_x, batch.x, report.extras["fake_x"]).total_tensor,
        })
        opt_d.zero_grad()
        d_report.total_tensor.backward()
        opt_d.step()

        history.append({"step": step + 1, "kind": "loss",
                        "generator": report.to_dict(), "discriminator": d_report.to_dict()})
        if eval_sets is not None and ((step + 1) % cfg.eval_every == 0 or step + 1 == cfg.steps):
            history.append(_eval_record(step + 1, model, eval_x, eval_y, code_y, net, y_stats))
    return model, history


def _normalize_pairs(pairs) -> tuple[list[torch.Tensor], list[torch.Tensor]]:
    if isinstance(pairs, tuple) and len(pairs) == 2 and isinstance(pairs[0], list):
        xs, ys = pairs
    else:
        xs, ys = [p[0] for p in pairs], [p[1] for p in pairs]
    if len(xs) != len(ys):
        raise ValidationError(f"misaligned pairs: {len(xs)} inputs vs {len(ys)} targets")
    if not xs:
        raise ValidationError("empty paired dataset")
    return list(xs), list(ys)


def train_paired(model: OneStepTranslator, pairs, cfg: TrainConfig, code=None,
                 eval_pairs=None) -> tuple[OneStepTranslator, list[dict]]:
    """Paired adaptation (input -> target) with a single target-domain
    discriminator and the reconstruction + GAN + alignment objective."""
    xs, ys = _normalize_pairs(pairs)
    if cfg.deterministic:
        set_deterministic(True)
    code = code if code is not None else model.config.domains[1]
    weights = cfg.weights
    net = default_feature_net(cfg.feature_seed)
    model.set_trainable(backbone=False, adapters=True)
    params = [p for p in model.adapter_parameters() if p.requires_grad]
    opt_g = torch.optim.Adam(params, lr=cfg.lr, betas=cfg.betas)
    d_y = Discriminator(net, seed=cfg.seed + 301)
    opt_d = torch.optim.Adam(d_y.head_parameters(), lr=cfg.lr * cfg.d_lr_mult, betas=cfg.betas)
    rng = np.random.default_rng([cfg.seed, 31])
    sampler = _BatchSampler(xs, cfg.batch_size, rng)

    def eval_rec() -> float:
        ex, ey = eval_pairs
        with torch.no_grad():
            total = 0.0
            for i in range(0, len(ex), 16):
                xb = torch.stack(ex[i : i + 16])
                yb = torch.stack(ey[i : i + 16])
                total += float(rec_distance(model(xb, code), yb, weights, net)) * xb.shape[0]
        return total / len(ex)

    history: list[dict] = []
    if eval_pairs is not None:
        history.append({"step": 0, "kind": "eval", "rec": eval_rec()})
    for step in range(cfg.steps):
        xb, idx = sampler.next_indexed()
        yb = torch.stack([ys[i] for i in idx])
        report = paired_objective(model, d_y, xb, yb, code, weights, net)
        opt_g.zero_grad()
        report.total_tensor.backward()
        opt_g.step()
        d_report = LossReport({"d_y": gan_loss_d(d_y, yb, report.extras["fake_y"]).total_tensor})
        opt_d.zero_grad()
        d_report.total_tensor.backward()
        opt_d.step()
        history.append({"step": step + 1, "kind": "loss",
                        "generator": report.to_dict(), "discriminator": d_report.to_dict()})
        if eval_pairs is not None and ((step + 1) % cfg.eval_every == 0 or step + 1 == cfg.steps):
            history.append({"step": step + 1, "kind": "eval", "rec": eval_rec()})
    return model, history


def finetune_diversity(model: OneStepTranslator, pairs, cfg: TrainConfig,
                       code=None) -> tuple[OneStepTranslator, list[dict]]:
    """Vary the interpolation coefficient during finetuning so that noise
    maps translate into output diversity at gamma < 1.

    Each step draws gamma from cfg.gamma_choices; the reconstruction term is
    scaled by gamma (zero contribution at gamma=0), the GAN term always
    applies."""
    xs, ys = _normalize_pairs(pairs)
    if any(not 0.0 <= g <= 1.0 for g in cfg.gamma_choices):
        raise ValidationError(f"gamma distribution outside [0,1]: {cfg.gamma_choices}")
    if cfg.deterministic:
        set_deterministic(True)
    code = code if code is not None else model.config.domains[1]
    weights = cfg.weights
    net = default_feature_net(cfg.feature_seed)
    model.set_trainable(backbone=False, adapters=True)
    params = [p for p in model.adapter_parameters() if p.requires_grad]
    opt_g = torch.optim.Adam(params, lr=cfg.lr, betas=cfg.betas)
    # same head seed as train_paired: finetuning restarts the same
    # target-domain discriminator role
    d_y = Discriminator(net, seed=cfg.seed + 301)
    opt_d = torch.optim.Adam(d_y.head_parameters(), lr=cfg.lr * cfg.d_lr_mult, betas=cfg.betas)
    rng = np.random.default_rng([cfg.seed, 41])
    torch_gen = torch.Generator().manual_seed(cfg.seed + 41)
    sampler = _BatchSampler(xs, cfg.batch_size, rng)

    history: list[dict] = []
    for step in range(cfg.steps):
        xb, idx = sampler.next_indexed()
        yb = torch.stack([ys[i] for i in idx])
        gamma = float(cfg.gamma_choices[rng.integers(0, len(cfg.gamma_choices))])
        z = torch.randn(model.latent_shape(xb), generator=torch_gen, dtype=xb.dtype)
        out = model(xb, code, z=z, gamma=gamma)
        terms = {"gan": gan_loss_g(d_y, out).total_tensor}
        t_weights = {"gan": weights.lambda_gan}
        if gamma > 0.0:
            terms["diversity"] = gamma * rec_distance(out, yb, weights, net)
            t_weights["diversity"] = 1.0
        report = LossReport(terms, weights=t_weights, meta={"gamma": gamma})
        opt_g.zero_grad()
        report.total_tensor.backward()
        opt_g.step()
        d_report = LossReport({"d_y": gan_loss_d(d_y, yb, out.detach()).total_tensor})
        opt_d.zero_grad()
        d_report.total_tensor.backward()
        opt_d.step()
        history.append({"step": step + 1, "kind": "loss",
                        "generator": report.to_dict(), "discriminator": d_report.to_dict()})
    return model, history


# ---------------------------------------------------------------- ablations

_VARIANT_SETTINGS = {
    # variant: (conditioning, use_skips, pretrained)
    "A": ("direct", False, False),
    "B": ("controlnet-style", False, True),
    "C": ("lightweight-adapter", False, True),
    "D": ("direct", False, True),
    "FULL": ("direct", True, True),
}


def build_variant(backbone: OneStepTranslator, variant: str) -> OneStepTranslator:
    """Instantiate one ablation variant, sharing the backbone's frozen
    weights (except variant A, which starts from random initialization)."""
    if variant not in _VARIANT_SETTINGS:
        raise ValidationError(f"unknown ablation variant {variant!r}; known: {ABLATION_VARIANTS}")
    conditioning, use_skips, pretrained = _VARIANT_SETTINGS[variant]
    config = replace(backbone.config, conditioning=conditioning, use_skips=use_skips)
    model = OneStepTranslator(config)
    if pretrained:
        src = dict(backbone.named_parameters())
        with torch.no_grad():
            for name, p in model.named_parameters():
                if name in src and src[name].shape == p.shape:
                    p.copy_(src[name])
        if model.branch is not None and hasattr(model.branch, "clone_from"):
            model.branch.clone_from(model.encoder)
        model.pretrained = True
    model.set_trainable(backbone=False, adapters=True)
    return model


def run_ablation(variants, data, cfg: TrainConfig,
                 backbone: OneStepTranslator | None = None) -> list[dict]:
    """Train every requested variant with identical seed/data/steps and
    report held-out FID and structure distance per variant.

    `data` is (train_x, train_y, eval_x, eval_y)."""
    variants = list(variants)
    if not variants:
        raise ValidationError("no ablation variants requested")
    for v in variants:
        if v not in _VARIANT_SETTINGS:
            raise ValidationError(f"unknown ablation variant {v!r}; known: {ABLATION_VARIANTS}")
    train_x, train_y, eval_x, eval_y = data
    if backbone is None:
        backbone = pretrain_backbone((train_x, train_y), cfg)
    net = default_feature_net(cfg.feature_seed)
    rows = []
    for v in variants:
        model = build_variant(backbone, v)
        model, _ = train_unpaired(model, train_x, train_y, cfg)
        metrics = evaluate_translation(model, eval_x, eval_y, model.config.domains[1], net)
        rows.append({"variant": v, "fid": metrics["fid"], "dino_struct": metrics["dino_struct"],
                     "pretrained": model.pretrained})
        log.info("ablation %s: fid=%.3f dino=%.3f", v, metrics["fid"], metrics["dino_struct"])
    return rows


def dataset_size_sweep(sizes, data, cfg: TrainConfig,
                       backbone: OneStepTranslator | None = None) -> list[dict]:
    """Train one model per training-subset size (fixed seed) and report the
    held-out metrics per size."""
    train_x, train_y, eval_x, eval_y = data
    sizes = list(sizes)
    for n in sizes:
        if n > min(len(train_x), len(train_y)):
            raise ValidationError(f"requested subset size {n} exceeds dataset size")
        if n < 1:
            raise ValidationError(f"subset size must be >= 1, got {n}")
    if backbone is None:
        backbone = pretrain_backbone((train_x, train_y), cfg)
    net = default_feature_net(cfg.feature_seed)
    rows = []
    for n in sizes:
        if n == len(train_x) and n == len(train_y):
            # full size keeps identity order so the run matches train_unpaired exactly
            idx_x = np.arange(n)
            idx_y = np.arange(n)
        else:
            rng = np.random.default_rng([cfg.seed, 51, n])
            idx_x = rng.choice(len(train_x), size=n, replace=False)
            idx_y = rng.choice(len(train_y), size=n, replace=False)
        model = build_variant(backbone, "FULL")
        model, _ = train_unpaired(model, [train_x[i] for i in idx_x],
                                  [train_y[i] for i in idx_y], cfg)
        metrics = evaluate_translation(model, eval_x, eval_y, model.config.domains[1], net)
        rows.append({"size": n, "fid": metrics["fid"], "dino_struct": metrics["dino_struct"]})
        log.info("sweep n=%d: fid=%.3f dino=%.3f", n, metrics["fid"], metrics["dino_struct"])
    return rows


def rows_to_csv(rows: list[dict], path) -> None:
    """RFC-4180 CSV with a header row."""
    if not rows:
        raise ValidationError("no rows to write")
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
