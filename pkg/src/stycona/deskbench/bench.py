"""Training, evaluation and the ablation matrix."""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from ..augmentation import AugmentConfig, augment_sample, stream
from ..decomposition import decompose
from ..errors import InvalidInput, NumericalFailure
from ..imagio import Dataset
from ..metrics import MetricReport, aggregate_reports, segmentation_report
from .loss import seg_loss
from .model import Segmenter
from .synth import SynthDomainSpec, generate_domain

TABLE_ROWS = (
    ("baseline", "Baseline"),
    ("style", "+Style"),
    ("content", "+Content"),
    ("full", "+Style+Content"),
)


@dataclass(frozen=True)
class ArmConfig:
    name: str
    augment: Optional[AugmentConfig] = None

    def to_dict(self) -> dict:
        return {"name": self.name, "augment": None if self.augment is None else asdict(self.augment)}


@dataclass(frozen=True)
class ExperimentConfig:
    source: SynthDomainSpec
    target: SynthDomainSpec
    arms: tuple[ArmConfig, ...]
    seeds: tuple[int, ...] = (0, 1, 2)
    n_train: int = 32
    n_test: int = 32
    epochs: int = 50
    batch_size: int = 8
    lr: float = 3e-3
    num_classes: int = 2
    torch_threads: int = 1

    def __post_init__(self):
        if not self.arms:
            raise InvalidInput("arms: at least one arm is required")
        if not self.seeds:
            raise InvalidInput("seeds: at least one seed is required")
        names = [a.name for a in self.arms]
        if len(set(names)) != len(names):
            raise InvalidInput(f"arms: duplicate arm names {names}")
        for key in ("n_train", "n_test", "batch_size", "num_classes", "torch_threads"):
            if getattr(self, key) < 1:
                raise InvalidInput(f"{key}: must be >= 1")
        if self.epochs < 0:
            raise InvalidInput("epochs: must be >= 0")
        if not (self.lr > 0 and math.isfinite(self.lr)):
            raise InvalidInput("lr: must be a positive number")

    def arm(self, name: str) -> ArmConfig:
        for a in self.arms:
            if a.name == name:
                return a
        raise InvalidInput(f"no arm named {name!r}")

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("source", "target", "arms")}
        d["seeds"] = list(self.seeds)
        d["source"] = self.source.to_dict()
        d["target"] = self.target.to_dict()
        d["arms"] = [a.to_dict() for a in self.arms]
        return d


_ARM_KEYS = {"name", "augment"}
_AUG_KEYS = set(AugmentConfig.__dataclass_fields__)


def _as_weight(v):
    return tuple(v) if isinstance(v, list) else v


def config_from_dict(d: dict) -> ExperimentConfig:
    """Build a config from parsed JSON; errors name the offending key."""
    if not isinstance(d, dict):
        raise InvalidInput("config: top level must be an object")
    fields_ = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(d) - fields_
    if unknown:
        raise InvalidInput(f"{sorted(unknown)[0]}: unknown config key")
    for key in ("source", "target", "arms"):
        if key not in d:
            raise InvalidInput(f"{key}: missing required key")
    kw = {}
    for key in ("source", "target"):
        try:
            kw[key] = SynthDomainSpec.from_dict(d[key])
        except (TypeError, ValueError, AttributeError) as exc:
            raise InvalidInput(f"{key}: {exc}") from exc
    arms = []
    if not isinstance(d["arms"], list):
        raise InvalidInput("arms: must be a list")
    for n, a in enumerate(d["arms"]):
        where = f"arms[{n}]"
        if not isinstance(a, dict) or "name" not in a or set(a) - _ARM_KEYS:
            raise InvalidInput(f"{where}: expected an object with 'name' and optional 'augment'")
        aug = a.get("augment")
        if aug is not None:
            bad = set(aug) - _AUG_KEYS
            if bad:
                raise InvalidInput(f"{where}.augment.{sorted(bad)[0]}: unknown key")
            try:
                aug = AugmentConfig(**{k: _as_weight(v) for k, v in aug.items()})
            except (TypeError, ValueError) as exc:
                raise InvalidInput(f"{where}.augment: {exc}") from exc
        arms.append(ArmConfig(name=str(a["name"]), augment=aug))
    kw["arms"] = tuple(arms)
    for key in fields_ - {"source", "target", "arms"}:
        if key in d:
            v = d[key]
            if key == "seeds":
                if not isinstance(v, list) or not all(isinstance(s, int) for s in v):
                    raise InvalidInput("seeds: must be a list of integers")
                v = tuple(v)
            elif key == "lr":
                if not isinstance(v, (int, float)) or isinstance(v, bool):
                    raise InvalidInput("lr: must be a number")
                v = float(v)
            elif not isinstance(v, int) or isinstance(v, bool):
                raise InvalidInput(f"{key}: must be an integer")
            kw[key] = v
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidInput(f"config: cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"config: invalid JSON ({exc})") from exc
    return config_from_dict(data)


def default_config_path() -> Path:
    return Path(__file__).resolve().parent.parent / "data" / "bench_default.json"


def default_config() -> ExperimentConfig:
    return load_config(default_config_path())


@dataclass
class TrainResult:
    model: Segmenter
    losses: list[float] = field(default_factory=list)


def _init_model(seed: int, in_channels: int, num_classes: int) -> Segmenter:
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        return Segmenter(in_channels=in_channels, num_classes=num_classes)


def train(
    arm: ArmConfig,
    source: Dataset,
    *,
    seed: int,
    epochs: int,
    batch_size: int = 8,
    lr: float = 3e-3,
    num_classes: int = 2,
    threads: int = 1,
) -> TrainResult:
    """Train a fresh segmenter on ``source`` under ``arm``'s augmentation policy.

    Batch order and augmentation draws come from streams keyed by ``seed``,
    epoch and sample index.
    """
    n = len(source)
    if n == 0:
        raise InvalidInput("training set is empty")
    if any(m is None for m in source.masks):
        raise InvalidInput("every training image needs a mask")
    torch.set_num_threads(threads)
    model = _init_model(seed, source.shape[0], num_classes)
    images = source.images
    masks = np.stack(source.masks).astype(np.int64)
    aug = arm.augment
    decomps = [decompose(x) for x in images] if aug is not None else None
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    losses = []
    for epoch in range(epochs):
        model.train()
        order = stream(seed, 0, epoch).permutation(n)
        total = 0.0
        for s in range(0, n, batch_size):
            idx = order[s : s + batch_size]
            if aug is None:
                xb = np.stack([images[i] for i in idx])
            else:
                xb = np.stack([
                    augment_sample(images, int(i), aug, stream(seed, 1, aug.seed, epoch, int(i)), decomps)[0]
                    for i in idx
                ])
            logits = model(torch.from_numpy(xb))
            loss, grad = seg_loss(logits.detach().numpy(), masks[idx])
            if not math.isfinite(loss):
                raise NumericalFailure(f"arm {arm.name!r}: loss diverged at epoch {epoch}")
            opt.zero_grad()
            logits.backward(torch.from_numpy(grad.astype(np.float32)))
            opt.step()
            total += loss * len(idx)
        losses.append(total / n)
    return TrainResult(model=model, losses=losses)


def evaluate(model: Segmenter, data: Dataset, num_classes: int = 2) -> MetricReport:
    if any(m is None for m in data.masks):
        raise InvalidInput("evaluation data needs masks")
    preds = model.predict(np.stack(data.images))
    return aggregate_reports(
        segmentation_report(p, g, num_classes) for p, g in zip(preds, data.masks)
    )


def source_loss(model: Segmenter, data: Dataset) -> float:
    with torch.no_grad():
        logits = model(torch.from_numpy(np.stack(data.images))).numpy()
    return seg_loss(logits, np.stack(data.masks).astype(np.int64))[0]


def _datasets(cfg: ExperimentConfig) -> tuple[Dataset, Dataset, Dataset]:
    train_set = generate_domain(cfg.source, cfg.n_train)
    source_test = generate_domain(cfg.source, cfg.n_test, offset=cfg.n_train)
    target_test = generate_domain(cfg.target, cfg.n_test)
    return train_set, source_test, target_test


def run_one(cfg: ExperimentConfig, arm_name: str, seed: int, out_dir=None) -> dict:
    """Train and evaluate one (arm, seed) cell."""
    arm = cfg.arm(arm_name)
    train_set, source_test, target_test = _datasets(cfg)
    t0 = time.perf_counter()
    res = train(arm, train_set, seed=seed, epochs=cfg.epochs, batch_size=cfg.batch_size,
                lr=cfg.lr, num_classes=cfg.num_classes, threads=cfg.torch_threads)
    tgt = evaluate(res.model, target_test, cfg.num_classes)
    src = evaluate(res.model, source_test, cfg.num_classes)
    if out_dir is not None:
        from ..imagio import save_tensor

        save_tensor(res.model.get_theta(), Path(out_dir) / f"theta_{arm_name}_seed{seed}.styc")
    return {
        "arm": arm_name,
        "seed": seed,
        "target": tgt.to_dict(),
        "source": src.to_dict(),
        "losses": res.losses,
        "seconds": time.perf_counter() - t0,
    }


def _run_cell(args):
    cfg_dict, arm_name, seed, out_dir = args
    return run_one(config_from_dict(cfg_dict), arm_name, seed, out_dir)


def _stats(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    return float(np.mean(vals)), float(np.std(vals))


def summarize(cfg: ExperimentConfig, runs: list[dict]) -> dict:
    arms = {}
    for arm in cfg.arms:
        cells = sorted((r for r in runs if r["arm"] == arm.name), key=lambda r: r["seed"])
        if len(cells) != len(cfg.seeds):
            raise InvalidInput(f"arm {arm.name!r}: expected {len(cfg.seeds)} runs, found {len(cells)}")
        row = {"t": None if arm.augment is None else arm.augment.t}
        for split in ("target", "source"):
            for metric in ("mean_dsc", "mean_asd"):
                mean, std = _stats(c[split][metric] for c in cells)
                row[f"{split}_{metric[5:]}"] = mean
                row[f"{split}_{metric[5:]}_std"] = std
        row["per_seed_target_dsc"] = [c["target"]["mean_dsc"] for c in cells]
        arms[arm.name] = row
    return arms


def format_table(cfg: ExperimentConfig, summary: dict) -> str:
    def cell(mean, std):
        if mean is None:
            return "undefined"
        return f"{mean:.2f} ± {std:.2f}"

    rows = [(label, name) for name, label in TABLE_ROWS if name in summary]
    sweep = [a for a in cfg.arms
             if a.name.startswith("t") and a.name[1:].isdigit() and a.augment is not None]
    if sweep:
        # the full arm is the default-t point of the sweep
        sweep += [a for a in cfg.arms if a.name == "full" and a.augment is not None]
        rows += [(f"t={a.augment.t}", a.name) for a in sorted(sweep, key=lambda a: a.augment.t)]
    listed = {name for _, name in rows}
    rows += [(a.name, a.name) for a in cfg.arms if a.name not in listed]
    header = ("Method", "Target DSC", "Target ASD", "Source DSC", "Source ASD")
    body = [
        (label,
         cell(summary[name]["target_dsc"], summary[name]["target_dsc_std"]),
         cell(summary[name]["target_asd"], summary[name]["target_asd_std"]),
         cell(summary[name]["source_dsc"], summary[name]["source_dsc_std"]),
         cell(summary[name]["source_asd"], summary[name]["source_asd_std"]))
        for label, name in rows
    ]
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
    line = lambda r: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
    sep = "-" * len(line(header))
    return "\n".join([line(header), sep, *map(line, body)]) + "\n"


def run_matrix(cfg: ExperimentConfig, out_dir=None, workers: int = 1) -> dict:
    """Run every (arm, seed) cell and write ``report.json`` / ``report.txt``."""
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    jobs = [(cfg.to_dict(), arm.name, seed, None if out_dir is None else str(out_dir))
            for arm in cfg.arms for seed in cfg.seeds]
    t0 = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_cell, jobs))
    else:
        runs = [_run_cell(j) for j in jobs]
    summary = summarize(cfg, runs)
    report = {
        "config": cfg.to_dict(),
        "summary": summary,
        "runs": runs,
        "seconds": time.perf_counter() - t0,
    }
    report["table"] = format_table(cfg, summary)
    if out_dir is not None:
        Path(out_dir, "report.json").write_text(json.dumps(report, indent=2), encoding="utf-8")
        Path(out_dir, "report.txt").write_text(report["table"], encoding="utf-8")
    return report
