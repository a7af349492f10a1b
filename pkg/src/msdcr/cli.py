"""Command-line experiment runner.

Every command reads one flat ``section.key = value`` config file. ``--seed``
and repeated ``--override key=value`` flags adjust individual keys, and the
resolved config is hashed so each artifact records exactly what produced it.

Sections
--------
``scenario.source``      ``synthetic`` or ``files``
``scenario.split_seed``  seed of the leave-one-out split (defaults to ``seed``)
``synthetic.*``          any SyntheticConfig field
``files.interactions``   comma-separated interaction files, one per domain
``files.items``          comma-separated item files
``files.schemas``        comma-separated schema files
``train.*``              any TrainConfig field
``eval.ks``              cutoffs, e.g. ``5,10``
``ablate.variants``      variants to run (defaults to all six)
``sweep.fractions``      removal fractions, e.g. ``0,0.3,0.6``
``sweep.seeds``          seeds, e.g. ``0,1,2``
"""
from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

from . import evaluation
from .data import SplitScenario, load_scenario, parse_synthetic_config, generate_synthetic, save_scenario, \
    split_leave_one_out
from .errors import ConfigError, MSDCRError
from .training import VARIANTS, TrainConfig, fit, load_checkpoint, save_checkpoint, write_trace

logger = logging.getLogger("msdcr")

COMMANDS = ("generate", "train", "evaluate", "ablate", "sweep")
SECTIONS = ("scenario", "synthetic", "files", "train", "eval", "ablate", "sweep")
TOP_LEVEL = ("seed", "out")
SCENARIO_KEYS = ("source", "split_seed")
FILE_KEYS = ("interactions", "items", "schemas")


class UsageError(MSDCRError):
    pass


def parse_config_text(text: str, origin: str = "<config>") -> dict[str, str]:
    out = {}
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{origin}:{line_no}: expected key = value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def _check_key(key: str) -> None:
    if key in TOP_LEVEL:
        return
    section, _, name = key.partition(".")
    if section not in SECTIONS or not name:
        raise UsageError(f"unknown config key {key!r}")
    if section == "scenario" and name not in SCENARIO_KEYS:
        raise UsageError(f"unknown config key {key!r}")
    if section == "files" and name not in FILE_KEYS:
        raise UsageError(f"unknown config key {key!r}")
    if section == "eval" and name != "ks":
        raise UsageError(f"unknown config key {key!r}")
    if section == "ablate" and name != "variants":
        raise UsageError(f"unknown config key {key!r}")
    if section == "sweep" and name not in ("fractions", "seeds"):
        raise UsageError(f"unknown config key {key!r}")


def _ints(value: str) -> tuple[int, ...]:
    return tuple(int(v) for v in value.split(",") if v.strip())


def _floats(value: str) -> tuple[float, ...]:
    return tuple(float(v) for v in value.split(",") if v.strip())


@dataclass
class ExperimentConfig:
    raw: dict[str, str]
    seed: int
    source: str
    split_seed: int
    train: TrainConfig
    ks: tuple[int, ...] = evaluation.DEFAULT_KS
    variants: tuple[str, ...] = VARIANTS
    fractions: tuple[float, ...] = (0.0, 0.3, 0.6)
    sweep_seeds: tuple[int, ...] = (0, 1, 2)
    out: Path = field(default_factory=lambda: Path("out"))

    def _identity(self) -> list[str]:
        # the output location does not change what is computed
        return sorted(k for k in self.raw if k != "out")

    @property
    def config_hash(self) -> str:
        canon = "\n".join(f"{k}={self.raw[k]}" for k in self._identity())
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]

    def header(self, **extra) -> str:
        lines = [f"# config_hash={self.config_hash} seed={self.seed}"]
        lines += [f"# {k}={v}" for k, v in extra.items()]
        lines += [f"# config {k} = {self.raw[k]}" for k in self._identity()]
        return "\n".join(lines) + "\n"

    def section(self, name: str) -> dict[str, str]:
        prefix = name + "."
        return {k[len(prefix):]: v for k, v in self.raw.items() if k.startswith(prefix)}


def resolve_config(raw: dict[str, str], overrides=(), seed: int | None = None,
                   out: str | None = None) -> ExperimentConfig:
    raw = dict(raw)
    for item in overrides:
        if "=" not in item:
            raise UsageError(f"--override expects key=value, got {item!r}")
        k, v = (p.strip() for p in item.split("=", 1))
        raw[k] = v
    if seed is not None:
        raw["seed"] = str(seed)
    if out is not None:
        raw["out"] = out
    for key in raw:
        _check_key(key)
    try:
        base_seed = int(raw.get("seed", "0"))
        raw["seed"] = str(base_seed)
        source = raw.setdefault("scenario.source", "synthetic")
        if source not in ("synthetic", "files"):
            raise UsageError(f"scenario.source must be synthetic or files, got {source!r}")
        if source == "files":
            missing = [k for k in FILE_KEYS if f"files.{k}" not in raw]
            if missing:
                raise UsageError(f"scenario.source = files needs files.{missing[0]}")
        elif any(k.startswith("files.") for k in raw):
            raise UsageError("files.* keys given but scenario.source is synthetic")
        split_seed = int(raw.get("scenario.split_seed", base_seed))
        exp = ExperimentConfig(raw=raw, seed=base_seed, source=source, split_seed=split_seed,
                               train=TrainConfig(seed=base_seed))
        train_map = {"seed": str(base_seed), **exp.section("train")}
        exp.train = TrainConfig.from_mapping(train_map)
        if "eval.ks" in raw:
            exp.ks = _ints(raw["eval.ks"])
        if "ablate.variants" in raw:
            exp.variants = tuple(TrainConfig(variant=v).variant for v in raw["ablate.variants"].split(",") if v.strip())
        if "sweep.fractions" in raw:
            exp.fractions = _floats(raw["sweep.fractions"])
        if "sweep.seeds" in raw:
            exp.sweep_seeds = _ints(raw["sweep.seeds"])
        exp.out = Path(raw.get("out", "out"))
    except ValueError as exc:
        raise UsageError(f"bad config value: {exc}") from None
    if not exp.ks or any(k < 1 for k in exp.ks):
        raise UsageError("eval.ks must list positive cutoffs")
    if any(not 0.0 <= f <= 0.9 for f in exp.fractions):
        raise UsageError("sweep.fractions must lie in [0, 0.9]")
    return exp


def load_experiment(path, overrides=(), seed=None, out=None) -> ExperimentConfig:
    if path is None:
        text = resources.files("msdcr").joinpath("configs/small.cfg").read_text(encoding="utf-8")
        return resolve_config(parse_config_text(text, "small.cfg"), overrides, seed, out)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    return resolve_config(parse_config_text(text, str(path)), overrides, seed, out)


# ---------------------------------------------------------------------------
# scenario construction


def build_scenario(exp: ExperimentConfig):
    if exp.source == "files":
        split = lambda key: [p.strip() for p in exp.raw[key].split(",") if p.strip()]
        return load_scenario(split("files.interactions"), split("files.items"), split("files.schemas"))
    syn = {"seed": str(exp.seed), **exp.section("synthetic")}
    cfg = parse_synthetic_config(syn)
    cfg.validate()
    return generate_synthetic(cfg)


def build_split(exp: ExperimentConfig) -> SplitScenario:
    return split_leave_one_out(build_scenario(exp), seed=exp.split_seed)


def _prepend(path: Path, header: str) -> None:
    path.write_text(header + path.read_text(encoding="utf-8"), encoding="utf-8")


def _write_report(path: Path, results, exp: ExperimentConfig, **extra) -> None:
    path.write_text(exp.header(**extra) + evaluation.format_report(results), encoding="utf-8")


# ---------------------------------------------------------------------------
# commands


def cmd_generate(exp: ExperimentConfig) -> list[Path]:
    if exp.source != "synthetic":
        raise UsageError("generate needs scenario.source = synthetic")
    scenario = build_scenario(exp)
    written = []
    for paths in save_scenario(scenario, exp.out):
        for p in paths.values():
            _prepend(p, exp.header())
            written.append(p)
    manifest = exp.out / "manifest.txt"
    manifest.write_text(exp.header() + "".join(f"{p.name}\n" for p in written), encoding="utf-8")
    return written + [manifest]


def cmd_train(exp: ExperimentConfig) -> list[Path]:
    split = build_split(exp)
    result = fit(split, exp.train)
    exp.out.mkdir(parents=True, exist_ok=True)
    ckpt, trace = exp.out / "checkpoint.npz", exp.out / "trace.tsv"
    save_checkpoint(result.model, exp.train, ckpt,
                    extra={"config_hash": exp.config_hash, "seed": exp.seed, "config": exp.raw})
    write_trace(result.trace, trace, exp.header(variant=exp.train.variant) + "step\tL_ds\tL_da\tL_f\treg")
    return [ckpt, trace]


def cmd_evaluate(exp: ExperimentConfig, checkpoint: Path | None = None) -> list[Path]:
    split = build_split(exp)
    checkpoint = checkpoint or exp.out / "checkpoint.npz"
    if not Path(checkpoint).exists():
        raise UsageError(f"checkpoint {checkpoint} not found; run train first")
    fitted, cfg, extra = load_checkpoint(checkpoint, split)
    results = evaluation.evaluate_all(fitted, split, exp.ks, "test", exp.seed, asdict(cfg))
    exp.out.mkdir(parents=True, exist_ok=True)
    report = exp.out / "report.tsv"
    _write_report(report, results, exp, variant=cfg.variant, checkpoint_hash=extra.get("config_hash", "?"))
    return [report]


def cmd_ablate(exp: ExperimentConfig) -> list[Path]:
    split = build_split(exp)
    exp.out.mkdir(parents=True, exist_ok=True)
    written = []
    for variant in exp.variants:
        cfg = replace(exp.train, variant=variant)
        result = fit(split, cfg)
        results = evaluation.evaluate_all(result.model, split, exp.ks, "test", exp.seed, asdict(cfg))
        path = exp.out / f"report-{variant}.tsv"
        _write_report(path, results, exp, variant=variant)
        written.append(path)
        logger.info("%s: mean NDCG@10 %.4f", variant, evaluation.mean_metric(results)
                    if 10 in exp.ks else float("nan"))
    return written


def cmd_sweep(exp: ExperimentConfig) -> list[Path]:
    split = build_split(exp)
    sweep = evaluation.sparsity_sweep(split, exp.train, exp.fractions, exp.sweep_seeds, exp.ks)
    exp.out.mkdir(parents=True, exist_ok=True)
    table, plot = exp.out / "sweep.tsv", exp.out / "sweep-plot.tsv"
    table.write_text(exp.header() + sweep.table(), encoding="utf-8")
    plot.write_text(exp.header() + sweep.plot_data(), encoding="utf-8")
    return [table, plot]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msdcr", description="Multi-domain recommendation experiments.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config file (defaults to the bundled small config)")
    common.add_argument("--seed", type=int, help="experiment seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key; repeatable")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "evaluate":
            p.add_argument("--checkpoint", help="checkpoint file (defaults to OUT/checkpoint.npz)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        exp = load_experiment(args.config, args.override, args.seed, args.out)
        if args.command == "evaluate":
            written = cmd_evaluate(exp, Path(args.checkpoint) if args.checkpoint else None)
        else:
            written = globals()[f"cmd_{args.command}"](exp)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"msdcr: error: {exc}", file=sys.stderr)
        return 2
    except (MSDCRError, ConfigError) as exc:
        print(f"msdcr {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for p in written:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
