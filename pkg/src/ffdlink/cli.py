"""Command-line front end.

Configuration is one JSON document. Command-line flags override keys of the
document, which override built-in defaults. Every subcommand needs a seed.

Exit codes: 0 success, 2 configuration error, 3 runtime error. A runtime
error leaves a ``FAILED`` marker naming the stage in the output directory.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .community import detect_communities
from .embedding import embed_nodes
from .graph import DirectedGraph, SplitSpec, load_edge_list, save_edge_list, save_split, split, write_id_map
from .heuristics import INDICES, score_pairs
from .metrics import auc, average_precision
from .model import init_params
from .pipeline import BLOCKS, FeatureConfig, Pipeline, train
from .sbm import (PredictorModel, SbmSpec, g_condition, g_monotonicity_check, generate_sbm,
                  monte_carlo_theorem)

log = logging.getLogger("ffdlink")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
DEFAULT_ABLATIONS = (("path",), ("path", "community"), ("path", "embedding"), BLOCKS)


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {type(cause).__name__}: {cause}")
        self.stage = stage


@contextlib.contextmanager
def stage(name: str):
    log.info("stage %s", name)
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


@dataclass
class RunConfig:
    seed: int | None = None
    out: str = "out"
    dataset: str | None = None
    dataset_name: str | None = None
    sbm: dict | None = None
    train_fraction: float = 0.5
    negative_ratio: float = 1.0
    hops: int = 1
    max_nodes: int = 100
    label_cap: int = 50
    embed_dim: int = 32
    blocks: list = field(default_factory=lambda: list(BLOCKS))
    num_layers: int = 3
    hidden: int = 32
    head_hidden: int = 64
    epochs: int = 50
    lr: float = 0.005
    batch_size: int = 50
    indices: list = field(default_factory=lambda: list(INDICES))
    ablations: list = field(default_factory=lambda: [list(b) for b in DEFAULT_ABLATIONS])
    theorem: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        if self.dataset_name:
            return self.dataset_name
        return Path(self.dataset).stem if self.dataset else "sbm"

    @property
    def split_label(self) -> str:
        return f"{round(self.train_fraction * 100)}Tr"

    def feature_config(self, blocks=None) -> FeatureConfig:
        return FeatureConfig(self.hops, self.max_nodes, self.label_cap, self.embed_dim,
                             tuple(self.blocks if blocks is None else blocks))


def load_config(path: str | None, overrides: dict) -> RunConfig:
    doc = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    doc.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**doc)


def validate(cfg: RunConfig, needs_graph: bool = True) -> None:
    if cfg.seed is None:
        raise ConfigError("a seed is required (--seed or \"seed\" in the config)")
    if not isinstance(cfg.seed, int) or cfg.seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {cfg.seed!r}")
    if needs_graph:
        if (cfg.dataset is None) == (cfg.sbm is None):
            raise ConfigError("give exactly one of \"dataset\" and \"sbm\"")
        if cfg.dataset is not None and not Path(cfg.dataset).is_file():
            raise ConfigError(f"dataset {cfg.dataset} does not exist")
        if cfg.sbm is not None:
            try:
                SbmSpec(**cfg.sbm)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad sbm settings: {exc}") from exc
    if not 0.0 < cfg.train_fraction < 1.0:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {cfg.train_fraction}")
    for key in ("hops", "max_nodes", "label_cap", "embed_dim", "num_layers", "hidden", "head_hidden",
                "epochs", "batch_size"):
        if int(getattr(cfg, key)) < 1:
            raise ConfigError(f"{key} must be positive")
    if cfg.lr < 0:
        raise ConfigError("lr must be non-negative")
    try:
        cfg.feature_config()
        for blocks in cfg.ablations:
            cfg.feature_config(blocks)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    bad = sorted(set(cfg.indices) - set(INDICES))
    if bad:
        raise ConfigError(f"unknown heuristic indices {bad}")


def _load_graph(cfg: RunConfig) -> DirectedGraph:
    if cfg.dataset is not None:
        return load_edge_list(cfg.dataset)
    graph, _ = generate_sbm(SbmSpec(**cfg.sbm), cfg.seed)
    return graph


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _prepare(cfg: RunConfig, out: Path):
    with stage("load"):
        graph = _load_graph(cfg)
        if graph.node_ids is not None:
            write_id_map(graph, out / "id_map.json")
    with stage("split"):
        train_s, test_s, observed = split(graph, SplitSpec(cfg.train_fraction, cfg.seed, cfg.negative_ratio))
        save_split(out / "split.json", train_s, test_s, cfg.seed)
    return graph, train_s, test_s, observed


def _features(cfg: RunConfig, observed: DirectedGraph, out: Path, blocks=BLOCKS):
    communities = embedding = None
    with stage("features"):
        if "community" in blocks:
            communities = detect_communities(observed)
            communities.save(out / "communities.json")
        if "embedding" in blocks:
            embedding = embed_nodes(observed, min(cfg.embed_dim, observed.num_nodes), cfg.seed)
            embedding.save(out / "embedding.txt")
    return communities, embedding


def _fit(cfg: RunConfig, pipeline: Pipeline, train_s, test_s):
    params = init_params(pipeline.feature_width, cfg.num_layers, cfg.hidden, cfg.head_hidden, cfg.seed,
                         learning_rate=cfg.lr, batch_size=cfg.batch_size, epochs=cfg.epochs)
    report = train(params, train_s, test_s, pipeline, epochs=cfg.epochs, lr=cfg.lr,
                   batch_size=cfg.batch_size, seed=cfg.seed)
    best = report.best
    return report, {"auc": best.test_auc, "ap": best.test_ap}


def cmd_run(cfg: RunConfig, out: Path) -> None:
    _, train_s, test_s, observed = _prepare(cfg, out)
    communities, embedding = _features(cfg, observed, out, cfg.blocks)
    with stage("train"):
        pipeline = Pipeline(observed, cfg.feature_config(), cfg.seed, communities, embedding)
        report, metrics = _fit(cfg, pipeline, train_s, test_s)
        report.write_csv(out / "train_report.csv")
        report.best_params.save(out / "checkpoint.json")
    _write_json(out / "metrics.json", metrics)
    log.info("test auc %.4f ap %.4f (epoch %d)", metrics["auc"], metrics["ap"], report.best_epoch)


def cmd_theorem(cfg: RunConfig, out: Path) -> None:
    th = cfg.theorem
    with stage("theorem"):
        spec = SbmSpec(th.get("K", 4), th.get("community_size", 100), th.get("p", 0.2), th.get("q", 0.02))
        model = PredictorModel(th.get("e_unlinked", 0.6), th.get("e_linked", 0.6), th.get("eps0", 0.0),
                               th.get("eps1", 0.0), th.get("w_nc", 0.5), th.get("w_c", 0.5))
        closed = g_condition(spec, model)
        mc = monte_carlo_theorem(spec, model, th.get("trials", 100_000), cfg.seed, th.get("rule", "threshold"))
        checks = [g_monotonicity_check(k, th.get("grid_resolution", 19)) for k in th.get("K_values", [2, 5, 10, 15, 20])]
    with open(out / "g_surface.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["p", "q", "K", "g_value"])
        for chk in checks:
            for p, q, k, g in chk["surface"]:
                w.writerow([repr(p), repr(q), k, repr(g)])
    _write_json(out / "theorem.json", {
        "closed_form": closed.to_dict(),
        "monte_carlo": mc.to_dict(),
        "monotonicity": [{"K": c["K"], "points": c["points"], "violations": c["violations"]} for c in checks],
    })


def cmd_baselines(cfg: RunConfig, out: Path) -> None:
    _, _, test_s, observed = _prepare(cfg, out)
    src = np.array([p.src for p in test_s])
    dst = np.array([p.dst for p in test_s])
    labels = np.array([p.label for p in test_s])
    rows = []
    with stage("baselines"):
        for index in cfg.indices:
            scores = score_pairs(observed, index, src, dst)
            rows.append([index, cfg.name, cfg.split_label, repr(auc((scores, labels))),
                         repr(average_precision((scores, labels)))])
    with open(out / "baselines.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "dataset", "split", "auc", "ap"])
        w.writerows(rows)


def cmd_ablate(cfg: RunConfig, out: Path) -> None:
    _, train_s, test_s, observed = _prepare(cfg, out)
    needed = sorted({b for blocks in cfg.ablations for b in blocks})
    communities, embedding = _features(cfg, observed, out, needed)
    rows = []
    for blocks in cfg.ablations:
        label = "+".join(b for b in BLOCKS if b in blocks)
        with stage(f"ablate[{label}]"):
            pipeline = Pipeline(observed, cfg.feature_config(blocks), cfg.seed, communities, embedding)
            report, metrics = _fit(cfg, pipeline, train_s, test_s)
        rows.append([label, pipeline.feature_width, report.best_epoch, repr(metrics["auc"]), repr(metrics["ap"])])
    with open(out / "ablation.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["blocks", "feature_width", "best_epoch", "auc", "ap"])
        w.writerows(rows)


def cmd_split(cfg: RunConfig, out: Path) -> None:
    _, _, _, observed = _prepare(cfg, out)
    save_edge_list(observed, out / "observed.txt")


def cmd_embed(cfg: RunConfig, out: Path) -> None:
    _, _, _, observed = _prepare(cfg, out)
    _features(cfg, observed, out, ("embedding",))


def cmd_communities(cfg: RunConfig, out: Path) -> None:
    _, _, _, observed = _prepare(cfg, out)
    _features(cfg, observed, out, ("community",))


COMMANDS = {
    "run": cmd_run,
    "theorem": cmd_theorem,
    "baselines": cmd_baselines,
    "ablate": cmd_ablate,
    "split": cmd_split,
    "embed": cmd_embed,
    "communities": cmd_communities,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ffdlink", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON config document")
    ap.add_argument("--seed", type=int, help="root seed (required here or in the config)")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--dataset", help="edge-list file; replaces any sbm block in the config")
    ap.add_argument("--train-fraction", type=float, dest="train_fraction")
    ap.add_argument("--epochs", type=int)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    overrides = {k: getattr(args, k) for k in ("seed", "out", "dataset", "train_fraction", "epochs")}
    try:
        cfg = load_config(args.config, overrides)
        if args.dataset is not None:
            cfg.sbm = None
        validate(cfg, needs_graph=args.command != "theorem")
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(cfg.out)
    marker = out / "FAILED"
    try:
        out.mkdir(parents=True, exist_ok=True)
        marker.unlink(missing_ok=True)
        _write_json(out / "config.json", asdict(cfg))
        COMMANDS[args.command](cfg, out)
    except StageError as exc:
        marker.write_text(f"{exc}\n", encoding="utf-8")
        print(f"error in stage {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
