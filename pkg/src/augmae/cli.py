"""Command-line entry point: ``gen-data``, ``train``, ``eval`` and ``verify-bounds``.

Exit codes: 0 success, 1 bound violation, 2 configuration or input error,
3 runtime abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import plotting
from .config import RunConfig, load_config, parse_value
from .errors import AugMaeError, ConfigError, NonFiniteLossError, ParseError
from .evaluation import diagnostics, export_sphere_density, uniformity_value, write_density_csv
from .graph import DataPaths, generate_sbm, save_embeddings, save_graph
from .model import load_model, save_model
from .theory import certify
from .training import checkpoint, fit, read_history, write_history

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

logger = logging.getLogger("augmae")

# flag name -> config key
OVERRIDE_FLAGS = {
    "seed": "seed",
    "epochs": "epochs",
    "lambda1": "lambda1",
    "lambda2": "lambda2",
    "gamma": "gamma",
    "tau": "tau",
    "alpha0": "alpha0",
    "alphaT": "alphaT",
    "eta": "eta",
    "mask_ratio": "mask_ratio",
    "d_hidden": "d_hidden",
    "d_out": "d_out",
}


def git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=10,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 and out.stdout.strip() else "unknown"


def _provenance(config: RunConfig, command: str) -> dict:
    return {"command": command, "git": git_describe(), "config": config.to_dict()}


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _prepare_out(out: Path, overwrite: bool, names: list[str]):
    out.mkdir(parents=True, exist_ok=True)
    clash = [n for n in names if (out / n).exists()]
    if clash and not overwrite:
        raise FileExistsError(f"{out} already holds {', '.join(clash)}; pass --overwrite to replace")


def _echo_config(out: Path, config: RunConfig, command: str):
    (out / "config.txt").write_text(f"# command: {command}\n# git: {git_describe()}\n" + config.to_text())


# --- commands -------------------------------------------------------------


def cmd_gen_data(config: RunConfig, out: Path, overwrite: bool = False) -> int:
    paths = DataPaths(out)
    _prepare_out(out, overwrite, ["edges.txt", "features.csv", "labels.csv", "config.txt"])
    graph = generate_sbm(config.sbm_spec())
    save_graph(graph, paths.edges, paths.features, paths.labels)
    _echo_config(out, config, "gen-data")
    print(f"wrote {graph.n} nodes, {len(graph.edge_list())} edges to {out}")
    return EXIT_OK


def cmd_train(config: RunConfig, data: Path, out: Path, overwrite: bool = False) -> int:
    names = ["model.npz", "state.npz", "history.csv", "summary.json", "config.txt", "loss_curves.png"]
    _prepare_out(out, overwrite, names)
    graph = DataPaths(data).load()
    train_config = config.train_config()
    result = fit(graph, train_config)
    save_model(result.model, out / "model.npz")
    checkpoint(result.state, train_config, out / "state.npz")
    write_history(result.history, out / "history.csv")
    tail = result.history[-20:]
    summary = _provenance(config, "train")
    summary.update(
        {
            "epochs": len(result.history),
            "final_l_sce": result.history[-1].l_sce if result.history else None,
            "final_l_uni": result.history[-1].l_uni if result.history else None,
            "final_uniformity": uniformity_value(
                result.model.embed(graph), config.t_uniformity, config.uniformity_pair_cap, config.seed
            ),
            "mask_ratio_last20": float(np.mean([r.mask_ratio for r in tail])) if tail else None,
            "generator_clipped_epochs": sum(r.gen_clipped for r in result.history),
            "model_clipped_epochs": sum(r.model_clipped for r in result.history),
        }
    )
    _write_json(out / "summary.json", summary)
    _echo_config(out, config, "train")
    if result.history:
        plotting.plot_history(read_history(out / "history.csv"), out / "loss_curves.png")
    print(f"trained {len(result.history)} epochs; final SCE {summary['final_l_sce']}")
    return EXIT_OK


def cmd_eval(config: RunConfig, checkpoint_path: Path, data: Path, out: Path, overwrite: bool = False) -> int:
    names = ["embeddings.csv", "diagnostics.json", "alignment_hist.png", "density.csv", "sphere_density.png"]
    _prepare_out(out, overwrite, names + ["config.txt"])
    graph = DataPaths(data).load()
    if graph.labels is None:
        raise ConfigError(f"{data} has no labels.csv; evaluation needs labels")
    model = load_model(checkpoint_path)
    z = model.embed(graph)
    save_embeddings(z, out / "embeddings.csv")
    report, align, _ = diagnostics(
        z,
        graph.labels,
        t=config.t_uniformity,
        pair_cap=config.alignment_pair_cap,
        uniformity_pair_cap=config.uniformity_pair_cap,
        train_fraction=config.train_fraction,
        seed=config.seed,
        probe_steps=config.probe_steps,
        probe_lr=config.probe_lr,
    )
    report.extra["density_export_path"] = None
    if z.shape[1] == 2:
        density = export_sphere_density(z, config.density_bins, config.kde_bandwidth, config.kde_points)
        write_density_csv(density, out / "density.csv")
        plotting.plot_sphere_density(density, out / "sphere_density.png")
        report.extra["density_export_path"] = "density.csv"
        report.extra["kde_max_min_ratio"] = density.max_min_ratio
    report.extra.update(_provenance(config, "eval"))
    report.write(out / "diagnostics.json")
    plotting.plot_alignment_histogram(align.histogram, align.edges, out / "alignment_hist.png")
    _echo_config(out, config, "eval")
    print(f"probe accuracy {report.probe_accuracy}; alignment {report.alignment_mean:.4f}")
    return EXIT_OK


def cmd_verify_bounds(config: RunConfig, out: Path, overwrite: bool = False, poison: bool = False) -> int:
    _prepare_out(out, overwrite, ["bounds.json", "config.txt"])
    report = certify(config.certification(poison))
    report.update(_provenance(config, "verify-bounds"))
    _write_json(out / "bounds.json", report)
    _echo_config(out, config, "verify-bounds")
    for name, tally in report["random"].items():
        adv = report["adversarial"][name]
        print(
            f"{name}: {tally['passed']}/{tally['checked']} passed, min slack {tally['min_slack']:.3e}, "
            f"adversarial max violation {adv['max_violation']:.3e}"
        )
    print(f"trace identity max residual {report['trace_identity']['max_residual']:.3e}")
    return EXIT_OK if report["passed"] else EXIT_VIOLATION


# --- argument handling ----------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value config file")
    common.add_argument("--out", type=Path, required=True, help="output directory")
    common.add_argument("--overwrite", action="store_true", help="replace existing outputs")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    common.add_argument("-v", "--verbose", action="store_true")
    for flag in OVERRIDE_FLAGS:
        common.add_argument(f"--{flag.replace('_', '-')}", dest=flag, default=None, metavar="VALUE")

    parser = argparse.ArgumentParser(prog="augmae", description="Adversarially masked graph autoencoder")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-data", parents=[common], help="write a synthetic planted-partition graph")
    train = sub.add_parser("train", parents=[common], help="train on a graph directory")
    train.add_argument("--data", type=Path, required=True)
    ev = sub.add_parser("eval", parents=[common], help="probe and diagnose a trained model")
    ev.add_argument("--checkpoint", type=Path, required=True)
    ev.add_argument("--data", type=Path, required=True)
    verify = sub.add_parser("verify-bounds", parents=[common], help="certify the reconstruction bounds")
    verify.add_argument("--poison-ac", action="store_true", help="corrupt the context graph (fault injection)")
    return parser


def collect_overrides(args) -> dict:
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = parse_value(key.strip(), value)
    for flag, key in OVERRIDE_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = parse_value(key, value)
    return overrides


def run(args) -> int:
    config = load_config(args.config, collect_overrides(args))
    if args.command == "gen-data":
        return cmd_gen_data(config, args.out, args.overwrite)
    if args.command == "train":
        return cmd_train(config, args.data, args.out, args.overwrite)
    if args.command == "eval":
        return cmd_eval(config, args.checkpoint, args.data, args.out, args.overwrite)
    return cmd_verify_bounds(config, args.out, args.overwrite, args.poison_ac)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return run(args)
    except (ConfigError, ParseError, FileExistsError, FileNotFoundError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteLossError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (AugMaeError, OSError) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
