"""Command-line entry point: ``qelm-witness <command> [options]``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..exceptions import ConfigError, ContractViolation, NumericalError
from ..observables import default_registry
from ..qelm import evaluate, load_readout, negative_recall, save_readout, train
from ..sampling import CountsMatrix, load_counts, sample_matrix, save_counts
from ..states import load_dataset, save_dataset
from . import scenarios as sc
from .config import ExperimentConfig, LossModel, config_digest, load_experiment, load_reservoir
from .io import Provenance, RunArtifacts, Table
from .optimize import optimize_reservoir

log = logging.getLogger("qelm_witness")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def _config(args) -> ExperimentConfig:
    cfg = load_experiment(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.repeats is not None:
        changes["repeats"] = args.repeats
    if getattr(args, "shots", None) is not None:
        changes["shots"] = None if args.shots in ("inf", "exact") else int(args.shots)
    return cfg.with_(**changes) if changes else cfg


def _out(args, default: str) -> Path:
    return Path(args.out_dir or default)


def _report(art: RunArtifacts, out: Path) -> None:
    art.write(out)
    print(f"wrote {len(art.tables)} table(s) and manifest to {out}")


# -- commands ---------------------------------------------------------------

def cmd_simulate(args) -> None:
    cfg = _config(args)
    out = _out(args, "runs/simulate")
    art = sc.run_scenario(cfg)
    _report(art, out)
    # one concrete dataset + counts file for the train/evaluate commands
    prep = sc.prepare(cfg)
    save_dataset(prep.dataset, out / "dataset.json")
    if not cfg.exact:
        save_counts(sample_matrix(prep.P, cfg.shots, (cfg.seed, 2, 0), cfg.sampling), out / "counts.csv")
    s = art.summary
    print(f"witness sign accuracy {s['accuracy'][0]:.4f} +- {s['accuracy'][1]:.4f}; "
          f"witness test MSE {s['witness_mse_test'][0]:.3e} +- {s['witness_mse_test'][1]:.3e}")


def _load_data(args):
    d = load_dataset(args.dataset)
    ids, counts = load_counts(args.counts)
    if counts.n_states != len(d):
        raise ConfigError(f"{args.counts}: {counts.n_states} count rows but {len(d)} states in {args.dataset}")
    return d, counts


def cmd_train(args) -> None:
    d, counts = _load_data(args)
    labels = d.labels()
    keep = np.isin(labels, args.labels.split(","))
    if not keep.any():
        raise ConfigError(f"--labels {args.labels!r} selects no states")
    names = args.targets.split(",") if args.targets else list(d.states[0].true_values)
    unknown = [n for n in names if n not in default_registry()]
    if unknown:
        raise ConfigError(f"--targets: unknown observable(s) {unknown}")
    sub = CountsMatrix(counts.counts[:, keep], counts.shots[keep])
    w, rep = train(sub, d.truths(names)[:, keep], method=args.method, input_form=args.form,
                   observable_names=names)
    out = _out(args, "runs/train")
    out.mkdir(parents=True, exist_ok=True)
    save_readout(w, out / "readout.csv")
    print(f"trained on {int(keep.sum())} states; effective rank {rep.effective_rank}; "
          f"mean train MSE {float(np.mean(rep.mse_train)):.3e}; readout in {out / 'readout.csv'}")


def cmd_evaluate(args) -> None:
    d, counts = _load_data(args)
    w = load_readout(args.readout)
    truths = d.truths(w.observable_names)
    witness = args.witness if args.witness in w.observable_names else None
    rep = evaluate(w, counts, truths, witness=witness)
    prov = Provenance(config_digest({"readout": str(args.readout), "counts": str(args.counts)}), -1)
    art = RunArtifacts("evaluate", prov, {"readout": str(args.readout), "dataset": str(args.dataset),
                                          "counts": str(args.counts)})
    art.tables["metrics.csv"] = Table(["observable", "mse_test"],
                                      [[n, m] for n, m in zip(w.observable_names, rep.mse_test)])
    if witness is not None:
        c = rep.confusion
        art.tables["witness.csv"] = Table(
            ["accuracy", "negative_recall", "true_neg_pred_neg", "true_neg_pred_nonneg",
             "true_nonneg_pred_neg", "true_nonneg_pred_nonneg"],
            [[rep.accuracy, negative_recall(c), c[0, 0], c[0, 1], c[1, 0], c[1, 1]]], notes=[f"witness={witness}"])
        j = w.observable_names.index(witness)
        art.tables[f"scatter/{witness}.csv"] = Table(
            ["state_index", "label", "true", "predicted"],
            [[k, s.label, truths[j, k], rep.predictions[j, k]] for k, s in enumerate(d.states)])
        print(f"{witness}: sign accuracy {rep.accuracy:.4f}")
    _report(art, _out(args, "runs/evaluate"))


def cmd_sweep_n(args) -> None:
    art = sc.sweep_statistics(_config(args), [int(x) for x in _floats(args.n_list)], exact_train=args.exact_train)
    _report(art, _out(args, "runs/sweep-n"))
    s = art.summary
    for N, m, sd in zip(s["N"], s["mse_mean"], s["mse_std"]):
        print(f"N={N:>9d}  MSE={m:.4e} +- {sd:.1e}")
    if "slope_last_decade" in s:
        print(f"slope (last decade) {s['slope_last_decade']:.3f}; 1/N regime from N={s['regime_onset']}")


def cmd_sweep_noise(args) -> None:
    p = _floats(args.p_list) if args.p_list else list(np.linspace(0, 1, 21))
    art = sc.noise_sweep(_config(args), p)
    _report(art, _out(args, "runs/sweep-noise"))
    s = art.summary
    for k, pk in enumerate(s["p"]):
        print(f"p={pk:.2f}  MSE={s['mse_mean'][k]:.4e}  accuracy={s['accuracy_mean'][k]:.3f}")
    print(f"linearity residual {s['linearity_residual']:.2e}")


def cmd_optimize(args) -> None:
    seed_cfg = load_reservoir(args.reservoir) if args.reservoir else None
    res = optimize_reservoir(seed_cfg, budget=args.budget, seed=args.seed or 0)
    out = _out(args, "runs/optimize")
    out.mkdir(parents=True, exist_ok=True)
    (out / "reservoir.json").write_text(json.dumps(res.config.to_dict(), indent=2) + "\n")
    print(f"Tr(F^+) = {res.objective:.6g} after {res.evaluations} evaluations; wrote {out / 'reservoir.json'}")


def cmd_svd(args) -> None:
    art = sc.singular_value_report(_config(args), [int(x) for x in _floats(args.n_list)], subset=args.subset)
    _report(art, _out(args, "runs/svd-report"))
    for k, (nz, above) in art.summary["counts"].items():
        print(f"N={k:>9s}  nonzero={nz:2d}  above noise floor={above:2d}")


def cmd_benchmark(args) -> None:
    art = sc.benchmark_shadow_vs_qelm(_config(args))
    _report(art, _out(args, "runs/benchmark"))
    for name, (m, sd) in art.summary["rows"].items():
        print(f"{name:30s} {m:.4e} +- {sd:.1e}")
    print("note: " + sc.SHADOW_CAVEAT)


def cmd_throughput(args) -> None:
    loss = LossModel(args.eta_qp, args.eta_qw, args.eta_proj, args.eta_slm, args.eta_smf, args.cc_source)
    rate = sc.throughput_estimate(loss, args.outcomes)
    if args.outcomes == 1:
        print(f"{rate:.3f} Hz total coincidence rate")
    else:
        print(f"{rate:.3f} Hz per output event ({args.outcomes} events)")


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment JSON file or shipped name (E1..E6)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out-dir", help="output directory")
    common.add_argument("--repeats", type=int, help="override the number of repeats")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="qelm-witness", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run a full scenario")
    s.add_argument("--shots", help="shots per state, or 'inf' for exact probabilities")
    s.set_defaults(func=cmd_simulate)

    for name, func, hlp in (("train", cmd_train, "train a readout on a dataset + counts file"),
                            ("evaluate", cmd_evaluate, "apply a readout to a dataset + counts file")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("--dataset", required=True)
        s.add_argument("--counts", required=True, help="counts CSV (state_id, shots, c0..c24)")
        if name == "train":
            s.add_argument("--labels", default="separable,entangled,partial",
                           help="comma-separated state classes to train on")
            s.add_argument("--targets", help="comma-separated observables (default: all in the dataset)")
            s.add_argument("--method", default="pinv", choices=["pinv", "ridge"])
            s.add_argument("--form", default="frequencies",
                           choices=["frequencies", "raw_counts", "normalized_counts"])
        else:
            s.add_argument("--readout", required=True)
            s.add_argument("--witness", default="W_Phi+")
        s.set_defaults(func=func)

    s = sub.add_parser("sweep-n", parents=[common], help="test MSE against shots per state")
    s.add_argument("--n-list", default="1e3 3e3 1e4 3e4 1e5 3e5 1e6")
    s.add_argument("--shots", help=argparse.SUPPRESS)
    s.add_argument("--exact-train", action="store_true", help="train on exact probabilities")
    s.set_defaults(func=cmd_sweep_n)

    s = sub.add_parser("sweep-noise", parents=[common], help="witness under separable-noise mixing")
    s.add_argument("--p-list", help="mixing weights (default: 21 points in [0, 1])")
    s.add_argument("--shots")
    s.set_defaults(func=cmd_sweep_noise)

    s = sub.add_parser("optimize-reservoir", parents=[common], help="minimize Tr(F^+) over reservoir angles")
    s.add_argument("--budget", type=int, default=6400)
    s.add_argument("--reservoir", help="starting reservoir (JSON path or R1/R2/R3)")
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("svd-report", parents=[common], help="singular values of the statistics matrix")
    s.add_argument("--n-list", default="1e3 1e4 1e5")
    s.add_argument("--subset", default="separable", choices=["separable", "entangled", "partial", "all"])
    s.set_defaults(func=cmd_svd)

    s = sub.add_parser("benchmark", parents=[common], help="shadow estimation vs QELM on the same counts")
    s.add_argument("--shots")
    s.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("throughput", parents=[common], help="expected coincidence rate per event")
    d = LossModel()
    for key in ("eta_qp", "eta_qw", "eta_proj", "eta_slm", "eta_smf", "cc_source"):
        s.add_argument("--" + key.replace("_", "-"), type=float, default=getattr(d, key))
    s.add_argument("--outcomes", type=int, default=25)
    s.set_defaults(func=cmd_throughput)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (ConfigError, ContractViolation) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
