"""Command-line interface: dataset synthesis, training, evaluation, ablation
sweeps, gradient checking, and gate diagnostics.

Every command is reproducible under fixed flags: outputs carry no
timestamps, the resolved configuration is written next to the results, and
reruns produce byte-identical files. Exit codes: 0 success, 2 usage error,
3 data/config error, 4 numeric failure.
"""

from __future__ import annotations

import os

# Determinism first: cap BLAS threads before numpy loads anywhere below.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import (ConfigError, DataError, DomainError, NumericError,
                     PulseError, ShapeError, UsageError)
from .metrics import gate_motion_diag, per_joint_report
from .model import (ABLATIONS, ModelConfig, config_from_text, config_to_text,
                    forward, init_params)
from .optim import grad_check, group_errors_by_prefix
from .radar import (JOINT_NAMES, MOTIONS, RadarConfig, emit_dataset,
                    make_scene, radar_config_from_manifest)
from .storage import load_checkpoint, load_dataset, save_checkpoint
from .training import (TrainConfig, evaluate_split, loss_pos, train_model)

MODEL_KEYS = ("R", "A", "D", "patch_r", "patch_a", "embed_dim", "layers",
              "heads", "dropout", "neighborhood", "gate_strength",
              "frame_window", "agg_eps", "joints", "ablation", "head_scale")
TRAIN_KEYS = ("lr", "weight_decay", "batch", "epochs", "clip", "seed",
              "gate_loss_weight", "patience", "max_steps")
RADAR_KEYS = ("carrier_hz", "bandwidth_hz", "chirp_duration_s",
              "fast_samples_per_chirp", "virtual_elements", "noise_std",
              "frame_rate_hz")
ALL_KEYS = MODEL_KEYS + TRAIN_KEYS + RADAR_KEYS

SWEEP_AXES = {
    "beta": ("gate_strength", ["0", "0.5", "1", "2", "4"]),
    "neighborhood": ("neighborhood", ["2", "3", "5", "7"]),
    "patch": ("patch", ["2", "4", "8"]),
}


def _env_seed():
    return os.environ.get("PULSE_SEED", "0")


def _add_config_flags(parser):
    for key in ALL_KEYS:
        if key == "seed":
            parser.add_argument("--seed", default=None)
        else:
            parser.add_argument(f"--{key}", default=None)
    parser.add_argument("--beta", dest="gate_strength_alias", default=None,
                        help="alias for --gate_strength")
    parser.add_argument("--config", default=None,
                        help="key=value config file; flags override its entries")


def read_config_file(path):
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: malformed config line {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in ALL_KEYS:
            raise ConfigError(f"{path}: unknown config key {key!r}")
        values[key] = value.strip()
    return values


def resolve_config(args):
    """Merge defaults <- config file <- CLI flags into a flat string map."""
    resolved = {}
    mc = ModelConfig()
    for key in MODEL_KEYS:
        resolved[key] = str(getattr(mc, key))
    tc = TrainConfig()
    for key in TRAIN_KEYS:
        resolved[key] = str(getattr(tc, key))
    rc = RadarConfig()
    for key in RADAR_KEYS:
        resolved[key] = str(getattr(rc, key))
    resolved["seed"] = _env_seed()
    if getattr(args, "config", None):
        resolved.update(read_config_file(args.config))
    for key in ALL_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    alias = getattr(args, "gate_strength_alias", None)
    if alias is not None:
        resolved["gate_strength"] = alias
    return resolved


def model_config_from_resolved(resolved, **overrides):
    values = {key: resolved[key] for key in MODEL_KEYS}
    values.update({k: str(v) for k, v in overrides.items()})
    return ModelConfig.from_dict(values)


def train_config_from_resolved(resolved):
    return TrainConfig(
        lr=float(resolved["lr"]), weight_decay=float(resolved["weight_decay"]),
        batch=int(resolved["batch"]), epochs=int(resolved["epochs"]),
        clip=float(resolved["clip"]), seed=int(resolved["seed"]),
        gate_loss_weight=float(resolved["gate_loss_weight"]),
        patience=int(resolved["patience"]), max_steps=int(resolved["max_steps"]))


def radar_config_from_resolved(resolved):
    return RadarConfig(
        carrier_hz=float(resolved["carrier_hz"]),
        bandwidth_hz=float(resolved["bandwidth_hz"]),
        chirp_duration_s=float(resolved["chirp_duration_s"]),
        chirps_per_frame=int(resolved["D"]),
        fast_samples_per_chirp=int(resolved["fast_samples_per_chirp"]),
        virtual_elements=int(resolved["virtual_elements"]),
        R=int(resolved["R"]), A=int(resolved["A"]),
        noise_std=float(resolved["noise_std"]),
        frame_rate_hz=float(resolved["frame_rate_hz"]))


def write_resolved(resolved, out_dir):
    lines = [f"{key}={resolved[key]}" for key in sorted(resolved)]
    (Path(out_dir) / "resolved.cfg").write_text("\n".join(lines) + "\n")


def _float_csv(x):
    return repr(float(x))


# ---------------------------------------------------------------------------
# Commands

def cmd_synth(args):
    resolved = resolve_config(args)
    rcfg = radar_config_from_resolved(resolved)
    seed = int(resolved["seed"])
    if args.motion == "mixed":
        motions = [MOTIONS[i % len(MOTIONS)] for i in range(args.sequences)]
    elif args.motion in MOTIONS:
        motions = [args.motion] * args.sequences
    else:
        raise UsageError(f"unknown motion {args.motion!r}; "
                         f"expected one of {MOTIONS + ('mixed',)}")
    clutter = args.clutter == "on"
    try:
        ratios = tuple(float(v) for v in args.split_ratios.split(","))
    except ValueError as exc:
        raise UsageError(f"bad --split-ratios {args.split_ratios!r}") from exc
    if len(ratios) != 3:
        raise UsageError("--split-ratios needs three comma-separated values")
    scenes = [make_scene(rcfg, seed=seed * 100_003 + i, motion=m, clutter=clutter)
              for i, m in enumerate(motions)]
    out = Path(args.out)
    manifest = emit_dataset(rcfg, scenes, ratios, out, seed=seed,
                            frames_per_seq=args.frames, motions=motions,
                            clutter=clutter)
    write_resolved(resolved, out)
    print(f"synth: {args.sequences} sequences x {args.frames} frames, "
          f"grid {rcfg.R}x{rcfg.A}x{rcfg.D}, seed {seed} -> {out}")
    print(f"splits: train={manifest['split_train']} val={manifest['split_val']} "
          f"test={manifest['split_test']}")
    return 0


def _model_config_for_dataset(resolved, dataset, ablation=None):
    manifest = dataset.manifest
    for key in ("R", "A", "D"):
        if resolved[key] != str(ModelConfig.__dataclass_fields__[key].default) \
                and resolved[key] != manifest[key]:
            raise ConfigError(
                f"flag {key}={resolved[key]} conflicts with dataset {key}="
                f"{manifest[key]}")
    overrides = {"R": manifest["R"], "A": manifest["A"], "D": manifest["D"],
                 "joints": manifest["J"]}
    if ablation is not None:
        overrides["ablation"] = ablation
    return model_config_from_resolved(resolved, **overrides)


def _train_once(dataset, mcfg, tcfg):
    result = train_model(dataset, mcfg, tcfg)
    params = init_params(mcfg, tcfg.seed)
    params.load_values(result.best_values)
    return result, params


def cmd_train(args):
    resolved = resolve_config(args)
    dataset = load_dataset(args.dataset)
    mcfg = _model_config_for_dataset(resolved, dataset)
    tcfg = train_config_from_resolved(resolved)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result, params = _train_once(dataset, mcfg, tcfg)
    ckpt_path = out / "model.ckpt"
    save_checkpoint(ckpt_path, config_to_text(mcfg), tcfg.seed,
                    [(name, params[name].data) for name in params.names()])
    (out / "train_log.csv").write_text(result.log.to_csv_text())
    write_resolved(resolved, out)
    for rec in result.log.records:
        print(f"epoch {rec.epoch}: loss={rec.loss:.4f} "
              f"val_mpjpe={rec.val_mpjpe:.3f} val_mpjve={rec.val_mpjve:.3f} "
              f"val_akv={rec.val_akv:.3f} ({rec.seconds:.1f}s)")
    print(f"best epoch {result.best_epoch}: val_mpjpe={result.best_val_mpjpe:.6f}")
    print(f"checkpoint -> {ckpt_path}")
    return 0


def load_model(ckpt_path):
    config_text, seed, named = load_checkpoint(ckpt_path)
    mcfg = config_from_text(config_text)
    params = init_params(mcfg, seed)
    names = params.names()
    stored = [name for name, _ in named]
    if stored != names:
        raise DataError(
            f"{ckpt_path}: parameter names do not match the stored model config")
    params.load_values(dict(named))
    return mcfg, params, seed


def _check_grid(mcfg, dataset):
    manifest = dataset.manifest
    grid = (int(manifest["R"]), int(manifest["A"]), int(manifest["D"]))
    if grid != (mcfg.R, mcfg.A, mcfg.D) or int(manifest["J"]) != mcfg.joints:
        raise ConfigError(
            f"checkpoint grid {(mcfg.R, mcfg.A, mcfg.D)}/J={mcfg.joints} does not "
            f"match dataset {grid}/J={manifest['J']}")


def cmd_eval(args):
    dataset = load_dataset(args.dataset)
    mcfg, params, _ = load_model(args.checkpoint)
    _check_grid(mcfg, dataset)
    report, preds, gts = evaluate_split(params, mcfg, dataset, args.split,
                                        with_scale=args.pa_scale == "on")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["metric,value"] + [f"{n},{_float_csv(v)}" for n, v in report.as_rows()]
    (out / "metrics.csv").write_text("\n".join(lines) + "\n")
    names = dataset.manifest.get("joint_names", ",".join(JOINT_NAMES)).split(",")
    pj_rows = ["joint,mpjpe,mpjve"]
    all_pred = np.concatenate(preds, axis=0)
    all_gt = np.concatenate(gts, axis=0)
    for name, pj_pos, pj_vel in per_joint_report(all_pred, all_gt, names):
        pj_rows.append(f"{name},{_float_csv(pj_pos)},{_float_csv(pj_vel)}")
    (out / "per_joint.csv").write_text("\n".join(pj_rows) + "\n")
    for name, value in report.as_rows():
        print(f"{name}: {value:.6f}")
    return 0


def cmd_ablate(args):
    resolved = resolve_config(args)
    dataset = load_dataset(args.dataset)
    tcfg = train_config_from_resolved(resolved)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runs = []
    if args.variants:
        for variant in args.variants.split(","):
            variant = variant.strip()
            if variant not in ABLATIONS:
                raise UsageError(f"unknown variant {variant!r}; "
                                 f"expected subset of {ABLATIONS}")
            runs.append((variant, _model_config_for_dataset(resolved, dataset,
                                                            ablation=variant)))
    if args.sweep:
        if args.sweep not in SWEEP_AXES:
            raise UsageError(f"unknown sweep {args.sweep!r}; "
                             f"expected one of {sorted(SWEEP_AXES)}")
        key, defaults = SWEEP_AXES[args.sweep]
        values = (args.sweep_values.split(",") if args.sweep_values else defaults)
        for value in values:
            label = f"{args.sweep}={value}"
            local = dict(resolved)
            if key == "patch":
                local["patch_r"] = local["patch_a"] = value
            else:
                local[key] = value
            runs.append((label, _model_config_for_dataset(local, dataset)))
    if not runs:
        raise UsageError("nothing to do: pass --variants and/or --sweep")
    rows = ["variant,mpjpe,pa_mpjpe,mpjve,akv"]
    for label, mcfg in runs:
        _, params = _train_once(dataset, mcfg, tcfg)
        report, _, _ = evaluate_split(params, mcfg, dataset, args.split)
        rows.append(f"{label},{_float_csv(report.mpjpe)},"
                    f"{_float_csv(report.pa_mpjpe)},{_float_csv(report.mpjve)},"
                    f"{_float_csv(report.akv)}")
        print(f"{label}: mpjpe={report.mpjpe:.3f} pa_mpjpe={report.pa_mpjpe:.3f} "
              f"mpjve={report.mpjve:.3f} akv={report.akv:.3f}")
    (out / "ablation.csv").write_text("\n".join(rows) + "\n")
    write_resolved(resolved, out)
    return 0


GRADCHECK_DEFAULTS = {"R": "8", "A": "8", "D": "4", "embed_dim": "8",
                      "layers": "2", "heads": "2", "dropout": "0.0",
                      "joints": "4", "frame_window": "1"}


def cmd_gradcheck(args):
    resolved = resolve_config(args)
    for key, value in GRADCHECK_DEFAULTS.items():
        if getattr(args, key, None) is None and \
                (not args.config or key not in read_config_file(args.config)):
            resolved[key] = value
    mcfg = model_config_from_resolved(resolved)
    seed = int(resolved["seed"])
    params = init_params(mcfg, seed, randomize_all=True)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 404]))
    frames = [rng.random((mcfg.R, mcfg.A, mcfg.D))
              for _ in range(mcfg.frame_window)]
    # Regression target near the probe-point pose: keeps the loss and its
    # rounding noise small so the finite differences stay well conditioned.
    base_pose = forward(frames, params, mcfg).pose.data
    target = base_pose + rng.uniform(-5.0, 5.0, size=base_pose.shape)

    def build(group):
        return loss_pos(forward(frames, group, mcfg).pose, target)

    report = grad_check(build, params, step=args.step)
    grouped = group_errors_by_prefix(report)
    rows = ["param,max_rel_err"]
    for name, err in report.items():
        rows.append(f"{name},{_float_csv(err)}")
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "gradcheck.csv").write_text("\n".join(rows) + "\n")
    width = max(len(n) for n in grouped)
    print(f"{'group'.ljust(width)}  max_rel_err")
    for name in sorted(grouped):
        print(f"{name.ljust(width)}  {grouped[name]:.3e}")
    worst = max(grouped.values())
    print(f"overall max rel err: {worst:.3e} (tolerance {args.tol:g})")
    if worst >= args.tol:
        raise NumericError(f"gradient check failed: {worst:.3e} >= {args.tol:g}")
    return 0


def cmd_diag(args):
    dataset = load_dataset(args.dataset)
    mcfg, params, _ = load_model(args.checkpoint)
    _check_grid(mcfg, dataset)
    _, preds, gts, gate_seqs, smaps = evaluate_split(
        params, mcfg, dataset, args.split, collect_gates=True)
    diag = gate_motion_diag(gate_seqs, preds, gts, smaps, bins=args.bins,
                            cell_selection=args.cell_selection)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = ["frame,g_bar,v_t,bin"]
    for global_frame, (_, _, g_bar, v_t, bin_id) in enumerate(diag.records):
        rows.append(f"{global_frame},{_float_csv(g_bar)},{_float_csv(v_t)},{bin_id}")
    (out / "gate_diag.csv").write_text("\n".join(rows) + "\n")
    if diag.pearson is None:
        print("pearson_r: undefined (zero variance)")
    else:
        print(f"pearson_r: {diag.pearson:.6f}")
    for b, value in enumerate(diag.binned_mpjve):
        print(f"gate bin {b}: mpjve={value:.6f}")
    return 0


# ---------------------------------------------------------------------------
# Parser

def build_parser():
    parser = argparse.ArgumentParser(
        prog="pulse",
        description="Desk-scale mmWave pose estimation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--sequences", type=int, default=4)
    p.add_argument("--frames", type=int, default=64)
    p.add_argument("--motion", default="mixed")
    p.add_argument("--clutter", choices=("on", "off"), default="on")
    p.add_argument("--split-ratios", default="0.5,0.25,0.25")
    _add_config_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--pa-scale", choices=("on", "off"), default="on",
                   help="include scale in the Procrustes alignment")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and compare ablation variants")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variants", default="")
    p.add_argument("--sweep", default="")
    p.add_argument("--sweep-values", default="")
    p.add_argument("--split", default="test")
    _add_config_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--out", default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("diag", help="gate-motion diagnostics for a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--bins", type=int, default=5)
    p.add_argument("--cell-selection", choices=("occupied", "global"),
                   default="occupied")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diag)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, DataError, DomainError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
