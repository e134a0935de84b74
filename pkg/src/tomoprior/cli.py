"""Command-line entry point: simulate / reconstruct / evaluate / train-export-check."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import io as tio
from .geometry import ImageGrid
from .metrics import build_report, psnr, render_table, ssim, write_report_csv
from .phantoms import phantom_batch
from .sart import ReconConfig, reconstruct
from .simulate import (
    DESK_TRAIN_SCENARIOS,
    PAPER_TRAIN_SCENARIOS,
    SCENARIOS,
    apply_poisson_noise,
    get_scenario,
)
from .projector import forward_project
from .weights import WeightsError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3

METHODS = ("sart", "sart-tv", "sart-gan")
METHOD_PRIOR = {"sart": "clamp", "sart-tv": "tv-superiorize", "sart-gan": "generator"}


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


def parse_config_file(path) -> dict:
    """Flat key-value config: one `key = value` per line, # comments."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def merge_config(args: argparse.Namespace, parser_keys: set) -> dict:
    """File values overridden by CLI flags of the same name; unknown keys error."""
    merged = {}
    if getattr(args, "config", None):
        for key, value in parse_config_file(args.config).items():
            if key not in parser_keys:
                raise ConfigError(f"unknown config key {key!r}")
            merged[key] = value
    for key in parser_keys:
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            merged[key] = cli_value
    return merged


def _as_int(cfg, key, default):
    try:
        return int(cfg.get(key, default))
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {cfg.get(key)!r}") from None


def _as_float(cfg, key, default):
    try:
        return float(cfg.get(key, default))
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number, got {cfg.get(key)!r}") from None


def _as_flag(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).lower() in ("1", "true", "yes", "on")


def _scenario_list(cfg) -> list:
    raw = cfg.get("scenario", "desk-low-1e4")
    if isinstance(raw, list):
        names = raw
    else:
        names = [s.strip() for s in str(raw).split(",") if s.strip()]
    expanded = []
    for name in names:
        if name == "paper-train":
            expanded.extend(PAPER_TRAIN_SCENARIOS)
        elif name == "desk-train":
            expanded.extend(DESK_TRAIN_SCENARIOS)
        else:
            expanded.append(name)
    try:
        return [get_scenario(n) for n in expanded]
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc


def _load_phantoms(cfg, side: int, seed: int) -> list:
    source = str(cfg.get("phantoms", "8"))
    path = Path(source)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix in (".tpi", ".npy"))
        if not files:
            raise DataError(f"no .tpi/.npy images in {path}")
        return [tio.load_image_any(p) for p in files]
    try:
        count = int(source)
    except ValueError:
        raise ConfigError(f"phantoms must be a count or a directory, got {source!r}") from None
    return phantom_batch(count, side, seed)


def _recon_config(cfg, prior: str, weights_path=None) -> ReconConfig:
    return ReconConfig(
        iterations=_as_int(cfg, "iterations", 20),
        num_subsets=_as_int(cfg, "subsets", 10),
        relaxation=_as_float(cfg, "relaxation", 1.0),
        prior=prior,
        prior_cadence=_as_int(cfg, "prior_cadence", 1),
        tv_steps=_as_int(cfg, "tv_steps", 10),
        tv_beta0_scale=_as_float(cfg, "tv_beta0_scale", 0.2),
        tv_shrink=_as_float(cfg, "tv_shrink", 0.995),
        weights_path=weights_path,
    )


SIMULATE_KEYS = {"out", "seed", "side", "phantoms", "scenario", "reference",
                 "iterations", "subsets"}


def cmd_simulate(cfg: dict) -> int:
    out = Path(cfg.get("out") or _fail_config("simulate requires --out"))
    out.mkdir(parents=True, exist_ok=True)
    seed = _as_int(cfg, "seed", 0)
    side = _as_int(cfg, "side", 64)
    scenarios = _scenario_list(cfg)
    reference = get_scenario(str(cfg.get("reference", "desk-normal")))
    phantoms = _load_phantoms(cfg, side, seed)
    recon_cfg = _recon_config(cfg, "clamp")

    manifest = {
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "seed": seed,
        "side": side,
        "reference": reference.name,
        "recon": {"iterations": recon_cfg.iterations, "subsets": recon_cfg.num_subsets},
        "samples": [],
    }
    for i, phantom in enumerate(phantoms):
        phantom_file = f"phantom_{i:03d}.tpi"
        tio.save_image(phantom, out / phantom_file)
        for scenario in scenarios:
            sample_seed = seed + 1000 * i + hash_scenario(scenario.name)
            clean = forward_project(phantom, reference.geometry(phantom.side, phantom.pixel_size))
            degraded = forward_project(phantom, scenario.geometry(phantom.side, phantom.pixel_size))
            clean = apply_poisson_noise(clean, reference.beam_intensity, sample_seed * 2)
            degraded = apply_poisson_noise(degraded, scenario.beam_intensity, sample_seed * 2 + 1)
            stem = f"{i:03d}_{scenario.name}"
            tio.save_sinogram(clean, out / f"{stem}_clean.tps")
            tio.save_sinogram(degraded, out / f"{stem}_degraded.tps")
            reference_recon, _ = reconstruct(clean, recon_cfg, side=phantom.side,
                                             pixel_size=phantom.pixel_size)
            tio.save_image(reference_recon, out / f"{stem}_ref.tpi")
            manifest["samples"].append({
                "id": stem,
                "phantom": phantom_file,
                "scenario": scenario.name,
                "beam_intensity": scenario.beam_intensity,
                "num_views": scenario.num_views,
                "angular_range": scenario.angular_range,
                "seed": sample_seed,
                "clean_sino": f"{stem}_clean.tps",
                "degraded_sino": f"{stem}_degraded.tps",
                "reference_recon": f"{stem}_ref.tpi",
            })
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    print(f"simulate: wrote {len(manifest['samples'])} samples to {out}")
    return EXIT_OK


def hash_scenario(name: str) -> int:
    """Stable small integer per scenario name (hash() is salted per process)."""
    return sum((i + 1) * b for i, b in enumerate(name.encode())) % 1000


RECONSTRUCT_KEYS = {"data", "out", "method", "weights", "iterations", "subsets",
                    "relaxation", "prior_cadence", "tv_steps", "tv_beta0_scale",
                    "tv_shrink", "png"}


def _load_manifest(data_dir: Path) -> dict:
    manifest_path = data_dir / "manifest.json"
    if not manifest_path.exists():
        raise DataError(f"no manifest.json in {data_dir}")
    return json.loads(manifest_path.read_text())


def cmd_reconstruct(cfg: dict) -> int:
    data = Path(cfg.get("data") or _fail_config("reconstruct requires --data"))
    out = Path(cfg.get("out") or _fail_config("reconstruct requires --out"))
    methods = [m.strip() for m in str(cfg.get("method", "sart")).split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {METHODS}")
    weights_path = cfg.get("weights")
    if "sart-gan" in methods and not weights_path:
        raise ConfigError("method sart-gan requires --weights")
    if weights_path and not Path(weights_path).exists():
        raise ConfigError(f"weight file {weights_path} does not exist")
    manifest = _load_manifest(data)
    out.mkdir(parents=True, exist_ok=True)
    side = int(manifest["side"])
    want_png = _as_flag(cfg.get("png", False))

    recon_manifest = {"data": str(data), "methods": methods, "outputs": []}
    for sample in manifest["samples"]:
        sino = tio.load_sinogram(data / sample["degraded_sino"])
        phantom = tio.load_image(data / sample["phantom"])
        for method in methods:
            config = _recon_config(cfg, METHOD_PRIOR[method], weights_path)
            image, diag = reconstruct(sino, config, side=side,
                                      pixel_size=phantom.pixel_size,
                                      ground_truth=phantom)
            stem = f"{sample['id']}_{method}"
            tio.save_image(image, out / f"{stem}.tpi")
            with open(out / f"{stem}_trace.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["iteration", "relative_residual", "psnr_vs_phantom"])
                for it, (res, p) in enumerate(zip(diag.residuals, diag.psnr_trace), 1):
                    writer.writerow([it, f"{res:.9e}", f"{p:.6f}"])
            if want_png:
                tio.export_png(image, out / f"{stem}.png")
            recon_manifest["outputs"].append({
                "id": sample["id"], "method": method, "image": f"{stem}.tpi",
                "trace": f"{stem}_trace.csv", "scenario": sample["scenario"],
            })
    (out / "recon_manifest.json").write_text(json.dumps(recon_manifest, indent=2,
                                                        sort_keys=True))
    print(f"reconstruct: wrote {len(recon_manifest['outputs'])} images to {out}")
    return EXIT_OK


EVALUATE_KEYS = {"data", "recon", "out", "baseline"}


def cmd_evaluate(cfg: dict) -> int:
    data = Path(cfg.get("data") or _fail_config("evaluate requires --data"))
    recon_dir = Path(cfg.get("recon") or _fail_config("evaluate requires --recon"))
    out = Path(cfg.get("out") or _fail_config("evaluate requires --out"))
    manifest = _load_manifest(data)
    recon_manifest_path = recon_dir / "recon_manifest.json"
    if not recon_manifest_path.exists():
        raise DataError(f"no recon_manifest.json in {recon_dir}")
    recon_manifest = json.loads(recon_manifest_path.read_text())
    out.mkdir(parents=True, exist_ok=True)

    references = {s["id"]: tio.load_image(data / s["reference_recon"])
                  for s in manifest["samples"]}
    results: dict = {}
    for entry in recon_manifest["outputs"]:
        ref = references.get(entry["id"])
        if ref is None:
            raise DataError(f"recon output {entry['id']} missing from dataset manifest")
        image = tio.load_image(recon_dir / entry["image"])
        pair = (psnr(image, ref), ssim(image, ref))
        results.setdefault(entry["method"], {}).setdefault(entry["scenario"], []).append(pair)

    report = build_report(results, baseline=str(cfg.get("baseline", "best")))
    write_report_csv(report, out / "report.csv")
    table = render_table(report)
    (out / "table.txt").write_text(table)
    print(table, end="")
    return EXIT_OK


CHECK_KEYS = {"weights", "probes", "seed", "ablation_no_attention"}


def cmd_train_export_check(cfg: dict) -> int:
    from .nn import generator_forward
    from .weights import load_weights, save_weights

    weights_file = cfg.get("weights") or _fail_config("train-export-check requires --weights")
    if not Path(weights_file).exists():
        raise ConfigError(f"weight file {weights_file} does not exist")
    weights = load_weights(weights_file)
    if _as_flag(cfg.get("ablation_no_attention", False)) and weights.has_attention:
        raise DataError(f"{weights_file}: descriptor contains an attention layer")

    import tempfile
    ok = True
    with tempfile.TemporaryDirectory() as tmp:
        copy_path = Path(tmp) / "roundtrip.tpw"
        save_weights(weights, copy_path)
        identical = copy_path.read_bytes() == Path(weights_file).read_bytes()
        print(f"round-trip byte-identical: {'PASS' if identical else 'FAIL'}")
        ok &= identical

    rng = np.random.default_rng(_as_int(cfg, "seed", 0))
    n_probes = _as_int(cfg, "probes", 10)
    worst = 0.0
    for _ in range(n_probes):
        probe = rng.random((weights.input_side, weights.input_side)) * weights.norm_max
        a = generator_forward(probe, weights)
        b = generator_forward(probe, weights)
        worst = max(worst, float(np.abs(a - b).max()))
        if not np.all(np.isfinite(a)):
            ok = False
    print(f"forward determinism/finiteness over {n_probes} probes: "
          f"{'PASS' if ok and worst == 0.0 else 'FAIL'} (max rerun diff {worst:g})")
    ok &= worst == 0.0

    try:
        from tomoprior_trainer.verify import verify_against_primary
    except ImportError:
        print("trainer package not installed; cross-component check skipped")
    else:
        passed, max_diff, _ = verify_against_primary(weights_file,
                                                     num_probes=n_probes,
                                                     seed=_as_int(cfg, "seed", 0))
        print(f"cross-component equivalence: {'PASS' if passed else 'FAIL'} "
              f"(max diff {max_diff:.3e})")
        ok &= passed
    return EXIT_OK if ok else EXIT_DATA


def _fail_config(message: str):
    raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tomoprior",
                                     description=__doc__.strip())
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int)

    p_sim = sub.add_parser("simulate", help="generate phantoms, sinograms, references")
    add_common(p_sim)
    p_sim.add_argument("--out")
    p_sim.add_argument("--side", type=int)
    p_sim.add_argument("--phantoms", help="procedural count or directory of images")
    p_sim.add_argument("--scenario", help="comma list or preset paper-train/desk-train")
    p_sim.add_argument("--reference", help="scenario used for the clean side")
    p_sim.add_argument("--iterations", type=int)
    p_sim.add_argument("--subsets", type=int)

    p_rec = sub.add_parser("reconstruct", help="run reconstruction methods on a dataset")
    add_common(p_rec)
    p_rec.add_argument("--data")
    p_rec.add_argument("--out")
    p_rec.add_argument("--method", help="comma list from sart,sart-tv,sart-gan")
    p_rec.add_argument("--weights")
    p_rec.add_argument("--iterations", type=int)
    p_rec.add_argument("--subsets", type=int)
    p_rec.add_argument("--relaxation", type=float)
    p_rec.add_argument("--prior-cadence", dest="prior_cadence", type=int)
    p_rec.add_argument("--tv-steps", dest="tv_steps", type=int)
    p_rec.add_argument("--tv-beta0-scale", dest="tv_beta0_scale", type=float)
    p_rec.add_argument("--tv-shrink", dest="tv_shrink", type=float)
    p_rec.add_argument("--png", action="store_const", const=True)

    p_eval = sub.add_parser("evaluate", help="metrics report in the comparison-table layout")
    add_common(p_eval)
    p_eval.add_argument("--data")
    p_eval.add_argument("--recon")
    p_eval.add_argument("--out")
    p_eval.add_argument("--baseline")

    p_chk = sub.add_parser("train-export-check", help="validate an exported weight file")
    add_common(p_chk)
    p_chk.add_argument("--weights")
    p_chk.add_argument("--probes", type=int)
    p_chk.add_argument("--ablation-no-attention", dest="ablation_no_attention",
                       action="store_const", const=True)

    return parser


KEYS = {
    "simulate": SIMULATE_KEYS | {"seed"},
    "reconstruct": RECONSTRUCT_KEYS | {"seed"},
    "evaluate": EVALUATE_KEYS | {"seed"},
    "train-export-check": CHECK_KEYS,
}

COMMANDS = {
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "evaluate": cmd_evaluate,
    "train-export-check": cmd_train_export_check,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = merge_config(args, KEYS[args.command])
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, tio.DataFileError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except WeightsError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
