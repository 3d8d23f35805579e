"""Command-line entry point.

Every subcommand writes only inside its ``--out`` directory and emits a
``manifest.json`` (subcommand, resolved configuration, seed, input and
output digests, tool version) plus ``timing.json`` holding wall-clock
time, kept apart so that manifests of identical runs are byte-identical.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .autodiff import set_default_dtype
from .classic import CgConfig, CgDivergenceError, estimate_sens_acs, sense_cg, zero_filled
from .container import (ContainerError, atomic_write_text, canonical_json, dataset_digest,
                        list_records, read_dataset, read_manifest, read_record, write_dataset)
from .digest import fnv64
from .evaluation import (agreement_stats, fwhm_lge_mass, image_metrics, lvmwt_aha,
                         phenotypes, summarize)
from .masks import MaskError, generate
from .model import CardioMM, ConfigError, ModelConfig
from .phantom import (LABEL_LV, LABEL_MYO, GeometryError, PhantomSpec, phantom_records)
from .physics import sos
from .plots import bullseye, error_map, save_png
from .text import TextBundle, compose_metadata_text, dump_embeddings
from .training import TrainConfig, TrainingError, texts_for, train

log = logging.getLogger("cardiomm")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERICAL = 0, 2, 3, 4
METHODS = ("zero-filled", "conventional", "cardiomm")


class ValidationError(ValueError):
    pass


# ------------------------------------------------------------------ helpers
def file_digest(path: Path) -> str:
    return fnv64(Path(path).read_bytes())


def input_digest(path: str | os.PathLike) -> str:
    p = Path(path)
    if p.is_dir():
        if (p / "index.json").is_file():
            return dataset_digest(p)
        if (p / "manifest.json").is_file():
            return file_digest(p / "manifest.json")
        raise ValidationError(f"{p} is neither a dataset nor a record directory")
    if not p.is_file():
        raise FileNotFoundError(f"input not found: {p}")
    return file_digest(p)


def load_json(path: str | os.PathLike) -> dict:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{p} is not valid JSON: {exc}") from exc


def check_fields(section: str, given: dict, allowed) -> None:
    unknown = sorted(set(given) - set(allowed))
    if unknown:
        raise ValidationError(f"unknown field {unknown[0]!r} in {section}")


def write_csv(path: Path, rows: list[dict]) -> None:
    fields: list[str] = []
    for r in rows:
        fields += [k for k in r if k not in fields]
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, quoting=csv.QUOTE_MINIMAL,
                           lineterminator="\r\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in r.items()})
    os.replace(tmp, path)


def finish(args, out: Path, config: dict, inputs: dict, started: float) -> None:
    """Write the run manifest (deterministic) and timing file (wall-clock)."""
    outputs = {}
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name not in ("manifest.json", "timing.json"):
            outputs[p.relative_to(out).as_posix()] = file_digest(p)
    manifest = {
        "subcommand": args.command,
        "config": config,
        "seed": args.seed,
        "float64": bool(args.float64),
        "inputs": inputs,
        "outputs": outputs,
        "tool_version": __version__,
    }
    atomic_write_text(out / "manifest.json", canonical_json(manifest))
    atomic_write_text(out / "timing.json",
                      canonical_json({"wall_clock_s": round(time.time() - started, 3)}))


def select_records(data: str, indices: list[int] | None):
    paths = list_records(data)
    if indices:
        bad = [i for i in indices if not 0 <= i < len(paths)]
        if bad:
            raise ValidationError(f"record index {bad[0]} out of range (dataset has "
                                  f"{len(paths)} records)")
        paths = [paths[i] for i in indices]
    return [read_record(p) for p in paths], paths


def record_mask(rec, args, index: int):
    ny, nx = rec.kspace.shape[-2:]
    return generate(args.pattern, ny, nx, args.af, seed=args.seed + index,
                    acs_lines=args.acs_lines, acs_block=tuple(args.acs_block))


def run_method(method: str, rec, mask, model: CardioMM | None, cg: CgConfig) -> np.ndarray:
    y = rec.kspace.astype(complex) * mask.grid
    if method == "zero-filled":
        return sos(zero_filled(y, mask.grid))
    if method == "conventional":
        maps = estimate_sens_acs(y, mask.acs_region())
        return np.abs(sense_cg(y, mask.grid, maps, cg))
    if model is None:
        raise ValidationError("--checkpoint is required for --method cardiomm")
    return model.infer(y, mask, texts_for(rec, mask)).sos()


def parallel_map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------- commands
SYNTH_FIELDS = {"n_phantoms", "frames", "shape", "modality", "n_coils", "snr", "field",
                "vendor", "view", "phantom", "lesion_sector", "random_anatomy"}


def cmd_synth(args, out: Path) -> tuple[dict, dict]:
    spec = load_json(args.spec)
    check_fields("synth spec", spec, SYNTH_FIELDS)
    check_fields("synth spec.phantom", spec.get("phantom", {}),
                 PhantomSpec.__dataclass_fields__)
    n = int(spec.get("n_phantoms", 1))
    if n < 1:
        raise ValidationError("field 'n_phantoms' must be >= 1")
    modality = spec.get("modality", "cine")
    records = []
    for i in range(n):
        pseed = args.seed * 100003 + i
        overrides = dict(spec.get("phantom", {}))
        overrides["shape"] = tuple(spec.get("shape", overrides.get("shape", (64, 64))))
        if spec.get("lesion_sector") is not None:
            overrides["lesion_sector"] = tuple(spec["lesion_sector"])
        try:
            if spec.get("random_anatomy", True):
                ps = PhantomSpec.random(pseed, **overrides)
            else:
                ps = PhantomSpec(seed=pseed, **overrides)
        except (GeometryError, TypeError) as exc:
            raise ValidationError(f"invalid phantom spec: {exc}") from exc
        frames = spec.get("frames", [0])
        recs = phantom_records(ps, modality, frames, n_coils=int(spec.get("n_coils", 8)),
                               snr=float(spec.get("snr", 400.0)), seed=pseed,
                               field_strength=float(spec.get("field", 1.5)))
        for r in recs:
            r.metadata["vendor"] = spec.get("vendor", "simulated")
            r.metadata["view"] = spec.get("view", "sax")
        records += recs
    write_dataset(records, out / "dataset")
    return {"spec": spec}, {"spec": input_digest(args.spec)}


def cmd_mask(args, out: Path):
    try:
        m = generate(args.pattern, args.shape[0], args.shape[1], args.af, seed=args.seed,
                     acs_lines=args.acs_lines, acs_block=tuple(args.acs_block))
    except MaskError as exc:
        raise ValidationError(str(exc)) from exc
    d = m.to_dict()
    d["effective_af"] = m.effective
    atomic_write_text(out / "mask.json", canonical_json(d))
    save_png(out / "mask.png", m.grid, vmin=0, vmax=1)
    cfg = {"pattern": args.pattern, "af": args.af, "shape": list(args.shape),
           "acs_lines": args.acs_lines, "acs_block": list(args.acs_block)}
    return cfg, {}


def _load_model(args) -> CardioMM | None:
    if args.method != "cardiomm":
        return None
    if not args.checkpoint:
        raise ValidationError("--checkpoint is required for --method cardiomm")
    return CardioMM.load(args.checkpoint)


def _recon_rows(args, out: Path, write_images: bool):
    records, paths = select_records(args.data, args.records)
    model = _load_model(args)
    cg = CgConfig(max_iters=args.cg_iters, lambda_reg=args.cg_lambda)

    def work(i):
        rec = records[i]
        mask = record_mask(rec, args, i)
        img = run_method(args.method, rec, mask, model, cg)
        if not np.all(np.isfinite(img)):
            raise FloatingPointError(f"non-finite reconstruction for record {i}")
        row = {"record": paths[i].name, "scan_id": rec.scan_id, "method": args.method,
               "pattern": args.pattern, "af": float(args.af),
               "effective_af": float(mask.effective)}
        if args.ref or not write_images:
            row.update(image_metrics(rec.reference, img))
        return row, img, rec

    results = parallel_map(work, range(len(records)), args.jobs)
    for i, (row, img, rec) in enumerate(results):
        if write_images:
            np.save(out / f"{paths[i].name}_recon.npy", img.astype(np.float32))
            save_png(out / f"{paths[i].name}_recon.png", img)
        if args.error_maps:
            save_png(out / f"{paths[i].name}_error.png", error_map(rec.reference, img),
                     vmin=0, vmax=0.2)
    inputs = {"data": input_digest(args.data)}
    if model is not None:
        inputs["checkpoint"] = file_digest(Path(args.checkpoint).with_suffix(".bin"))
    cfg = {k: getattr(args, k) for k in ("method", "pattern", "af", "acs_lines", "records",
                                          "cg_iters", "cg_lambda")}
    cfg["acs_block"] = list(args.acs_block)
    return [r for r, _, _ in results], cfg, inputs


def cmd_recon(args, out: Path):
    rows, cfg, inputs = _recon_rows(args, out, write_images=True)
    if args.ref:
        write_csv(out / "metrics.csv", rows)
    return cfg, inputs


def cmd_eval(args, out: Path):
    rows, cfg, inputs = _recon_rows(args, out, write_images=False)
    agg = {"record": "aggregate", "scan_id": "", "method": args.method,
           "pattern": args.pattern, "af": float(args.af),
           "effective_af": float(np.mean([r["effective_af"] for r in rows]))}
    for k in ("psnr", "ssim"):
        s = summarize([r[k] for r in rows])
        agg[k] = s.mean
        agg[f"{k}_ci_low"], agg[f"{k}_ci_high"] = s.ci_low, s.ci_high
    write_csv(out / "metrics.csv", rows + [agg])
    return cfg, inputs


TRAIN_FIELDS = {"model", "train", "val_fraction"}


def cmd_train(args, out: Path):
    cfg = load_json(args.config) if args.config else {}
    check_fields("train config", cfg, TRAIN_FIELDS)
    check_fields("train config.model", cfg.get("model", {}), ModelConfig.__dataclass_fields__)
    check_fields("train config.train", cfg.get("train", {}), TrainConfig.__dataclass_fields__)
    tdict = dict(cfg.get("train", {}))
    tdict["seed"] = args.seed
    if args.epochs is not None:
        tdict["epochs"] = args.epochs
    if args.float64:
        tdict["dtype"] = "float64"
    try:
        mcfg = ModelConfig.from_dict(cfg.get("model", {}))
        tcfg = TrainConfig.from_dict(tdict)
    except (ConfigError, TypeError) as exc:
        raise ValidationError(str(exc)) from exc
    records = read_dataset(args.data)
    n_val = int(round(len(records) * float(cfg.get("val_fraction", 0.0))))
    val, tr = records[:n_val], records[n_val:]
    if not tr:
        raise ValidationError("no training records left after the validation split")
    model = CardioMM(mcfg, seed=args.seed)
    train(model, tr, val, tcfg, out, resume=args.resume)
    resolved = {"model": mcfg.to_dict(), "train": tcfg.to_dict(),
                "val_fraction": float(cfg.get("val_fraction", 0.0))}
    inputs = {"data": input_digest(args.data)}
    if args.config:
        inputs["config"] = input_digest(args.config)
    return resolved, inputs


def cmd_analyze(args, out: Path):
    inputs = {}
    if args.task == "agreement":
        if not (args.csv and args.a and args.b):
            raise ValidationError("agreement needs --csv, --a and --b")
        with open(args.csv, newline="") as fh:
            rows = list(csv.DictReader(fh))
        try:
            a = [float(r[args.a]) for r in rows if r.get("record") != "aggregate"]
            b = [float(r[args.b]) for r in rows if r.get("record") != "aggregate"]
        except KeyError as exc:
            raise ValidationError(f"column {exc} not found in {args.csv}") from exc
        write_csv(out / "agreement.csv", [agreement_stats(a, b).to_dict()])
        inputs["csv"] = input_digest(args.csv)
        return {"task": args.task, "a": args.a, "b": args.b}, inputs
    if not args.data:
        raise ValidationError(f"--data is required for task {args.task}")
    records = read_dataset(args.data)
    inputs["data"] = input_digest(args.data)
    rows = []
    if args.task == "phenotypes":
        groups: dict[str, list] = {}
        for r in records:
            if r.segmentation is None:
                raise ValidationError(f"record {r.scan_id} has no segmentation")
            groups.setdefault(r.scan_id.rsplit("_f", 1)[0], []).append(r)
        for name, recs in groups.items():
            recs = sorted(recs, key=lambda r: r.frame or 0)
            rep = phenotypes(np.stack([r.segmentation for r in recs]), recs[0].pixel_spacing,
                             recs[0].slice_thickness, args.heart_rate)
            d = rep.to_dict()
            d.pop("lv_volumes"), d.pop("rv_volumes")
            rows.append({"subject": name, **d})
    elif args.task == "lge":
        for r in records:
            if r.segmentation is None:
                raise ValidationError(f"record {r.scan_id} has no segmentation")
            rows.append({"scan_id": r.scan_id,
                         "lge_mass_pct": fwhm_lge_mass(r.reference, r.segmentation == LABEL_MYO)})
    elif args.task == "lvmwt":
        for r in records:
            if r.segmentation is None:
                raise ValidationError(f"record {r.scan_id} has no segmentation")
            wt = lvmwt_aha(r.segmentation == LABEL_MYO, r.segmentation == LABEL_LV,
                           args.rv_insertion, level="mid", spacing=float(r.pixel_spacing[0]))
            row = {"scan_id": r.scan_id}
            row.update({f"seg{i + 1}": float(v) for i, v in enumerate(wt.segments)})
            row["global"] = wt.global_max
            rows.append(row)
            save_png(out / f"{r.scan_id}_bullseye.png", bullseye(wt.segments))
    write_csv(out / f"{args.task}.csv", rows)
    return {"task": args.task, "heart_rate": args.heart_rate,
            "rv_insertion": args.rv_insertion}, inputs


def cmd_embed_dump(args, out: Path):
    records = read_dataset(args.data)
    inputs = {"data": input_digest(args.data)}
    if args.checkpoint:
        model = CardioMM.load(args.checkpoint)
        inputs["checkpoint"] = file_digest(Path(args.checkpoint).with_suffix(".bin"))
    else:
        model = CardioMM(ModelConfig(phases=0), seed=args.seed)
    if not model.config.text_aware:
        raise ValidationError("checkpoint has no text heads (text-unaware model)")
    bundles = []
    for rec in records:
        for pattern in args.patterns:
            for af in args.afs:
                m = generate(pattern, *rec.kspace.shape[-2:], af, seed=args.seed,
                             acs_lines=args.acs_lines, acs_block=tuple(args.acs_block))
                bundles.append(TextBundle(compose_metadata_text(rec.metadata), m.text))
    dump_embeddings(model.store, bundles, out / "embeddings.csv")
    return {"patterns": args.patterns, "afs": args.afs}, inputs


def cmd_inspect(args) -> int:
    p = Path(args.path)
    if (p / "index.json").is_file():
        index = json.loads((p / "index.json").read_text())
        print(canonical_json(index), end="")
        if args.records:
            for rp in list_records(p):
                print(canonical_json(read_manifest(rp)), end="")
    elif (p / "manifest.json").is_file():
        print(canonical_json(json.loads((p / "manifest.json").read_text())), end="")
    elif p.is_file():
        print(canonical_json(json.loads(p.read_text())), end="")
    else:
        raise FileNotFoundError(f"nothing to inspect at {p}")
    return EXIT_OK


# ------------------------------------------------------------------ parser
def _add_mask_args(p, default_af=8.0):
    p.add_argument("--pattern", default="uniform", choices=("uniform", "random", "radial"))
    p.add_argument("--af", type=float, default=default_af)
    p.add_argument("--acs-lines", type=int, default=20)
    p.add_argument("--acs-block", type=int, nargs=2, default=(20, 20))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cardiomm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="single source of randomness; generated and recorded if omitted")
    common.add_argument("--float64", action="store_true", help="64-bit arithmetic throughout")
    common.add_argument("--jobs", type=int, default=1, help="per-record parallelism")
    common.add_argument("--out", help="output directory (the only place written)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="synthesise a phantom dataset")
    p.add_argument("--spec", required=True, help="JSON dataset spec")

    p = sub.add_parser("mask", parents=[common], help="generate an undersampling mask")
    _add_mask_args(p)
    p.add_argument("--shape", type=int, nargs=2, required=True)

    for name, helptext in (("recon", "reconstruct records"), ("eval", "evaluate a method")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--data", required=True)
        p.add_argument("--method", choices=METHODS, default="zero-filled")
        p.add_argument("--checkpoint")
        p.add_argument("--records", type=int, nargs="*")
        p.add_argument("--ref", action="store_true", help="compute metrics against references")
        p.add_argument("--error-maps", action="store_true")
        p.add_argument("--cg-iters", type=int, default=30)
        p.add_argument("--cg-lambda", type=float, default=0.01)
        _add_mask_args(p)

    p = sub.add_parser("train", parents=[common], help="train the unrolled network")
    p.add_argument("--data", required=True)
    p.add_argument("--config", help="JSON config with 'model', 'train', 'val_fraction'")
    p.add_argument("--epochs", type=int)
    p.add_argument("--resume", action="store_true")

    p = sub.add_parser("analyze", parents=[common], help="biomarkers and agreement statistics")
    p.add_argument("--task", required=True, choices=("phenotypes", "lge", "lvmwt", "agreement"))
    p.add_argument("--data")
    p.add_argument("--csv")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--heart-rate", type=float, default=60.0)
    p.add_argument("--rv-insertion", type=float, default=0.0)

    p = sub.add_parser("embed-dump", parents=[common], help="export text conditioning vectors")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--patterns", nargs="+", default=["uniform", "random", "radial"])
    p.add_argument("--afs", type=float, nargs="+", default=[4, 8, 16, 24])
    p.add_argument("--acs-lines", type=int, default=20)
    p.add_argument("--acs-block", type=int, nargs=2, default=(20, 20))

    p = sub.add_parser("inspect", help="print a dataset, record or run manifest")
    p.add_argument("path")
    p.add_argument("--records", action="store_true", help="also print record manifests")
    return parser


COMMANDS = {"synth": cmd_synth, "mask": cmd_mask, "recon": cmd_recon, "eval": cmd_eval,
            "train": cmd_train, "analyze": cmd_analyze, "embed-dump": cmd_embed_dump}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (FloatingPointError, TrainingError, CgDivergenceError,
                        np.linalg.LinAlgError)):
        return EXIT_NUMERICAL
    if isinstance(exc, (OSError, ContainerError)):
        return EXIT_IO
    if isinstance(exc, (ValueError, TypeError, KeyError)):
        return EXIT_VALIDATION
    raise exc


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "inspect":
            return cmd_inspect(args)
        if not args.out:
            raise ValidationError("--out is required")
        if args.seed is None:
            args.seed = int(np.random.SeedSequence().entropy % (2 ** 31))
        if args.jobs < 1:
            raise ValidationError("--jobs must be >= 1")
        set_default_dtype(np.float64 if args.float64 else np.float32)
        started = time.time()
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        config, inputs = COMMANDS[args.command](args, out)
        finish(args, out, config, inputs, started)
        return EXIT_OK
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        code = exit_code_for(exc)
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
