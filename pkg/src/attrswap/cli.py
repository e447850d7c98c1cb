"""Command-line entry point: dataset generation, classifier pretraining,
training, evaluation, latent operations, embedding export, and serving.

Every command writes a resolved-config snapshot and a machine-readable
result summary next to its outputs. Exit codes: 0 success, 1 runtime error,
2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import torch
import yaml
from PIL import Image

from . import latent_ops, metrics, report
from .config import RunConfig, validate_config, write_resolved_config
from .data import export_dataset, generate_synthetic, load_manifest, normalize_u8
from .errors import AttrswapError, ConfigurationError
from .nets import ModelBundle, save_checkpoint
from .schema import Dataset, holdout_split
from .training import (classifier_accuracy, load_model_from_checkpoint,
                       pretrain_classifiers, train)

log = logging.getLogger("attrswap")


def load_datasets(config: RunConfig) -> tuple[Dataset, Dataset]:
    """Resolve (train, test) from the config: synthetic or manifest source,
    holdout split, then optional attribute narrowing."""
    if config.manifest:
        ds = load_manifest(config.manifest, image_size=config.model.image_size)
    else:
        ds = generate_synthetic(config.data)
    if config.holdout_attribute:
        train_ds, test_ds = holdout_split(
            ds, config.holdout_attribute, set(config.holdout_values))
    else:
        train_ds = test_ds = ds
    if config.attributes:
        train_ds = train_ds.select_attributes(config.attributes)
        test_ds = test_ds.select_attributes(config.attributes)
    return train_ds, test_ds


def _snapshot(config: RunConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_resolved_config(config, out_dir / "resolved_config.yaml")


def _summary(out_dir: Path, payload: dict) -> None:
    with open(out_dir / "result_summary.json", "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, default=str)


def _load_image(path: str, image_size: int) -> np.ndarray:
    with Image.open(path) as im:
        im = im.convert("RGB").resize((image_size, image_size), Image.BILINEAR)
        return normalize_u8(np.asarray(im, dtype=np.uint8))


def cmd_synth_data(args, config: RunConfig) -> dict:
    ds = generate_synthetic(config.data)
    manifest = export_dataset(ds, Path(args.out))
    return {"items": len(ds), "manifest": str(manifest),
            "marginals": {k: v.tolist() for k, v in ds.label_marginals().items()}}


def cmd_pretrain(args, config: RunConfig) -> dict:
    train_ds, _ = load_datasets(config)
    model = ModelBundle(train_ds.schema, config.model)
    acc = pretrain_classifiers(model, train_ds, config.schedule)
    ckpt = save_checkpoint(Path(args.out) / "checkpoint", model,
                           extra={"phase": "pretrain", "accuracy": acc})
    return {"checkpoint": str(ckpt), "train_accuracy": acc}


def cmd_train(args, config: RunConfig) -> dict:
    torch.manual_seed(config.schedule.seed)
    train_ds, test_ds = load_datasets(config)
    if args.init_checkpoint:
        model = load_model_from_checkpoint(args.init_checkpoint)
        model.train()
    else:
        model = ModelBundle(train_ds.schema, config.model)
    ckpt = train(model, train_ds, config.schedule, Path(args.out),
                 resume=args.resume)
    fig = None
    loss_log = Path(args.out) / "loss_log.tsv"
    if loss_log.exists():
        fig = report.plot_loss_curves(loss_log, Path(args.out) / "loss_curves.png")
    return {"checkpoint": str(ckpt), "steps": config.schedule.steps,
            "train_items": len(train_ds), "test_items": len(test_ds),
            "loss_figure": str(fig) if fig else None}


def cmd_eval(args, config: RunConfig) -> dict:
    out_dir = Path(args.out)
    if args.metric == "hopkins":
        emb = metrics.load_embeddings(args.embeddings, args.n_attributes)
        rows = metrics.cluster_tendency_report(
            emb, cluster_by=args.cluster_by, score_within=args.score_within,
            rng=config.schedule.seed)
        table = report.cluster_tendency_rows(rows)
        path = report.write_table(table, out_dir / "hopkins_report.tsv")
        for line in ["\t".join(table[0]) if table else ""] + [
                "\t".join(str(v) for v in r.values()) for r in table]:
            print(line)
        return {"report": str(path), "clusters": len(rows)}

    model = load_model_from_checkpoint(args.checkpoint)
    _, test_ds = load_datasets(config)
    results: dict = {}

    # cross-posterior entropy matrix: classifier m' on code m
    entropies, bounds = {}, {}
    x = torch.from_numpy(np.array(test_ds.images, dtype=np.float32)).permute(0, 3, 1, 2)
    with torch.no_grad():
        bundle = model.encode_all(x)
        for m in range(0, model.M + 1):
            code_name = "z0" if m == 0 else f"z_{model.schema.names[m - 1]}"
            for mp in range(1, model.M + 1):
                pmf = model.classify_latent(bundle.codes[m], mp)
                _, mean_h = metrics.posterior_entropy(pmf)
                key = f"{code_name}|C_{model.schema.names[mp - 1]}"
                entropies[key] = mean_h
                bounds[key] = float(np.log(model.schema.class_count(mp)))
    results["entropy"] = entropies
    report.plot_entropy_bars(entropies, bounds, out_dir / "entropy.png")
    report.write_table(
        [{"pair": k, "entropy": f"{v:.4f}", "ln_K": f"{bounds[k]:.4f}"}
         for k, v in entropies.items()],
        out_dir / "entropy.tsv")

    # per-cluster Hopkins tables + PCA scatter per attribute code
    for m in range(1, model.M + 1):
        name = model.schema.names[m - 1]
        emb = metrics.embedding_set(model, test_ds, m)
        proj = metrics.pca_project(emb.points, 2)
        report.plot_pca_scatter(proj, emb.labels[:, m - 1],
                                f"z_{name} by {name}", out_dir / f"pca_{name}.png")
        if model.M >= 2:
            other = 2 if m == 1 else 1
            rows = metrics.cluster_tendency_report(
                emb, cluster_by=m, score_within=other, rng=config.schedule.seed)
            report.write_table(report.cluster_tendency_rows(rows),
                               out_dir / f"hopkins_{name}.tsv")
            results[f"hopkins_{name}"] = [r.pooled_mean for r in rows]

    # transfer accuracy, using a separately pretrained evaluation classifier
    if args.eval_checkpoint and model.M >= 2:
        eval_model = load_model_from_checkpoint(args.eval_checkpoint)
        for m in range(1, model.M + 1):
            name = model.schema.names[m - 1]
            acc = metrics.transfer_accuracy(
                model, eval_model, test_ds, m, mode=args.transfer_mode,
                max_images=args.max_images, donor_rng=config.schedule.seed)
            results[f"transfer_{name}"] = {k: list(v) for k, v in acc.items()}
        report.write_table(
            [{"metric": k, "value": json.dumps(v)}
             for k, v in results.items() if k.startswith("transfer_")],
            out_dir / "transfer_accuracy.tsv")
    return results


def cmd_transfer(args, config: RunConfig) -> dict:
    """Run a batch job file of swap requests (by image path)."""
    return _run_jobs(args, config, kind="transfer")


def cmd_mix(args, config: RunConfig) -> dict:
    return _run_jobs(args, config, kind="mix")


def cmd_interpolate(args, config: RunConfig) -> dict:
    return _run_jobs(args, config, kind="interpolate")


def _run_jobs(args, config: RunConfig, kind: str) -> dict:
    model = load_model_from_checkpoint(args.checkpoint)
    size = model.cfg.image_size
    with open(args.jobs, encoding="utf-8") as f:
        jobs = yaml.safe_load(f) or []
    if not isinstance(jobs, list):
        raise ConfigurationError(f"{args.jobs}: job file must be a list of requests")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_rows = []
    for i, job in enumerate(jobs):
        job_kind = job.get("op", kind)
        if job_kind == "transfer":
            donors = {model.schema.index_of(a): _load_image(p, size)
                      for a, p in job["donors"].items()}
            out = latent_ops.swap(model, latent_ops.SwapRequest(
                source=_load_image(job["source"], size), donors=donors))
            frames = [out]
        elif job_kind == "mix":
            comps = tuple((_load_image(c["image"], size), float(c["weight"]))
                          for c in job["components"])
            base = _load_image(job["base"], size) if "base" in job else None
            out = latent_ops.mix(model, latent_ops.MixRequest(
                attribute=model.schema.index_of(job["attribute"]),
                components=comps, base=base))
            frames = [out]
        elif job_kind == "interpolate":
            frames = latent_ops.interpolate(
                model, model.schema.index_of(job["attribute"]),
                _load_image(job["image_i"], size), _load_image(job["image_j"], size),
                steps=int(job.get("steps", 8)),
                base=_load_image(job["base"], size) if "base" in job else None)
        else:
            raise ConfigurationError(f"job {i}: unknown op {job_kind!r}")
        paths = []
        for k, frame in enumerate(frames):
            name = f"{kind}_{i:03d}" + (f"_{k:02d}" if len(frames) > 1 else "") + ".png"
            Image.fromarray((np.clip((frame + 1) / 2, 0, 1) * 255).astype(np.uint8)
                            ).save(out_dir / name)
            paths.append(name)
        manifest_rows.append({"job": i, "op": job_kind, "outputs": ";".join(paths)})
        if len(frames) > 1:
            report.save_image_grid(frames, out_dir / f"{kind}_{i:03d}_strip.png")
    report.write_table(manifest_rows, out_dir / "results.tsv")
    return {"jobs": len(jobs), "manifest": str(out_dir / "results.tsv")}


def cmd_export_embeddings(args, config: RunConfig) -> dict:
    model = load_model_from_checkpoint(args.checkpoint)
    _, test_ds = load_datasets(config)
    m = model.schema.index_of(args.attribute)
    emb_path, proj_path = metrics.export_embeddings(
        model, test_ds, m, Path(args.out) / f"embeddings_{args.attribute}.tsv")
    proj = np.loadtxt(proj_path, delimiter="\t", skiprows=1, ndmin=2)
    report.plot_pca_scatter(
        proj[:, model.M:], proj[:, m - 1].astype(int), f"z_{args.attribute}",
        Path(args.out) / f"pca_{args.attribute}.png")
    return {"embeddings": str(emb_path), "projection": str(proj_path)}


def cmd_serve(args, config: RunConfig) -> dict:
    import uvicorn

    from .service import create_app

    train_ds, test_ds = load_datasets(config)
    catalog = train_ds if args.catalog_split == "train" else test_ds
    app = create_app(checkpoint_path=args.checkpoint, catalog=catalog)
    uvicorn.run(app, host=args.host, port=args.port)
    return {}


def cmd_validate_config(args, config: RunConfig) -> dict:
    resolved = config.to_dict()
    yaml.safe_dump(resolved, sys.stdout, sort_keys=False)
    return {"valid": True}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="attrswap")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--config", default=None, help="YAML config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL",
                       help="config override, e.g. schedule.steps=100")
        return p

    add("synth-data", cmd_synth_data, help="generate the synthetic dataset")
    add("pretrain", cmd_pretrain, help="pretrain the attribute classifiers")
    p = add("train", cmd_train, help="run adversarial training")
    p.add_argument("--init-checkpoint", default=None,
                   help="start from a pretrained checkpoint (e.g. classifiers)")
    p.add_argument("--resume", action="store_true")

    p = add("eval", cmd_eval, help="evaluation suite / single metric")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--eval-checkpoint", default=None,
                   help="separately trained classifier checkpoint for transfer accuracy")
    p.add_argument("--metric", default="suite",
                   choices=["suite", "hopkins"])
    p.add_argument("--embeddings", default=None, help="exported embedding file")
    p.add_argument("--n-attributes", type=int, default=2)
    p.add_argument("--cluster-by", type=int, default=1)
    p.add_argument("--score-within", type=int, default=2)
    p.add_argument("--transfer-mode", default="mean_code",
                   choices=["mean_code", "donor"])
    p.add_argument("--max-images", type=int, default=None)

    for name, fn in (("transfer", cmd_transfer), ("mix", cmd_mix),
                     ("interpolate", cmd_interpolate)):
        p = add(name, fn, help=f"batch {name} jobs from a job file")
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--jobs", required=True, help="YAML job file")

    p = add("export-embeddings", cmd_export_embeddings,
            help="export latent codes + PCA projection")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--attribute", required=True)

    p = add("serve", cmd_serve, help="run the HTTP inference service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--catalog-split", default="test", choices=["test", "train"])

    add("validate-config", cmd_validate_config,
        help="resolve a config file and echo it with defaults filled")
    return parser


def _parse_overrides(pairs: list[str]) -> dict:
    out: dict = {}
    for pair in pairs:
        if "=" not in pair or "." not in pair.split("=", 1)[0]:
            raise ConfigurationError(f"override must look like section.key=value: {pair!r}")
        key, value = pair.split("=", 1)
        section, name = key.split(".", 1)
        out.setdefault(section, {})[name] = yaml.safe_load(value)
    return out


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = validate_config(args.config, _parse_overrides(args.set))
    except (ConfigurationError, OSError, yaml.YAMLError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    try:
        _snapshot(config, out_dir)
        result = args.fn(args, config)
        _summary(out_dir, {"command": args.command, "ok": True, "result": result})
        return 0
    except ConfigurationError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except AttrswapError as e:
        print(f"error: {e}", file=sys.stderr)
        _summary(out_dir, {"command": args.command, "ok": False, "error": str(e)})
        return 1


if __name__ == "__main__":
    sys.exit(main())
