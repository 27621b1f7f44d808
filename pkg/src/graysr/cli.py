"""Command-line interface.

Subcommands: prepare (degrade an HR corpus), dict-train (sparse dictionaries),
train (networks), run (super-resolve a directory), eval (Table-style metric
report with figures), mos serve / mos report (rating workflow). Every
subcommand accepts --config JSON; explicit flags override file values.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from graysr.image import (
    bicubic_resize,
    center_crop_to_multiple,
    load_image,
    save_image,
)

IMAGE_SUFFIXES = (".png", ".pgm")
MANIFEST_SCHEMA = 1


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _list_images(directory: Path) -> list:
    files = sorted(
        p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not files:
        raise SystemExit(f"error: no PNG/PGM images in {directory}")
    return files


def cmd_prepare(opts) -> None:
    hr_dir = Path(opts.hr_dir)
    out_dir = Path(opts.out)
    scale = opts.scale
    (out_dir / "hr").mkdir(parents=True, exist_ok=True)
    (out_dir / "lr").mkdir(parents=True, exist_ok=True)
    pairs = []
    for path in _list_images(hr_dir):
        img = load_image(path)
        hr = center_crop_to_multiple(img, scale)
        lr = bicubic_resize(hr, hr.width // scale, hr.height // scale)
        name = path.stem
        hr_rel = Path("hr") / f"{name}.png"
        lr_rel = Path("lr") / f"{name}.png"
        save_image(hr, out_dir / hr_rel)
        save_image(lr, out_dir / lr_rel)
        pairs.append(
            {
                "name": name,
                "hr": str(hr_rel),
                "lr": str(lr_rel),
                "hr_sha256": _sha256(out_dir / hr_rel),
                "lr_sha256": _sha256(out_dir / lr_rel),
            }
        )
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "scale": scale,
        "seed": opts.seed,
        "pairs": pairs,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    print(f"prepared {len(pairs)} pair(s) at scale {scale} -> {out_dir}")


def cmd_dict_train(opts) -> None:
    from graysr.sparse import SparseParams, sample_patch_pairs, save_dictionary, train_dictionaries

    params = SparseParams(
        lam=opts.lam,
        patch_size=opts.patch_size,
        atoms=opts.atoms,
    )
    images = [load_image(p) for p in _list_images(Path(opts.hr_dir))]
    data = sample_patch_pairs(images, opts.per_image, params, seed=opts.seed)
    print(f"sampled {len(data)} patch pairs from {len(images)} image(s)")
    pair = train_dictionaries(data, params, iters=opts.iters, seed=opts.seed)
    save_dictionary(pair, opts.out)
    print(f"trained {pair.atoms}-atom dictionary pair -> {opts.out}")


def cmd_train(opts) -> None:
    from graysr.models import TrainPlan, surrogate_extractor, train, write_loss_csv
    from graysr.nn import save_network
    from graysr.reports import render_loss_figure

    plan = TrainPlan(
        model=opts.model,
        scale=opts.scale,
        pretrain_epochs=opts.pretrain_epochs,
        adversarial_epochs=opts.adversarial_epochs,
        total_epochs=opts.epochs,
        batch=opts.batch,
        lr=opts.lr,
        mse_weight=opts.mse_weight,
        vgg_weight=opts.vgg_weight,
        adv_weight=opts.adv_weight,
        seed=opts.seed,
        width=opts.width,
        blocks=opts.blocks,
        crop=opts.crop,
    )
    corpus = [load_image(p) for p in _list_images(Path(opts.hr_dir))]
    phi = None
    if plan.model in ("srresnet", "srgan"):
        phi = surrogate_extractor(seed=opts.phi_seed)
    out_dir = Path(opts.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = train(plan, corpus, phi)
    save_network(result.model, out_dir / "model.srnet")
    if "discriminator" in result.networks:
        save_network(result.networks["discriminator"], out_dir / "discriminator.srnet")
    write_loss_csv(result.records, out_dir / "losses.csv")
    if result.records:
        render_loss_figure(result.records, out_dir / "loss_curves.png")
    (out_dir / "plan.json").write_text(
        json.dumps({k: getattr(plan, k) for k in plan.__dataclass_fields__},
                   indent=2, sort_keys=True) + "\n"
    )
    print(f"trained {plan.model} ({len(result.records)} steps) -> {out_dir}")


def cmd_run(opts) -> None:
    lr_dir = Path(opts.lr_dir)
    out_dir = Path(opts.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    method = opts.method
    scale = opts.scale

    if method == "bicubic":
        def upscale(lr):
            return bicubic_resize(lr, lr.width * scale, lr.height * scale)

    elif method == "sparse":
        from graysr.sparse import SparseParams, load_dictionary, super_resolve_sparse

        if not opts.dict or not Path(opts.dict).exists():
            raise SystemExit(
                f"error: method sparse needs a trained dictionary (--dict), "
                f"missing: {opts.dict}"
            )
        pair = load_dictionary(opts.dict)
        params = SparseParams(
            lam=opts.lam,
            patch_size=pair.patch_size,
            patch_stride=opts.stride,
            atoms=pair.atoms,
        )

        def upscale(lr):
            return super_resolve_sparse(lr, pair, params, scale=scale)

    elif method in ("srcnn", "srresnet", "srgan"):
        from graysr.models import super_resolve
        from graysr.nn import load_network

        if not opts.model or not Path(opts.model).exists():
            raise SystemExit(
                f"error: method {method} needs a trained checkpoint (--model), "
                f"missing: {opts.model}"
            )
        net = load_network(opts.model)
        kind = net.meta.get("kind", "srcnn")

        def upscale(lr):
            return super_resolve(net, kind, lr, scale)

    else:
        raise SystemExit(f"error: unknown method {method!r}")

    count = 0
    for path in _list_images(lr_dir):
        sr = upscale(load_image(path))
        save_image(sr, out_dir / f"{path.stem}.png")
        count += 1
    print(f"{method}: super-resolved {count} image(s) -> {out_dir}")


def cmd_eval(opts) -> None:
    from graysr.reports import (
        evaluate_methods,
        render_metrics_figure,
        render_text_table,
        write_report_csv,
        write_report_json,
    )

    manifest_path = Path(opts.manifest)
    manifest = json.loads(manifest_path.read_text())
    sr_dirs = {}
    for entry in opts.sr or []:
        if "=" not in entry:
            raise SystemExit(f"error: --sr expects method=dir, got {entry!r}")
        method, _, directory = entry.partition("=")
        sr_dirs[method] = directory
    if not sr_dirs:
        raise SystemExit("error: no --sr method=dir arguments given")

    mos_by_method = {}
    if opts.ratings:
        from graysr.mos import mos_report

        table, skipped = mos_report(opts.ratings)
        if skipped:
            print(f"warning: skipped {skipped} corrupt ratings line(s)", file=sys.stderr)
        mos_by_method = {method: value for method, value, _ in table}

    rows = evaluate_methods(manifest, manifest_path.parent, sr_dirs, mos_by_method)
    table = render_text_table(rows)
    print(table)
    if opts.out:
        out_dir = Path(opts.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_report_json(rows, out_dir / "report.json", scale=manifest.get("scale"))
        write_report_csv(rows, out_dir / "report.csv")
        (out_dir / "report.txt").write_text(table + "\n")
        render_metrics_figure(rows, out_dir / "metrics.png")
        print(f"report -> {out_dir}")


def cmd_mos_serve(opts) -> None:
    from graysr.mos.service import serve_forever

    serve_forever(opts.sessions, opts.log, host=opts.host, port=opts.port,
                  ui_dir=opts.ui)


def cmd_mos_report(opts) -> None:
    from graysr.mos.report import print_report

    table = print_report(opts.log)
    if opts.json:
        payload = {
            "schema": 1,
            "methods": [
                {"method": m, "mos": v, "n": n} for m, v, n in table
            ],
        }
        Path(opts.json).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _add_config_arg(parser):
    parser.add_argument("--config", help="JSON file with defaults for this command")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graysr",
        description="grayscale single-image super-resolution toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="degrade an HR corpus into LR/HR pairs")
    p.add_argument("--hr-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scale", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    _add_config_arg(p)
    p.set_defaults(func=cmd_prepare, defaults={"scale": 4, "seed": 0})

    p = sub.add_parser("dict-train", help="train sparse-coding dictionaries")
    p.add_argument("--hr-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--atoms", type=int, default=None)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--per-image", type=int, default=None)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--patch-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    _add_config_arg(p)
    p.set_defaults(
        func=cmd_dict_train,
        defaults={
            "atoms": 512,
            "iters": 8,
            "per_image": 1000,
            "lam": 0.2,
            "patch_size": 5,
            "seed": 0,
        },
    )

    p = sub.add_parser("train", help="train srcnn / srresnet / srgan")
    p.add_argument("--model", required=True, choices=("srcnn", "srresnet", "srgan"))
    p.add_argument("--hr-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scale", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--pretrain-epochs", type=int, default=None)
    p.add_argument("--adversarial-epochs", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--mse-weight", type=float, default=None)
    p.add_argument("--vgg-weight", type=float, default=None)
    p.add_argument("--adv-weight", type=float, default=None)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--blocks", type=int, default=None)
    p.add_argument("--crop", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--phi-seed", type=int, default=None)
    _add_config_arg(p)
    p.set_defaults(
        func=cmd_train,
        defaults={
            "scale": 4,
            "lr": 1e-4,
            "mse_weight": 1.0,
            "vgg_weight": 1.0,
            "adv_weight": 1e-3,
            "crop": 224,
            "seed": 0,
            "phi_seed": 0,
        },
    )

    p = sub.add_parser("run", help="super-resolve a directory of LR images")
    p.add_argument("--method", required=True,
                   choices=("bicubic", "sparse", "srcnn", "srresnet", "srgan"))
    p.add_argument("--lr-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scale", type=int, default=None)
    p.add_argument("--model", help="network checkpoint (.srnet)")
    p.add_argument("--dict", help="sparse dictionary (.srdict)")
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--stride", type=int, default=None)
    _add_config_arg(p)
    p.set_defaults(func=cmd_run, defaults={"scale": 4, "lam": 0.2, "stride": 1})

    p = sub.add_parser("eval", help="metric report over SR outputs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--sr", action="append", metavar="METHOD=DIR")
    p.add_argument("--ratings", help="ratings CSV log for MOS merging")
    p.add_argument("--out", help="directory for report.{json,csv,txt} + figures")
    _add_config_arg(p)
    p.set_defaults(func=cmd_eval, defaults={})

    mos = sub.add_parser("mos", help="rating workflow")
    mos_sub = mos.add_subparsers(dest="mos_command", required=True)

    p = mos_sub.add_parser("serve", help="run the blinded rating service")
    p.add_argument("--sessions", required=True, help="sessions spec JSON")
    p.add_argument("--log", required=True, help="append-only ratings CSV")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--ui", help="static frontend directory")
    _add_config_arg(p)
    p.set_defaults(func=cmd_mos_serve, defaults={"host": "127.0.0.1", "port": 8731})

    p = mos_sub.add_parser("report", help="aggregate MOS from the ratings log")
    p.add_argument("--log", required=True)
    p.add_argument("--json", help="also write the table as JSON")
    _add_config_arg(p)
    p.set_defaults(func=cmd_mos_report, defaults={})

    return parser


def _apply_config(opts) -> None:
    """Fill None-valued options from --config JSON, then builtin defaults."""
    layered = dict(getattr(opts, "defaults", {}) or {})
    if getattr(opts, "config", None):
        file_values = json.loads(Path(opts.config).read_text())
        layered.update({k.replace("-", "_"): v for k, v in file_values.items()})
    for key, value in layered.items():
        if getattr(opts, key, None) is None:
            setattr(opts, key, value)


def main(argv=None) -> int:
    parser = build_parser()
    opts = parser.parse_args(argv)
    _apply_config(opts)
    opts.func(opts)
    return 0


if __name__ == "__main__":
    sys.exit(main())
