"""Command-line pipeline: generate data, train, predict, evaluate, serve.

Every command prints a machine-readable JSON summary on success. Exit
codes: 0 success, 2 bad configuration, 3 data error, 4 model mismatch.
All randomness flows from --seed flags; outputs carry no timestamps, so
a fixed seed reproduces byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments
from .model import (
    ModelMismatchError,
    TrainConfig,
    arrange_new_scene,
    encode_user,
    infer_mean,
    load_model,
    place_missing_object,
    reconstruct_scene,
    save_model,
    train,
)
from .scenes import DataError, load_dataset, save_dataset, scene_from_json
from .semantics import OovError, TableFormatError, load_table
from .synth import TEMPLATES, classify_grouping, classify_handedness, generate_dataset

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_MODEL = 4


class ConfigError(ValueError):
    pass


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _write_json(path: str, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True))


def _load_scenes(path: str, registry) -> list:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read scenes file {path}: {exc}") from exc
    entries = payload["scenes"] if isinstance(payload, dict) else payload
    return [scene_from_json(s, registry) for s in entries]


# -- commands -------------------------------------------------------------------


def cmd_gen(args) -> dict:
    mix = json.loads(args.mix) if args.mix else None
    templates = args.templates.split(",") if args.templates else list(TEMPLATES)
    total = args.n_train + args.n_test
    ds, _ = generate_dataset(total, args.seed, mix=mix, templates=templates,
                             include_laptop=args.include_laptop)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_ds, test_ds = ds.split_users(args.n_test)
    save_dataset(train_ds, out / "train.json")
    save_dataset(test_ds, out / "test.json")
    return {"command": "gen", "train": str(out / "train.json"),
            "test": str(out / "test.json"), "n_train": args.n_train,
            "n_test": args.n_test, "seed": args.seed, "templates": templates}


PRESETS = {
    "abstract": lambda: TrainConfig.abstract_profile(),
    "real": lambda: TrainConfig.real_profile(),
    "separability": lambda: experiments.SEPARABILITY_CFG,
    "missing": lambda: experiments.MISSING_OBJECT_CFG,
    "transfer": lambda: experiments.TRANSFER_CFG,
    "unseen": lambda: experiments.UNSEEN_OBJECT_CFG,
}

_CFG_OVERRIDES = ("epochs", "lr", "beta", "batch_users", "d_u", "seed",
                  "semantic_mode", "node_mask_rate", "scene_mask_rate",
                  "graph_dim", "beta_warmup_epochs")


def _build_config(args) -> TrainConfig:
    if args.preset and args.preset not in PRESETS:
        raise ConfigError(f"unknown preset {args.preset!r}")
    cfg = PRESETS[args.preset]() if args.preset else TrainConfig()
    overrides = {k: getattr(args, k) for k in _CFG_OVERRIDES
                 if getattr(args, k, None) is not None}
    return replace(cfg, **overrides)


def cmd_train(args) -> dict:
    ds = load_dataset(args.dataset)
    if args.templates:
        ds = ds.filter_templates(args.templates.split(","))
    cfg = _build_config(args)
    table = load_table(args.table) if args.table else None
    progress = None
    if not args.quiet:
        def progress(epoch, loss, lr):
            if (epoch + 1) % 100 == 0:
                print(f"epoch {epoch + 1}/{cfg.epochs} loss {loss:.5f} lr {lr:.4f}",
                      file=sys.stderr)
    model = train(ds, cfg, table=table, progress=progress)
    save_model(model, args.out)
    return {"command": "train", "model": args.out,
            "epochs": cfg.epochs, "final_loss": model.loss_history[-1],
            "n_users": len(ds.users), "templates": sorted(ds.registry)}


def cmd_reconstruct(args) -> dict:
    model = load_model(args.model)
    scenes = _load_scenes(args.scenes, model.registry)
    positions = reconstruct_scene(model, scenes, args.template)
    result = {"command": "reconstruct", "template": args.template,
              "names": model.registry[args.template].object_names,
              "positions": positions.tolist()}
    if args.out:
        _write_json(args.out, result)
        result["out"] = args.out
    return result


def cmd_place(args) -> dict:
    model = load_model(args.model)
    scenes = _load_scenes(args.scenes, model.registry)
    position = place_missing_object(model, scenes, args.mask_index,
                                    scene_index=args.scene_index)
    scene = scenes[args.scene_index]
    result = {"command": "place", "template": scene.template,
              "object": scene.objects[args.mask_index].name,
              "mask_index": args.mask_index, "position": position.tolist()}
    if args.out:
        _write_json(args.out, result)
        result["out"] = args.out
    return result


def cmd_arrange(args) -> dict:
    model = load_model(args.model)
    scenes = _load_scenes(args.scenes, model.registry)
    positions = arrange_new_scene(model, scenes, args.template)
    result = {"command": "arrange", "template": args.template,
              "names": model.registry[args.template].object_names,
              "positions": positions.tolist()}
    if args.out:
        _write_json(args.out, result)
        result["out"] = args.out
    return result


def cmd_eval(args) -> dict:
    model = load_model(args.model) if args.model else None
    kwargs = {"dataset_seed": args.dataset_seed, "model": model}
    if args.task == "separability":
        if args.n_train:
            kwargs["n_users"] = args.n_train + args.n_test
            kwargs["n_test"] = args.n_test
        report = experiments.run_separability(**kwargs)
    elif args.task == "missing":
        report = experiments.run_missing_object(
            n_train=args.n_train or 48, n_test=args.n_test,
            objects_per_user=args.objects_per_user, **kwargs)
    elif args.task == "denoising":
        if model is None:
            raise ConfigError("denoising evaluation needs --model")
        report = experiments.run_denoising(model, n_test=args.n_test,
                                           dataset_seed=args.dataset_seed)
    elif args.task == "reconstruct":
        methods = (args.methods.split(",") if args.methods
                   else list(experiments.RECONSTRUCTION_METHODS))
        mix = json.loads(args.mix) if args.mix else None
        report = experiments.run_reconstruction(
            n_train=args.n_train or 48, n_test=args.n_test,
            methods=methods, mix=mix, **kwargs)
    elif args.task == "transfer":
        report = experiments.run_transfer(n_train=args.n_train or 48,
                                          n_test=args.n_test, **kwargs)
    elif args.task == "unseen":
        report = experiments.run_unseen_object(n_train=args.n_train or 48,
                                               n_test=args.n_test, **kwargs)
    else:
        raise ConfigError(f"unknown task {args.task!r}")
    report.pop("model", None)
    if args.out:
        _write_json(args.out, report)
        report["out"] = args.out
    report["command"] = "eval"
    return report


def cmd_export_latents(args) -> dict:
    model = load_model(args.model)
    ds = load_dataset(args.dataset)
    rows = []
    for user in ds.users:
        post = encode_user(model, user.scenes)
        row = {"id": user.user_id, "mu": infer_mean(post).tolist(),
               "logvar": post.logvar.data.reshape(-1).tolist()}
        for scene in user.scenes:
            try:
                if scene.template in ("dining", "office"):
                    row["handedness"] = classify_handedness(scene)
                elif scene.template.startswith("abstract"):
                    row["grouping"] = classify_grouping(scene)
            except ValueError:
                pass
        rows.append(row)
    payload = {"schema_version": 1, "kind": "latents", "users": rows}
    _write_json(args.out, payload)
    return {"command": "export_latents", "out": args.out, "n_users": len(rows)}


def cmd_serve(args) -> dict:
    import uvicorn

    from .service import make_app

    model = load_model(args.model)
    latents = json.loads(Path(args.latents).read_text()) if args.latents else None
    dataset = load_dataset(args.dataset) if args.dataset else None
    app = make_app(model, latents=latents, train_dataset=dataset)
    _emit({"command": "serve", "port": args.port, "model": args.model})
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return {}


# -- wiring ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tidylearn",
                                description="spatial preference learning pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic user dataset")
    g.add_argument("--out-dir", required=True)
    g.add_argument("--n-train", type=int, default=67)
    g.add_argument("--n-test", type=int, default=8)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--templates", default=None,
                   help="comma-separated template ids (default: all four)")
    g.add_argument("--mix", default=None, help="JSON preference mix settings")
    g.add_argument("--include-laptop", action="store_true")
    g.set_defaults(fn=cmd_gen)

    t = sub.add_parser("train", help="train a preference model")
    t.add_argument("--dataset", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--preset", default=None, choices=sorted(PRESETS))
    t.add_argument("--templates", default=None)
    t.add_argument("--table", default=None, help="embedding table path")
    t.add_argument("--quiet", action="store_true")
    for flag, typ in (("epochs", int), ("lr", float), ("beta", float),
                      ("batch-users", int), ("d-u", int), ("seed", int),
                      ("graph-dim", int), ("beta-warmup-epochs", int),
                      ("node-mask-rate", float), ("scene-mask-rate", float)):
        t.add_argument(f"--{flag}", type=typ, default=None)
    t.add_argument("--semantic-mode", default=None,
                   choices=["onehot", "features", "word"])
    t.set_defaults(fn=cmd_train)

    r = sub.add_parser("reconstruct", help="re-tidy a known scene for a user")
    r.add_argument("--model", required=True)
    r.add_argument("--scenes", required=True)
    r.add_argument("--template", required=True)
    r.add_argument("--out", default=None)
    r.set_defaults(fn=cmd_reconstruct)

    pl = sub.add_parser("place", help="predict one withheld object position")
    pl.add_argument("--model", required=True)
    pl.add_argument("--scenes", required=True)
    pl.add_argument("--mask-index", type=int, required=True)
    pl.add_argument("--scene-index", type=int, default=0)
    pl.add_argument("--out", default=None)
    pl.set_defaults(fn=cmd_place)

    a = sub.add_parser("arrange", help="arrange a template the user never did")
    a.add_argument("--model", required=True)
    a.add_argument("--scenes", required=True)
    a.add_argument("--template", required=True)
    a.add_argument("--out", default=None)
    a.set_defaults(fn=cmd_arrange)

    e = sub.add_parser("eval", help="run a benchmark experiment")
    e.add_argument("--task", required=True,
                   choices=["separability", "missing", "denoising",
                            "reconstruct", "transfer", "unseen"])
    e.add_argument("--model", default=None)
    e.add_argument("--n-train", type=int, default=None)
    e.add_argument("--n-test", type=int, default=8)
    e.add_argument("--dataset-seed", type=int, default=experiments.DATASET_SEED)
    e.add_argument("--objects-per-user", default="one", choices=["one", "all"])
    e.add_argument("--methods", default=None,
                   help="comma list for --task reconstruct "
                        "(neatnet,no_prefs,positive_example,random_user,"
                        "mean_position,pose_graph)")
    e.add_argument("--mix", default=None, help="JSON preference mix settings")
    e.add_argument("--out", default=None)
    e.set_defaults(fn=cmd_eval)

    x = sub.add_parser("export-latents", help="write per-user latent means")
    x.add_argument("--model", required=True)
    x.add_argument("--dataset", required=True)
    x.add_argument("--out", required=True)
    x.set_defaults(fn=cmd_export_latents)

    s = sub.add_parser("serve", help="HTTP inference service")
    s.add_argument("--model", required=True)
    s.add_argument("--latents", default=None)
    s.add_argument("--dataset", default=None,
                   help="training dataset backing the baseline endpoint")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8008)
    s.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        result = args.fn(args)
    except ModelMismatchError as exc:
        print(json.dumps({"error": str(exc), "kind": "model"}), file=sys.stderr)
        return EXIT_MODEL
    except (DataError, OovError, TableFormatError, FileNotFoundError) as exc:
        print(json.dumps({"error": str(exc), "kind": "data"}), file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, ValueError) as exc:
        print(json.dumps({"error": str(exc), "kind": "config"}), file=sys.stderr)
        return EXIT_CONFIG
    if result:
        _emit(result)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
