"""Command-line interface.

Exit codes: 0 success, 1 runtime failure, 2 invalid input or configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import io as lio
from .attribution import DEFAULT_EPSILON, DEFAULT_N_QUAD, impact_measure, pair_rows, projected_jacobian, row_labels
from .errors import InputError, LatentAttrError, ShapeError
from .features import RawSeries, augment, fill_missing, fit_minmax, minmax_shift
from .heatmap import (
    DEFAULT_N_BASELINES,
    NEGATIVE,
    POSITIVE,
    SelectionParams,
    balanced_subset,
    default_baselines,
    generate_heatmaps,
)
from .latent_rank import ReadoutSpec, explanation_chain, rank_latents
from .render import render_heatmap_svg
from .samples import Dataset, TimeSeriesSample
from .synth import contiguous_subsets, make_block_model, make_dataset, make_ncde_model, recovery_score

SHORT = {POSITIVE: "pos", NEGATIVE: "neg"}


def _selection_args(p):
    p.add_argument("--model", required=True, help="model weight file (mlp or ncde_field)")
    p.add_argument("--data", required=True, help="data CSV: sample_id,time,label,features...")
    p.add_argument("--baselines", help="baseline CSV; default is a balanced draw of held-out samples")
    p.add_argument("--n-baselines", type=int, default=DEFAULT_N_BASELINES)
    p.add_argument("--m", type=int, default=64, help="balanced subset size")
    p.add_argument("--k", type=int, default=5, help="dissimilar samples per baseline")
    p.add_argument("--l", type=int, default=3, help="top features per latent row")
    p.add_argument("--h", type=int, default=None, help="latent rows processed (default: all)")
    p.add_argument("--n-quad", type=int, default=DEFAULT_N_QUAD)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--subsets", help="JSON list of true feature subsets; writes recovery.csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latentattr", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value file mirroring the flags (flags win)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic dataset and ground-truth models")
    p.add_argument("--kind", choices=["block", "ncde"], default="block")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--steps", type=int, default=6, help="time steps per sample")
    p.add_argument("--features", type=int, default=12)
    p.add_argument("--states", type=int, default=4)
    p.add_argument("--subset-size", type=int, default=3)
    p.add_argument("--activity", type=float, default=0.35)
    p.add_argument("--max-count", type=int, default=4)
    p.add_argument("--normalize", action="store_true", help="min-max shift features to [1, 2]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("augment", help="zero-fill, optionally normalize, and add cumulative features")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--stats", help="normalize with min/max from this stats file")
    g.add_argument("--fit-stats", help="fit min/max on this data, write them here, and normalize")

    p = sub.add_parser("attribute", help="integrated Jacobian and impacts for one sample pair")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--test", required=True, help="sample_id of the test sample")
    p.add_argument("--baseline", required=True, help="sample_id of the baseline sample")
    p.add_argument("--n-quad", type=int, default=DEFAULT_N_QUAD)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--out", required=True)

    p = sub.add_parser("heatmap", help="feature heat maps of latent states")
    _selection_args(p)
    p.add_argument("--direction", choices=["positive", "negative", "both"], default="both")
    p.add_argument("--out", required=True)

    p = sub.add_parser("rank", help="rank latent rows by influence on the readout")
    p.add_argument("--model", required=True)
    p.add_argument("--readout", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=["linear", "permutation"], default="linear")
    p.add_argument("--n-permutations", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("explain", help="output -> latent rows -> features explanation chain")
    _selection_args(p)
    p.add_argument("--readout", required=True)
    p.add_argument("--top-n", type=int, default=10)
    p.add_argument("--method", choices=["linear", "permutation"], default="linear")
    p.add_argument("--n-permutations", type=int, default=10)
    p.add_argument("--out", required=True)

    p = sub.add_parser("render", help="render a heat-map CSV as SVG")
    p.add_argument("--heatmap", required=True)
    p.add_argument("--direction", choices=["positive", "negative"], default="positive")
    p.add_argument("--out", required=True)
    return parser


def _config_and_command(argv, parser):
    """Locate --config and the subcommand without enforcing required flags."""
    commands = parser._subparsers._group_actions[0].choices
    config_path = command = None
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif arg.startswith("--config="):
            config_path = arg.split("=", 1)[1]
        elif command is None and arg in commands:
            command = arg
    if command is None:
        config_path = None
    return config_path, command


def _strip_config(argv):
    out, skip = [], False
    for arg in argv:
        if skip:
            skip = False
        elif arg == "--config":
            skip = True
        elif not arg.startswith("--config="):
            out.append(arg)
    return out


def _parse(argv):
    parser = build_parser()
    config_path, command = _config_and_command(argv, parser)
    if config_path:
        config = lio.read_config(config_path)
        subparser = parser._subparsers._group_actions[0].choices[command]
        known = {a.dest for a in subparser._actions}
        unknown = sorted(set(config) - known)
        if unknown:
            raise InputError(f"{config_path}: unknown config key(s) {', '.join(unknown)}")
        flags = {a.dest: a for a in subparser._actions}
        for key, value in config.items():
            action = flags[key]
            if isinstance(action, argparse._StoreTrueAction):
                subparser.set_defaults(**{key: value.lower() in ("1", "true", "yes")})
            else:
                subparser.set_defaults(**{key: value})
            action.required = False
    return parser.parse_args(_strip_config(argv))


# -- helpers ----------------------------------------------------------------

def _check_features(model, dataset):
    if model.n_features != dataset.n_features:
        raise ShapeError(f"model expects {model.n_features} features, data has {dataset.n_features}")


def _baselines(args, dataset, params):
    if args.baselines:
        base = lio.read_dataset(args.baselines)
        if base.feature_names != dataset.feature_names:
            raise InputError("baseline file feature columns differ from the data file")
        return base.samples
    sub = balanced_subset(dataset.labels, params.m, args.seed)
    return default_baselines(dataset, sub, args.n_baselines, args.seed)


def _params(args):
    return SelectionParams(args.m, args.k, args.l, args.h, args.n_quad, args.epsilon)


def _write_svg(hm, path):
    Path(path).write_text(render_heatmap_svg(hm))


def _write_recovery(args, maps, n_steps, out):
    subsets = json.loads(Path(args.subsets).read_text())
    with (out / "recovery.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "direction", "recovery"])
        for d, hm in maps.items():
            for (s, n), score in zip(hm.row_labels, recovery_score(hm.counts, subsets, n_steps)):
                w.writerow([lio.row_label(s, n), d, repr(float(score))])


def _write_guarded(maps, out):
    with (out / "guarded.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["baseline_index", "subset_index", "row"])
        for g in next(iter(maps.values())).guarded:
            w.writerow(g)


# -- commands ---------------------------------------------------------------

def cmd_synth(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = make_dataset(args.n, args.steps, args.features, args.seed, args.activity, args.max_count)
    if args.normalize:
        stats = fit_minmax([s.values for s in ds.samples])
        ds = Dataset([TimeSeriesSample(s.sample_id, s.times, minmax_shift(s.values, stats), s.label)
                      for s in ds.samples], ds.feature_names)
        lio.save_stats(stats, ds.feature_names, out / "stats.json")
    if args.kind == "block":
        subsets = contiguous_subsets(args.features, args.states, args.subset_size)
        bm = make_block_model(args.features, args.states, subsets, args.seed)
        lio.save_model(bm.mlp, out / "model.json")
        (out / "subsets.json").write_text(json.dumps(subsets) + "\n")
    else:
        lio.save_model(make_ncde_model(args.features, args.states, args.seed), out / "model.json")
    rng = np.random.default_rng(args.seed)
    readout = ReadoutSpec(np.round(rng.uniform(-1, 1, args.states * args.steps), 6), 0.0)
    lio.save_model(readout, out / "readout.json")
    lio.write_dataset(ds, out / "data.csv")
    return 0


def cmd_augment(args):
    ds = lio.read_dataset(args.data, fill_missing=False)
    raws = [fill_missing(RawSeries(s.times, s.values, s.mask if s.mask is not None else np.isnan(s.values),
                                   ds.feature_names)) for s in ds.samples]
    if args.fit_stats:
        stats = fit_minmax([r.values for r in raws])
        lio.save_stats(stats, ds.feature_names, args.fit_stats)
    elif args.stats:
        stats = lio.load_stats(args.stats)
        if list(stats.feature_names) != list(ds.feature_names):
            raise InputError("stats file features differ from the data columns")
    else:
        stats = None
    samples, names = [], None
    for s, raw in zip(ds.samples, raws):
        if stats is not None:
            raw = RawSeries(raw.times, minmax_shift(raw.values, stats), raw.missing_mask, raw.feature_names)
        aug = augment(raw)
        names = list(aug.feature_names)
        samples.append(TimeSeriesSample(s.sample_id, s.times, aug.values, s.label))
    lio.write_dataset(Dataset(samples, names), args.out)
    return 0


def cmd_attribute(args):
    model = lio.load_latent_model(args.model)
    ds = lio.read_dataset(args.data)
    _check_features(model, ds)
    test, base = ds.by_id(args.test), ds.by_id(args.baseline)
    pa = pair_rows(model, test, base, args.n_quad)
    im = impact_measure(pa, args.epsilon)
    lio.write_attribution_csv(pa, im, row_labels(model.n_states, test.n_steps), ds.feature_names, args.out)
    proj = projected_jacobian(pa)
    for name, v in zip(ds.feature_names, proj):
        print(f"{name}\t{float(v)!r}")
    return 0


def cmd_heatmap(args):
    model = lio.load_latent_model(args.model)
    ds = lio.read_dataset(args.data)
    _check_features(model, ds)
    params = _params(args)
    baselines = _baselines(args, ds, params)
    dirs = [POSITIVE, NEGATIVE] if args.direction == "both" else [args.direction]
    maps = generate_heatmaps(dirs, ds, model, baselines, params, args.seed, args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for d, hm in maps.items():
        lio.write_heatmap_csv(hm, out / f"heatmap_{SHORT[d]}.csv")
        _write_svg(hm, out / f"heatmap_{SHORT[d]}.svg")
    _write_guarded(maps, out)
    if args.subsets:
        _write_recovery(args, maps, ds[0].n_steps, out)
    return 0


def _write_ranking(ranking, method, path):
    label = "readout_attribution" if method == "linear" else "permutation_importance"
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "row", "state", "time", label, "sign"])
        for i, r in enumerate(ranking):
            w.writerow([i, lio.row_label(r.state, r.time), r.state, r.time, repr(r.score), r.sign])


def _load_readout(path):
    readout = lio.load_model(path)
    if not isinstance(readout, ReadoutSpec):
        raise InputError(f"{path}: expected a 'readout' model")
    return readout


def cmd_rank(args):
    model = lio.load_latent_model(args.model)
    readout = _load_readout(args.readout)
    ds = lio.read_dataset(args.data)
    _check_features(model, ds)
    from .attribution import sample_latents

    Z = np.array([sample_latents(model, s) for s in ds.samples])
    ranking = rank_latents(readout, Z, model.n_states, ds[0].n_steps, args.method,
                           n_permutations=args.n_permutations, seed=args.seed)
    _write_ranking(ranking, args.method, args.out)
    return 0


def cmd_explain(args):
    model = lio.load_latent_model(args.model)
    readout = _load_readout(args.readout)
    ds = lio.read_dataset(args.data)
    _check_features(model, ds)
    params = _params(args)
    baselines = _baselines(args, ds, params)
    report = explanation_chain(model, readout, ds, baselines, params, args.top_n, args.seed,
                               args.workers, args.method, args.n_permutations)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_ranking(report.ranking, args.method, out / "ranking.csv")
    names = ds.feature_names
    with (out / "top_features.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "direction", "position", "feature_index", "feature_name"])
        for (r, d), feats in report.top_features.items():
            label = lio.row_label(r // ds[0].n_steps, r % ds[0].n_steps)
            for pos, f in enumerate(feats):
                w.writerow([label, d, pos, f, names[f]])
    for d, hm in report.heatmaps.items():
        lio.write_heatmap_csv(hm, out / f"heatmap_{SHORT[d]}_top.csv")
        _write_svg(hm, out / f"heatmap_{SHORT[d]}_top.svg")
    T = ds[0].n_steps
    for (r, d), (ids, table) in report.scatter.items():
        a, b = report.top_features[(r, d)][:2]
        label = f"z{r // T}_t{r % T}"
        with (out / f"scatter_{SHORT[d]}_{label}.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample_id", names[a], names[b], lio.row_label(r // T, r % T)])
            for sid, row in zip(ids, table):
                w.writerow([sid] + [repr(float(v)) for v in row])
    if args.subsets and report.heatmaps:
        full = SelectionParams(params.m, params.k, params.l, None, params.n_quad, params.epsilon)
        maps = generate_heatmaps([POSITIVE, NEGATIVE], ds, model, baselines, full, args.seed, args.workers)
        _write_recovery(args, maps, T, out)
    return 0


def cmd_render(args):
    hm = lio.read_heatmap_csv(args.heatmap, args.direction)
    if hm.counts.size == 0:
        raise InputError(f"{args.heatmap}: heat map is empty")
    Path(args.out).write_text(render_heatmap_svg(hm))
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "augment": cmd_augment,
    "attribute": cmd_attribute,
    "heatmap": cmd_heatmap,
    "rank": cmd_rank,
    "explain": cmd_explain,
    "render": cmd_render,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _parse(argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0) if exc.code in (0, None) else 2
    except (InputError, ShapeError, json.JSONDecodeError) as exc:
        print(f"latentattr: error: {exc}", file=sys.stderr)
        return 2
    except (LatentAttrError, FloatingPointError, OSError) as exc:
        print(f"latentattr: runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
