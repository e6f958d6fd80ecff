"""Command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""
import argparse
from concurrent.futures import ThreadPoolExecutor
import itertools
import logging
from pathlib import Path
import sys

import numpy as np

from ._validation import ConfigError
from .acuity import AcuityParams
from .certify import (
    ConstantClassifier,
    CertifyParams,
    LinearClassifier,
    NearestCentroidClassifier,
    RBlurClassifier,
    accuracy_at_radii,
    certify_dataset,
    radius_ceiling,
)
from .fixation import ScanpathError, fixation_grid, fixations_for_count, five_fixations, sample_scanpath
from .foveate import RBlur, RBlurConfig, rblur
from .geometry import FixationPoint, eccentricity_map
from .io import (
    DataError,
    format_config,
    read_config,
    read_heatmap,
    read_image,
    read_manifest,
    write_image,
)

log = logging.getLogger("rblur")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

# option name -> (type, default); shared by every command that builds a foveation config
RBLUR_OPTIONS = {
    "visual_field": (int, 224),
    "sigma_color": (float, 0.12),
    "sigma_gray": (float, 0.09),
    "alpha": (float, 2.5),
    "p_max": (float, 0.12),
    "beta": (float, 0.05),
    "noise_scale": (float, 0.125),
    "viewing_distance": (int, 3),
    "n_bins": (int, 24),
    "merge_threshold": (int, 2),
    "seed": (int, 0),
}
# flag names that differ from the config key (certify's --alpha is its failure probability)
FLAG_DEST = {"alpha": "acuity_alpha"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _g(x):
    return f"{x:.6g}"


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_rblur_options(parser):
    group = parser.add_argument_group("foveation parameters (override --config)")
    group.add_argument("--config", type=Path, help="flat key=value file of foveation parameters")
    for name, (typ, default) in RBLUR_OPTIONS.items():
        dest = FLAG_DEST.get(name, name)
        group.add_argument("--" + dest.replace("_", "-"), dest=dest, type=typ, default=None,
                           help=f"default {default} (config key {name})")


def _effective_options(args):
    """Hard defaults, then the config file, then explicit flags."""
    values = {name: default for name, (_, default) in RBLUR_OPTIONS.items()}
    if getattr(args, "config", None) is not None:
        try:
            from_file = read_config(args.config)
        except OSError as exc:
            raise DataError(f"{args.config}: cannot read config ({exc})") from exc
        for key, raw in from_file.items():
            if key not in RBLUR_OPTIONS:
                raise UsageError(f"{args.config}: unknown config key {key!r}")
            try:
                values[key] = RBLUR_OPTIONS[key][0](raw)
            except ValueError:
                raise UsageError(f"{args.config}: bad value for {key}: {raw!r}") from None
    for key in RBLUR_OPTIONS:
        flag = getattr(args, FLAG_DEST.get(key, key), None)
        if flag is not None:
            values[key] = flag
    return values


def _make_config(values):
    try:
        params = AcuityParams(values["sigma_color"], values["sigma_gray"], values["alpha"],
                              values["p_max"], values["beta"])
        cfg = RBlurConfig(params, values["visual_field"], values["noise_scale"],
                          values["viewing_distance"], values["n_bins"], values["merge_threshold"],
                          values["seed"])
        cfg.table()  # surface configuration errors before any work starts
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _parse_fixations(spec, cfg, seed):
    field = cfg.field
    if spec == "center":
        c = field.width // 2
        return [FixationPoint(c, c)]
    if spec == "five":
        return five_fixations(field)
    if spec.startswith("grid:"):
        try:
            side = int(spec[5:])
        except ValueError:
            raise UsageError(f"bad grid size in fixation spec {spec!r}") from None
        return fixation_grid(field, side)
    if spec.startswith("scanpath:"):
        target, _, count = spec[9:].rpartition(":")
        if not target or not count.isdigit():
            target, count = spec[9:], "5"
        heatmap = read_heatmap(target)
        return sample_scanpath(heatmap, int(count), mask_sigma=field.width / 8,
                               rng=np.random.default_rng(seed))
    try:
        x, y = (int(v) for v in spec.split(","))
    except ValueError:
        raise UsageError(
            f"fixation spec must be 'x,y', center, five, grid:N or scanpath:FILE[:N]; got {spec!r}"
        ) from None
    return [FixationPoint(x, y)]


def _check_fixations(points, cfg):
    for p in points:
        if not cfg.field.contains(p.x, p.y):
            raise UsageError(f"fixation ({p.x}, {p.y}) lies outside the visual field")


def cmd_apply(args):
    values = _effective_options(args)
    cfg = _make_config(values)
    fixations = _parse_fixations(args.fixation, cfg, cfg.seed)
    _check_fixations(fixations, cfg)
    args.output.mkdir(parents=True, exist_ok=True)
    sidecar = format_config({**values, "fixation": args.fixation})

    def work(item):
        index, path = item
        try:
            img = read_image(path)
            written = []
            for f in fixations:
                # one noise draw per image, shared by all of its fixations
                out = rblur(img, f, cfg, np.random.default_rng([cfg.seed, index]))
                target = args.output / f"{Path(path).stem}_x{f.x}_y{f.y}.{args.format}"
                write_image(target, out)
                target.with_name(target.name + ".cfg").write_text(sidecar, encoding="utf-8")
                written.append(target)
            return written, None
        except (DataError, ValueError) as exc:
            return [], f"{path}: {exc}"

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        results = list(pool.map(work, enumerate(args.inputs)))
    failed = 0
    for written, error in results:
        if error:
            failed += 1
            print(f"error: {error}", file=sys.stderr)
        for target in written:
            log.info("wrote %s", target)
    return EXIT_DATA if failed else EXIT_OK


def _sigma_image(table, cfg):
    c = cfg.visual_field // 2
    emap = eccentricity_map(FixationPoint(c, c), cfg.field)
    top = max(cfg.params.beta * cfg.visual_field, 1e-12)
    color = table.sigma_color[emap.distance] / top
    gray = table.sigma_gray[emap.distance] / top
    gap = np.ones((color.shape[0], 4))
    return np.hstack([color, gap, gray])


def cmd_acuity_map(args):
    values = _effective_options(args)
    cfg = _make_config(values)
    table = cfg.table()
    text = table.to_text()
    if args.output is None:
        sys.stdout.write(text)
    else:
        args.output.write_text(text, encoding="utf-8")
    if args.image is not None:
        write_image(args.image, _sigma_image(table, cfg))
    p = table.bins("color")
    print(f"# color bins={len(p)} max_sigma_color={_g(table.sigma_color.max())} "
          f"max_sigma_gray={_g(table.sigma_gray.max())} in_focus_width={table.in_focus_width}",
          file=sys.stderr)
    return EXIT_OK


def cmd_scanpath(args):
    heatmap = read_heatmap(args.heatmap)
    mask_sigma = args.mask_sigma if args.mask_sigma is not None else args.visual_field / 8
    try:
        points = sample_scanpath(heatmap, args.n, mask_sigma, np.random.default_rng(args.seed),
                                 mode=args.mode)
    except ScanpathError as exc:
        for p in exc.points:
            print(f"{p.x} {p.y}")
        raise DataError(str(exc)) from exc
    for p in points:
        print(f"{p.x} {p.y}")
    return EXIT_OK


def _load_classifier(spec):
    kind, _, arg = spec.partition(":")
    if kind == "constant":
        try:
            return ConstantClassifier(int(arg or 0))
        except ValueError:
            raise UsageError(f"constant classifier needs an integer label, got {arg!r}") from None
    if kind in ("linear", "centroid"):
        if not arg:
            raise UsageError(f"{kind} classifier needs a parameter file: {kind}:PATH.npz")
        try:
            with np.load(arg) as data:
                if kind == "linear":
                    return LinearClassifier(data["weights"], data["bias"] if "bias" in data else None)
                return NearestCentroidClassifier(data["centroids"])
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(f"{arg}: cannot load {kind} parameters ({exc})") from exc
    raise UsageError(f"unknown classifier {spec!r}; use constant:LABEL, linear:FILE or centroid:FILE")


def _wrap(clf, fixation_mode, cfg):
    if fixation_mode == "none":
        return clf
    rb = RBlur(visual_field=cfg.visual_field, sigma_color=cfg.params.sigma_color,
               sigma_gray=cfg.params.sigma_gray, alpha=cfg.params.alpha, p_max=cfg.params.p_max,
               beta=cfg.params.beta, noise_scale=cfg.noise_scale,
               viewing_distance=cfg.viewing_distance, n_bins=cfg.n_bins,
               merge_threshold=cfg.merge_threshold, noise="shared", random_state=cfg.seed).fit()
    if fixation_mode == "center":
        points = fixations_for_count(cfg.field, 1)
    elif fixation_mode == "five":
        points = five_fixations(cfg.field)
    else:
        points = fixations_for_count(cfg.field, int(fixation_mode))
    return RBlurClassifier(clf, rb, tuple(points))


def _load_dataset(manifest):
    entries = read_manifest(manifest)
    return [read_image(p) for p, _ in entries], [label for _, label in entries], entries


def cmd_certify(args):
    values = _effective_options(args)
    cfg = _make_config(values)
    params = CertifyParams(args.sigma, args.n0, args.n, args.alpha, args.batch_size)
    clf = _wrap(_load_classifier(args.classifier), args.rblur, cfg)
    images, labels, entries = _load_dataset(args.manifest)
    results = certify_dataset(clf, images, params, seed=cfg.seed, n_jobs=args.jobs)
    lines = [
        f"# sigma={_g(params.sigma)} n0={params.n0} n={params.n} alpha={_g(params.alpha)} "
        f"classifier={args.classifier} rblur={args.rblur} seed={cfg.seed}",
        "id\tlabel\tprediction\tradius\tp_lower\tcount\tn\tcorrect",
    ]
    for (path, label), res in zip(entries, results):
        lines.append("\t".join([str(path), str(label), str(res.prediction), _g(res.radius),
                                _g(res.p_lower), str(res.count), str(res.n),
                                str(int(res.certified and res.prediction == label))]))
    radii = args.radii
    accs = accuracy_at_radii(results, labels, radii)
    lines.append(f"# radius_ceiling={_g(radius_ceiling(params.sigma, params.n, params.alpha))}")
    for r, acc in zip(radii, accs):
        lines.append(f"# certified_accuracy radius={_g(r)} accuracy={_g(acc)}")
    report = "\n".join(lines) + "\n"
    if args.output is None:
        sys.stdout.write(report)
    else:
        args.output.write_text(report, encoding="utf-8")
    return EXIT_OK


def cmd_sweep(args):
    base = _effective_options(args)
    images, labels, _ = _load_dataset(args.manifest)
    clf = _load_classifier(args.classifier) if args.classifier else None
    header = ["noise_scale", "beta", "viewing_distance", "fixations", "max_sigma_color",
              "in_focus_width", "mean_abs_change", "accuracy"]
    rows = ["\t".join(header)]
    grid = itertools.product(args.noise_scales, args.betas, args.viewing_distances,
                             args.fixation_counts)
    for noise_scale, beta, k, n_fix in grid:
        cfg = _make_config({**base, "noise_scale": noise_scale, "beta": beta, "viewing_distance": k})
        table = cfg.table()
        points = fixations_for_count(cfg.field, n_fix)
        change = []
        for i, img in enumerate(images):
            out = rblur(img, points[0], cfg, np.random.default_rng([cfg.seed, i]))
            change.append(np.mean(np.abs(out - img)))
        acc = "-"
        if clf is not None:
            wrapped = _wrap(clf, str(n_fix), cfg)
            preds = np.array([wrapped.predict(im[np.newaxis])[0] for im in images])
            acc = _g(float(np.mean(preds == np.asarray(labels))))
        rows.append("\t".join([_g(noise_scale), _g(beta), str(k), str(n_fix),
                               _g(table.sigma_color.max()), str(table.in_focus_width),
                               _g(float(np.mean(change))), acc]))
    text = "\n".join(rows) + "\n"
    if args.output is None:
        sys.stdout.write(text)
    else:
        args.output.write_text(text, encoding="utf-8")
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="rblur", description="Foveated blur, scanpaths and certification.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("apply", help="foveate images at one or more fixations")
    p.add_argument("inputs", nargs="+", type=Path, help="input images (PNG, PPM/PGM, .rbf)")
    p.add_argument("-o", "--output", type=Path, required=True, help="output directory")
    p.add_argument("--fixation", default="center",
                   help="x,y | center | five | grid:N | scanpath:HEATMAP[:N] (default center)")
    p.add_argument("--format", choices=("png", "ppm", "pgm", "rbf"), default="png",
                   help="output format (default png)")
    p.add_argument("--jobs", type=int, default=1, help="worker threads (default 1)")
    _add_rblur_options(p)
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("acuity-map", help="dump the quantised acuity table")
    p.add_argument("-o", "--output", type=Path, help="table file (default stdout)")
    p.add_argument("--image", type=Path, help="also write a sigma visualisation image")
    _add_rblur_options(p)
    p.set_defaults(func=cmd_acuity_map)

    p = sub.add_parser("scanpath", help="sample fixations from a heatmap")
    p.add_argument("heatmap", type=Path, help="grayscale heatmap (PNG/PGM/.rbf)")
    p.add_argument("-n", type=int, default=5, help="number of fixations (default 5)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--mask-sigma", type=float, help="masking Gaussian width (default visual field / 8)")
    p.add_argument("--visual-field", type=int, default=224, help="visual field width (default 224)")
    p.add_argument("--mode", choices=("sample", "argmax"), default="sample",
                   help="draw proportionally or take the maximum (default sample)")
    p.set_defaults(func=cmd_scanpath)

    p = sub.add_parser("certify", help="randomised-smoothing certification over a manifest")
    p.add_argument("manifest", type=Path, help="file of 'path<TAB>label' lines")
    p.add_argument("--classifier", required=True,
                   help="constant:LABEL | linear:PARAMS.npz | centroid:PARAMS.npz")
    p.add_argument("--rblur", default="none",
                   help="wrap the classifier with foveation: none | center | five | N fixations")
    p.add_argument("--sigma", type=float, default=0.125, help="certification noise (default 0.125)")
    p.add_argument("--n0", type=int, default=100, help="selection samples (default 100)")
    p.add_argument("--n", type=int, default=100_000, help="estimation samples (default 100000)")
    p.add_argument("--alpha", type=float, default=0.001, help="failure probability (default 0.001)")
    p.add_argument("--batch-size", type=int, default=10_000, help="noise batch size (default 10000)")
    p.add_argument("--radii", type=_float_list, default=[0.0, 0.25, 0.5],
                   help="comma-separated radii for the summary (default 0,0.25,0.5)")
    p.add_argument("--jobs", type=int, default=1, help="worker threads (default 1)")
    p.add_argument("-o", "--output", type=Path, help="report file (default stdout)")
    _add_rblur_options(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("sweep", help="parameter grid over noise, beta, viewing distance, fixations")
    p.add_argument("manifest", type=Path, help="file of 'path<TAB>label' lines")
    p.add_argument("--classifier", help="optional classifier spec for an accuracy column")
    p.add_argument("--noise-scales", type=_float_list, default=[0.0, 0.125],
                   help="comma-separated (default 0,0.125)")
    p.add_argument("--betas", type=_float_list, default=[0.05], help="comma-separated (default 0.05)")
    p.add_argument("--viewing-distances", type=_int_list, default=[3],
                   help="comma-separated (default 3)")
    p.add_argument("--fixation-counts", type=_int_list, default=[1],
                   help="comma-separated (default 1)")
    p.add_argument("-o", "--output", type=Path, help="table file (default stdout)")
    _add_rblur_options(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"rblur: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"rblur: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
