"""Command-line front end.

Exit codes: 0 success, 1 validation or configuration error, 2 IO or file
format error.  Stdout carries only machine-parseable results; everything
meant for humans goes to stderr.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .clustering import ClusterConfig
from .errors import (
    ConfigError,
    DataError,
    DegenerateDistributionError,
    DispmixError,
    EmptyMixtureError,
    FormatError,
    InvalidParameterError,
    UndefinedMetricError,
)
from .estimation import ESTIMATORS, infer_volume
from .io_formats import (
    PixelModes,
    read_pfm,
    read_pgm,
    read_volume,
    write_modes_json,
    write_pfm,
    write_volume,
)
from .metrics import MetricThreshold, end_point_error, outlier_rate
from .modeling import model_ground_truth_volume
from .separation import SeparationConfig, separate_modes
from .synth import PerturbSpec, SceneSpec, block_match, gen_scene, perturb_ensemble
from .types import DiscreteDistribution, DisparityMap, EnsembleVolumes

_VALIDATION_ERRORS = (
    ConfigError,
    DataError,
    DegenerateDistributionError,
    EmptyMixtureError,
    InvalidParameterError,
    UndefinedMetricError,
)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dispmix", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model-gt", parents=[], help="model ground-truth distributions from an ensemble")
    p.add_argument("--ensemble", nargs="+", required=True, metavar="MPV",
                   help="ensemble volume file(s); members concatenate in argument order")
    p.add_argument("--labels", required=True, metavar="PFM")
    p.add_argument("--out", required=True, metavar="MPV",
                   help="modeled volume; a 0/1 validity mask lands next to it as <out>.mask.pfm")
    p.add_argument("--eps", type=float, default=3.0, help="clustering distance threshold (default 3)")
    p.add_argument("--min-pts", type=int, default=2, help="clustering density threshold (default 2)")
    p.add_argument("--epsilon", type=float, default=1e-3, help="mode detection threshold (default 1e-3)")
    p.add_argument("--sigma", type=float, default=1e-3, help="mode descent threshold (default 1e-3)")
    p.add_argument("--label-w", type=float, default=1.0, help="label anchor weight (default 1)")
    p.add_argument("--label-b", type=float, default=0.8, help="label anchor scale (default 0.8)")
    p.add_argument("--modes-json", metavar="PATH", help="write per-pixel mixture diagnostics")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: all cores)")
    p.set_defaults(func=_cmd_model_gt)

    p = sub.add_parser("separate", help="separate and fit modes per pixel")
    p.add_argument("--volume", required=True, metavar="MPV")
    p.add_argument("--out", required=True, metavar="JSON")
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--sigma", type=float, default=1e-3)
    p.set_defaults(func=_cmd_separate)

    p = sub.add_parser("infer", help="estimate a disparity map from a volume")
    p.add_argument("--volume", required=True, metavar="MPV")
    p.add_argument("--estimator", required=True, choices=ESTIMATORS)
    p.add_argument("--out", required=True, metavar="PFM")
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("eval", help="score a disparity map against ground truth")
    p.add_argument("--pred", required=True, metavar="PFM")
    p.add_argument("--gt", required=True, metavar="PFM")
    p.add_argument("--threshold", type=float, required=True, metavar="K")
    p.add_argument("--epe", action="store_true", help="also print the mean absolute error")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic scene and ensemble")
    p.add_argument("--spec", required=True, metavar="CFG", help="key=value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry (repeatable)")
    p.add_argument("--out-truth", required=True, metavar="MPV")
    p.add_argument("--out-labels", required=True, metavar="PFM")
    p.add_argument("--out-ensemble", required=True, metavar="MPV")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("match", help="toy block matcher producing a probability volume")
    p.add_argument("--left", required=True, metavar="PGM")
    p.add_argument("--right", required=True, metavar="PGM")
    p.add_argument("--dmax", type=int, required=True, help="number of disparity candidates")
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--out", required=True, metavar="MPV")
    p.set_defaults(func=_cmd_match)

    return parser


def _read_ensemble(paths) -> EnsembleVolumes:
    members = []
    for path in paths:
        members.extend(read_volume(path).members)
    return EnsembleVolumes(members=tuple(members))


def _cmd_model_gt(args) -> int:
    ensemble = _read_ensemble(args.ensemble)
    labels = read_pfm(args.labels)
    volume, mask, summaries = model_ground_truth_volume(
        ensemble,
        labels,
        SeparationConfig(epsilon=args.epsilon, sigma=args.sigma),
        ClusterConfig(eps=args.eps, min_pts=args.min_pts),
        anchor_w=args.label_w,
        anchor_b=args.label_b,
        with_summaries=args.modes_json is not None,
        workers=args.workers,
    )
    write_volume(args.out, volume)
    mask_map = DisparityMap(values=mask.astype(np.float32), validity=np.ones_like(mask))
    write_pfm(f"{args.out}.mask.pfm", mask_map)
    if args.modes_json is not None:
        pixels = [
            PixelModes(
                y=s.y,
                x=s.x,
                noise_count=s.mixture.noise_count,
                label_cluster=s.mixture.label_cluster_index,
                modes=s.mixture.modes,
            )
            for s in summaries
        ]
        write_modes_json(args.modes_json, volume.height, volume.width, volume.d_range, pixels)
    return 0


def _cmd_separate(args) -> int:
    ensemble = read_volume(args.volume)
    if ensemble.m_count != 1:
        raise DataError(f"separate expects a single-member volume, got M={ensemble.m_count}")
    volume = ensemble.members[0]
    cfg = SeparationConfig(epsilon=args.epsilon, sigma=args.sigma)
    pixels = []
    for y in range(volume.height):
        row = volume.data[y].astype(np.float64)
        for x in range(volume.width):
            modes = separate_modes(DiscreteDistribution(row[x]), cfg)
            pixels.append(PixelModes(y=y, x=x, noise_count=0, label_cluster=None, modes=tuple(modes)))
    write_modes_json(args.out, volume.height, volume.width, volume.d_range, pixels)
    return 0


def _cmd_infer(args) -> int:
    ensemble = read_volume(args.volume)
    if ensemble.m_count != 1:
        raise DataError(f"infer expects a single-member volume, got M={ensemble.m_count}")
    write_pfm(args.out, infer_volume(ensemble.members[0], estimator=args.estimator))
    return 0


def _cmd_eval(args) -> int:
    pred = read_pfm(args.pred)
    gt = read_pfm(args.gt)
    thr = MetricThreshold(k=args.threshold)
    rate = outlier_rate(pred, gt, thr)
    print(f"outliers_gt_{args.threshold:g}px={rate:.4f}")
    if args.epe:
        print(f"epe={end_point_error(pred, gt):.4f}")
    return 0


_SCENE_KEYS = {
    "height": int,
    "width": int,
    "d_range": int,
    "seed": int,
    "region_size": int,
    "k_choices": lambda s: tuple(int(v) for v in s.split(",") if v.strip()),
    "gap_lo": float,
    "gap_hi": float,
    "b_lo": float,
    "b_hi": float,
    "weight_floor": float,
    "center_margin": float,
    "width_gap_div": float,
    "width_border_div": float,
}
_PERTURB_KEYS = {
    "members": int,
    "mu_jitter": float,
    "w_jitter": float,
    "spurious_rate": float,
    "perturb_seed": int,
    "spurious_min_distance": float,
}


def parse_keyvalue_config(text: str) -> dict[str, str]:
    """Parse 'key=value' lines; '#' starts a comment, blank lines are
    skipped, later assignments win."""
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def _build_specs(entries: dict[str, str]) -> tuple[SceneSpec, PerturbSpec]:
    unknown = set(entries) - set(_SCENE_KEYS) - set(_PERTURB_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for required in ("height", "width"):
        if required not in entries:
            raise ConfigError(f"config is missing required key {required!r}")

    def convert(key, conv, value):
        try:
            return conv(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r}") from exc

    scene_kwargs = {}
    gap = [8.0, 32.0]
    widths = [0.5, 3.0]
    for key, conv in _SCENE_KEYS.items():
        if key not in entries:
            continue
        value = convert(key, conv, entries[key])
        if key == "gap_lo":
            gap[0] = value
        elif key == "gap_hi":
            gap[1] = value
        elif key == "b_lo":
            widths[0] = value
        elif key == "b_hi":
            widths[1] = value
        else:
            scene_kwargs[key] = value
    scene_kwargs["gap_range"] = (gap[0], gap[1])
    scene_kwargs["b_range"] = (widths[0], widths[1])

    perturb_kwargs = {}
    for key, conv in _PERTURB_KEYS.items():
        if key not in entries:
            continue
        value = convert(key, conv, entries[key])
        perturb_kwargs["seed" if key == "perturb_seed" else key] = value
    return SceneSpec(**scene_kwargs), PerturbSpec(**perturb_kwargs)


def _cmd_synth(args) -> int:
    with open(args.spec, "r", encoding="utf-8") as f:
        entries = parse_keyvalue_config(f.read())
    for override in args.set:
        if "=" not in override:
            raise ConfigError(f"--set expects KEY=VALUE, got {override!r}")
        key, value = override.split("=", 1)
        entries[key.strip()] = value.strip()
    scene_spec, perturb_spec = _build_specs(entries)
    scene = gen_scene(scene_spec)
    ensemble = perturb_ensemble(scene, perturb_spec)
    write_volume(args.out_truth, scene.truth)
    write_pfm(args.out_labels, scene.labels)
    write_volume(args.out_ensemble, ensemble)
    return 0


def _cmd_match(args) -> int:
    left = read_pgm(args.left)
    right = read_pgm(args.right)
    volume = block_match(left, right, d_range=args.dmax, window=args.window, tau=args.tau)
    write_volume(args.out, volume)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DispmixError as exc:  # anything else from the library
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
