"""
Command-line interface: ``earsift <subcommand> ...``

Subcommands: enroll, verify, segment, extract, evaluate, calibrate,
gen-synth. Exit codes: 0 success / accept, 1 reject, 2 usage, 3 io,
4 data, 5 internal.
"""

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

from .config_utils import GATE_GLOBAL, MODES, PRIOR, Config, config_fingerprint, load_config
from .divergence_utils import report_kl
from .error_utils import ConfigError, EarSiftError, InternalInvariantError, IoFailure
from .evaluation_utils import (
    calibrate_threshold,
    check_disjoint,
    evaluate_dataset,
    format_summary,
    load_manifest,
    run_protocol,
    suggest_tau_kl,
    write_report_csv,
    write_roc_csv,
    write_scores_csv,
    write_summary,
)
from .image_utils import load_image, load_mask, save_label_map
from .logging_utils import verbosity
from .matching_utils import STRATEGIES
from .path_utils import folder_name_ext, make_directory
from .pipeline_utils import analyze_image, build_template, enroll_image, verify_image
from .segmentation_utils import gate_regions, label_map, region_summary
from .sift_utils import write_keypoint_dump
from .synthetic_utils import generate_synthetic_dataset
from .template_utils import load_mixture, load_template, save_mixture, save_template


def _config(args) -> Config:
    overrides = {
        "seed": args.seed,
        "mode": args.mode,
        "match.strategy": args.strategy,
        "match.psi": args.psi,
        "workers": getattr(args, "workers", None),
    }
    return load_config(args.config, overrides)


def _skin_model(args, config: Config):
    if args.skin_model:
        return load_mixture(args.skin_model)
    if config.gate_mode == GATE_GLOBAL:
        raise ConfigError("gate_mode 'global' needs --skin-model")
    return None


def _mask(args):
    return load_mask(args.mask) if args.mask else None


def _subject_id(args, image_path: str) -> str:
    if getattr(args, "subject_id", None):
        return args.subject_id
    _, name, _ = folder_name_ext(image_path)
    return name


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def cmd_enroll(args) -> int:
    config = _config(args)
    image = load_image(args.image)
    enrollment = enroll_image(image, _mask(args), config, _subject_id(args, args.image), _skin_model(args, config))
    template = enrollment.template
    save_template(
        template, args.out, config_fingerprint(config), config.mode, region_summary(enrollment.segmentation)
    )
    print(f"regions kept: {template.k_count}, keypoints: {len(template)}")
    return 0


def cmd_verify(args) -> int:
    config = _config(args)
    reference, meta = load_template(args.template)
    fingerprint = config_fingerprint(config)
    if meta.config_fingerprint != fingerprint:
        logging.warning(
            f"Template was produced with configuration {meta.config_fingerprint}, "
            f"probe uses {fingerprint}"
        )
    outcome = verify_image(
        load_image(args.image), _mask(args), reference, config, mode=meta.mode, skin_model=_skin_model(args, config)
    )
    payload = {
        "subject_id": reference.subject_id,
        "strategy": outcome.result.strategy,
        "match_count": outcome.result.match_count,
        "d_final": outcome.result.d_final,
        "normalized_score": outcome.result.normalized_score,
        "mean_distance": outcome.result.mean_distance,
        "psi": outcome.decision.psi,
        "accept": outcome.decision.accept,
    }
    if outcome.model_kl is not None:
        payload["model_kl"] = report_kl(outcome.model_kl)
    _print_json(payload)
    return 0 if outcome.decision.accept else 1


def cmd_segment(args) -> int:
    config = _config(args)
    image = load_image(args.image)
    analysis = analyze_image(image, _mask(args), config, _subject_id(args, args.image))
    seg = analysis.segmentation
    gate_model = load_mixture(args.skin_model) if args.skin_model else seg.model
    gated = gate_regions(seg, gate_model, config.tau_kl, config.w_min)
    save_label_map(label_map(gated), args.out)

    summary_path = args.summary
    if not summary_path:
        folder, name, _ = folder_name_ext(args.out)
        summary_path = os.path.join(folder, f"{name}.json")
    summary = {"k_effective": gated.k_effective, "regions": region_summary(gated)}
    try:
        with open(summary_path, "wt") as fout:
            json.dump(summary, fout, indent=1, sort_keys=True)
    except OSError as e:
        raise IoFailure(f"Cannot write region summary '{summary_path}': {e}") from e
    if args.model_out:
        save_mixture(seg.model, args.model_out)
    print(f"regions: {gated.k_effective}, kept: {len(gated.kept_regions)}")
    return 0


def cmd_extract(args) -> int:
    config = _config(args)
    image = load_image(args.image)
    analysis = analyze_image(image, _mask(args), config, _subject_id(args, args.image), segment=False)
    enrollment = build_template(analysis, config, mode=PRIOR)
    save_template(enrollment.template, args.out, config_fingerprint(config), PRIOR)
    if args.dump:
        write_keypoint_dump(enrollment.template.keypoints, args.dump)
    print(f"keypoints: {len(enrollment.template)}")
    return 0


def cmd_evaluate(args) -> int:
    config = _config(args)
    dataset = load_manifest(args.manifest)
    score_sets, report = evaluate_dataset(dataset, config)
    out_dir = make_directory(args.out)
    write_scores_csv(score_sets, os.path.join(out_dir, "scores.csv"))
    write_roc_csv(score_sets, os.path.join(out_dir, "roc.csv"))
    write_report_csv(report, os.path.join(out_dir, "report.csv"))
    write_summary(report, os.path.join(out_dir, "summary.txt"), score_sets)
    print(format_summary(report, score_sets), end="")
    return 0


def cmd_calibrate(args) -> int:
    config = _config(args)
    dataset = load_manifest(args.manifest)
    if args.exclude:
        check_disjoint(dataset, load_manifest(args.exclude))
    scores = run_protocol(dataset, config)
    psi, point = calibrate_threshold(scores)
    _print_json(
        {
            "mode": config.mode,
            "strategy": config.match.strategy,
            "psi": psi,
            "accuracy": point.accuracy,
            "fp": point.fp,
            "tn": point.tn,
            "tau_kl": suggest_tau_kl(scores.genuine_kl),
        }
    )
    return 0


def cmd_gen_synth(args) -> int:
    config = _config(args)
    dataset = generate_synthetic_dataset(args.n, args.out, seed=config.seed, n_probes=args.probes)
    print(f"subjects: {len(dataset)}, manifest: {os.path.join(args.out, 'manifest.json')}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="Configuration file (JSON, YAML or key = value)")
    common.add_argument("--seed", type=int, default=None, help="Seed of every randomized step")
    common.add_argument("--mode", choices=MODES, default=None, help="Segmentation mode")
    common.add_argument("--strategy", choices=STRATEGIES, default=None, help="Matching strategy")
    common.add_argument("--psi", type=float, default=None, help="Decision threshold")
    common.add_argument("--skin-model", type=str, default=None, help="Global skin model (JSON mixture)")
    common.add_argument("-v", "--verbose", action="count", default=1, help="Increase verbosity")

    parser = argparse.ArgumentParser(prog="earsift", description="Ear verification with color slice regions and SIFT")
    commands = parser.add_subparsers(dest="command", required=True)

    enroll = commands.add_parser("enroll", parents=[common], help="Enroll a reference image")
    enroll.add_argument("image")
    enroll.add_argument("--mask", default=None)
    enroll.add_argument("--subject-id", default=None)
    enroll.add_argument("--out", required=True, help="Template file to write")
    enroll.set_defaults(func=cmd_enroll)

    verify = commands.add_parser("verify", parents=[common], help="Verify a probe against a template")
    verify.add_argument("image")
    verify.add_argument("--template", required=True)
    verify.add_argument("--mask", default=None)
    verify.set_defaults(func=cmd_verify)

    segment = commands.add_parser("segment", parents=[common], help="Write the slice-region label map")
    segment.add_argument("image")
    segment.add_argument("--mask", default=None)
    segment.add_argument("--out", required=True, help="Label map (PGM or PNG)")
    segment.add_argument("--summary", default=None, help="Region summary JSON")
    segment.add_argument("--model-out", default=None, help="Write the fitted mixture")
    segment.set_defaults(func=cmd_segment)

    extract = commands.add_parser("extract", parents=[common], help="Extract SIFT keypoints to a template")
    extract.add_argument("image")
    extract.add_argument("--mask", default=None)
    extract.add_argument("--out", required=True)
    extract.add_argument("--dump", default=None, help="Plain-text keypoint dump")
    extract.set_defaults(func=cmd_extract)

    evaluate = commands.add_parser("evaluate", parents=[common], help="Run the four-configuration protocol")
    evaluate.add_argument("manifest")
    evaluate.add_argument("--out", required=True, help="Report folder")
    evaluate.add_argument("--workers", type=int, default=None)
    evaluate.set_defaults(func=cmd_evaluate)

    calibrate = commands.add_parser("calibrate", parents=[common], help="Calibrate psi on a held-out dataset")
    calibrate.add_argument("manifest")
    calibrate.add_argument("--exclude", default=None, help="Evaluation manifest that must not overlap")
    calibrate.add_argument("--workers", type=int, default=None)
    calibrate.set_defaults(func=cmd_calibrate)

    synth = commands.add_parser("gen-synth", parents=[common], help="Generate a synthetic dataset")
    synth.add_argument("--n", type=int, default=20, help="Number of subjects")
    synth.add_argument("--probes", type=int, default=1, help="Probes per subject")
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=cmd_gen_synth)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run the subcommand and map errors to exit codes.
    """
    args = build_parser().parse_args(argv)
    verbosity(args.verbose)
    try:
        return args.func(args)
    except EarSiftError as e:
        logging.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception as e:
        logging.exception(f"Unexpected {type(e).__name__}: {e}")
        return InternalInvariantError.exit_code


if __name__ == "__main__":
    sys.exit(main())
