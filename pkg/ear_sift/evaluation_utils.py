"""
Evaluation Utilities

Verification protocol and its metrics:
 - dataset manifests (one reference and one or more probes per subject)
 - genuine / impostor scoring of every probe against every enrolled reference
 - ROC curves, the operating point minimizing max(1 - TP, FP), accuracy
   100 (1 - (FNR + FPR) / 2) and the equal error rate
 - the four-row prior/after segmentation x ED/NN comparison
 - psi and tau_kl calibration on a disjoint subject set
 - CSV and plain-text reports

The "TN" column of the comparison table reports the false-negative rate
(1 - TP), the quantity the accuracy arithmetic actually uses.
"""

import csv
import dataclasses
import json
import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config_utils import AFTER, GATE_GLOBAL, PRIOR, Config
from .error_utils import EarSiftError, EmptyScores, IoFailure, OverlapDetected, ParseFailure
from .hash_utils import hashfile
from .image_utils import load_image, load_mask
from .logging_utils import check
from .matching_utils import ED, NN, Template, match_templates
from .mixture_utils import MixtureModel
from .path_utils import checkfile, folder_name_ext, parent_directory, resolve_path
from .pipeline_utils import ImageAnalysis, analyze_image, build_template
from .segmentation_utils import fit_global_model, validate_cluster_counts
from .system_utils import get_nb_workers, parallel_map

CONFIGURATIONS = ((PRIOR, ED), (PRIOR, NN), (AFTER, ED), (AFTER, NN))
MODE_LABELS = {PRIOR: "prior to segmentation", AFTER: "after segmentation"}


@dataclass(frozen=True)
class SubjectRecord:
    """
    One manifest entry.

    Attributes
    ----------
    subject_id : str
        Unique identity.
    reference : str
        Enrollment image path.
    probes : tuple of str
        Probe image paths (at least one).
    mask : str or None
        Mask of the reference (and of the probes without their own mask).
    probe_masks : tuple of str or None
        Per-probe masks, same length as `probes` when given.
    """

    subject_id: str
    reference: str
    probes: Tuple[str, ...]
    mask: Optional[str] = None
    probe_masks: Optional[Tuple[str, ...]] = None

    def probe_mask(self, index: int) -> Optional[str]:
        if self.probe_masks is not None:
            return self.probe_masks[index]
        return self.mask

    def image_paths(self) -> List[str]:
        return [self.reference, *self.probes]


@dataclass(frozen=True)
class Dataset:
    subjects: Tuple[SubjectRecord, ...]

    def __post_init__(self):
        ids = [s.subject_id for s in self.subjects]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        check(not duplicates, f"Duplicate subject ids in dataset: {duplicates}", ParseFailure)
        for s in self.subjects:
            check(bool(s.probes), f"Subject '{s.subject_id}' has no probe image", ParseFailure)
            check(
                s.probe_masks is None or len(s.probe_masks) == len(s.probes),
                f"Subject '{s.subject_id}' needs one probe mask per probe",
                ParseFailure,
            )

    def __len__(self) -> int:
        return len(self.subjects)


@dataclass(frozen=True)
class ScoreRecord:
    probe_id: str
    probe_subject: str
    ref_subject: str
    score: float
    match_count: int
    d_final: float

    @property
    def genuine(self) -> bool:
        return self.probe_subject == self.ref_subject


@dataclass(frozen=True)
class ScoreSet:
    """
    Scores of one configuration, in canonical (probe, reference) order.

    Attributes
    ----------
    mode, strategy : str
        The configuration.
    records : tuple of ScoreRecord
        One record per probe and enrolled reference.
    excluded : tuple of str
        Subjects whose enrollment failed.
    genuine_kl : tuple of float
        Region KL values of genuine probes against their own reference model
        (after mode, reference gating), used to suggest tau_kl.
    """

    mode: str
    strategy: str
    records: Tuple[ScoreRecord, ...]
    excluded: Tuple[str, ...] = ()
    genuine_kl: Tuple[float, ...] = ()

    @property
    def genuine(self) -> np.ndarray:
        return np.array([r.score for r in self.records if r.genuine], dtype=np.float64)

    @property
    def impostor(self) -> np.ndarray:
        return np.array([r.score for r in self.records if not r.genuine], dtype=np.float64)

    @property
    def mean_impostor_matches(self) -> float:
        counts = [r.match_count for r in self.records if not r.genuine]
        return float(np.mean(counts)) if counts else 0.0


@dataclass(frozen=True, eq=False)
class RocCurve:
    """
    ROC sampled at every distinct score plus the +inf / -inf sentinels.

    thresholds are descending; tp and fp are the fractions of genuine and
    impostor scores >= threshold.
    """

    thresholds: np.ndarray
    tp: np.ndarray
    fp: np.ndarray

    @property
    def points(self) -> List[Tuple[float, float, float]]:
        return [(float(t), float(a), float(b)) for t, a, b in zip(self.thresholds, self.tp, self.fp)]


@dataclass(frozen=True)
class OperatingPoint:
    """Rates at the chosen threshold; percentages in [0, 100]."""

    threshold: float
    accuracy: float
    fp: float
    tn: float

    def table_row(self) -> str:
        """
        Render accuracy, FP and TN (false-negative rate) with two decimals.

        Example
        -------
        >>> OperatingPoint(0.4, 96.93, 2.14, 4.0).table_row()
        '96.93, 2.14, 4.00'
        """
        return f"{self.accuracy:.2f}, {self.fp:.2f}, {self.tn:.2f}"


@dataclass(frozen=True)
class ReportRow:
    mode: str
    strategy: str
    accuracy: float
    fp: float
    tn: float
    eer: float
    threshold: float
    mean_impostor_matches: float

    @property
    def label(self) -> str:
        return f"{self.strategy.upper()}, {MODE_LABELS[self.mode]}"


@dataclass(frozen=True)
class EvalReport:
    """The four-row comparison with per-strategy accuracy deltas (after - prior)."""

    rows: Tuple[ReportRow, ...]

    @property
    def deltas(self) -> Dict[str, float]:
        by_key = {(r.mode, r.strategy): r for r in self.rows}
        return {
            strategy: by_key[(AFTER, strategy)].accuracy - by_key[(PRIOR, strategy)].accuracy
            for strategy in (ED, NN)
            if (AFTER, strategy) in by_key and (PRIOR, strategy) in by_key
        }


def load_manifest(path: str) -> Dataset:
    """
    Read a dataset manifest: a JSON list of
    ``{"subject_id", "reference", "probes": [...], "mask"?, "probe_masks"?}``.

    Relative paths are resolved against the manifest's folder.

    Raises
    ------
    ImageFileNotFound
        If the manifest does not exist.
    ParseFailure
        If the manifest is malformed.
    """
    path = checkfile(path, "Manifest")
    folder, _, _ = folder_name_ext(path)
    try:
        with open(path, "rt") as fin:
            entries = json.load(fin)
        if not isinstance(entries, list):
            raise ValueError("the manifest must be a JSON list")

        def resolve(p):
            return None if p is None else resolve_path(folder, str(p))

        subjects = []
        for e in entries:
            probe_masks = e.get("probe_masks")
            subjects.append(
                SubjectRecord(
                    subject_id=str(e["subject_id"]),
                    reference=resolve(e["reference"]),
                    probes=tuple(resolve(p) for p in e["probes"]),
                    mask=resolve(e.get("mask")),
                    probe_masks=None if probe_masks is None else tuple(resolve(p) for p in probe_masks),
                )
            )
    except (ValueError, KeyError, TypeError, AttributeError) as e:
        raise ParseFailure(f"Malformed manifest '{path}': {e}") from e
    dataset = Dataset(tuple(subjects))
    logging.info(f"Loaded manifest '{path}' with {len(dataset)} subjects")
    return dataset


def write_manifest(dataset: Dataset, path: str, relative_to: Optional[str] = None) -> None:
    """Write a manifest, paths relative to `relative_to` when given."""
    def rel(p):
        if p is None or relative_to is None:
            return p
        return os.path.relpath(p, relative_to)

    entries = []
    for s in dataset.subjects:
        entry = {"subject_id": s.subject_id, "reference": rel(s.reference), "probes": [rel(p) for p in s.probes]}
        if s.mask is not None:
            entry["mask"] = rel(s.mask)
        if s.probe_masks is not None:
            entry["probe_masks"] = [rel(p) for p in s.probe_masks]
        entries.append(entry)
    parent_directory(path)
    try:
        with open(path, "wt") as fout:
            json.dump(entries, fout, indent=1, sort_keys=True)
    except OSError as e:
        raise IoFailure(f"Cannot write manifest '{path}': {e}") from e


def _analyze_job(job) -> Tuple[Optional[ImageAnalysis], str]:
    """Worker entry point: analyze one image, reporting failures as text."""
    subject_id, image_path, mask_path, config = job
    try:
        image = load_image(image_path)
        mask = load_mask(mask_path) if mask_path else None
        return analyze_image(image, mask, config, subject_id, segment=True), ""
    except EarSiftError as e:
        return None, f"{type(e).__name__}: {e}"


@dataclass(frozen=True, eq=False)
class DatasetAnalysis:
    """
    Per-image analyses of a dataset, computed once for every configuration.

    references maps subject ids to analyses (failed ones are absent);
    probes lists (probe_id, subject_id, analysis or None).
    """

    references: Dict[str, ImageAnalysis]
    probes: Tuple[Tuple[str, str, Optional[ImageAnalysis]], ...]
    failures: Dict[str, str]


def analyze_dataset(ds: Dataset, config: Config) -> DatasetAnalysis:
    """
    Analyze every reference and probe image, in parallel when
    config.workers asks for it.
    """
    jobs, keys = [], []
    for s in ds.subjects:
        jobs.append((s.subject_id, s.reference, s.mask, config))
        keys.append((s.subject_id, None))
        for index, probe in enumerate(s.probes):
            jobs.append((s.subject_id, probe, s.probe_mask(index), config))
            keys.append((s.subject_id, index))
    workers = get_nb_workers(config.workers)
    outcomes = parallel_map(_analyze_job, jobs, workers=workers)

    references, probes, failures = {}, [], {}
    for (subject_id, index), (analysis, error) in zip(keys, outcomes):
        if index is None:
            if analysis is None:
                failures[subject_id] = error
                logging.warning(f"Enrollment of '{subject_id}' failed and is excluded: {error}")
            else:
                references[subject_id] = analysis
        else:
            if analysis is None:
                logging.warning(f"Probe {index} of '{subject_id}' could not be analyzed: {error}")
            probes.append((f"{subject_id}#{index + 1}", subject_id, analysis))
    return DatasetAnalysis(references, tuple(probes), failures)


def _check_cluster_counts(analyses: DatasetAnalysis) -> None:
    """Log the advisory cluster-count relation for subjects with two probes or more."""
    by_subject: Dict[str, List[ImageAnalysis]] = {}
    for _, subject_id, analysis in analyses.probes:
        if analysis is not None:
            by_subject.setdefault(subject_id, []).append(analysis)
    for subject_id, reference in analyses.references.items():
        probes = by_subject.get(subject_id, [])
        if len(probes) < 2 or reference.segmentation is None:
            continue
        validate_cluster_counts(
            len(reference.pixels),
            reference.segmentation.k_effective,
            probes[0].segmentation.k_effective,
            probes[1].segmentation.k_effective,
        )


def _skin_model(analyses: DatasetAnalysis, config: Config) -> Optional[MixtureModel]:
    if config.gate_mode != GATE_GLOBAL or not analyses.references:
        return None
    ordered = [analyses.references[k].pixels for k in sorted(analyses.references)]
    return fit_global_model(ordered, config.k, config.seed)


def run_protocol(
    ds: Dataset,
    config: Config,
    analyses: Optional[DatasetAnalysis] = None,
    skin_model: Optional[MixtureModel] = None,
) -> ScoreSet:
    """
    Score every probe against every enrolled reference.

    References are enrolled in config.mode; a subject whose enrollment fails
    is excluded with a warning, together with its probes. Probes are gated
    against each reference's color model in reference gate mode. A probe that
    yields no template scores 0 against every reference.

    Parameters
    ----------
    ds : Dataset
        Subjects, references and probes.
    config : Config
        Pipeline settings; config.mode and config.match.strategy name the
        configuration.
    analyses : DatasetAnalysis, optional
        Precomputed analyses (shared between configurations).
    skin_model : MixtureModel, optional
        Global skin model; fitted on the pooled references when gate_mode is
        "global" and none is given.

    Returns
    -------
    ScoreSet
        n genuine and n (n - 1) impostor records for n enrolled single-probe
        subjects.

    Raises
    ------
    EmptyScores
        If no subject could be enrolled.
    """
    if analyses is None:
        analyses = analyze_dataset(ds, config)
    if skin_model is None:
        skin_model = _skin_model(analyses, config)
    if config.mode == AFTER:
        _check_cluster_counts(analyses)

    excluded = [s for s in (r.subject_id for r in ds.subjects) if s in analyses.failures]
    enrolled: Dict[str, Template] = {}
    ref_models: Dict[str, Optional[MixtureModel]] = {}
    for s in ds.subjects:
        analysis = analyses.references.get(s.subject_id)
        if analysis is None:
            continue
        try:
            enrollment = build_template(analysis, config, gate_model=skin_model)
        except EarSiftError as e:
            logging.warning(f"Enrollment of '{s.subject_id}' failed and is excluded: {e}")
            excluded.append(s.subject_id)
            continue
        enrolled[s.subject_id] = enrollment.template
        ref_models[s.subject_id] = enrollment.template.source_model
    if not enrolled:
        raise EmptyScores("No subject could be enrolled")

    records, genuine_kl = [], []
    for probe_id, probe_subject, analysis in analyses.probes:
        if probe_subject not in enrolled:
            continue
        for ref_subject, reference in enrolled.items():
            gate_model = skin_model if skin_model is not None else ref_models[ref_subject]
            try:
                if analysis is None:
                    raise EmptyScores(f"probe '{probe_id}' has no analysis")
                probe = build_template(analysis, config, gate_model=gate_model)
            except EarSiftError as e:
                logging.warning(f"Probe '{probe_id}' against '{ref_subject}' scores 0: {e}")
                records.append(ScoreRecord(probe_id, probe_subject, ref_subject, 0.0, 0, 0.0))
                continue
            if probe_subject == ref_subject and probe.segmentation is not None:
                genuine_kl.extend(r.kl_to_reference for r in probe.segmentation.regions)
            result = match_templates(probe.template, reference, config.match)
            records.append(
                ScoreRecord(
                    probe_id, probe_subject, ref_subject,
                    result.normalized_score, result.match_count, result.d_final,
                )
            )
    n_probes = sum(subject in enrolled for _, subject, _ in analyses.probes)
    check(
        len(records) == n_probes * len(enrolled),
        f"{len(records)} scores for {n_probes} probes against {len(enrolled)} references",
    )
    n_genuine = sum(r.genuine for r in records)
    logging.info(
        f"Protocol {config.mode}/{config.match.strategy}: {len(enrolled)} enrolled, "
        f"{n_genuine} genuine and {len(records) - n_genuine} impostor scores"
    )
    return ScoreSet(config.mode, config.match.strategy, tuple(records), tuple(excluded), tuple(genuine_kl))


def _fraction_at_least(sorted_scores: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    n = len(sorted_scores)
    return (n - np.searchsorted(sorted_scores, thresholds, side="left")) / n


def roc_from_scores(genuine: Sequence[float], impostor: Sequence[float]) -> RocCurve:
    """
    ROC of two score samples.

    Raises
    ------
    EmptyScores
        If either sample is empty.
    """
    genuine = np.sort(np.asarray(genuine, dtype=np.float64))
    impostor = np.sort(np.asarray(impostor, dtype=np.float64))
    if genuine.size == 0 or impostor.size == 0:
        raise EmptyScores(
            f"ROC needs genuine and impostor scores, got {genuine.size} and {impostor.size}"
        )
    distinct = np.unique(np.concatenate([genuine, impostor]))[::-1]
    thresholds = np.concatenate([[np.inf], distinct, [-np.inf]])
    return RocCurve(
        thresholds=thresholds,
        tp=_fraction_at_least(genuine, thresholds),
        fp=_fraction_at_least(impostor, thresholds),
    )


def compute_roc(scores: ScoreSet) -> RocCurve:
    """
    ROC of a score set: TP(t) and FP(t) are the fractions of genuine and
    impostor scores >= t, t running over the distinct scores in descending
    order between +inf and -inf.

    Raises
    ------
    EmptyScores
        Without genuine or impostor scores.
    """
    return roc_from_scores(scores.genuine, scores.impostor)


def roc_rates(genuine: Sequence[float], impostor: Sequence[float], threshold: float) -> Tuple[float, float]:
    """
    (TP, FP) fractions at one threshold.

    Example
    -------
    >>> roc_rates([0.9, 0.8], [0.2, 0.1], 0.5)
    (1.0, 0.0)
    """
    genuine = np.asarray(genuine, dtype=np.float64)
    impostor = np.asarray(impostor, dtype=np.float64)
    if genuine.size == 0 or impostor.size == 0:
        raise EmptyScores("Rates need genuine and impostor scores")
    return float(np.mean(genuine >= threshold)), float(np.mean(impostor >= threshold))


def accuracy_from_rates(fp: float, fnr: float) -> float:
    """
    Accuracy (%) from false-positive and false-negative rates (%).

    Example
    -------
    >>> round(accuracy_from_rates(2.14, 4.00), 2)
    96.93
    """
    return 100.0 - 0.5 * (fp + fnr)


def operating_point(curve: RocCurve) -> OperatingPoint:
    """
    Operating point minimizing max(1 - TP, FP), ties going to the larger
    threshold.

    Returns
    -------
    OperatingPoint
        Threshold, accuracy %, FP % and TN % (false-negative rate).
    """
    worst = np.maximum(1.0 - curve.tp, curve.fp)
    index = int(np.argmin(worst))
    fp = 100.0 * float(curve.fp[index])
    fnr = 100.0 * (1.0 - float(curve.tp[index]))
    return OperatingPoint(
        threshold=float(curve.thresholds[index]),
        accuracy=accuracy_from_rates(fp, fnr),
        fp=fp,
        tn=fnr,
    )


def equal_error_rate(curve: RocCurve) -> Tuple[float, float]:
    """
    Equal error rate (%) and its threshold: the curve point where the false
    negative and false positive rates are closest, reported as their mean.
    """
    fnr = 1.0 - curve.tp
    index = int(np.argmin(np.abs(fnr - curve.fp)))
    return 50.0 * float(fnr[index] + curve.fp[index]), float(curve.thresholds[index])


def calibrate_threshold(scores: ScoreSet) -> Tuple[float, OperatingPoint]:
    """
    Choose psi at the operating point of a calibration score set.

    Sentinel thresholds are brought back into [0, 1].

    Returns
    -------
    Tuple[float, OperatingPoint]
        psi and the rates achieved on the calibration scores.
    """
    point = operating_point(compute_roc(scores))
    psi = float(np.clip(point.threshold, 0.0, 1.0))
    logging.info(f"Calibrated psi = {psi:.6g} (accuracy {point.accuracy:.2f}%)")
    return psi, point


def suggest_tau_kl(values: Sequence[float], quantile: float = 0.95) -> Optional[float]:
    """
    Suggest a KL gate threshold covering `quantile` of the genuine region
    divergences; None without values.
    """
    values = np.asarray([v for v in values if np.isfinite(v)], dtype=np.float64)
    if values.size == 0:
        return None
    return max(float(np.quantile(np.maximum(values, 0.0), quantile)), 1e-6)


def check_disjoint(calibration: Dataset, evaluation: Dataset) -> None:
    """
    Make sure two datasets share neither subjects nor image contents.

    Raises
    ------
    OverlapDetected
        On a shared subject id or an identical image file.
    """
    shared = sorted(
        {s.subject_id for s in calibration.subjects} & {s.subject_id for s in evaluation.subjects}
    )
    if shared:
        raise OverlapDetected(f"Calibration and evaluation share subjects: {shared}")
    hashes = {hashfile(p): p for s in evaluation.subjects for p in s.image_paths()}
    for s in calibration.subjects:
        for p in s.image_paths():
            h = hashfile(p)
            if h in hashes:
                raise OverlapDetected(f"Image '{p}' also appears in evaluation as '{hashes[h]}'")


def compare_sessions(score_sets: Sequence[ScoreSet]) -> EvalReport:
    """
    Build the prior/after x ED/NN comparison from evaluated score sets.

    Rows follow the order prior ED, prior NN, after ED, after NN for the
    configurations present.
    """
    by_key = {(s.mode, s.strategy): s for s in score_sets}
    rows = []
    for key in CONFIGURATIONS:
        if key not in by_key:
            continue
        scores = by_key[key]
        curve = compute_roc(scores)
        point = operating_point(curve)
        eer, _ = equal_error_rate(curve)
        rows.append(
            ReportRow(
                mode=key[0],
                strategy=key[1],
                accuracy=point.accuracy,
                fp=point.fp,
                tn=point.tn,
                eer=eer,
                threshold=point.threshold,
                mean_impostor_matches=scores.mean_impostor_matches,
            )
        )
    return EvalReport(tuple(rows))


def evaluate_dataset(ds: Dataset, config: Config) -> Tuple[List[ScoreSet], EvalReport]:
    """Run the four configurations on shared analyses and compare them."""
    analyses = analyze_dataset(ds, config)
    skin_model = _skin_model(analyses, config)
    score_sets = []
    for mode, strategy in CONFIGURATIONS:
        variant = dataclasses.replace(
            config, mode=mode, match=dataclasses.replace(config.match, strategy=strategy)
        )
        score_sets.append(run_protocol(ds, variant, analyses, skin_model))
    return score_sets, compare_sessions(score_sets)


def _write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    parent_directory(path)
    try:
        with open(path, "wt", newline="") as fout:
            writer = csv.writer(fout, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as e:
        raise IoFailure(f"Cannot write '{path}': {e}") from e
    logging.info(f"Wrote '{path}'")


def _num(value: float) -> str:
    return repr(float(value))


def write_scores_csv(score_sets: Sequence[ScoreSet], path: str) -> None:
    header = ["probe_id", "ref_id", "genuine", "strategy", "mode", "score", "match_count", "d_final"]
    rows = [
        [r.probe_id, r.ref_subject, int(r.genuine), s.strategy, s.mode, _num(r.score), r.match_count, _num(r.d_final)]
        for s in score_sets
        for r in s.records
    ]
    _write_csv(path, header, rows)


def write_roc_csv(score_sets: Sequence[ScoreSet], path: str) -> None:
    rows = []
    for s in score_sets:
        curve = compute_roc(s)
        rows.extend([s.mode, s.strategy, _num(t), _num(tp), _num(fp)] for t, tp, fp in curve.points)
    _write_csv(path, ["mode", "strategy", "threshold", "tp", "fp"], rows)


_REPORT_HEADER = ["mode", "strategy", "accuracy", "fp", "tn", "eer", "threshold", "mean_impostor_matches"]


def write_report_csv(report: EvalReport, path: str) -> None:
    rows = [
        [r.mode, r.strategy, _num(r.accuracy), _num(r.fp), _num(r.tn), _num(r.eer), _num(r.threshold), _num(r.mean_impostor_matches)]
        for r in report.rows
    ]
    _write_csv(path, _REPORT_HEADER, rows)


def read_report_csv(path: str) -> EvalReport:
    """
    Read a report written by write_report_csv.

    Raises
    ------
    ParseFailure
        If the file is malformed.
    """
    path = checkfile(path, "Report")
    try:
        with open(path, "rt", newline="") as fin:
            rows = [
                ReportRow(
                    mode=row["mode"],
                    strategy=row["strategy"],
                    **{k: float(row[k]) for k in _REPORT_HEADER[2:]},
                )
                for row in csv.DictReader(fin)
            ]
    except (KeyError, TypeError, ValueError) as e:
        raise ParseFailure(f"Malformed report '{path}': {e}") from e
    return EvalReport(tuple(rows))


def format_summary(report: EvalReport, score_sets: Sequence[ScoreSet] = ()) -> str:
    """Plain-text comparison table, deltas and protocol counts."""
    lines = ["Configuration                          Accuracy, FP, TN (%)   EER (%)  impostor pairs"]
    for r in report.rows:
        point = OperatingPoint(r.threshold, r.accuracy, r.fp, r.tn)
        lines.append(
            f"{r.label:<38} {point.table_row():<22} {r.eer:7.2f}  {r.mean_impostor_matches:.2f}"
        )
    lines.append("")
    for strategy, delta in sorted(report.deltas.items()):
        direction = "gain" if delta >= 0 else "loss"
        lines.append(f"{strategy.upper()} accuracy after - prior segmentation: {delta:+.2f} ({direction})")
    for s in score_sets:
        lines.append(
            f"{s.mode}/{s.strategy}: {len(s.genuine)} genuine, {len(s.impostor)} impostor scores"
            + (f", excluded {list(s.excluded)}" if s.excluded else "")
        )
    lines.append("")
    lines.append("TN reports the false-negative rate 1 - TP; accuracy = 100 - (FP + TN) / 2.")
    return "\n".join(lines) + "\n"


def write_summary(report: EvalReport, path: str, score_sets: Sequence[ScoreSet] = ()) -> None:
    parent_directory(path)
    try:
        with open(path, "wt") as fout:
            fout.write(format_summary(report, score_sets))
    except OSError as e:
        raise IoFailure(f"Cannot write summary '{path}': {e}") from e
