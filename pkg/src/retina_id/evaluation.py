"""Desk-scale evaluation harness.

Two probe sources are supported: seeded synthetic corner constellations,
and a directory of fundus images that are rotated about their optic-disc
centre and re-detected.  For every gallery subject the harness runs a fixed
number of randomly rotated probes per configured rotation count, records
rank-1 identification accuracy (raw and self-match-normalised), and renders
a three-column accuracy table plus a stable CSV.

Every random draw derives from the experiment seed through a fixed-shape
seed tree, so identical specs reproduce byte-identical reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoder import SLOTS, PolarCorner, encode, polarize
from .harris import DEFAULT_THRESHOLD, HarrisParams, detect_corners
from .imaging import load_image, rotate_about, to_intensity
from .matcher import Weights, identify, total_si
from .optic_disc import OdCenter, OdParams, locate_od, od_from_sidecar
from .store import GalleryRecord

DEFAULT_COUNTS = (5, 10, 20)
MIN_DISTANCE = 5.0
MAX_DISTANCE = 79.999


@dataclass(frozen=True)
class ExperimentSpec:
    rotations_per_query: int = 5
    angle_range: float = 15.0
    jitter_px: float = 0.5
    jitter_deg: float = 0.5
    rng_seed: int = 42
    integer_angles: bool = False

    def __post_init__(self):
        if self.rotations_per_query < 1:
            raise ValueError("rotations_per_query must be at least 1")
        if self.angle_range <= 0:
            raise ValueError("angle_range must be positive")
        if self.jitter_px < 0 or self.jitter_deg < 0:
            raise ValueError("jitter must be non-negative")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be non-negative")


@dataclass(frozen=True)
class SyntheticSource:
    n_subjects: int
    n_corners: int = 20


@dataclass(frozen=True)
class ImageSource:
    directory: Path
    harris: HarrisParams = field(default_factory=HarrisParams)
    od: OdParams = field(default_factory=OdParams)


@dataclass(frozen=True)
class RotationAccuracy:
    rotations: int
    trials: int
    hits: int
    hits_normalized: int
    misidentified: tuple = ()

    @property
    def accuracy(self) -> float:
        return 100.0 * self.hits / self.trials

    @property
    def accuracy_normalized(self) -> float:
        return 100.0 * self.hits_normalized / self.trials


@dataclass(frozen=True)
class AccuracyReport:
    entries: tuple
    subjects: int
    gallery_distinct: bool | None = None

    @property
    def probes(self) -> int:
        return sum(e.trials for e in self.entries)

    @property
    def mean_accuracy(self) -> float:
        return sum(e.accuracy for e in self.entries) / len(self.entries)

    @property
    def mean_accuracy_normalized(self) -> float:
        return sum(e.accuracy_normalized for e in self.entries) / len(self.entries)

    def to_table(self) -> str:
        """Aligned plain-text accuracy table plus probe bookkeeping."""
        header = ["Times of rotation"] + [str(e.rotations) for e in self.entries] + ["Mean"]
        raw = ["Accuracy"] + [_fmt_num(e.accuracy) + "%" for e in self.entries]
        raw.append(_fmt_num(self.mean_accuracy) + "%")
        norm = ["Accuracy (normalized)"] + [_fmt_num(e.accuracy_normalized) + "%" for e in self.entries]
        norm.append(_fmt_num(self.mean_accuracy_normalized) + "%")
        widths = [max(len(row[i]) for row in (header, raw, norm)) for i in range(len(header))]
        lines = [
            "   ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
            for row in (header, raw, norm)
        ]
        lines.append("")
        lines.append(f"subjects: {self.subjects}   probes: {self.probes}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["rotations,accuracy_percent"]
        for e in self.entries:
            lines.append(f"{e.rotations},{_fmt_num(e.accuracy)}")
        lines.append(f"mean,{_fmt_num(self.mean_accuracy)}")
        return "\n".join(lines) + "\n"


def _fmt_num(v: float) -> str:
    s = f"{v:.6f}".rstrip("0").rstrip(".")
    return s if s else "0"


def synth_constellation(n_corners: int, rng: np.random.Generator) -> list[PolarCorner]:
    """Random constellation: distances uniform [5, 79], orientations uniform
    [0, 360), responses uniform over a decade above the detector threshold.
    Draw order (distances, orientations, responses) is part of the
    reproducibility contract."""
    if n_corners < 1:
        raise ValueError("n_corners must be at least 1")
    distances = rng.uniform(MIN_DISTANCE, 79.0, n_corners)
    orientations = rng.uniform(0.0, 360.0, n_corners) % 360.0
    responses = rng.uniform(DEFAULT_THRESHOLD, 10.0 * DEFAULT_THRESHOLD, n_corners)
    return [
        PolarCorner(distance=float(d), orientation=float(o), response=float(r))
        for d, o, r in zip(distances, orientations, responses)
    ]


def perturb(corners, angle_deg: float, spec: ExperimentSpec, rng: np.random.Generator) -> list[PolarCorner]:
    """Rotate a constellation by angle_deg and add the spec's jitter.

    Orientations wrap modulo 360; distances clamp to [0, MAX_DISTANCE] so
    perturbed corners stay inside the encoding gate.  With zero jitter and
    zero angle the output equals the input exactly.
    """
    n = len(corners)
    d_theta = rng.uniform(-spec.jitter_deg, spec.jitter_deg, n)
    d_dist = rng.uniform(-spec.jitter_px, spec.jitter_px, n)
    out = []
    for i, pc in enumerate(corners):
        theta = (pc.orientation + angle_deg + d_theta[i]) % 360.0
        dist = min(max(pc.distance + d_dist[i], 0.0), MAX_DISTANCE)
        out.append(PolarCorner(distance=dist, orientation=theta, response=pc.response))
    return out


def build_synthetic_gallery(n_subjects: int, n_corners: int, seed: int):
    """Seeded gallery of synthetic subjects s001..; returns (records,
    constellations) with constellations kept for probe generation."""
    if n_subjects < 1:
        raise ValueError("n_subjects must be at least 1")
    records = []
    constellations = []
    for i in range(n_subjects):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0, i]))
        pcs = synth_constellation(n_corners, rng)
        constellations.append(pcs)
        records.append(GalleryRecord(
            subject_id=f"s{i + 1:03d}",
            template=encode(pcs),
            source_image="synthetic",
            od=OdCenter(0.0, 0.0, 1.0, "manual"),
        ))
    return records, constellations


def _sample_angle(spec: ExperimentSpec, rng: np.random.Generator) -> float:
    if spec.integer_angles:
        r = int(round(spec.angle_range))
        return float(rng.integers(-r, r + 1))
    return float(rng.uniform(-spec.angle_range, spec.angle_range))


def _run_count(records, probe_fn, count: int, spec: ExperimentSpec, weights: Weights) -> RotationAccuracy:
    self_totals = {rec.subject_id: total_si(rec.template, rec.template, weights).total
                   for rec in records}

    def normalized_key(item):
        sid, ms = item
        st = self_totals[sid]
        return (-(ms.total / st) if st > 0 else 0.0, sid)

    hits = 0
    hits_norm = 0
    missed = []
    for subj_idx, rec in enumerate(records):
        for trial in range(count):
            rng = np.random.default_rng(
                np.random.SeedSequence([spec.rng_seed, 1, count, subj_idx, trial]))
            angle = _sample_angle(spec, rng)
            probe = probe_fn(subj_idx, angle, rng)
            ranked = identify(probe, records, weights)
            if ranked[0][0] == rec.subject_id:
                hits += 1
            else:
                missed.append((rec.subject_id, angle))
            if min(ranked, key=normalized_key)[0] == rec.subject_id:
                hits_norm += 1
    return RotationAccuracy(rotations=count, trials=count * len(records),
                            hits=hits, hits_normalized=hits_norm,
                            misidentified=tuple(missed))


def _sanitize_subject(stem: str) -> str:
    cleaned = "".join(ch if ch.isalnum() or ch in "_-" else "_" for ch in stem)
    return cleaned[:64] or "img"


def _build_image_gallery(source: ImageSource):
    directory = Path(source.directory)
    files = sorted([*directory.glob("*.pgm"), *directory.glob("*.ppm")], key=lambda f: f.name)
    if not files:
        raise ValueError(f"no .pgm/.ppm images under {directory}")
    records = []
    maps = []
    centers = []
    for f in files:
        m = to_intensity(load_image(f))
        od = od_from_sidecar(f, m) or locate_od(m, source.od)
        corners = detect_corners(m, source.harris)
        sid = _sanitize_subject(f.stem)
        if any(r.subject_id == sid for r in records):
            raise ValueError(f"duplicate subject id {sid!r} from {f.name}")
        records.append(GalleryRecord(
            subject_id=sid,
            template=encode(polarize(corners, od)),
            source_image=f.name,
            od=od,
        ))
        maps.append(m)
        centers.append(od)
    return records, maps, centers


def rotation_protocol(source, spec: ExperimentSpec, counts=DEFAULT_COUNTS,
                      weights: Weights | None = None) -> AccuracyReport:
    """Run the rotation experiment for each count in `counts` over one
    shared gallery and merge the results into a single report."""
    counts = tuple(counts)
    if not counts or any(c < 1 for c in counts):
        raise ValueError("counts must be a non-empty sequence of positive ints")
    weights = weights or Weights()
    distinct = None
    if isinstance(source, SyntheticSource):
        if source.n_subjects < 2:
            raise ValueError("identification needs at least 2 subjects")
        records, constellations = build_synthetic_gallery(
            source.n_subjects, source.n_corners, spec.rng_seed)

        def probe_fn(i, angle, rng):
            return encode(perturb(constellations[i], angle, spec, rng))

        if spec.jitter_px == 0 and spec.jitter_deg == 0:
            distinct = templates_distinct_under_rotation([r.template for r in records])
    elif isinstance(source, ImageSource):
        records, maps, centers = _build_image_gallery(source)
        if len(records) < 2:
            raise ValueError("identification needs at least 2 subjects")

        # The rotation itself is the perturbation on the image path; pixel
        # resampling supplies the noise, so spec jitters do not apply here.
        def probe_fn(i, angle, rng):
            rotated = rotate_about(maps[i], (centers[i].x, centers[i].y), angle)
            corners = detect_corners(rotated, source.harris)
            return encode(polarize(corners, centers[i]))
    else:
        raise TypeError("source must be SyntheticSource or ImageSource")

    entries = tuple(_run_count(records, probe_fn, c, spec, weights) for c in counts)
    return AccuracyReport(entries=entries, subjects=len(records), gallery_distinct=distinct)


def rotation_experiment(source, spec: ExperimentSpec, weights: Weights | None = None) -> AccuracyReport:
    """Single-count run using spec.rotations_per_query."""
    return rotation_protocol(source, spec, counts=(spec.rotations_per_query,), weights=weights)


def far_frr_sweep(gallery, probes, thresholds, weights: Weights | None = None) -> list[tuple[float, float, float]]:
    """False-accept / false-reject rates over verification thresholds.

    `probes` is an iterable of (subject_id, FeatureTemplate); every
    probe-record pairing is scored once, then each threshold is applied to
    the same scores, which makes FAR non-increasing and FRR non-decreasing
    in the threshold by construction.  Returns (threshold, far_pct, frr_pct)
    rows in input threshold order.
    """
    records = list(gallery)
    probes = list(probes)
    thresholds = [float(t) for t in thresholds]
    if not records or not probes or not thresholds:
        raise ValueError("gallery, probes and thresholds must be non-empty")
    weights = weights or Weights()
    genuine = []
    impostor = []
    for sid, template in probes:
        for rec in records:
            total = total_si(rec.template, template, weights).total
            (genuine if rec.subject_id == sid else impostor).append(total)
    gen = np.array(genuine, dtype=np.float64)
    imp = np.array(impostor, dtype=np.float64)
    rows = []
    for t in thresholds:
        far = 100.0 * float(np.count_nonzero(imp >= t)) / imp.size if imp.size else 0.0
        frr = 100.0 * float(np.count_nonzero(gen < t)) / gen.size if gen.size else 0.0
        rows.append((t, far, frr))
    return rows


def templates_distinct_under_rotation(templates) -> bool:
    """Conservative pairwise check that no template maps onto another under
    any rotation (slot shift plus a single consistent amplitude offset).
    Returns False when some pair could be rotation-identical."""
    temps = [np.asarray(t.vectors, dtype=np.float64) for t in templates]
    masks = [t > 0 for t in temps]
    for i in range(len(temps)):
        rolled_masks = np.stack([np.roll(masks[i], s, axis=1) for s in range(SLOTS)])
        rolled_amps = np.stack([np.roll(temps[i], s, axis=1) for s in range(SLOTS)])
        for j in range(len(temps)):
            if i == j:
                continue
            aligned = np.nonzero((rolled_masks == masks[j]).all(axis=(1, 2)))[0]
            for s in aligned:
                occupied = masks[j]
                if not occupied.any():
                    return False  # two all-empty templates are identical
                diffs = (temps[j][occupied] - rolled_amps[s][occupied]) % 360.0
                spread = (diffs - diffs[0] + 180.0) % 360.0 - 180.0
                if np.abs(spread).max() < 1e-6:
                    return False
    return True
