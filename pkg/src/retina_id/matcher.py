"""Template similarity and ranking.

For an enrolled class vector vin and a query class vector vout (each 360
slots; 0 marks an empty slot, occupied slots hold the source corner's
orientation as a value in (0, 360]) the similarity profile over cyclic
shifts phi = 1..360 is

    Sim(phi) = sum over tau of step(vin(tau) * vout(tau + phi))
               * cos(2 * (vin(tau) - vout(tau + phi)) * pi / 180)

with 1-based cyclic slot indices and step(x) = 1 when x > 0, else 0.  Since
occupied slots are strictly positive, a term contributes exactly when both
slots are occupied.  Index j of the returned profile holds shift phi = j+1;
the zero-offset alias therefore sits at phi = 360.

The per-class score si is the profile maximum (smallest phi wins ties) and
the total is the class-weighted sum w1*si1 + w2*si2 + w3*si3.  The distant
class gets the largest weight because far corners pin down rotation best.

The implementation enumerates occupied-slot pairs and accumulates them per
shift in the same order as a plain double loop over (phi, tau), so results
are bit-for-bit identical to the naive evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import SLOTS, FeatureTemplate


@dataclass(frozen=True)
class Weights:
    w1: float = 1.0
    w2: float = 2.0
    w3: float = 4.0

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0 or self.w3 < 0:
            raise ValueError("class weights must be non-negative")


@dataclass(frozen=True)
class MatchScore:
    si1: float
    si2: float
    si3: float
    total: float
    best_shift: tuple[int, int, int]


def _check_vector(v: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (SLOTS,):
        raise ValueError(f"{name} vector must have {SLOTS} slots")
    if ((v < 0) | (v > 360)).any():
        raise ValueError(f"{name} amplitudes must be 0 or in (0, 360]")
    return v


def sim_profile(enrolled: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Similarity over all cyclic shifts; index j holds shift phi = j + 1."""
    vin = _check_vector(enrolled, "enrolled")
    vout = _check_vector(query, "query")
    p = np.nonzero(vin)[0]
    q = np.nonzero(vout)[0]
    if p.size == 0 or q.size == 0:
        return np.zeros(SLOTS, dtype=np.float64)
    a = vin[p][:, None]
    b = vout[q][None, :]
    terms = np.cos(2.0 * ((a - b) * np.pi / 180.0))
    # Pair (p_i, q_j) lands at the shift aligning slot p_i with slot q_j.
    offset = (q[None, :] - p[:, None]) % SLOTS
    idx = np.where(offset == 0, SLOTS - 1, offset - 1)
    # bincount adds weights in input order; row-major flattening keeps the
    # tau-ascending order of the plain double loop within every shift bin.
    return np.bincount(idx.ravel(), weights=terms.ravel(), minlength=SLOTS)


def si_class(profile: np.ndarray) -> tuple[float, int]:
    """Profile maximum and the smallest shift attaining it, 1-based."""
    profile = np.asarray(profile, dtype=np.float64)
    if profile.shape != (SLOTS,):
        raise ValueError(f"profile must have {SLOTS} entries")
    j = int(np.argmax(profile))
    return float(profile[j]), j + 1


def total_si(enrolled: FeatureTemplate, query: FeatureTemplate, weights: Weights | None = None) -> MatchScore:
    weights = weights or Weights()
    sis = []
    shifts = []
    for row_in, row_out in zip(enrolled.vectors, query.vectors):
        si, shift = si_class(sim_profile(row_in, row_out))
        sis.append(si)
        shifts.append(shift)
    total = weights.w1 * sis[0] + weights.w2 * sis[1] + weights.w3 * sis[2]
    return MatchScore(si1=sis[0], si2=sis[1], si3=sis[2], total=total,
                      best_shift=(shifts[0], shifts[1], shifts[2]))


def identify(query: FeatureTemplate, gallery, weights: Weights | None = None) -> list[tuple[str, MatchScore]]:
    """Score the query against every record, best first.

    Ordering is deterministic: descending total, ties by ascending
    subject_id.  Raises ValueError on an empty gallery.
    """
    records = list(gallery)
    if not records:
        raise ValueError("empty gallery")
    scored = [(rec.subject_id, total_si(rec.template, query, weights)) for rec in records]
    scored.sort(key=lambda item: (-item[1].total, item[0]))
    return scored


def verify(query: FeatureTemplate, enrolled, threshold: float, weights: Weights | None = None) -> tuple[bool, MatchScore]:
    """One-to-one check: accept when the total reaches the threshold."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    score = total_si(enrolled.template, query, weights)
    return score.total >= threshold, score
