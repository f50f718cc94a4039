"""Self-supervision dataset construction.

Two protocols: (a) harvest "dirty" sources by mixing clean sources
pairwise, running the spatial separator, and labeling the outputs by the
region their ITD implies; (b) synthesize region-wise training tuples
(per-region references plus their exact-sum mixture) from a harvested
database, optionally swapping dirty sources for their clean originals at
a configurable rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .audio import BinauralSignal, Waveform
from .hrir import HrirBank
from .scenes import RegionLayout, region_of_itd, render_binaural_source, spherical_itd
from .separation import Discarded, Passthrough, Separated, SeparationConfig, separate

PROVENANCE_CLEAN = "clean"
PROVENANCE_SINGLE = "stage1_single"
PROVENANCE_SEPARATED = "stage1_separated"

_PAIR_DRAW_LIMIT = 1000
_REGION_DRAW_LIMIT = 100


@dataclass(frozen=True)
class SourceRecord:
    signal: BinauralSignal
    itd: float
    region: int
    provenance: str
    origin_scene: str
    clean_signal: Optional[BinauralSignal] = None


@dataclass(frozen=True)
class TrainingTuple:
    mixture: BinauralSignal
    references: Tuple[BinauralSignal, ...]  # one per region
    active: Tuple[bool, ...]
    provenances: Tuple[str, ...]  # per drawn source, diagnostics


@dataclass
class DirtyBuildStats:
    n_mixtures: int = 0
    n_passthrough: int = 0
    n_separated: int = 0
    n_discarded: int = 0
    discard_reasons: Dict[str, int] = field(default_factory=dict)

    @property
    def acceptance_rate(self) -> float:
        if self.n_mixtures == 0:
            return 0.0
        return (self.n_passthrough + self.n_separated) / self.n_mixtures

    def to_record(self) -> dict:
        return {
            "n_mixtures": self.n_mixtures,
            "n_passthrough": self.n_passthrough,
            "n_separated": self.n_separated,
            "n_discarded": self.n_discarded,
            "discard_reasons": dict(sorted(self.discard_reasons.items())),
            "acceptance_rate": self.acceptance_rate,
        }


def draw_mixture_params(
    rng: np.random.Generator,
    pool_ids: Sequence[str],
    azimuths: Sequence[float],
    delta_tau_min: float,
    delta_tau_max: float,
) -> Tuple[str, float, str, float]:
    """Two distinct sources at azimuths whose model ITDs differ enough."""
    if len(pool_ids) < 2:
        raise ValueError("need at least 2 pool sources")
    for _ in range(_PAIR_DRAW_LIMIT):
        az1, az2 = rng.choice(azimuths, size=2, replace=True)
        gap = abs(
            spherical_itd(float(az1), delta_tau_max)
            - spherical_itd(float(az2), delta_tau_max)
        )
        if gap >= delta_tau_min:
            i, j = rng.choice(len(pool_ids), size=2, replace=False)
            return pool_ids[int(i)], float(az1), pool_ids[int(j)], float(az2)
    raise ValueError(
        "HRIR bank too sparse to satisfy the ITD-gap constraint "
        f"(delta_tau_min={delta_tau_min})"
    )


def _separate_one_mixture(
    scene_id: str,
    id1: str,
    az1: float,
    id2: str,
    az2: float,
    pool: Mapping[str, Waveform],
    bank: HrirBank,
    cfg: SeparationConfig,
    delta_tau_max: float,
) -> Tuple[List[SourceRecord], Optional[str]]:
    """Render a 2-source mixture, run stage 1, harvest labeled records."""
    duration = max(pool[id1].duration, pool[id2].duration)
    s1 = render_binaural_source(pool[id1], bank, az1, duration)
    s2 = render_binaural_source(pool[id2], bank, az2, duration)
    mixture = BinauralSignal(
        Waveform(s1.left.samples + s2.left.samples, bank.sample_rate),
        Waveform(s1.right.samples + s2.right.samples, bank.sample_rate),
    )

    outcome = separate(mixture, cfg)
    if isinstance(outcome, Discarded):
        return [], outcome.reason
    if isinstance(outcome, Passthrough):
        record = SourceRecord(
            signal=outcome.signal,
            itd=outcome.itd,
            region=region_of_itd(outcome.itd, delta_tau_max),
            provenance=PROVENANCE_SINGLE,
            origin_scene=scene_id,
        )
        return [record], None

    assert isinstance(outcome, Separated)
    true_itds = (spherical_itd(az1, delta_tau_max), spherical_itd(az2, delta_tau_max))
    records = []
    for est, itd in ((outcome.source1, outcome.itd1), (outcome.source2, outcome.itd2)):
        # the clean original is the rendered source whose model ITD is nearest
        nearest = int(np.argmin([abs(itd - t) for t in true_itds]))
        records.append(
            SourceRecord(
                signal=est,
                itd=itd,
                region=region_of_itd(itd, delta_tau_max),
                provenance=PROVENANCE_SEPARATED,
                origin_scene=scene_id,
                clean_signal=(s1, s2)[nearest],
            )
        )
    return records, None


def build_dirty_sources(
    pool: Mapping[str, Waveform],
    bank: HrirBank,
    cfg: SeparationConfig,
    delta_tau_min: float,
    delta_tau_max: float,
    n: int,
    seed: int,
    max_duration: Optional[float] = None,
) -> Tuple[List[SourceRecord], DirtyBuildStats]:
    """Mix clean sources pairwise, separate, and harvest labeled outputs.

    ``max_duration`` caps the total seconds of harvested audio (the
    few-shot "personal data budget" knob); generation stops once reached.
    """
    pool_ids = sorted(pool)
    azimuths = bank.azimuths
    children = np.random.SeedSequence(seed).spawn(n)

    records: List[SourceRecord] = []
    stats = DirtyBuildStats()
    harvested_seconds = 0.0
    for i in range(n):
        if max_duration is not None and harvested_seconds >= max_duration:
            break
        rng = np.random.default_rng(children[i])
        id1, az1, id2, az2 = draw_mixture_params(
            rng, pool_ids, azimuths, delta_tau_min, delta_tau_max
        )
        new_records, discard_reason = _separate_one_mixture(
            f"mix{i:05d}", id1, az1, id2, az2, pool, bank, cfg, delta_tau_max
        )
        stats.n_mixtures += 1
        if discard_reason is not None:
            stats.n_discarded += 1
            stats.discard_reasons[discard_reason] = (
                stats.discard_reasons.get(discard_reason, 0) + 1
            )
            continue
        if len(new_records) == 1:
            stats.n_passthrough += 1
        else:
            stats.n_separated += 1
        for rec in new_records:
            records.append(rec)
            harvested_seconds += rec.signal.left.duration
    return records, stats


def build_training_tuples(
    db: Sequence[SourceRecord],
    layout: RegionLayout,
    k_range: Tuple[int, int],
    clean_ratio: float,
    m: int,
    seed: int,
) -> List[TrainingTuple]:
    """Draw K region-labeled sources per tuple and sum them per region.

    Each drawn dirty source is replaced by its clean original with
    probability ``clean_ratio`` when one is attached to the record.
    Region draws are uniform over regions with database entries; a draw
    landing on an empty region is retried up to a bound.
    """
    if not db:
        raise ValueError("source database is empty")
    if not 0.0 <= clean_ratio <= 1.0:
        raise ValueError(f"clean_ratio must be in [0,1], got {clean_ratio}")
    k_lo, k_hi = k_range
    if not 1 <= k_lo <= k_hi:
        raise ValueError(f"bad k_range {k_range}")

    by_region: Dict[int, List[SourceRecord]] = {}
    for rec in db:
        by_region.setdefault(rec.region, []).append(rec)
    sample_rate = db[0].signal.sample_rate

    children = np.random.SeedSequence(seed).spawn(m)
    tuples: List[TrainingTuple] = []
    for t in range(m):
        rng = np.random.default_rng(children[t])
        k = int(rng.integers(k_lo, k_hi + 1))

        chosen: List[Tuple[int, BinauralSignal, str]] = []
        for _ in range(k):
            region = None
            for _ in range(_REGION_DRAW_LIMIT + 1):
                candidate = 1 + int(rng.integers(layout.num_regions))
                if candidate in by_region:
                    region = candidate
                    break
            if region is None:
                raise ValueError(
                    "drawn regions have no database entries after "
                    f"{_REGION_DRAW_LIMIT} retries"
                )
            rec = by_region[region][int(rng.integers(len(by_region[region])))]
            use_clean = (
                rec.clean_signal is not None and rng.random() < clean_ratio
            )
            signal = rec.clean_signal if use_clean else rec.signal
            provenance = PROVENANCE_CLEAN if use_clean else rec.provenance
            chosen.append((region, signal, provenance))

        length = max(len(sig) for _, sig, _ in chosen)
        ref_l = [np.zeros(length) for _ in range(layout.num_regions)]
        ref_r = [np.zeros(length) for _ in range(layout.num_regions)]
        active = [False] * layout.num_regions
        for region, sig, _ in chosen:
            ref_l[region - 1][: len(sig)] += sig.left.samples
            ref_r[region - 1][: len(sig)] += sig.right.samples
            active[region - 1] = True

        references = tuple(
            BinauralSignal(
                Waveform(ref_l[i], sample_rate), Waveform(ref_r[i], sample_rate)
            )
            for i in range(layout.num_regions)
        )
        mix_l = np.zeros(length)
        mix_r = np.zeros(length)
        for ref in references:
            mix_l += ref.left.samples
            mix_r += ref.right.samples
        tuples.append(
            TrainingTuple(
                mixture=BinauralSignal(
                    Waveform(mix_l, sample_rate), Waveform(mix_r, sample_rate)
                ),
                references=references,
                active=tuple(active),
                provenances=tuple(p for _, _, p in chosen),
            )
        )
    return tuples
