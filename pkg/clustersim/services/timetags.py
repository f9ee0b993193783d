"""Synthetic detector time tags, their binary stream format and the
three-fold coincidence counter.

File layout (little-endian):

    header  8s  magic "SPINTAG1"
            I   format version
            Q   repetition period (ps)
            3Q  pulse offsets t1, t2, t3 within a period (ps)
            I   waveplate setting id
            Q   record count
    records {u64 timestamp ps, u8 channel, 7 bytes zero}  (16 bytes each)

Channel i is demultiplexer arm i, which analyses photon #i+1.
"""

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from clustersim.exceptions import (
    BadMagicError, SequenceError, TagFormatError, TruncatedStreamError, UnsortedStreamError,
    VersionMismatchError, WindowError,
)
from clustersim.schemas import EfficiencyBudget, MonteCarloConfig, QDParams, TagOptions
from clustersim.services.dynamics import Propagators
from clustersim.services.experiment import (
    HERALD, PHOTON2_LABELS, PHOTON3_LABELS, ConditionalRatio, PulseSequence, mixed_spin_state,
)
from clustersim.services.operator_core import trace_row, vec
from clustersim.services.overhauser import MonteCarloService, OverhauserSample
from clustersim.services.qd_model import DIM, ORTHOGONAL_LABEL, polarization, pulse_superoperator
from clustersim.services.rates import first_lens_brightness

logger = logging.getLogger(__name__)

MAGIC = b"SPINTAG1"
FORMAT_VERSION = 1
HEADER_FORMAT = "<8sIQ3QIQ"
HEADER_SIZE = struct.calcsize(HEADER_FORMAT)
RECORD_DTYPE = np.dtype([("timestamp", "<u8"), ("channel", "u1"), ("reserved", "V7")])
RECORD_SIZE = RECORD_DTYPE.itemsize
N_CHANNELS = 3
N_OUTCOMES = 2 ** N_CHANNELS
BLOCK_PERIODS = 1 << 16
JITTER_CLIP = 4.0

PathLike = Union[str, Path]


@dataclass(frozen=True)
class WaveplateSetting:
    p1: str
    p2: str
    p3: str

    def __post_init__(self):
        if self.p1 != HERALD or self.p2 not in PHOTON2_LABELS or self.p3 not in PHOTON3_LABELS:
            raise SequenceError(f"invalid waveplate setting ({self.p1}, {self.p2}, {self.p3})")

    @property
    def labels(self) -> Tuple[str, str, str]:
        return (self.p1, self.p2, self.p3)

    @property
    def setting_id(self) -> int:
        return WAVEPLATE_SETTINGS.index(self)


WAVEPLATE_SETTINGS: Tuple[WaveplateSetting, ...] = tuple(
    WaveplateSetting(HERALD, p2, p3) for p2 in PHOTON2_LABELS for p3 in PHOTON3_LABELS
)


def setting_by_id(setting_id: int) -> WaveplateSetting:
    if not 0 <= setting_id < len(WAVEPLATE_SETTINGS):
        raise SequenceError(f"setting id {setting_id} outside 0..{len(WAVEPLATE_SETTINGS) - 1}")
    return WAVEPLATE_SETTINGS[setting_id]


@dataclass(frozen=True)
class TagStreamHeader:
    rep_period_ps: int
    pulse_offsets_ps: Tuple[int, int, int]
    setting_id: int
    record_count: int = 0
    version: int = FORMAT_VERSION

    def __post_init__(self):
        offsets = tuple(int(o) for o in self.pulse_offsets_ps)
        if len(offsets) != N_CHANNELS:
            raise TagFormatError(f"expected {N_CHANNELS} pulse offsets, got {len(offsets)}")
        if not (offsets[0] < offsets[1] < offsets[2] < self.rep_period_ps):
            raise TagFormatError(f"pulse offsets {offsets} not increasing within {self.rep_period_ps} ps")
        if not 0 <= self.setting_id < len(WAVEPLATE_SETTINGS):
            raise TagFormatError(f"setting id {self.setting_id} out of range")

    def pack(self) -> bytes:
        return struct.pack(
            HEADER_FORMAT, MAGIC, self.version, self.rep_period_ps,
            *self.pulse_offsets_ps, self.setting_id, self.record_count,
        )

    @classmethod
    def unpack(cls, data: bytes) -> "TagStreamHeader":
        if len(data) < HEADER_SIZE:
            raise TruncatedStreamError(f"header needs {HEADER_SIZE} bytes, got {len(data)}")
        magic, version, period, o1, o2, o3, setting_id, count = struct.unpack_from(HEADER_FORMAT, data)
        if magic != MAGIC:
            raise BadMagicError(f"bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise VersionMismatchError(f"format version {version}, expected {FORMAT_VERSION}")
        return cls(period, (o1, o2, o3), setting_id, count, version)

    @property
    def min_gap_ps(self) -> int:
        o = self.pulse_offsets_ps
        return min(o[1] - o[0], o[2] - o[1], self.rep_period_ps - o[2] + o[0])


@dataclass
class TagStreams:
    """One timestamp array (ps, sorted) per detector channel"""
    header: TagStreamHeader
    channels: List[np.ndarray] = field(default_factory=list)

    @property
    def setting(self) -> WaveplateSetting:
        return setting_by_id(self.header.setting_id)

    @property
    def record_count(self) -> int:
        return int(sum(c.size for c in self.channels))

    def records(self) -> np.ndarray:
        stamps = np.concatenate([np.asarray(c, dtype=np.uint64) for c in self.channels])
        chans = np.concatenate([np.full(c.size, i, dtype=np.uint8) for i, c in enumerate(self.channels)])
        order = np.lexsort((chans, stamps))
        out = np.zeros(stamps.size, dtype=RECORD_DTYPE)
        out["timestamp"] = stamps[order]
        out["channel"] = chans[order]
        return out

    @classmethod
    def from_records(cls, header: TagStreamHeader, records: np.ndarray) -> "TagStreams":
        channels = [np.asarray(records["timestamp"][records["channel"] == i], dtype=np.uint64)
                    for i in range(N_CHANNELS)]
        return cls(header, channels)


def encode_stream(streams: TagStreams) -> bytes:
    records = streams.records()
    h = streams.header
    header = TagStreamHeader(h.rep_period_ps, h.pulse_offsets_ps, h.setting_id, int(records.size))
    return header.pack() + records.tobytes()


def decode_stream(data: bytes) -> TagStreams:
    header = TagStreamHeader.unpack(data)
    body = len(data) - HEADER_SIZE
    expected = header.record_count * RECORD_SIZE
    if body < expected:
        complete = body // RECORD_SIZE
        raise TruncatedStreamError(
            f"stream ends inside record {complete} of {header.record_count}", record_index=complete
        )
    if body > expected:
        raise TagFormatError(f"{body - expected} trailing bytes after {header.record_count} records")

    if header.record_count == 0:
        return TagStreams.from_records(header, np.zeros(0, dtype=RECORD_DTYPE))
    records = np.frombuffer(data, dtype=RECORD_DTYPE, count=header.record_count, offset=HEADER_SIZE)
    if records.size and int(records["channel"].max()) >= N_CHANNELS:
        bad = int(np.argmax(records["channel"] >= N_CHANNELS))
        raise TagFormatError(f"record {bad} has channel {int(records['channel'][bad])}")
    stamps = records["timestamp"]
    if stamps.size > 1 and np.any(stamps[1:] < stamps[:-1]):
        bad = int(np.argmax(stamps[1:] < stamps[:-1])) + 1
        raise UnsortedStreamError(f"timestamp decreases at record {bad}")
    return TagStreams.from_records(header, records)


def write_stream(path: PathLike, streams: TagStreams) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_stream(streams))
    logger.info(f"Wrote {streams.record_count} tags to {path}")
    return path


def read_stream(path: PathLike) -> TagStreams:
    return decode_stream(Path(path).read_bytes())


# Generation

def default_source_efficiency(budget: EfficiencyBudget) -> float:
    """Probability that an emitted photon reaches the demultiplexer input: B_FL eta_C eta_T"""
    brightness = budget.first_lens_brightness
    if brightness is None:
        brightness = first_lens_brightness(budget)
    return brightness * budget.eta_c * budget.eta_t


def arm_factors(options: TagOptions, source_efficiency: float) -> np.ndarray:
    """Per-arm detection probability for the photon of the matching pulse"""
    t1, t2 = options.npbs1_transmission, options.npbs2_transmission
    r1, r2 = options.npbs1_reflection, options.npbs2_reflection
    c = options.connector
    return source_efficiency * np.array([r1 * c, t1 * r2 * c, t1 * t2 * c])


def pulse_offsets(params: QDParams, start_ps: float) -> Tuple[int, int, int]:
    sequence = PulseSequence.from_params(params, start_ps=start_ps)
    return tuple(int(round(t)) for t in sequence.pulse_times)


class TagGenerator:
    """Draws per-period detection outcomes from the simulated three-window distribution"""

    def __init__(self, params: QDParams, mc: MonteCarloConfig, options: TagOptions,
                 source_efficiency: float = 1.0, monte_carlo: Optional[MonteCarloService] = None):
        self.params = params
        self.mc = mc
        self.options = options
        self.monte_carlo = monte_carlo or MonteCarloService()
        self.arms = arm_factors(options, source_efficiency)
        self.sequence = PulseSequence.from_params(params, start_ps=options.pulse_start_ps)
        self.rep_period_ps = int(round(params.rep_period_ps))
        self.offsets = pulse_offsets(params, options.pulse_start_ps)
        self.pulse = pulse_superoperator(params.theta, params.normalized_pulse)
        self.trace = trace_row(DIM)

    def sample_outcomes(self, sample: OverhauserSample, setting: WaveplateSetting) -> np.ndarray:
        """Probability of each click pattern (bit i set = arm i clicked) for one sample"""
        props = Propagators.for_sample(self.params, sample.b_o)
        states = {0: vec(mixed_spin_state())}
        for arm, (label, window) in enumerate(zip(setting.labels, self.sequence.windows)):
            click = self.arms[arm] * props.bright(polarization(label), window)
            none = props.full(window) - click
            updated = {}
            for bits, state in states.items():
                excited = self.pulse @ state
                updated[bits | (1 << arm)] = click @ excited
                updated[bits] = none @ excited
            states = updated
        out = np.zeros(N_OUTCOMES)
        for bits, state in states.items():
            out[bits] = np.real(self.trace @ state)
        return out

    def outcome_distribution(self, setting: WaveplateSetting) -> np.ndarray:
        estimate = self.monte_carlo.average(
            self.mc, self.params.sigma_o_mT, lambda s: self.sample_outcomes(s, setting)
        )
        probs = np.clip(estimate.mean, 0.0, None)
        return probs / probs.sum()

    def coincidence_probability(self, setting: WaveplateSetting) -> float:
        return float(self.outcome_distribution(setting)[N_OUTCOMES - 1])

    def n_periods(self, duration_s: float) -> int:
        if duration_s <= 0:
            raise SequenceError(f"duration must be positive, got {duration_s}")
        return int(duration_s * 1e12 // self.rep_period_ps)

    def generate(self, setting: WaveplateSetting, duration_s: Optional[float] = None,
                 seed: Optional[int] = None) -> TagStreams:
        duration_s = self.options.duration_s if duration_s is None else duration_s
        seed = self.options.seed if seed is None else seed
        n_periods = self.n_periods(duration_s)
        probs = self.outcome_distribution(setting)
        logger.info(f"Generating {n_periods} periods for setting {setting.labels}")

        jitter_limit = JITTER_CLIP * self.options.jitter_ps
        stamps: List[List[np.ndarray]] = [[] for _ in range(N_CHANNELS)]
        for block, start in enumerate(range(0, n_periods, BLOCK_PERIODS)):
            rng = np.random.default_rng([seed, setting.setting_id, block])
            size = min(BLOCK_PERIODS, n_periods - start)
            outcomes = rng.choice(N_OUTCOMES, size=size, p=probs)
            for arm in range(N_CHANNELS):
                hit = np.nonzero((outcomes >> arm) & 1)[0]
                periods = (start + hit).astype(np.int64)
                jitter = np.clip(rng.normal(0.0, self.options.jitter_ps, size=hit.size),
                                 -jitter_limit, jitter_limit) if self.options.jitter_ps > 0 else 0.0
                t = periods * self.rep_period_ps + self.offsets[arm] + np.rint(jitter).astype(np.int64)
                stamps[arm].append(np.maximum(t, 0).astype(np.uint64))

        channels = [np.sort(np.concatenate(s)) if s else np.zeros(0, dtype=np.uint64) for s in stamps]
        count = int(sum(c.size for c in channels))
        header = TagStreamHeader(self.rep_period_ps, self.offsets, setting.setting_id, count)
        return TagStreams(header, channels)


def generate_stream(params: QDParams, setting: WaveplateSetting, duration_s: float, seed: int,
                    mc: Optional[MonteCarloConfig] = None, options: Optional[TagOptions] = None,
                    source_efficiency: float = 1.0) -> TagStreams:
    generator = TagGenerator(params, mc or MonteCarloConfig(), options or TagOptions(), source_efficiency)
    return generator.generate(setting, duration_s, seed)


# Counting

@dataclass(frozen=True)
class CoincidenceCounts:
    setting: WaveplateSetting
    coincidences: int
    singles: Tuple[int, int, int]
    n_periods: int


def _check_sorted(stamps: np.ndarray, channel: int):
    if stamps.size > 1 and np.any(stamps[1:] < stamps[:-1]):
        raise UnsortedStreamError(f"channel {channel} timestamps are not sorted")


def count_coincidences(streams: TagStreams, window_ps: float) -> CoincidenceCounts:
    """Three-fold coincidences after shifting each arm onto its pulse slot.

    A tag is assigned to the nearest pulse offset when it lies within
    window_ps / 2 of it; arm i only contributes tags assigned to pulse i,
    at most one per period.
    """
    header = streams.header
    if window_ps <= 0 or window_ps >= header.min_gap_ps:
        raise WindowError(f"window {window_ps} ps must be positive and below the {header.min_gap_ps} ps pulse gap")

    period = np.int64(header.rep_period_ps)
    offsets = np.asarray(header.pulse_offsets_ps, dtype=np.int64)
    matched = []
    singles = []
    last_period = 0
    for arm, raw in enumerate(streams.channels):
        stamps = np.asarray(raw, dtype=np.int64)
        _check_sorted(stamps, arm)
        singles.append(int(stamps.size))
        periods = stamps // period
        phase = stamps - periods * period
        distance = np.abs(phase[:, None] - offsets[None, :])
        nearest = np.argmin(distance, axis=1) if stamps.size else np.zeros(0, dtype=int)
        ok = (nearest == arm) & (distance[np.arange(stamps.size), nearest] <= window_ps / 2.0)
        matched.append(np.unique(periods[ok]))
        if stamps.size:
            last_period = max(last_period, int(periods[-1]) + 1)

    common = np.intersect1d(np.intersect1d(matched[0], matched[1]), matched[2])
    return CoincidenceCounts(streams.setting, int(common.size), tuple(singles), last_period)


def count_settings(all_streams: Sequence[TagStreams], window_ps: float) -> Dict[Tuple[str, str, str], int]:
    counts = {}
    for streams in all_streams:
        result = count_coincidences(streams, window_ps)
        counts[result.setting.labels] = counts.get(result.setting.labels, 0) + result.coincidences
    return counts


def estimate_conditionals(counts: Dict[Tuple[str, str, str], int]) -> Dict[str, ConditionalRatio]:
    """P(p2|p3) from coincidence counts with binomial standard errors"""
    estimates = {}
    for p3 in PHOTON3_LABELS:
        for p2 in PHOTON2_LABELS:
            a = counts.get((HERALD, p2, p3))
            b = counts.get((HERALD, ORTHOGONAL_LABEL[p2], p3))
            if a is None or b is None:
                continue
            n = a + b
            if n == 0:
                estimates[f"P({p2}2|{p3}3)"] = ConditionalRatio(None, None)
                continue
            p = a / n
            estimates[f"P({p2}2|{p3}3)"] = ConditionalRatio(p, float(np.sqrt(p * (1.0 - p) / n)))
    return estimates


def expected_conditionals(generator: TagGenerator) -> Dict[str, float]:
    """Conditional probabilities implied by the generator's own coincidence probabilities"""
    q = {s.labels: generator.coincidence_probability(s) for s in WAVEPLATE_SETTINGS}
    expected = {}
    for p3 in PHOTON3_LABELS:
        for p2 in PHOTON2_LABELS:
            a, b = q[(HERALD, p2, p3)], q[(HERALD, ORTHOGONAL_LABEL[p2], p3)]
            if a + b > 0:
                expected[f"P({p2}2|{p3}3)"] = a / (a + b)
    return expected
