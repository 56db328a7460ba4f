"""Bitstring sample handling, covariance, and coarse-grained model testing.

Site-resolved measurements arrive as 0/1 bitstrings (0 = spin up along z).
This module stores them, builds spin covariances, and tests sample sets
against a reference distribution in a coarse-grained space of Hamming
"bubbles": random reference points swallow their m nearest remaining
neighbors until the reference is exhausted, a radius-n catch-all makes the
assignment total, and a chi-square statistic on the bubble occupancies
gives the p-value.
"""

from __future__ import annotations

import math
import re
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincc, gammaln

_TXT_HEADER = re.compile(
    r"#\s*samples\s+n=(\d+)\s+m=(\d+)\s+source=(\S+)\s+seed=(\S+)\s*$")
_PACKED_MAGIC = b"ION2DSMP"


@dataclass
class SampleSet:
    """A set of measured bitstrings: (M, n) array of 0/1 values.

    metadata holds free-form provenance; "source" and "seed" are written
    into file headers.
    """

    bits: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 2:
            raise ValueError(f"bits must be 2-D (shots, sites), got {self.bits.shape}")
        if self.bits.size and self.bits.max() > 1:
            raise ValueError("bits must contain only 0 and 1")

    @property
    def n(self) -> int:
        return self.bits.shape[1]

    @property
    def m(self) -> int:
        return self.bits.shape[0]

    @classmethod
    def from_spins(cls, spins, metadata=None) -> "SampleSet":
        """Convert +-1 spin configurations (+1 -> bit 0)."""
        spins = np.asarray(spins)
        return cls(((1 - spins) // 2).astype(np.uint8), metadata or {})

    def to_spins(self) -> np.ndarray:
        """Back to +-1 (bit 0 -> +1), as int8."""
        return (1 - 2 * self.bits.astype(np.int8)).astype(np.int8)

    # -- text format: header line then one '0'/'1' string per shot

    def save_txt(self, path):
        source = str(self.metadata.get("source", "unknown"))
        seed = str(self.metadata.get("seed", "none"))
        with open(path, "w") as fh:
            fh.write(f"# samples n={self.n} m={self.m} source={source} seed={seed}\n")
            for row in self.bits:
                fh.write("".join("1" if b else "0" for b in row))
                fh.write("\n")

    @classmethod
    def load_txt(cls, path) -> "SampleSet":
        with open(path) as fh:
            header = fh.readline()
            match = _TXT_HEADER.match(header)
            if not match:
                raise ValueError(f"bad sample header line: {header!r}")
            n, m = int(match.group(1)), int(match.group(2))
            meta = {"source": match.group(3), "seed": match.group(4)}
            rows = np.empty((m, n), dtype=np.uint8)
            for i in range(m):
                line = fh.readline().strip()
                if len(line) != n or set(line) - {"0", "1"}:
                    raise ValueError(f"bad sample line {i}: {line!r}")
                rows[i] = np.frombuffer(line.encode(), dtype=np.uint8) - ord("0")
        return cls(rows, meta)

    # -- packed binary format: fixed header then rows of little-endian
    #    64-bit words, bit (64*w + b) of a row = site 64*w + b.

    def save_packed(self, path):
        packed = pack_bits(self.bits)
        seed = self.metadata.get("seed")
        try:
            seed_val = int(seed)
        except (TypeError, ValueError):
            seed_val = -1
        with open(path, "wb") as fh:
            fh.write(_PACKED_MAGIC)
            fh.write(struct.pack("<IIIq", 1, self.n, self.m, seed_val))
            fh.write(packed.astype("<u8").tobytes())

    @classmethod
    def load_packed(cls, path) -> "SampleSet":
        with open(path, "rb") as fh:
            magic = fh.read(8)
            if magic != _PACKED_MAGIC:
                raise ValueError(f"not a packed sample file (magic {magic!r})")
            version, n, m, seed_val = struct.unpack("<IIIq", fh.read(20))
            if version != 1:
                raise ValueError(f"unsupported packed sample version {version}")
            words_per_row = (n + 63) // 64
            raw = np.frombuffer(fh.read(), dtype="<u8")
            if raw.size != m * words_per_row:
                raise ValueError("packed sample payload has the wrong size")
            words = raw.reshape(m, words_per_row)
        bits = unpack_bits(words, n)
        meta = {} if seed_val == -1 else {"seed": seed_val}
        return cls(bits, meta)


def _as_bits(samples) -> np.ndarray:
    if isinstance(samples, SampleSet):
        return samples.bits
    return np.asarray(samples, dtype=np.uint8)


def pack_bits(bits) -> np.ndarray:
    """Pack (M, n) 0/1 rows into (M, ceil(n/64)) little-endian words."""
    bits = _as_bits(bits)
    m, n = bits.shape
    words_per_row = max((n + 63) // 64, 1)
    by = np.packbits(bits, axis=1, bitorder="little")
    padded = np.zeros((m, words_per_row * 8), dtype=np.uint8)
    padded[:, : by.shape[1]] = by
    return padded.view("<u8").reshape(m, words_per_row).astype(np.uint64)


def unpack_bits(words, n: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`."""
    words = np.asarray(words, dtype="<u8")
    by = words.view(np.uint8).reshape(words.shape[0], -1)
    bits = np.unpackbits(by, axis=1, bitorder="little")
    return bits[:, :n].astype(np.uint8)


def hamming_distances(center_words, words) -> np.ndarray:
    """Hamming distance from one packed row to many packed rows."""
    x = np.bitwise_xor(center_words[None, :], words)
    return np.bitwise_count(x).sum(axis=1).astype(np.int64)


def hamming_distance(a, b) -> int:
    """Hamming distance between two unpacked bit rows."""
    a = np.atleast_2d(_as_bits(np.asarray(a)))
    b = np.atleast_2d(_as_bits(np.asarray(b)))
    return int(hamming_distances(pack_bits(a)[0], pack_bits(b))[0])


def covariance(samples, assume_z2: bool = False) -> np.ndarray:
    """Spin covariance C_ij = <Z_i Z_j> - <Z_i><Z_j> over the sample set.

    With ``assume_z2`` the mean subtraction is dropped (global spin-flip
    symmetry forces <Z_i> = 0), leaving the plain second moment
    (1/M) sum_m s_i s_j whose diagonal is 1.
    """
    bits = _as_bits(samples)
    if bits.shape[0] < 1:
        raise ValueError("need at least one sample")
    s = 1.0 - 2.0 * bits.astype(np.float64)
    c = (s.T @ s) / s.shape[0]
    if not assume_z2:
        mean = s.mean(axis=0)
        c = c - np.outer(mean, mean)
    return c


# ---------------------------------------------------------------------------
# Hamming bubbles


@dataclass
class Bubble:
    """One coarse-graining cell: center bitstring, Hamming radius, and the
    number of reference points it swallowed at construction."""

    center: np.ndarray
    radius: int
    ref_count: int


@dataclass
class BubblePartition:
    """Ordered bubbles; assignment sends a bitstring to the first bubble
    whose radius covers it.  The last bubble has radius n (catch-all), so
    assignment is total."""

    bubbles: list
    n: int

    @property
    def n_bubbles(self) -> int:
        return len(self.bubbles)

    def ref_counts(self) -> np.ndarray:
        return np.asarray([b.ref_count for b in self.bubbles], dtype=np.int64)


def build_bubbles(reference, m: int, seed: int) -> BubblePartition:
    """Partition reference bitstrings into Hamming bubbles of >= m points.

    Repeatedly: pick a uniformly random remaining reference point as a
    center, take the smallest radius enclosing at least m remaining points
    (all of them when fewer than m remain; the center counts toward m),
    remove everything inside, and record the bubble.  A radius-n catch-all
    centered on the all-zeros string is appended so that assignment of
    arbitrary bitstrings is total; it holds zero reference points.
    """
    bits = _as_bits(reference)
    total, n = bits.shape
    if total < 1:
        raise ValueError("reference sample set is empty")
    if m < 1:
        raise ValueError(f"m must be at least 1, got {m}")
    packed = pack_bits(bits)
    rng = np.random.default_rng(seed)
    remaining = np.arange(total)
    bubbles = []
    while remaining.size:
        pick = remaining[rng.integers(remaining.size)]
        dists = hamming_distances(packed[pick], packed[remaining])
        if remaining.size <= m:
            radius = int(dists.max())
        else:
            radius = int(np.partition(dists, m - 1)[m - 1])
        inside = dists <= radius
        bubbles.append(Bubble(center=bits[pick].copy(), radius=radius,
                              ref_count=int(inside.sum())))
        remaining = remaining[~inside]
    bubbles.append(Bubble(center=np.zeros(n, dtype=np.uint8), radius=n, ref_count=0))
    return BubblePartition(bubbles=bubbles, n=n)


def assign_and_count(partition: BubblePartition, samples) -> np.ndarray:
    """Occupancy counts of each bubble over a sample set.

    Each sample goes to the first (construction-order) bubble whose radius
    covers it; the catch-all guarantees every sample lands somewhere.
    """
    bits = _as_bits(samples)
    if bits.shape[1] != partition.n:
        raise ValueError(
            f"samples have {bits.shape[1]} sites but partition expects {partition.n}")
    packed = pack_bits(bits)
    n_b = partition.n_bubbles
    counts = np.zeros(n_b, dtype=np.int64)
    unassigned = np.arange(bits.shape[0])
    for idx, bubble in enumerate(partition.bubbles):
        if unassigned.size == 0:
            break
        center_words = pack_bits(bubble.center[None, :])[0]
        d = hamming_distances(center_words, packed[unassigned])
        inside = d <= bubble.radius
        counts[idx] = int(inside.sum())
        unassigned = unassigned[~inside]
    return counts


def expected_probabilities(partition: BubblePartition,
                           merge_empty_catchall: bool = True):
    """Reference occupancy probabilities per bubble.

    Returns (probs, merged) where ``merged`` says whether a zero-count
    catch-all was folded into the last content bubble; when it was, counts
    from :func:`assign_and_count` must be folded the same way (see
    :func:`merge_counts`).
    """
    counts = partition.ref_counts().astype(float)
    merged = False
    if merge_empty_catchall and counts.size >= 2 and counts[-1] == 0:
        counts = counts[:-1].copy()
        merged = True
    total = counts.sum()
    if total <= 0:
        raise ValueError("partition holds no reference points")
    return counts / total, merged


def merge_counts(counts, merged: bool) -> np.ndarray:
    """Fold catch-all occupancy into the last content bubble when merged."""
    counts = np.asarray(counts, dtype=np.int64)
    if not merged:
        return counts
    out = counts[:-1].copy()
    out[-1] += counts[-1]
    return out


# ---------------------------------------------------------------------------
# chi-square


@dataclass
class Chi2Result:
    """Goodness-of-fit result; log10_p stays finite when p underflows."""

    chi2: float
    dof: int
    p_value: float
    log10_p: float

    def to_dict(self) -> dict:
        return {"chi2": self.chi2, "dof": self.dof,
                "p_value": self.p_value, "log10_p": self.log10_p}


def _log10_sf(chi2: float, dof: int) -> float:
    """log10 of the chi-square survival function, stable for tiny p.

    Above the underflow floor this is just log10(gammaincc); below it the
    large-x asymptotic series for the upper incomplete gamma function
    Q(a, x) ~ x^(a-1) e^-x / Gamma(a) * sum_k (a-1)...(a-k) / x^k is used.
    """
    a = 0.5 * dof
    x = 0.5 * chi2
    p = float(gammaincc(a, x))
    if p > 1e-300:
        return math.log10(p)
    term = 1.0
    series = 1.0
    for k in range(1, 60):
        term *= (a - k) / x
        series += term
        if abs(term) < 1e-17 * abs(series):
            break
    log_q = -x + (a - 1.0) * math.log(x) - float(gammaln(a)) + math.log(series)
    return log_q / math.log(10.0)


def chi2_test(observed, expected_probs, m_total: int | None = None) -> Chi2Result:
    """Pearson chi-square of observed counts against expected probabilities.

    chi2 = sum (O_b - E_b)^2 / E_b with E_b = M p_b and dof = bins - 1;
    the p-value is the upper tail of the chi-square distribution via the
    regularized incomplete gamma function.  Probabilities must sum to 1
    within 1e-9.  A zero expected count is an error; expected counts below
    1 are an error and below 5 draw a warning (the chi-square approximation
    degrades there).
    """
    observed = np.asarray(observed, dtype=np.int64)
    probs = np.asarray(expected_probs, dtype=float)
    if observed.ndim != 1 or probs.shape != observed.shape:
        raise ValueError("observed counts and expected probabilities must be "
                         "1-D and the same length")
    if observed.size < 2:
        raise ValueError("need at least two bins")
    if np.any(observed < 0):
        raise ValueError("observed counts must be non-negative")
    if np.any(probs < 0):
        raise ValueError("expected probabilities must be non-negative")
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError(f"expected probabilities sum to {probs.sum()!r}, not 1")
    if m_total is None:
        m_total = int(observed.sum())
    elif int(observed.sum()) != int(m_total):
        raise ValueError(
            f"observed counts sum to {observed.sum()} but m_total={m_total}")
    expected = m_total * probs
    if np.any(expected == 0):
        raise ValueError("zero expected count in a bin; merge or drop it first")
    if np.any(expected < 1):
        raise ValueError(
            f"smallest expected count is {expected.min():.3g} < 1; the "
            "chi-square approximation is invalid")
    if np.any(expected < 5):
        warnings.warn(
            f"expected counts below 5 (min {expected.min():.3g}); chi-square "
            "p-values are approximate", RuntimeWarning, stacklevel=2)
    chi2 = float(((observed - expected) ** 2 / expected).sum())
    dof = observed.size - 1
    p = float(gammaincc(0.5 * dof, 0.5 * chi2))
    return Chi2Result(chi2=chi2, dof=dof, p_value=p,
                      log10_p=_log10_sf(chi2, dof))


def compare_to_reference(partition: BubblePartition, samples,
                         merge_empty_catchall: bool = True) -> Chi2Result:
    """Assign samples to bubbles and chi-square them against the reference
    occupancies (zero-count catch-all merged into the last content bubble)."""
    probs, merged = expected_probabilities(partition, merge_empty_catchall)
    counts = merge_counts(assign_and_count(partition, samples), merged)
    return chi2_test(counts, probs)
