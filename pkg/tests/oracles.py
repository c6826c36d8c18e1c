"""Independent reference implementations used only by the tests.

Each oracle takes the dumbest correct route: O(N^2) DFT matrices, 4-loop
convolution, exhaustive path enumeration for the sequence loss, plain
recursion for edit distance. They deliberately share no code with the
package internals they check.
"""

import itertools
import math

import numpy as np


def naive_dft_magnitude(signal: np.ndarray, n_fft: int) -> np.ndarray:
    """|DFT| of a zero-padded signal via the explicit O(N^2) matrix."""
    x = np.zeros(n_fft)
    x[:min(len(signal), n_fft)] = signal[:n_fft]
    n = np.arange(n_fft)
    k = np.arange(n_fft // 2 + 1)[:, None]
    real = np.cos(-2.0 * np.pi * k * n / n_fft) @ x
    imag = np.sin(-2.0 * np.pi * k * n / n_fft) @ x
    return np.sqrt(real ** 2 + imag ** 2)


def naive_mel_energies(signal: np.ndarray, sample_rate: int, n_fft: int,
                       n_mels: int, fmin: float, fmax: float,
                       frame_len: int, hop: int, pre_emphasis: float) -> np.ndarray:
    """Mel filterbank energies from first principles, one frame at a time."""
    emphasized = np.concatenate(([signal[0]], signal[1:] - pre_emphasis * signal[:-1]))
    n_frames = 1 + (len(emphasized) - frame_len) // hop
    window = np.array([0.54 - 0.46 * math.cos(2 * math.pi * i / (frame_len - 1))
                       for i in range(frame_len)])

    def mel(f):
        return 2595.0 * math.log10(1.0 + f / 700.0)

    def imel(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    corners = [imel(mel(fmin) + (mel(fmax) - mel(fmin)) * i / (n_mels + 1))
               for i in range(n_mels + 2)]
    bin_freqs = [k * sample_rate / n_fft for k in range(n_fft // 2 + 1)]
    weights = np.zeros((n_mels, len(bin_freqs)))
    for m in range(n_mels):
        lo, center, hi = corners[m], corners[m + 1], corners[m + 2]
        for k, f in enumerate(bin_freqs):
            if lo <= f <= center:
                weights[m, k] = (f - lo) / (center - lo)
            elif center < f <= hi:
                weights[m, k] = (hi - f) / (hi - center)

    out = np.zeros((n_frames, n_mels))
    for t in range(n_frames):
        frame = emphasized[t * hop:t * hop + frame_len] * window
        out[t] = weights @ naive_dft_magnitude(frame, n_fft)
    return out


def naive_deltas(c: np.ndarray, window: int) -> np.ndarray:
    """Element-by-element evaluation of the regression-delta formula."""
    t_frames, dim = c.shape
    out = np.zeros_like(c)
    denom = 2.0 * sum(n * n for n in range(1, window + 1))
    for t in range(t_frames):
        for d in range(dim):
            acc = 0.0
            for n in range(1, window + 1):
                ahead = c[min(t + n, t_frames - 1), d]
                behind = c[max(t - n, 0), d]
                acc += n * (ahead - behind)
            out[t, d] = acc / denom
    return out


def naive_conv2d(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Same-padded stride-1 cross-correlation with four explicit loops."""
    c_in, h, w = x.shape
    c_out, _, kh, kw = kernels.shape
    ph, pw = kh // 2, kw // 2
    out = np.zeros((c_out, h, w))
    for co in range(c_out):
        for i in range(h):
            for j in range(w):
                acc = bias[co]
                for ci in range(c_in):
                    for di in range(kh):
                        for dj in range(kw):
                            ii, jj = i + di - ph, j + dj - pw
                            if 0 <= ii < h and 0 <= jj < w:
                                acc += kernels[co, ci, di, dj] * x[ci, ii, jj]
                out[co, i, j] = acc
    return out


def collapse_path(path, blank: int) -> tuple:
    """CTC collapse: merge adjacent repeats, then remove blanks."""
    out = []
    prev = None
    for p in path:
        if p != prev and p != blank:
            out.append(p)
        prev = p
    return tuple(out)


def brute_force_ctc_logprob(grid: np.ndarray, target, blank: int) -> float:
    """-log of the summed probability over every path that collapses to target."""
    t_frames, n_classes = grid.shape
    target = tuple(target)
    total = 0.0
    for path in itertools.product(range(n_classes), repeat=t_frames):
        if collapse_path(path, blank) == target:
            prob = 1.0
            for t, p in enumerate(path):
                prob *= grid[t, p]
            total += prob
    return float("-inf") if total == 0.0 else math.log(total)


def recursive_edit_distance(ref, hyp) -> int:
    """Plain exponential recursion, no DP table."""
    if not ref:
        return len(hyp)
    if not hyp:
        return len(ref)
    if ref[0] == hyp[0]:
        return recursive_edit_distance(ref[1:], hyp[1:])
    return 1 + min(recursive_edit_distance(ref[1:], hyp),
                   recursive_edit_distance(ref, hyp[1:]),
                   recursive_edit_distance(ref[1:], hyp[1:]))


def all_segmentations(word: str, units) -> list[tuple[str, ...]]:
    """Every way to split a word into inventory spelling units."""
    if not word:
        return [()]
    out = []
    for unit in units:
        if word.startswith(unit):
            out.extend((unit,) + rest for rest in all_segmentations(word[len(unit):], units))
    return out


def greedy_segmentation_oracle(word: str, units) -> tuple[str, ...] | None:
    """The segmentation longest-match greedy must return, by enumeration.

    Among all complete segmentations, picks the one whose unit-length
    sequence is lexicographically greatest (longest first unit, then
    longest second, ...). Returns None when no segmentation exists.
    """
    segs = all_segmentations(word, units)
    if not segs:
        return None
    return max(segs, key=lambda seg: tuple(len(u) for u in seg))
