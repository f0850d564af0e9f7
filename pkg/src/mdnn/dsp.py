"""MFCC front-end: WAV ingestion, STFT, Mel filterbank, log, DCT-II.

Fixed conventions (golden values depend on them):
  - 16 kHz mono PCM s16le input only;
  - 1024-sample (64 ms) periodic Hann windows, hop 256 (75% overlap);
  - radix-2 FFT, one-sided 513 bins; a direct O(N^2) DFT stays in the module
    as the comparison oracle;
  - 80 triangular HTK-mel filters from 0 to 8000 Hz, peak-normalized to 1;
  - log floor 1e-10, orthonormal DCT-II, first 13 coefficients kept.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InputError, UnsupportedFormatError

SAMPLE_RATE = 16000
WINDOW_LEN = 1024
HOP = 256
FFT_LEN = 1024
N_BINS = FFT_LEN // 2 + 1
N_MEL_FILTERS = 80
N_MFCC = 13
F_MIN = 0.0
F_MAX = 8000.0
LOG_FLOOR = 1e-10
REFERENCE_CLIP_SAMPLES = 199936  # (778 - 1) * 256 + 1024
REFERENCE_FRAMES = 778


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray  # float64 in [-1, 1]
    sample_rate_hz: int = SAMPLE_RATE


@dataclass(frozen=True)
class StftSpec:
    window_len_samples: int = WINDOW_LEN
    hop_samples: int = HOP
    fft_len: int = FFT_LEN


def load_wav(path) -> AudioClip:
    """Parse a RIFF/WAVE file: PCM 16-bit little-endian, mono, 16 kHz only."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise UnsupportedFormatError("not a RIFF/WAVE file")
    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        cid = blob[pos:pos + 4]
        (size,) = struct.unpack_from("<I", blob, pos + 4)
        body = blob[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            fmt = body
        elif cid == b"data":
            data = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned
    if fmt is None or len(fmt) < 16:
        raise UnsupportedFormatError("missing fmt chunk")
    if data is None:
        raise UnsupportedFormatError("missing data chunk")
    audio_format, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if audio_format != 1 or bits != 16:
        raise UnsupportedFormatError(
            f"codec: expected PCM 16-bit, got format={audio_format}, bits={bits}")
    if channels != 1:
        raise UnsupportedFormatError(f"channel count: expected mono, got {channels}")
    if rate != SAMPLE_RATE:
        raise UnsupportedFormatError(f"sample rate: expected {SAMPLE_RATE}, got {rate}")
    ints = np.frombuffer(data[:len(data) // 2 * 2], dtype="<i2")
    return AudioClip(samples=ints.astype(np.float64) / 32768.0, sample_rate_hz=rate)


def write_wav(path, clip: AudioClip):
    """Write PCM s16le mono; inverse of load_wav up to quantization."""
    ints = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype("<i2")
    data = ints.tobytes()
    with open(path, "wb") as f:
        f.write(b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE")
        f.write(b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, clip.sample_rate_hz,
                                      clip.sample_rate_hz * 2, 2, 16))
        f.write(b"data" + struct.pack("<I", len(data)) + data)


def hann_window(n: int = WINDOW_LEN) -> np.ndarray:
    # periodic variant: w[k] = 0.5 * (1 - cos(2 pi k / n))
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / n))


def n_frames_for(length: int, spec: StftSpec = StftSpec()) -> int:
    return (length - spec.window_len_samples) // spec.hop_samples + 1


def frame_and_window(clip: AudioClip, spec: StftSpec = StftSpec()) -> np.ndarray:
    """Slice into hopped frames and apply the Hann window -> (n_frames, 1024)."""
    x = np.asarray(clip.samples, dtype=np.float64)
    if x.size < spec.window_len_samples:
        raise InputError(
            f"clip of {x.size} samples shorter than one {spec.window_len_samples}-sample window")
    n = n_frames_for(x.size, spec)
    idx = np.arange(spec.window_len_samples)[None, :] + spec.hop_samples * np.arange(n)[:, None]
    return x[idx] * hann_window(spec.window_len_samples)[None, :]


def _bit_reverse_permutation(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft_radix2(frames: np.ndarray) -> np.ndarray:
    """Iterative radix-2 DIT FFT over the last axis (power-of-two length)."""
    x = np.asarray(frames, dtype=np.complex128)
    n = x.shape[-1]
    if n & (n - 1) or n < 2:
        raise DimensionError(f"radix-2 FFT needs a power-of-two length, got {n}")
    x = np.ascontiguousarray(x[..., _bit_reverse_permutation(n)])
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(-2j * np.pi * np.arange(half) / size)
        v = x.reshape(x.shape[:-1] + (n // size, size))
        t = v[..., half:] * tw
        v[..., half:] = v[..., :half] - t
        v[..., :half] += t
        size *= 2
    return x


def fft_1024(frame: np.ndarray) -> np.ndarray:
    """One-sided spectrum, bins 0..512, of a length-1024 real frame (or batch)."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape[-1] != FFT_LEN:
        raise DimensionError(f"expected length {FFT_LEN} frames, got {frame.shape[-1]}")
    return fft_radix2(frame)[..., :N_BINS]


def dft_direct(frame: np.ndarray) -> np.ndarray:
    """O(N^2) one-sided DFT; oracle for fft_1024."""
    frame = np.asarray(frame, dtype=np.float64)
    n = frame.shape[-1]
    k = np.arange(N_BINS)[:, None]
    t = np.arange(n)[None, :]
    basis = np.exp(-2j * np.pi * k * t / n)
    return frame @ basis.T


def power_spectrogram(frames: np.ndarray) -> np.ndarray:
    """|STFT|^2 per windowed frame -> (n_frames, 513)."""
    spec = fft_1024(np.atleast_2d(frames))
    return (spec.real ** 2 + spec.imag ** 2)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class MelBank:
    matrix: np.ndarray  # (80, 513)
    edges_hz: np.ndarray  # (82,)


def build_mel_bank() -> MelBank:
    """80 triangular filters, mel-equidistant edges on [0, 8000] Hz, peak 1."""
    edges = mel_to_hz(np.linspace(hz_to_mel(F_MIN), hz_to_mel(F_MAX), N_MEL_FILTERS + 2))
    bin_hz = np.arange(N_BINS) * (SAMPLE_RATE / FFT_LEN)
    bank = np.zeros((N_MEL_FILTERS, N_BINS))
    for i in range(N_MEL_FILTERS):
        lo, mid, hi = edges[i], edges[i + 1], edges[i + 2]
        up = (bin_hz - lo) / (mid - lo)
        down = (hi - bin_hz) / (hi - mid)
        bank[i] = np.clip(np.minimum(up, down), 0.0, None)
    return MelBank(matrix=bank, edges_hz=edges)


def dct2_matrix(n: int = N_MEL_FILTERS) -> np.ndarray:
    """Orthonormal DCT-II matrix D with y = D @ x."""
    k = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    d = np.cos(np.pi * (2 * m + 1) * k / (2 * n))
    d[0] *= np.sqrt(1.0 / n)
    d[1:] *= np.sqrt(2.0 / n)
    return d


_DCT80 = dct2_matrix(N_MEL_FILTERS)


def dct2_ortho(x: np.ndarray) -> np.ndarray:
    """Orthonormal DCT-II of a length-80 vector (or batch over the last axis)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != N_MEL_FILTERS:
        raise DimensionError(f"expected length {N_MEL_FILTERS}, got {x.shape[-1]}")
    return x @ _DCT80.T


def mfcc(clip: AudioClip, spec: StftSpec = StftSpec(),
         bank: MelBank | None = None) -> np.ndarray:
    """Full pipeline -> (n_frames, 13, 1); (778, 13, 1) at the reference length."""
    if bank is None:
        bank = build_mel_bank()
    frames = frame_and_window(clip, spec)
    power = power_spectrogram(frames)
    mel = power @ bank.matrix.T
    logmel = np.log(mel + LOG_FLOOR)
    coeffs = dct2_ortho(logmel)[:, :N_MFCC]
    return coeffs[:, :, None]
