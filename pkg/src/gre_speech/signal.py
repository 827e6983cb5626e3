"""STFT/ISTFT, degradation synthesis, Griffin-Lim and WAV I/O."""

from __future__ import annotations

import json
import wave as _wave
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import signal as sps

from . import tensor as T
from .tensor import Tensor

SAMPLE_RATE = 16000
KINDS = ("DN", "DR", "BWE", "DN+DR", "DN+DR+BWE")


@dataclass(frozen=True)
class StftConfig:
    """25 ms periodic sqrt-Hann analysis/synthesis windows with a 25% hop."""

    sample_rate: int = SAMPLE_RATE
    win_len: int = 400
    hop: int = 100
    fft_size: int = 400

    def __post_init__(self):
        if self.fft_size != self.win_len or self.win_len % 2:
            raise ValueError("fft_size must equal an even win_len")
        if self.hop * 4 != self.win_len:
            raise ValueError("hop must be a quarter of the window")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def window(self) -> np.ndarray:
        return np.sqrt(sps.get_window("hann", self.win_len, fftbins=True))

    def envelope(self, frames: int) -> np.ndarray:
        """Overlap-added analysis*synthesis window power for ``frames`` frames."""
        w2 = np.tile(self.window**2, (frames, 1))
        return T._ola(w2, self.hop, (frames - 1) * self.hop + self.win_len)


DEFAULT_STFT = StftConfig()


def _wrap(x):
    return (x, False) if isinstance(x, Tensor) else (Tensor(np.asarray(x, dtype=float)), True)


def stft(wave, config: StftConfig = DEFAULT_STFT):
    """One-sided STFT ``[T, F]`` with centered frames (zero padding of win/2 each side).

    Returns a Tensor when given one (differentiable), otherwise an ndarray.
    """
    x, raw = _wrap(wave)
    if x.ndim != 1:
        raise ValueError(f"stft expects a mono 1-D signal, got shape {x.shape}")
    if x.shape[0] < config.win_len:
        raise ValueError(f"signal of length {x.shape[0]} is shorter than one window ({config.win_len})")
    half = config.win_len // 2
    frames = T.frame(T.pad(x, ((half, half),)), config.win_len, config.hop)
    spec = T.rfft(frames * Tensor(config.window[None, :]))
    return spec.data if raw else spec


def istft(spec, length: int, config: StftConfig = DEFAULT_STFT):
    """Least-squares inverse of :func:`stft`, trimmed to ``length`` samples."""
    s = spec if isinstance(spec, Tensor) else Tensor(np.asarray(spec, dtype=complex))
    frames = T.irfft(s, config.fft_size) * Tensor(config.window[None, :])
    y = T.overlap_add(frames, config.hop)
    env = config.envelope(s.shape[0])
    y = y * Tensor(np.where(env > 1e-10, 1.0 / np.maximum(env, 1e-10), 0.0))
    half = config.win_len // 2
    if half + length > y.shape[0]:
        raise ValueError(f"{s.shape[0]} frames cannot cover {length} samples")
    y = y[half : half + length]
    return y if isinstance(spec, Tensor) else y.data


def num_frames(length: int, config: StftConfig = DEFAULT_STFT) -> int:
    return 1 + length // config.hop


def pad_to_hop(wave: np.ndarray, config: StftConfig = DEFAULT_STFT) -> np.ndarray:
    extra = (-len(wave)) % config.hop
    return np.concatenate([wave, np.zeros(extra)]) if extra else np.asarray(wave, dtype=float)


def snr_db(ref: np.ndarray, est: np.ndarray) -> float:
    err = np.sum((ref - est) ** 2)
    return float("inf") if err == 0 else float(10 * np.log10(np.sum(ref**2) / err))


# --------------------------------------------------------------------------
# degradations


@dataclass
class DegradationSpec:
    kind: str
    snr_db: float = 5.0
    cutoff_hz: int = 4000
    rir: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown degradation kind {self.kind!r}; expected one of {KINDS}")
        if not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")
        if self.cutoff_hz not in (2000, 4000):
            raise ValueError("cutoff_hz must be 2000 or 4000")
        if self.rir is not None:
            self.rir = np.asarray(self.rir, dtype=float)

    @property
    def steps(self) -> list[str]:
        return [s for s in ("DR", "DN", "BWE") if s in self.kind.split("+")]

    def to_json(self) -> str:
        d = asdict(self)
        d["rir"] = None if self.rir is None else self.rir.tolist()
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DegradationSpec":
        d = json.loads(text)
        allowed = {"kind", "snr_db", "cutoff_hz", "rir"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown degradation fields {sorted(unknown)}")
        return cls(**d)


def mix_at_snr(clean: np.ndarray, noise: np.ndarray, snr: float) -> np.ndarray:
    p_clean = np.mean(clean**2)
    if p_clean == 0:
        raise ValueError("cannot set an SNR against a silent clean signal")
    noise = np.resize(noise, clean.shape)
    p_noise = np.mean(noise**2)
    if p_noise == 0:
        raise ValueError("noise source is silent")
    return clean + noise * np.sqrt(p_clean / (p_noise * 10 ** (snr / 10)))


def reverberate(x: np.ndarray, rir: np.ndarray) -> np.ndarray:
    return sps.fftconvolve(x, rir)[: len(x)] if len(rir) > 1 else x * rir[0]


def _lowpass(cutoff_hz: float, fs: int):
    # 8th-order elliptic, passband edge just below the cutoff, >= 60 dB stop band
    return sps.ellip(8, 0.1, 70, 0.9 * cutoff_hz, btype="low", fs=fs, output="sos")


def band_limit(x: np.ndarray, cutoff_hz: int, fs: int = SAMPLE_RATE) -> np.ndarray:
    """Down-sample to an effective rate of ``2*cutoff_hz`` and back up to ``fs``."""
    factor = fs // (2 * cutoff_hz)
    sos = _lowpass(cutoff_hz, fs)
    low = sps.sosfiltfilt(sos, x)[::factor]
    up = sps.resample_poly(low, factor, 1)[: len(x)]
    if len(up) < len(x):
        up = np.concatenate([up, np.zeros(len(x) - len(up))])
    return sps.sosfiltfilt(sos, up)


def degrade(clean: np.ndarray, spec: DegradationSpec, noise: np.ndarray | None = None):
    """Apply DR -> DN -> BWE (whichever ``spec.kind`` names); returns (degraded, clean)."""
    clean = np.asarray(clean, dtype=float)
    y = clean
    for step in spec.steps:
        if step == "DR":
            if spec.rir is None:
                raise ValueError("dereverberation needs an rir")
            y = reverberate(y, spec.rir)
        elif step == "DN":
            if noise is None:
                raise ValueError("denoising needs a noise source")
            y = mix_at_snr(y, noise, spec.snr_db)
        else:
            y = band_limit(y, spec.cutoff_hz)
    return y, clean


def make_rir(t60_ms: float, length: int, seed: int = 0, fs: int = SAMPLE_RATE, tail_gain: float = 0.3) -> np.ndarray:
    """Unit direct path followed by exponentially decaying white noise.

    The amplitude envelope falls by 60 dB (energy by 60 dB) after ``t60_ms``.
    """
    if t60_ms <= 0:
        raise ValueError("t60_ms must be positive")
    rng = np.random.default_rng(seed)
    n = np.arange(length)
    decay = np.exp(-np.log(1000.0) * n / (t60_ms * 1e-3 * fs))
    rir = tail_gain * rng.standard_normal(length) * decay
    rir[0] = 1.0
    return rir


def estimate_t60(rir: np.ndarray, fs: int = SAMPLE_RATE) -> float:
    """T60 in ms from a -5..-35 dB line fit of the tail's Schroeder decay curve."""
    tail = rir[1:] ** 2
    edc = np.cumsum(tail[::-1])[::-1]
    edc_db = 10 * np.log10(edc / edc[0])
    sel = (edc_db <= -5) & (edc_db >= -35)
    t = np.nonzero(sel)[0] / fs
    slope, _ = np.polyfit(t, edc_db[sel], 1)
    return float(-60.0 / slope * 1e3)


# --------------------------------------------------------------------------
# phase retrieval baseline


def griffin_lim(mag: np.ndarray, iters: int, length: int | None = None, config: StftConfig = DEFAULT_STFT, history=None):
    """Griffin-Lim from zero phase; returns the final phase ``[T, F]``.

    ``history``, when a list, receives the consistency residual
    ``|| |STFT(ISTFT(S))| - mag ||`` of each iterate before its projection.
    """
    if iters < 0:
        raise ValueError("iters must be non-negative")
    mag = np.asarray(mag, dtype=float)
    length = length if length is not None else (mag.shape[0] - 1) * config.hop
    phase = np.zeros_like(mag)
    for _ in range(iters):
        rebuilt = stft(istft(mag * np.exp(1j * phase), length, config), config)
        if history is not None:
            history.append(float(np.linalg.norm(np.abs(rebuilt) - mag)))
        phase = np.angle(rebuilt)
    return phase


# --------------------------------------------------------------------------
# WAV I/O


def read_wav(path) -> np.ndarray:
    """16-bit PCM mono 16 kHz WAV -> float samples in [-1, 1)."""
    with _wave.open(str(path), "rb") as f:
        if f.getnchannels() != 1 or f.getsampwidth() != 2 or f.getframerate() != SAMPLE_RATE:
            raise ValueError(
                f"{path}: need 16-bit PCM mono at {SAMPLE_RATE} Hz, got {f.getnchannels()} ch, "
                f"{8 * f.getsampwidth()} bit, {f.getframerate()} Hz"
            )
        raw = f.readframes(f.getnframes())
    return np.frombuffer(raw, dtype="<i2").astype(float) / 32768.0


def write_wav(path, x: np.ndarray) -> None:
    pcm = np.clip(np.round(np.asarray(x) * 32768.0), -32768, 32767).astype("<i2")
    with _wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(SAMPLE_RATE)
        f.writeframes(pcm.tobytes())
