"""Training losses (non-adversarial subset) and phase/waveform metrics."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import signal as sig
from . import tensor as T
from .tensor import ShapeError, Tensor

SI_SDR_CAP = 120.0
KINDS = ("DN", "USE", "PR")


def anti_wrap(x):
    """|x - 2*pi*round(x / 2*pi)|; Tensor in, Tensor out, otherwise ndarray."""
    if isinstance(x, Tensor):
        return T.anti_wrap(x)
    x = np.asarray(x, dtype=float)
    return np.abs(x - 2.0 * np.pi * np.round(x / (2.0 * np.pi)))


def _t(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=float))


def _same_shape(a: Tensor, b: Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shapes {a.shape} and {b.shape} differ")


def _diff(x: Tensor, axis: int) -> Tensor:
    if axis == 0:
        return x[1:] - x[:-1]
    return x[:, 1:] - x[:, :-1]


def _diff_padded(x: np.ndarray | Tensor, axis: int):
    """Backward difference with a zero predecessor, so the output keeps x's shape."""
    if isinstance(x, Tensor):
        zero = Tensor(np.zeros((1, x.shape[1]) if axis == 0 else (x.shape[0], 1)))
        prev = T.concat([zero, x[:-1]], 0) if axis == 0 else T.concat([zero, x[:, :-1]], 1)
        return x - prev
    return np.diff(x, axis=axis, prepend=0.0)


# --------------------------------------------------------------------------
# phase losses


@dataclass
class PhaseLossTerms:
    ip: Tensor
    gd: Tensor
    iaf: Tensor
    flags: list[str] = field(default_factory=list)

    @property
    def total(self) -> Tensor:
        return (self.ip + self.gd + self.iaf) / 3.0


def phase_loss_terms(pred, target) -> PhaseLossTerms:
    """Instantaneous phase, group delay (along F) and angular frequency (along T) errors."""
    p, q = _t(pred), _t(target)
    _same_shape(p, q, "phase_loss")
    if p.ndim != 2:
        raise ShapeError(f"phase_loss expects [T, F] angles, got {p.shape}")
    d = p - q
    flags = []
    ip = T.mean(anti_wrap(d))
    if d.shape[1] >= 2:
        gd = T.mean(anti_wrap(_diff(d, 1)))
    else:
        gd = Tensor(0.0)
        flags.append("group_delay_skipped_F<2")
    if d.shape[0] >= 2:
        iaf = T.mean(anti_wrap(_diff(d, 0)))
    else:
        iaf = Tensor(0.0)
        flags.append("angular_frequency_skipped_T<2")
    for f in flags:
        warnings.warn(f"phase_loss: {f}", RuntimeWarning, stacklevel=3)
    return PhaseLossTerms(ip, gd, iaf, flags)


def phase_loss(pred, target) -> Tensor:
    return phase_loss_terms(pred, target).total


def _weights(mag) -> np.ndarray:
    w = np.asarray(mag.data if isinstance(mag, Tensor) else mag, dtype=float)
    total = w.sum()
    if not total > 0:
        raise ValueError("magnitude weights are all zero")
    return w / total


def omni_loss(pred, target, mag_weights) -> Tensor:
    """Magnitude-weighted IP/GD/IAF anti-wrapped error, directions averaged.

    ``mag_weights`` is normalized to sum 1 here. Differences use a zero
    predecessor at the first row/column so every cell carries all three terms.
    """
    p, q = _t(pred), _t(target)
    _same_shape(p, q, "omni_loss")
    w = Tensor(_weights(mag_weights))
    _same_shape(p, w, "omni_loss weights")
    d = p - q
    parts = [d, _diff_padded(d, 1), _diff_padded(d, 0)]
    return sum((T.sum(anti_wrap(x) * w) for x in parts), Tensor(0.0)) / 3.0


# --------------------------------------------------------------------------
# composite objective


@dataclass(frozen=True)
class LossWeights:
    w_mag: float = 0.9
    w_pha: float = 0.3
    w_com: float = 0.2
    w_metric: float = 0.05
    w_con: float = 0.1
    w_time: float = 0.2
    w_mpd: float = 0.05
    w_omni: float = 2e4
    w_pr_mpd: float = 1.0

    def __post_init__(self):
        for name, value in vars(self).items():
            if value < 0:
                raise ValueError(f"loss weight {name} must be non-negative")


@dataclass
class Prediction:
    """Compressed magnitude, unit phase, waveform and the compressed re-analysed spectrum."""

    mag: Tensor
    pha: Tensor
    wave: Tensor | None = None
    respec: Tensor | None = None

    @property
    def spectrum(self) -> Tensor:
        return self.mag * self.pha


@dataclass
class Target:
    mag: np.ndarray  # compressed magnitude
    angle: np.ndarray  # radians
    wave: np.ndarray | None = None

    @property
    def spectrum(self) -> np.ndarray:
        return self.mag * np.exp(1j * self.angle)


def compress(spec, alpha: float = 0.3):
    """``|S|**alpha * S/|S|`` for a Tensor spectrum."""
    return T.power(T.modulus(spec) + 1e-12, alpha) * T.unit(spec)


def build_prediction(mag: Tensor, pha: Tensor, length: int, config: sig.StftConfig = sig.DEFAULT_STFT, alpha: float = 0.3) -> Prediction:
    """Decompress, resynthesize and re-analyse so every composite term is available."""
    spec = T.power(mag, 1.0 / alpha) * pha
    wave = sig.istft(spec, length, config)
    respec = compress(sig.stft(wave, config), alpha)
    return Prediction(mag, pha, wave, respec)


def adversarial_term() -> Tensor:
    """Discriminator losses are out of scope; the slot evaluates to 0."""
    return Tensor(0.0)


@dataclass
class LossResult:
    total: Tensor
    terms: dict[str, float]


def _mse(a: Tensor, b) -> Tensor:
    b = _t(b) if not isinstance(b, Tensor) else b
    _same_shape(a, b, "mse")
    return T.mean(T.abs2(a - b))


def composite_loss(kind: str, pred: Prediction, target: Target, weights: LossWeights = LossWeights()) -> LossResult:
    if kind not in KINDS:
        raise ValueError(f"unknown loss kind {kind!r}; expected one of {KINDS}")
    terms: dict[str, Tensor] = {}
    if kind == "PR":
        w = weights
        terms["omni"] = omni_loss(T.angle(pred.pha), target.angle, target.mag)
        terms["mpd"] = adversarial_term()
        total = terms["omni"] * w.w_omni + terms["mpd"] * w.w_pr_mpd
    else:
        if pred.wave is None or pred.respec is None or target.wave is None:
            raise ValueError("DN/USE losses need predicted and target waveforms plus the re-analysed spectrum")
        spec = pred.spectrum
        terms["mag"] = _mse(pred.mag, target.mag)
        terms["pha"] = phase_loss(T.angle(pred.pha), target.angle)
        terms["com"] = _mse(spec, Tensor(target.spectrum))
        terms["metric"] = adversarial_term()
        terms["con"] = _mse(spec, pred.respec)
        _same_shape(pred.wave, _t(target.wave), "time loss")
        terms["time"] = T.mean(T.modulus(pred.wave - Tensor(target.wave)))
        w = weights
        total = (
            terms["mag"] * w.w_mag
            + terms["pha"] * w.w_pha
            + terms["com"] * w.w_com
            + terms["metric"] * w.w_metric
            + terms["con"] * w.w_con
            + terms["time"] * w.w_time
        )
        if kind == "USE":
            terms["mpd"] = adversarial_term()
            total = total + terms["mpd"] * w.w_mpd
    return LossResult(total, {k: float(v.data) for k, v in terms.items()})


# --------------------------------------------------------------------------
# metrics


def pd_metric(est_phase, ref_phase, clean_mag) -> float:
    """Magnitude-weighted circular phase error in degrees."""
    est, ref = np.asarray(est_phase, dtype=float), np.asarray(ref_phase, dtype=float)
    if est.shape != ref.shape or np.shape(clean_mag) != ref.shape:
        raise ShapeError(f"pd_metric: shapes {est.shape}, {ref.shape}, {np.shape(clean_mag)} differ")
    w = _weights(clean_mag)
    return float(np.degrees(np.sum(w * anti_wrap(ref - est))))


def wopd_metric(est_phase, ref_phase, clean_mag) -> float:
    """Weighted IP/GD/IAF circular error, each divided by pi and averaged: in [0, 1]."""
    est, ref = np.asarray(est_phase, dtype=float), np.asarray(ref_phase, dtype=float)
    if est.shape != ref.shape or np.shape(clean_mag) != ref.shape:
        raise ShapeError(f"wopd_metric: shapes {est.shape}, {ref.shape}, {np.shape(clean_mag)} differ")
    w = _weights(clean_mag)
    d = est - ref
    parts = [d, _diff_padded(d, 1), _diff_padded(d, 0)]
    return float(np.mean([np.sum(w * anti_wrap(x)) / np.pi for x in parts]))


def si_sdr(est, ref) -> float:
    """Scale-invariant SDR in dB, capped at 120 dB."""
    est, ref = np.asarray(est, dtype=float), np.asarray(ref, dtype=float)
    if est.shape != ref.shape:
        raise ShapeError(f"si_sdr: lengths {est.shape} and {ref.shape} differ")
    ref_energy = np.dot(ref, ref)
    if ref_energy == 0:
        raise ValueError("si_sdr needs a non-silent reference")
    target = (np.dot(est, ref) / ref_energy) * ref
    noise = est - target
    num, den = np.dot(target, target), np.dot(noise, noise)
    if den == 0 or num >= den * 10 ** (SI_SDR_CAP / 10):
        return SI_SDR_CAP
    if num == 0:
        return -SI_SDR_CAP
    return float(10 * np.log10(num / den))


def metric_report(utterance: str, pd_deg: float, wopd: float, si_sdr_db: float, loss_terms: dict | None = None) -> str:
    doc = {
        "utterance": utterance,
        "pd_deg": pd_deg,
        "wopd": wopd,
        "si_sdr_db": si_sdr_db,
        "loss_terms": dict(loss_terms or {}),
    }
    return json.dumps(doc, sort_keys=True, indent=2)
