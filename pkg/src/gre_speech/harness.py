"""Executable checks and desk-scale experiments behind the CLI verbs.

Every command returns a plain dict (serialized with :func:`dumps`) and a
boolean verdict. Nothing time- or host-dependent goes into a report, so two
runs with the same :class:`RunConfig` give byte-identical output.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import losses as L
from . import signal as sig
from . import tensor as T
from .gradcheck import check_gradients, primitive_cases
from .hadf import BREAK_MODES, HADF, DualPath, HybridAttention, PhaFFN
from .layers import MPICM, DenseBlock, StreamPair, complex_conv2d, crms_norm
from .module import complex_uniform, param
from .network import PRESETS, GRENet, ModelConfig, SpectrumPair, enhance, featurize, identity_model
from .tensor import Tape, Tensor

DEFAULT_THETAS = (0.0, 0.41, math.pi / 2, 2.0, 2 * math.pi - 1e-3)
DEFAULT_TOLERANCES = {"layer": 1e-9, "angle": 1e-6, "magnitude": 1e-10, "break": 1e-2, "gradient": 1e-4}

# reduced widths used for the phase-retrieval overfit
TINY = ModelConfig(8, 4, 2, 2, 8, 8, n_heads=2, n_dual_path=1, dense_depth=2)
MODEL_PRESETS = {**PRESETS, "tiny": TINY}

# units a break mode modifies directly
TARGETED_UNITS = {
    "none": set(),
    "mpicm": {"gate_interaction", "mpicm"},
    "attn": {"attention_scores", "hybrid_attention"},
    "ffn": {"pha_ffn"},
}
# units whose structure contains each break
BROKEN_UNITS = {
    "none": set(),
    "mpicm": {"gate_interaction", "mpicm", "dense_block", "network", "network_magnitude"},
    "attn": {"attention_scores", "hybrid_attention", "hadf_block", "dual_path", "network", "network_magnitude"},
    "ffn": {"pha_ffn", "hadf_block", "dual_path", "network", "network_magnitude"},
}


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    model: str = "small"
    break_mode: str = "none"
    thetas: tuple = DEFAULT_THETAS
    tolerances: dict = field(default_factory=dict)
    frames: int = 16
    steps: int = 500
    lr: float = 1e-3
    clip: float = 5.0
    pr_model: str = "tiny"
    pr_seconds: float = 0.25
    gl_iters: int = 32

    def __post_init__(self):
        if self.model not in MODEL_PRESETS or self.pr_model not in MODEL_PRESETS:
            raise ValueError(f"model names must be one of {sorted(MODEL_PRESETS)}")
        if self.break_mode not in BREAK_MODES:
            raise ValueError(f"break_mode must be one of {BREAK_MODES}")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ValueError(f"unknown tolerance keys {sorted(unknown)}")
        if self.seed < 0 or self.frames < 1 or self.steps < 0 or self.lr <= 0 or self.clip <= 0:
            raise ValueError("seed/steps must be non-negative; frames, lr and clip positive")
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))

    def tol(self, key: str) -> float:
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))

    @property
    def model_config(self) -> ModelConfig:
        return MODEL_PRESETS[self.model]

    def to_json(self) -> str:
        d = asdict(self)
        d["thetas"] = list(self.thetas)
        return json.dumps(d, sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown RunConfig keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))


# --------------------------------------------------------------------------
# equivariance suite


def _crandn(rng, shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _relative(got: np.ndarray, want: np.ndarray) -> float:
    scale = np.linalg.norm(want)
    return float(np.linalg.norm(got - want) / scale) if scale > 0 else float(np.linalg.norm(got))


def _residual(fn: Callable, mag: np.ndarray, pha: np.ndarray, theta: float) -> float:
    """Largest relative residual over the outputs of ``fn``.

    ``fn`` returns ``[(array, rotates), ...]``: rotating outputs must pick up
    ``e^{j theta}``, the others must stay put.
    """
    rot = np.exp(1j * theta)
    base = fn(mag, pha)
    moved = fn(mag, pha * rot)
    return max(_relative(b2, b1 * rot if rotates else b1) for (b1, rotates), (b2, _) in zip(base, moved))


def _stream_unit(block) -> Callable:
    def fn(m, p):
        out = block(StreamPair(Tensor(m), Tensor(p)))
        return [(out.mag.data, False), (out.pha.data, True)]

    return fn


def build_units(run: RunConfig) -> dict[str, tuple[Callable, np.ndarray, np.ndarray]]:
    """Each GRE unit with its seeded inputs, at the configured widths."""
    c = run.model_config
    rng = np.random.default_rng(run.seed)
    bm = run.break_mode
    t, k, length = run.frames, 24, 12
    units = {}

    m = rng.standard_normal((c.C_mag, t, k))
    p = _crandn(rng, (c.C_pha, t, k))
    w = complex_uniform(rng, (c.C_pha, c.C_pha, 3, 3), 9 * c.C_pha)
    units["complex_conv"] = (lambda m_, p_: [(complex_conv2d(Tensor(p_), w, padding=1).data, True)], m, p)
    gamma = param(rng.uniform(0.5, 1.5, (c.C_pha, 1, k)))
    units["crms"] = (lambda m_, p_: [(crms_norm(Tensor(p_), gamma).data, True)], m, p)

    gate_block = MPICM(c.C_mag, c.C_pha, c.C_mag, c.C_pha, k, "standard", 1, rng, bm == "mpicm")

    def gate_fn(m_, p_):
        out = gate_block.gate(StreamPair(Tensor(m_), Tensor(p_)))
        return [(out.mag.data, False), (out.pha.data, True)]

    units["gate_interaction"] = (gate_fn, m, p)
    units["mpicm"] = (_stream_unit(MPICM(c.C_mag, c.C_pha, c.C_mag, c.C_pha, k, "standard", 2, rng, bm == "mpicm")), m, p)
    units["dense_block"] = (_stream_unit(DenseBlock(c.C_mag, c.C_pha, k, c.dense_depth, rng, bm == "mpicm")), m, p)

    zm = rng.standard_normal((t, length, c.C_mag))
    zp = _crandn(rng, (t, length, c.C_pha))
    attn = HybridAttention(c.C_mag, c.C_pha, c.C_mag_head, c.C_pha_head, c.n_heads, rng, bm == "attn")

    def attn_fn(m_, p_):
        h_mag, h_pha, _ = attn(Tensor(m_), Tensor(p_))
        return [(h_mag.data, False), (h_pha.data, True)]

    def scores_fn(m_, p_):
        attn.record = True
        try:
            attn(Tensor(m_), Tensor(p_))
        finally:
            attn.record = False
        return [(attn.last_maps.scores, False)]

    units["hybrid_attention"] = (attn_fn, zm, zp)
    units["attention_scores"] = (scores_fn, zm, zp)
    ffn = PhaFFN(c.C_pha, c.C_pha_hidden, rng=rng, break_glu=bm == "ffn")
    units["pha_ffn"] = (lambda m_, p_: [(ffn(Tensor(p_)).data, True)], zm, zp)
    block = HADF(c.C_mag, c.C_pha, c.C_mag_head, c.C_pha_head, c.C_mag_hidden, c.C_pha_hidden, c.n_heads, rng, bm)

    def hadf_fn(m_, p_):
        om, op = block(Tensor(m_), Tensor(p_))
        return [(om.data, False), (op.data, True)]

    units["hadf_block"] = (hadf_fn, zm, zp)
    dp = DualPath.build(
        c.n_dual_path, c.C_mag, c.C_pha, c.C_mag_head, c.C_pha_head, c.C_mag_hidden, c.C_pha_hidden, c.n_heads, rng, bm
    )
    units["dual_path"] = (_stream_unit(dp), m[:, :, :length], p[:, :, :length])
    return units


def _network_residuals(run: RunConfig):
    """(angle residual in rad, magnitude relative residual) per theta for the full model."""
    c = run.model_config
    rng = np.random.default_rng(run.seed + 1)
    net = GRENet(c, seed=run.seed, break_mode=run.break_mode)
    # keep every cell well above the zero-magnitude convention
    r = rng.uniform(0.1, 2.0, (run.frames, c.F))
    spec = r * np.exp(1j * rng.uniform(-np.pi, np.pi, (run.frames, c.F)))
    base = net(featurize(spec, c.alpha))
    rows = []
    for theta in run.thetas:
        out = net(featurize(spec * np.exp(1j * theta), c.alpha))
        ang = np.angle(out.pha.data) - np.angle(base.pha.data) - theta
        rows.append((theta, float(L.anti_wrap(ang).max()), _relative(out.mag.data, base.mag.data)))
    return rows


def cmd_equivcheck(run: RunConfig) -> tuple[dict, bool]:
    """GRE residual of every unit over the theta grid.

    With a break mode, the units it modifies directly must reach the break
    threshold somewhere on the grid, units that merely contain them must fail
    their own threshold, and every other unit must still pass.
    """
    broken = BROKEN_UNITS[run.break_mode]
    entries = []

    def add(unit, theta, err, threshold):
        entries.append(
            {
                "unit": unit,
                "theta": theta,
                "rel_error": err,
                "threshold": threshold,
                "pass": err <= threshold,
                "asserted": unit not in broken,
            }
        )

    for name, (fn, m, p) in build_units(run).items():
        for theta in run.thetas:
            add(name, theta, _residual(fn, m, p, theta), run.tol("layer"))
    for theta, ang, mag in _network_residuals(run):
        add("network", theta, ang, run.tol("angle"))
        add("network_magnitude", theta, mag, run.tol("magnitude"))

    breaks = []
    for unit in sorted(broken):
        rows = [e for e in entries if e["unit"] == unit]
        worst = max(e["rel_error"] for e in rows)
        targeted = unit in TARGETED_UNITS[run.break_mode]
        threshold = run.tol("break") if targeted else rows[0]["threshold"]
        breaks.append(
            {"unit": unit, "targeted": targeted, "max_rel_error": worst, "threshold": threshold, "pass": worst >= threshold}
        )
    verdict = all(e["pass"] for e in entries if e["asserted"]) and all(b["pass"] for b in breaks)
    report = {
        "command": "equivcheck",
        "model": run.model,
        "seed": run.seed,
        "break_mode": run.break_mode,
        "thetas": list(run.thetas),
        "entries": entries,
        "break_checks": breaks,
        "pass": verdict,
    }
    return report, verdict


# --------------------------------------------------------------------------
# gradient checks


TOY_STFT = sig.StftConfig(win_len=8, hop=2, fft_size=8)


class _Slice:
    """Expand MPICM -> gated MPICM -> one HADF along time -> both output heads.

    Works on the toy STFT (5 bins), with every width at most 8.
    """

    def __init__(self, rng, zero: bool = False):
        from .module import real_uniform

        self.expand = MPICM(1, 1, 4, 2, 5, "expand-no-gate", rng=rng)
        self.mpicm = MPICM(4, 2, 4, 2, 5, "standard", 1, rng)
        self.hadf = HADF(4, 2, 2, 2, 4, 4, heads=2, rng=rng)
        self.head_mag_w = real_uniform(rng, (1, 4, 3, 3), 36)
        self.head_mag_b = real_uniform(rng, (1,), 36)
        self.head_pha_w = complex_uniform(rng, (1, 2, 3, 3), 18)
        if zero:
            for p in self.parameters():
                p.data = np.zeros_like(p.data)

    def parameters(self):
        out = []
        for mod in (self.expand, self.mpicm, self.hadf):
            out += mod.parameters()
        return out + [self.head_mag_w, self.head_mag_b, self.head_pha_w]

    def __call__(self, pair: SpectrumPair) -> SpectrumPair:
        x = self.mpicm(self.expand(pair.as_streams()))
        zm, zp = self.hadf(T.transpose(x.mag, (2, 1, 0)), T.transpose(x.pha, (2, 1, 0)))
        m, p = T.transpose(zm, (2, 1, 0)), T.transpose(zp, (2, 1, 0))
        mag = T.relu(T.conv2d(m, self.head_mag_w, self.head_mag_b, padding=1))
        pha = T.unit(complex_conv2d(p, self.head_pha_w, padding=1))
        return SpectrumPair(mag, pha)


def _toy_problem(rng, length: int = 8):
    clean = rng.standard_normal(length)
    noisy = clean + 0.3 * rng.standard_normal(length)
    s_clean = sig.stft(clean, TOY_STFT)
    target = L.Target(np.abs(s_clean) ** 0.3, np.angle(s_clean), clean)
    return sig.stft(noisy, TOY_STFT), target


def slice_loss_fn(kind: str, rng, zero: bool = False, term: str | None = None):
    """A closure ``params -> scalar loss`` through the toy slice, plus its parameters."""
    noisy, target = _toy_problem(rng)
    net = _Slice(rng, zero)
    pair = featurize(noisy)
    length = target.wave.size

    def fn(*_params):
        out = net(pair)
        pred = L.build_prediction(out.mag[0], out.pha[0], length, TOY_STFT)
        if term == "time":
            return T.mean(T.modulus(pred.wave - Tensor(target.wave)))
        return L.composite_loss(kind, pred, target).total

    return fn, net.parameters()


def _wrong_adjoint(a):
    # negative control: sin with a deliberately wrong derivative
    a = T.as_tensor(a)
    return T._emit("bad_sin", np.sin(a.data), (a,), lambda g: (g * np.sin(a.data),))


def cmd_gradcheck(run: RunConfig) -> tuple[dict, bool]:
    tol = run.tol("gradient")
    rows = []
    for name, (fn, inputs) in sorted(primitive_cases(run.seed).items()):
        err = check_gradients(fn, inputs, seed=run.seed)
        rows.append({"case": f"primitive:{name}", "max_rel_error": err, "expect_pass": True})
    for kind in L.KINDS:
        fn, params = slice_loss_fn(kind, np.random.default_rng(run.seed))
        rows.append({"case": f"composite:{kind}", "max_rel_error": check_gradients(fn, params, seed=run.seed), "expect_pass": True})
    fn, params = slice_loss_fn("DN", np.random.default_rng(run.seed), zero=True, term="time")
    heads = params[-3:]
    rows.append({"case": "zero_slice:time_vs_heads", "max_rel_error": check_gradients(fn, heads, seed=run.seed), "expect_pass": True})
    x = Tensor(np.random.default_rng(run.seed).uniform(-2, 2, 5))
    rows.append({"case": "negative_control:wrong_adjoint", "max_rel_error": check_gradients(_wrong_adjoint, [x]), "expect_pass": False})
    for r in rows:
        r["pass"] = (r["max_rel_error"] <= tol) if r["expect_pass"] else (r["max_rel_error"] > 1e-2)
    verdict = all(r["pass"] for r in rows)
    return {"command": "gradcheck", "seed": run.seed, "tolerance": tol, "cases": rows, "pass": verdict}, verdict


# --------------------------------------------------------------------------
# phase retrieval


class TrainingDiverged(RuntimeError):
    pass


def harmonic_tone(seconds: float = 0.25, f0: float = 160.0, phases=(0.7, 2.1, -1.3), fs: int = sig.SAMPLE_RATE) -> np.ndarray:
    """Three harmonics with 1/k amplitudes.

    At 160 Hz a 100-sample hop advances each harmonic by a whole number of
    cycles, so the target phase is the same in every interior frame.
    """
    t = np.arange(int(round(seconds * fs))) / fs
    return sum(np.cos(2 * np.pi * k * f0 * t + p) / k for k, p in zip((1, 2, 3), phases))


def _phase_metrics(est: np.ndarray, ref: np.ndarray, mag: np.ndarray) -> dict:
    return {"pd_deg": L.pd_metric(est, ref, mag), "wopd": L.wopd_metric(est, ref, mag)}


def cmd_phase_retrieval(run: RunConfig, wav_path=None, curve_out: list | None = None) -> tuple[dict, bool]:
    """Overfit the phase head to one utterance's phase given its clean magnitude.

    The input phase is all zeros (1+0j); only the phase is decoded and the
    loss is the weighted omni-directional term. Plain gradient descent with
    global gradient-norm clipping.
    """
    if wav_path is None:
        wave, source = harmonic_tone(run.pr_seconds), "harmonic_tone"
    else:
        wave, source = sig.read_wav(wav_path), Path(wav_path).name
        if wave.size > 2 * sig.SAMPLE_RATE:
            raise ValueError("phase retrieval expects at most 2 s of audio")
    spec = sig.stft(sig.pad_to_hop(wave))
    mag, ref = np.abs(spec), np.angle(spec)
    cfg = MODEL_PRESETS[run.pr_model]
    net = GRENet(cfg, seed=run.seed, break_mode=run.break_mode, decode_mag=False)
    params = net.parameters()
    pair = SpectrumPair(Tensor((mag ** cfg.alpha)[None]), Tensor(np.ones((1,) + mag.shape, dtype=complex)))
    target = L.Target(mag, ref)
    weights = L.LossWeights()

    def loss_of(out):
        return L.composite_loss("PR", L.Prediction(out.mag[0], out.pha[0]), target, weights)

    curve = []
    initial = None
    for step in range(run.steps + 1):
        with Tape() as tape:
            out = net(pair)
            res = loss_of(out)
        value = float(res.total.data)
        if not np.isfinite(value):
            last = curve[-1][1] if curve else float("nan")
            raise TrainingDiverged(f"loss became {value} at step {step} (last finite loss {last})")
        if initial is None:
            initial = {"omni": res.terms["omni"], **_phase_metrics(np.angle(out.pha.data[0]), ref, mag)}
        curve.append((step, value))
        if step == run.steps:
            break
        T.backward(tape, res.total, wrt=params)
        norm = math.sqrt(math.fsum(float(np.sum(np.abs(p.grad) ** 2)) for p in params))
        if not np.isfinite(norm):
            raise TrainingDiverged(f"gradient norm became {norm} at step {step} (loss {value})")
        scale = run.lr * min(1.0, run.clip / norm) if norm > 0 else 0.0
        for p in params:
            p.data = p.data - scale * p.grad
    final = {"omni": res.terms["omni"], **_phase_metrics(np.angle(out.pha.data[0]), ref, mag)}
    gl = sig.griffin_lim(mag, run.gl_iters, wave.size if wav_path is None else sig.pad_to_hop(wave).size)
    ratio = final["omni"] / initial["omni"] if initial["omni"] > 0 else 0.0
    verdict = ratio <= 0.5 and final["pd_deg"] < initial["pd_deg"]
    if curve_out is not None:
        curve_out.extend(curve)
    report = {
        "command": "phase-retrieval",
        "source": source,
        "seed": run.seed,
        "model": run.pr_model,
        "steps": run.steps,
        "lr": run.lr,
        "clip": run.clip,
        "frames": int(mag.shape[0]),
        "initial": initial,
        "final": final,
        "omni_ratio": ratio,
        "griffin_lim": {"iters": run.gl_iters, **_phase_metrics(gl, ref, mag)},
        "zero_phase": _phase_metrics(np.zeros_like(ref), ref, mag),
        "pass": verdict,
    }
    return report, verdict


def curve_csv(curve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("step", "loss"))
    for step, value in curve:
        w.writerow((step, repr(value)))
    return buf.getvalue()


# --------------------------------------------------------------------------
# evaluation over a manifest


def load_model(run: RunConfig, params_path=None):
    """A seeded model with loaded weights, or the identity (pass-through) without weights."""
    if params_path is None:
        return identity_model
    net = GRENet(run.model_config, seed=run.seed)
    net.load(params_path)
    return net


def evaluate_pair(degraded: np.ndarray, clean: np.ndarray, model) -> dict:
    if degraded.shape != clean.shape:
        raise ValueError(f"length mismatch: degraded {degraded.size} vs clean {clean.size}")
    est = enhance(degraded, model)
    s_est = sig.stft(sig.pad_to_hop(est))
    s_ref = sig.stft(sig.pad_to_hop(clean))
    mag = np.abs(s_ref)
    return {
        "si_sdr_db": L.si_sdr(est, clean),
        "pd_deg": L.pd_metric(np.angle(s_est), np.angle(s_ref), mag),
        "wopd": L.wopd_metric(np.angle(s_est), np.angle(s_ref), mag),
    }


METRICS = ("si_sdr_db", "pd_deg", "wopd")


def cmd_eval(run: RunConfig, manifest_path, params_path=None) -> tuple[dict, bool]:
    """Per-row metrics for a ``degraded,clean`` manifest; unreadable rows are recorded, not fatal."""
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    with open(manifest_path, newline="") as f:
        rows = list(csv.DictReader(f))
    model = load_model(run, params_path)
    results = []
    for row in rows:
        entry = {"degraded": row.get("degraded"), "clean": row.get("clean")}
        try:
            degraded = sig.read_wav(base / row["degraded"])
            clean = sig.read_wav(base / row["clean"])
            entry.update(evaluate_pair(degraded, clean, model))
        except (OSError, ValueError, KeyError, TypeError, EOFError) as exc:
            entry["error"] = f"{type(exc).__name__}: {exc}"
        results.append(entry)
    ok = [r for r in results if "error" not in r]
    aggregate = {m: math.fsum(r[m] for r in ok) / len(ok) for m in METRICS} if ok else {}
    report = {
        "command": "eval",
        "params": None if params_path is None else Path(params_path).name,
        "rows": results,
        "aggregate": aggregate,
        "n_ok": len(ok),
        "n_error": len(results) - len(ok),
        "pass": True,
    }
    return report, True


# --------------------------------------------------------------------------
# attention export


def cmd_attn_dump(run: RunConfig, wav_path, block_index: int = 0, frame: int = 0, params_path=None) -> tuple[str, dict]:
    """CSV of the frequency-axis attention maps of one dual-path block for one frame."""
    c = run.model_config
    if not 0 <= block_index < c.n_dual_path:
        raise IndexError(f"block_index {block_index} outside [0, {c.n_dual_path})")
    net = GRENet(c, seed=run.seed, break_mode=run.break_mode)
    if params_path is not None:
        net.load(params_path)
    wave = sig.read_wav(wav_path) if wav_path is not None else harmonic_tone(0.25)
    spec = sig.stft(sig.pad_to_hop(wave))
    if not 0 <= frame < spec.shape[0]:
        raise IndexError(f"frame {frame} outside [0, {spec.shape[0]})")
    attn = net.bottleneck.blocks[block_index][1].attn
    attn.record = True
    try:
        net(featurize(spec, c.alpha))
    finally:
        attn.record = False
    maps = attn.last_maps
    summary = {
        "command": "attn-dump",
        "block_index": block_index,
        "frame": frame,
        "heads": int(maps.scores.shape[1]),
        "length": int(maps.scores.shape[2]),
        "max_row_sum_error": float(np.abs(maps.scores[frame].sum(-1) - 1).max()),
        "pass": True,
    }
    return maps.to_csv(frame), summary


# --------------------------------------------------------------------------
# degradation and parameter counting


def cmd_degrade(run: RunConfig, spec_json: str, clean_dir, out_dir, noise_path=None) -> tuple[str, dict]:
    """Degrade every WAV in ``clean_dir``; writes ``degraded/`` and ``clean/`` plus a manifest.

    Without a noise file, seeded white noise is used; without an RIR, a
    synthetic 300 ms exponential-decay response is generated.
    """
    spec = sig.DegradationSpec.from_json(spec_json)
    rng = np.random.default_rng(run.seed)
    if "DR" in spec.steps and spec.rir is None:
        spec.rir = sig.make_rir(300.0, 4800, seed=run.seed)
    noise = sig.read_wav(noise_path) if noise_path is not None else None
    out_dir = Path(out_dir)
    (out_dir / "degraded").mkdir(parents=True, exist_ok=True)
    (out_dir / "clean").mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("degraded", "clean"))
    files = sorted(Path(clean_dir).glob("*.wav"))
    for path in files:
        clean = sig.read_wav(path)
        src = noise if noise is not None else rng.standard_normal(clean.size)
        degraded, _ = sig.degrade(clean, spec, src)
        peak = np.max(np.abs(degraded), initial=0.0)
        if peak > 0.999:
            degraded = degraded * (0.999 / peak)
        sig.write_wav(out_dir / "degraded" / path.name, degraded)
        sig.write_wav(out_dir / "clean" / path.name, clean)
        w.writerow((f"degraded/{path.name}", f"clean/{path.name}"))
    return buf.getvalue(), {"command": "degrade", "kind": spec.kind, "files": len(files), "pass": True}


REFERENCE_STANDARD_PARAMS = 1.55e6


def cmd_param_count(run: RunConfig) -> tuple[dict, bool]:
    from .network import param_count

    counts = {name: param_count(cfg) for name, cfg in sorted(PRESETS.items())}
    dev = counts["standard"] / REFERENCE_STANDARD_PARAMS - 1.0
    verdict = abs(dev) <= 0.25 and counts["small"] < counts["standard"]
    report = {
        "command": "param-count",
        "counts": counts,
        "selected": {run.model: param_count(run.model_config)},
        "reference_standard": REFERENCE_STANDARD_PARAMS,
        "standard_relative_deviation": dev,
        "pass": verdict,
    }
    return report, verdict
