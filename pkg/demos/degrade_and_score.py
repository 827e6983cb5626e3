"""Build a small degraded set from synthetic clean tones and score it.

Scoring runs with no weights, so the "enhancer" is a pass-through: the numbers
describe the degradation itself. Noise lowers SI-SDR; band limiting mostly
removes high-frequency energy.
"""

import json
import tempfile
from pathlib import Path

from gre_speech import signal as sig
from gre_speech.harness import RunConfig, cmd_degrade, cmd_eval, harmonic_tone

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    clean = tmp / "clean"
    clean.mkdir()
    for i, f0 in enumerate((150.0, 220.0, 310.0)):
        sig.write_wav(clean / f"tone{i}.wav", 0.3 * harmonic_tone(1.0, f0=f0))
    for kind in ("DN", "BWE", "DN+DR+BWE"):
        spec = sig.DegradationSpec(kind, snr_db=5.0, cutoff_hz=2000)
        out = tmp / kind.replace("+", "_")
        manifest, _ = cmd_degrade(RunConfig(seed=0), spec.to_json(), clean, out)
        (out / "manifest.csv").write_text(manifest)
        report, _ = cmd_eval(RunConfig(), out / "manifest.csv")
        print(kind, json.dumps({k: round(v, 2) for k, v in report["aggregate"].items()}))
