import csv
import json
import math

import numpy as np
import pytest

from gre_speech import harness as H
from gre_speech import signal as sig
from gre_speech import tensor as T
from gre_speech.cli import main


def test_run_config_json_and_validation():
    run = H.RunConfig(seed=3, break_mode="attn", tolerances={"layer": 1e-8})
    assert H.RunConfig.from_json(run.to_json()) == run
    assert run.tol("layer") == 1e-8 and run.tol("angle") == 1e-6
    with pytest.raises(ValueError):
        H.RunConfig.from_dict({"seed": 1, "colour": "red"})
    with pytest.raises(ValueError):
        H.RunConfig(break_mode="all")
    with pytest.raises(ValueError):
        H.RunConfig(tolerances={"loose": 1.0})
    with pytest.raises(ValueError):
        H.RunConfig(model="huge")


def test_default_theta_grid():
    assert H.DEFAULT_THETAS == (0.0, 0.41, math.pi / 2, 2.0, 2 * math.pi - 1e-3)


@pytest.fixture(scope="module")
def tiny_reports():
    return {mode: H.cmd_equivcheck(H.RunConfig(model="tiny", break_mode=mode, frames=6)) for mode in H.BREAK_MODES}


def test_equivcheck_clean_run(tiny_reports):
    report, ok = tiny_reports["none"]
    assert ok and report["break_checks"] == []
    units = {e["unit"] for e in report["entries"]}
    assert {"complex_conv", "crms", "gate_interaction", "mpicm", "dense_block", "pha_ffn", "hadf_block", "dual_path", "network"} <= units
    assert all(e["rel_error"] >= 0 for e in report["entries"])
    assert all(e["rel_error"] <= 1e-12 for e in report["entries"] if e["theta"] == 0.0)


@pytest.mark.parametrize("mode", ["mpicm", "attn", "ffn"])
def test_equivcheck_breaks_exactly_the_containing_units(tiny_reports, mode):
    report, ok = tiny_reports[mode]
    assert ok
    failing = {e["unit"] for e in report["entries"] if not e["pass"]}
    assert failing == H.BROKEN_UNITS[mode]


def test_equivcheck_verdict_fails_when_break_is_not_detected(monkeypatch):
    monkeypatch.setitem(H.BROKEN_UNITS, "ffn", H.BROKEN_UNITS["ffn"] | {"crms"})
    monkeypatch.setitem(H.TARGETED_UNITS, "ffn", {"pha_ffn", "crms"})
    _, ok = H.cmd_equivcheck(H.RunConfig(model="tiny", break_mode="ffn", frames=4))
    assert not ok


def test_gradcheck_slice_cases():
    for kind in ("DN", "PR"):
        fn, params = H.slice_loss_fn(kind, np.random.default_rng(1))
        assert all(np.shape(p.data)[-1] <= 8 for p in params)
        assert H.check_gradients(fn, params) <= 1e-4
    fn, params = H.slice_loss_fn("DN", np.random.default_rng(1), zero=True, term="time")
    assert all(not np.any(p.data) for p in params)
    assert H.check_gradients(fn, params[-3:]) <= 1e-4


def test_wrong_adjoint_is_caught():
    x = T.Tensor(np.linspace(-2, 2, 5))
    assert H.check_gradients(H._wrong_adjoint, [x]) > 1e-2


def test_phase_retrieval_divergence_is_reported(monkeypatch):
    monkeypatch.setattr(H.L, "omni_loss", lambda *a, **k: T.Tensor(float("nan")))
    with pytest.raises(H.TrainingDiverged, match="step 0"):
        H.cmd_phase_retrieval(H.RunConfig(steps=2, pr_seconds=0.05))


def test_phase_retrieval_short_run_and_curve():
    curve = []
    report, _ = H.cmd_phase_retrieval(H.RunConfig(steps=2, pr_seconds=0.05), curve_out=curve)
    assert [s for s, _ in curve] == [0, 1, 2]
    assert report["zero_phase"]["pd_deg"] > 0 and report["griffin_lim"]["iters"] == 32
    assert H.curve_csv(curve).splitlines()[0] == "step,loss"


def test_phase_retrieval_rejects_long_wav(tmp_path):
    path = tmp_path / "long.wav"
    sig.write_wav(path, np.zeros(3 * 16000))
    with pytest.raises(ValueError):
        H.cmd_phase_retrieval(H.RunConfig(steps=1), path)


def write_manifest(tmp_path, rows):
    path = tmp_path / "manifest.csv"
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("degraded", "clean"))
        w.writerows(rows)
    return path


def test_eval_identity_rows_and_aggregate(tmp_path):
    rng = np.random.default_rng(0)
    clean = 0.3 * H.harmonic_tone(0.3)
    noisy = clean + 0.05 * rng.standard_normal(clean.size)
    sig.write_wav(tmp_path / "c.wav", clean)
    sig.write_wav(tmp_path / "n.wav", noisy)
    manifest = write_manifest(tmp_path, [("c.wav", "c.wav"), ("n.wav", "c.wav"), ("missing.wav", "c.wav")])
    report, ok = H.cmd_eval(H.RunConfig(), manifest)
    assert ok and report["n_ok"] == 2 and report["n_error"] == 1
    same, noisy_row, bad = report["rows"]
    assert same["si_sdr_db"] == 120.0 and same["pd_deg"] <= 1e-6
    assert noisy_row["si_sdr_db"] < 120.0 and "error" in bad
    for m in H.METRICS:
        assert report["aggregate"][m] == pytest.approx(np.mean([same[m], noisy_row[m]]), abs=1e-12)


def test_eval_empty_manifest(tmp_path):
    report, ok = H.cmd_eval(H.RunConfig(), write_manifest(tmp_path, []))
    assert ok and report["rows"] == [] and report["aggregate"] == {}


def test_attn_dump_rows_and_errors(tmp_path):
    run = H.RunConfig(model="small")
    text, summary = H.cmd_attn_dump(run, None, block_index=3, frame=1)
    rows = list(csv.DictReader(text.splitlines()))
    assert summary["max_row_sum_error"] <= 1e-9
    assert len(rows) == summary["heads"] * summary["length"] ** 2
    sums = {}
    for r in rows:
        sums[(r["head"], r["row"])] = sums.get((r["head"], r["row"]), 0.0) + float(r["score"])
    assert max(abs(s - 1) for s in sums.values()) <= 1e-9
    with pytest.raises(IndexError):
        H.cmd_attn_dump(run, None, block_index=4)
    with pytest.raises(IndexError):
        H.cmd_attn_dump(run, None, block_index=0, frame=10_000)


def test_degrade_writes_manifest(tmp_path):
    clean_dir = tmp_path / "clean_in"
    clean_dir.mkdir()
    sig.write_wav(clean_dir / "a.wav", 0.3 * H.harmonic_tone(0.2))
    spec = sig.DegradationSpec("DN+DR", snr_db=0.0).to_json()
    text, summary = H.cmd_degrade(H.RunConfig(seed=1), spec, clean_dir, tmp_path / "out")
    assert text.splitlines() == ["degraded,clean", "degraded/a.wav,clean/a.wav"]
    assert summary["files"] == 1
    assert (tmp_path / "out" / "degraded" / "a.wav").exists()


def test_cli_exit_codes_and_reports(tmp_path, capsys):
    out = tmp_path / "pc"
    assert main(["param-count", "--out", str(out)]) == 0
    doc = json.loads((out / "param-count.json").read_text())
    assert doc["pass"] and doc["counts"]["small"] < doc["counts"]["standard"]
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"model": "tiny", "frames": 4, "tolerances": {"layer": 1e-30}}))
    # an impossible tolerance must turn into a failing exit code
    assert main(["equivcheck", "--config", str(cfg), "--out", str(tmp_path / "eq")]) == 1
    cfg.write_text(json.dumps({"unknown": 1}))
    assert main(["param-count", "--config", str(cfg), "--out", str(out)]) == 2
    assert main(["attn-dump", "--block", "9", "--out", str(out)]) == 2
    assert "FAIL" in capsys.readouterr().out
