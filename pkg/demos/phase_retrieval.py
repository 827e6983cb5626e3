"""Recover the phase of a harmonic tone from its magnitude alone.

The network starts from an all-zero phase, sees the compressed magnitude and
is trained on this one signal. Griffin-Lim on the same magnitude is printed
for comparison. A short run is enough to see the trend; the acceptance test
uses 500 steps.
"""

import sys

from gre_speech.harness import RunConfig, cmd_phase_retrieval

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 150
curve = []
report, _ = cmd_phase_retrieval(RunConfig(steps=steps), curve_out=curve)
for step, loss in curve[:: max(1, steps // 10)]:
    print(f"step {step:4d}  loss {loss:10.2f}")
print(f"phase distance: zero phase {report['zero_phase']['pd_deg']:.1f} deg, "
      f"Griffin-Lim(32) {report['griffin_lim']['pd_deg']:.1f} deg, "
      f"network {report['initial']['pd_deg']:.1f} -> {report['final']['pd_deg']:.1f} deg")
print(f"omni loss kept {report['omni_ratio']:.1%} of its initial value")
