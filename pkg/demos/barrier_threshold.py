"""The non-degeneracy barrier is a supersolution for admissible c and fails far beyond it.

Run: python3 demos/barrier_threshold.py
"""
from degenpar.cli import barrier_check

for scale in (1.0, 1000.0):
    c, report = barrier_check(c_scale=scale)
    print(f"c = {c:.4g} (x{scale:g}): {'PASS' if report.passed else 'FAIL'}, "
          f"min margin {report.min_margin:.4g} over {report.checked} nodes")
