"""Solve ordered pairs of problems and check that the solutions stay ordered.

With p != 2 and pt > 0 the central scheme is not monotone, so small
ordering violations can show up; p = 2 with H constant keeps the order.

Run: python3 demos/comparison_audit.py
"""
from degenpar import CoefficientField, Exponents, SolveConfig, make_grid
from degenpar.cli import audit_pairs

grid = make_grid(2, 1.0, 1 / 16, 0.025, -0.1, 0.0)
one = CoefficientField.constant(1.0)

for exps in (Exponents(2.0, 0.0, 0.0), Exponents(3.0, 1.0, 2.0)):
    reports = audit_pairs(20, 0, grid, exps, one, SolveConfig())
    worst = max(r.violation for r in reports)
    passed = sum(r.passed for r in reports)
    print(f"p = {exps.p}, pt = {exps.p_tilde}, qt = {exps.q_tilde}: "
          f"{passed}/{len(reports)} pairs ordered, worst max(u1 - u2) = {worst:.3e}")
