"""Convergence study for the second example at P1, P2 and P3.

Each table row is one uniform refinement; the k columns are log2 of the error
ratio between consecutive levels.

Run: python3 demos/convergence_tables.py
"""
from wgmfem.verification import case_two, convergence_study

case = case_two()
for k, levels in ((1, range(3, 7)), (2, range(2, 6)), (3, range(2, 5))):
    table = convergence_study(case, k, levels)
    print(f"P{k} weak Galerkin with BDM{k}")
    print(table.to_markdown())
    worst = max(r.residual for r in table.reports)
    print(f"largest relative residual over the study: {worst:.1e}\n")
