"""Regenerate tests/data/matern_oracle.csv with mpmath at 40 significant digits.

The table is the independent reference for the Matérn correlation at general
smoothness; it does not touch the package code.
"""

import csv
from pathlib import Path

import mpmath

mpmath.mp.dps = 40

NUS = ["0.1", "0.25", "0.54", "0.935", "1.33", "2", "3.7", "5.5", "9.25"]
XS = ["1e-6", "1e-4", "0.01", "0.1", "0.3", "0.7", "1", "1.5", "2.5", "4", "7", "12", "20", "35", "50"]


def matern(x, nu):
    return 2 ** (1 - nu) / mpmath.gamma(nu) * x**nu * mpmath.besselk(nu, x)


def main():
    out = Path(__file__).resolve().parents[1] / "tests" / "data" / "matern_oracle.csv"
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["nu", "x", "value"])
        for nu in NUS:
            for x in XS:
                v = matern(mpmath.mpf(x), mpmath.mpf(nu))
                w.writerow([nu, x, mpmath.nstr(v, 25, min_fixed=0, max_fixed=0)])


if __name__ == "__main__":
    main()
