#!/usr/bin/env python3
"""Regenerate tests/data/specfn_reference.csv with 40-digit reference values.

Usage: python3 scripts/gen_specfn_reference.py > crates/core/tests/data/specfn_reference.csv
"""
import mpmath as mp

mp.mp.dps = 60


def grid(lo, hi, n):
    # log-spaced, rounded to doubles so the Rust side evaluates the same x
    lo, hi = mp.log10(lo), mp.log10(hi)
    return [float(mp.power(10, lo + (hi - lo) * i / (n - 1))) for i in range(n)]


def fmt(v):
    return mp.nstr(v, 40, min_fixed=-mp.inf, max_fixed=mp.inf)


def main():
    print("function,x,value")
    for x in grid(1e-6, 1e10, 50):
        print(f"ln_gamma,{x!r},{fmt(mp.loggamma(mp.mpf(x)))}")
    for x in grid(1e-3, 1e6, 50):
        print(f"digamma,{x!r},{fmt(mp.digamma(mp.mpf(x)))}")
    for x in grid(1e-4, 1e8, 50):
        print(f"trigamma,{x!r},{fmt(mp.polygamma(1, mp.mpf(x)))}")


if __name__ == "__main__":
    main()
