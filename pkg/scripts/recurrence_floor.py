"""Multiple recurrence averages of Fejér kernels on compact and distal systems.

Prints, for each system and k, the averages along the schedule and the tail
minimum used as a liminf proxy. Rotations are compact; the Anzai skew product
is distal but not compact, so its floor settles more slowly.

    python scripts/recurrence_floor.py --kmax 3 --max-exp 13
"""
import argparse

from ergolab.averages import SupportExplosion, recurrence_quantity
from ergolab.observables import fejer
from ergolab.systems import parse_system


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--kmax", type=int, default=3)
    ap.add_argument("--max-exp", type=int, default=12)
    ap.add_argument("--degree", type=int, default=2)
    args = ap.parse_args()
    sched = [2**j for j in range(6, args.max_exp + 1)]
    print("system,k," + ",".join(f"N={n}" for n in sched) + ",proxy")
    for spec in ("rot1:golden", "rot2:golden", "anzai:golden"):
        sys_ = parse_system(spec)
        f = fejer(args.degree, sys_.dim)
        for k in range(1, args.kmax + 1):
            try:
                tr = recurrence_quantity(sys_, f, k, sched, nonneg=True)
            except SupportExplosion as exc:
                print(f"{spec},{k},skipped: {exc}")
                continue
            vals = ",".join(f"{v:.6f}" for v in tr.scalars)
            print(f"{spec},{k},{vals},{tr.meta['liminf_proxy']:.6f}")


if __name__ == "__main__":
    main()
