"""Wall time of the U^3 recursion with FFT base against the cube oracle, over N.

    python scripts/bench_gowers.py --sizes 16 24 32 48 64
"""
import argparse

from ergolab.seminorms import bench_gowers


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 48, 64])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print("N,recursive_s,cube_s,speedup,abs_difference")
    for n in args.sizes:
        r = bench_gowers(n, args.repeat)
        print(f"{n},{r['recursive_seconds']:.4g},{r['cube_seconds']:.4g},{r['speedup']:.1f},{r['abs_difference']:.2e}")


if __name__ == "__main__":
    main()
