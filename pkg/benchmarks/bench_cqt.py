#!/usr/bin/env python3
"""Benchmark the compiled CQT kernel against the pure-numpy fallback.

Both backends compute identical direct inner products; this script times
them on synthetic clips and reports the speedup plus the worst numerical
difference. Run from a built checkout:

    python benchmarks/bench_cqt.py [--seconds 20] [--repeats 3]
"""

import argparse
import time

import numpy as np

from palmsonic.audio_io import AudioClip
from palmsonic.cqt import HAVE_EXT, cqt


def time_backend(clip, backend, repeats, **kw):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = cqt(clip, backend=backend, **kw)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seconds", type=float, default=20.0)
    parser.add_argument("--rate", type=int, default=16000)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--hop", type=int, default=160)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    x = np.clip(rng.normal(0, 0.1, int(args.seconds * args.rate)), -1, 1)
    clip = AudioClip(x, args.rate, "bench")
    kw = dict(f_min=32.7, bins_per_octave=12, n_octaves=7, hop_len=args.hop)

    print(f"clip: {args.seconds:.0f}s at {args.rate} Hz, hop {args.hop}, "
          f"84 bins (12 x 7), best of {args.repeats}")
    t_np, ref = time_backend(clip, "numpy", args.repeats, **kw)
    print(f"  numpy fallback : {t_np:8.3f} s")
    if not HAVE_EXT:
        print("  compiled kernel: not built (pip install . or "
              "python setup.py build_ext --inplace)")
        return
    t_ext, got = time_backend(clip, "ext", args.repeats, **kw)
    diff = np.max(np.abs(ref.values - got.values))
    scale = np.max(np.abs(ref.values))
    print(f"  compiled kernel: {t_ext:8.3f} s   ({t_np / t_ext:.2f}x speedup)")
    print(f"  max |difference|: {diff:.3e}  (relative {diff / scale:.3e})")


if __name__ == "__main__":
    main()
