"""Compare the compiled projector kernels against the pure-numpy fallback.

Run with:  python3 benchmarks/projector_benchmark.py [--side 128] [--views 180]
"""

import argparse
import time

import numpy as np

from tomoprior.geometry import ImageGrid, ParallelGeometry, Sinogram
from tomoprior.phantoms import shepp_logan
from tomoprior.projector import Projector, get_kernels
from tomoprior.sart import ReconConfig, reconstruct


def time_call(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--side", type=int, default=128)
    parser.add_argument("--views", type=int, default=180)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    geom = ParallelGeometry(num_views=args.views,
                            num_detectors=int(np.ceil(1.5 * args.side)))
    phantom = shepp_logan(args.side)
    sino_values = np.random.default_rng(0).random(
        (geom.num_views, geom.num_detectors))

    rows = []
    for backend in ("cython", "python"):
        try:
            get_kernels(backend)
        except ImportError:
            print(f"{backend}: not available, skipping")
            continue
        proj = Projector(geom, args.side, backend=backend)
        t_fp = time_call(lambda: proj.fp(phantom.values), args.repeats)
        t_bp = time_call(lambda: proj.bp(sino_values), args.repeats)
        t_recon = time_call(
            lambda: reconstruct(Sinogram(geom, sino_values),
                                ReconConfig(iterations=2, num_subsets=10),
                                side=args.side, backend=backend),
            max(1, args.repeats // 2))
        rows.append((backend, t_fp, t_bp, t_recon))

    print(f"\n{args.side}x{args.side} image, {args.views} views, "
          f"{geom.num_detectors} detectors (best of {args.repeats})")
    print(f"{'backend':<10} {'forward':>10} {'back':>10} {'2-iter recon':>14}")
    for backend, t_fp, t_bp, t_recon in rows:
        print(f"{backend:<10} {t_fp * 1e3:>8.1f}ms {t_bp * 1e3:>8.1f}ms "
              f"{t_recon * 1e3:>12.1f}ms")
    if len(rows) == 2:
        print(f"\nspeedup (python / cython): forward {rows[1][1] / rows[0][1]:.1f}x, "
              f"back {rows[1][2] / rows[0][2]:.1f}x, "
              f"recon {rows[1][3] / rows[0][3]:.1f}x")

    # the two backends must agree to float precision
    proj_c = Projector(geom, args.side, backend=rows[0][0])
    proj_p = Projector(geom, args.side, backend=rows[-1][0])
    diff = np.abs(proj_c.fp(phantom.values) - proj_p.fp(phantom.values)).max()
    print(f"max forward-projection difference between backends: {diff:.2e}")


if __name__ == "__main__":
    main()
