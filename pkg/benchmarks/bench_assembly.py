"""Galerkin assembly: compiled kernel versus the numpy fallback.

    python3 benchmarks/bench_assembly.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from floquet_lab import _kernels_py, presets

try:
    from floquet_lab import _kernels
except ImportError:  # extension not built
    _kernels = None

CASES = [("mathieu", 32), ("sin_divform", 32), ("checker2d", 8), ("checker2d", 16),
         ("shear2d", 12), ("laplacian3d", 4)]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    print(f"{'operator':<14}{'mf':>4}{'size':>7}{'python ms':>12}{'cython ms':>12}{'speedup':>9}"
          f"{'max diff':>11}")
    for name, mf in CASES:
        op = presets.get(name)
        offsets, a_sup, b_sup, c_sup = op.support
        k = np.full(op.n, 0.3 - 0.2j)
        call = (mf, op.n, k, offsets, a_sup, b_sup, c_sup, False)
        ref = _kernels_py.assemble_galerkin(*call)
        t_py = min(timeit.repeat(lambda: _kernels_py.assemble_galerkin(*call), number=1,
                                 repeat=args.repeat))
        if _kernels is not None:
            got = _kernels.assemble_galerkin(*call)
            t_cy = min(timeit.repeat(lambda: _kernels.assemble_galerkin(*call), number=1,
                                     repeat=args.repeat))
            diff = float(np.abs(got - ref).max())
            row = f"{1e3 * t_cy:12.2f}{t_py / t_cy:9.1f}{diff:11.1e}"
        else:
            row = f"{'n/a':>12}{'':>9}{'':>11}"
        print(f"{name:<14}{mf:>4}{ref.shape[0]:>7}{1e3 * t_py:12.2f}" + row)


if __name__ == "__main__":
    main()
