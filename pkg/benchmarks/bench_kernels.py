"""Numba versus numpy timings of the three hot kernels.

Both variants are called in the same process (the environment flag only
selects which one the solvers dispatch to). Inputs are the quadrature data of
the fine problem on an ``n x n`` grid.

    python benchmarks/bench_kernels.py --n 128 256 --repeat 5
"""
import argparse
import timeit

import numpy as np

from crypthom import _accel, kernels
from crypthom.geometry import DEFAULT_GEOMETRY as G
from crypthom.mesh import gauss_rule, quad_mesh_rect


def inputs(n, eps=0.2):
    mesh = quad_mesh_rect(2.0 / n)
    rule = gauss_rule(2)
    N, dN, W = mesh.reference_data(rule)
    X = np.ascontiguousarray(mesh.quadrature_points(rule).reshape(-1, 2))
    Y, _ = kernels.wrap_points_numpy(X, eps, G.a, np.zeros(2))
    ne, nq = mesh.n_elements, len(rule.weights)
    A, divA, gamma, beta = kernels.coefficients_numpy(Y, G.r, G.R, G.L, 0.01, 0.01, 0.1)
    em = dict(dN=np.ascontiguousarray(dN), W=np.ascontiguousarray(W), N=N,
              K=np.ascontiguousarray(A.reshape(ne, nq, 3)), b=np.ascontiguousarray(divA.reshape(ne, nq, 2)),
              c=np.zeros((0, nq, 2)), d=np.ascontiguousarray(beta.reshape(ne, nq)), nel=ne)
    return X, Y, eps, em


def cases(X, Y, eps, em):
    off = np.zeros(2)
    coeff_args = (G.r, G.R, G.L, 0.01, 0.01, 0.1)
    em_args = (em["dN"], em["W"], em["N"], em["K"], em["b"], em["c"], em["d"], em["nel"])
    return {
        "wrap_points": (lambda: kernels.wrap_points_numpy(X, eps, G.a, off),
                        lambda: kernels.wrap_points_numba(X, eps, G.a, off)),
        "coefficients": (lambda: kernels.coefficients_numpy(Y, *coeff_args),
                         lambda: kernels.coefficients_numba(Y, *coeff_args)),
        "element_matrices": (lambda: kernels.element_matrices_numpy(*em_args),
                             lambda: kernels.element_matrices_numba(*em_args)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n", type=int, nargs="+", default=[128, 256], help="elements per side")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _accel.HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'kernel':<18} {'n':>5} {'points':>9} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8}")
    for n in args.n:
        data = inputs(n)
        for name, (f_np, f_nb) in cases(*data).items():
            a, b = f_np(), f_nb()  # warm-up (JIT compile or cache load) and agreement check
            for x, y in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
                assert np.allclose(x, y, rtol=1e-12, atol=1e-12), name
            t_np = min(timeit.repeat(f_np, number=1, repeat=args.repeat)) * 1e3
            t_nb = min(timeit.repeat(f_nb, number=1, repeat=args.repeat)) * 1e3
            print(f"{name:<18} {n:>5} {len(data[0]):>9} {t_np:>11.2f} {t_nb:>11.2f} {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
