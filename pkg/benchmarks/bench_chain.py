"""Timing comparison of the two random-walk kernel backends.

Runs identical chains (same seeds, same proposal schedule) through the
compiled kernel and the pure-python fallback and reports wall time,
steps per second, and the speedup. Usage:

    python3 benchmarks/bench_chain.py [--n-samples N] [--model linear|exp]
"""

import argparse
import time

import numpy as np

from calming import ChainConfig, ExpComposedModel, LinearModel, PriorSpec
from calming.posterior import compiled_kernel_available, mcmc_sample


def build(model_kind):
    if model_kind == "linear":
        model = LinearModel(np.array([[1.0, 0.3], [0.1, 0.8], [0.0, 0.5]]))
    else:
        model = ExpComposedModel(0.8 * np.array([[1.0, 0.3], [0.1, 0.8],
                                                 [0.0, 0.5]]))
    prior = PriorSpec(f0=np.zeros(2), Gsq=np.eye(2),
                      g0=model.apply(np.zeros(2)), Gammasq=np.eye(3),
                      lam=2.0)
    sigma = 0.7
    rng = np.random.default_rng(0)
    Y = model.apply(np.array([0.2, -0.1])) + sigma * rng.standard_normal(3)
    return Y, sigma, prior, model


def run(backend, Y, sigma, prior, model, cfg):
    t0 = time.perf_counter()
    sample = mcmc_sample(Y, sigma, prior, model, cfg, backend=backend)
    elapsed = time.perf_counter() - t0
    return elapsed, sample


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n-samples", type=int, default=200_000)
    parser.add_argument("--model", choices=["linear", "exp"],
                        default="linear")
    args = parser.parse_args()

    Y, sigma, prior, model = build(args.model)
    cfg = ChainConfig(n_samples=args.n_samples,
                      burn_in=max(1_000, args.n_samples // 10),
                      thinning=1, master_seed=7)
    total_steps = cfg.n_samples + cfg.burn_in

    print(f"model={args.model} steps={total_steps} "
          f"(burn-in {cfg.burn_in}, retained {cfg.n_samples})")

    t_py, s_py = run("python", Y, sigma, prior, model, cfg)
    print(f"python   {t_py:8.3f}s  {total_steps / t_py:12.0f} steps/s  "
          f"accept {s_py.accept_rate:.3f}")

    if not compiled_kernel_available():
        print("compiled kernel not available; skipping")
        return

    t_c, s_c = run("compiled", Y, sigma, prior, model, cfg)
    print(f"compiled {t_c:8.3f}s  {total_steps / t_c:12.0f} steps/s  "
          f"accept {s_c.accept_rate:.3f}")
    print(f"speedup  {t_py / t_c:.1f}x")

    same = np.array_equal(s_py.draws, s_c.draws)
    print(f"draws bitwise identical across backends: {same}")


if __name__ == "__main__":
    main()
