#!/usr/bin/env python3
"""Smoke test for the motionssm_py extension module.

Build the module first, then run this script:

    cargo build -p motionssm-py --release
    python3 python/smoke_test.py
"""

import math
import os
import shutil
import sys
import tempfile


def locate_extension():
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    candidates = [
        os.path.join(root, "target", "release", "libmotionssm_py.so"),
        os.path.join(root, "target", "debug", "libmotionssm_py.so"),
    ]
    for candidate in candidates:
        if os.path.exists(candidate):
            return candidate
    sys.exit("libmotionssm_py.so not found; run: cargo build -p motionssm-py --release")


def import_module():
    so = locate_extension()
    staging = tempfile.mkdtemp(prefix="motionssm_py_")
    shutil.copy(so, os.path.join(staging, "motionssm_py.so"))
    sys.path.insert(0, staging)
    import motionssm_py

    return motionssm_py


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    ms = import_module()
    checks = 0

    # Temporal model: a 1D instance with a hand-checkable likelihood.
    params = ms.LgssmParams(
        a=[[1.0]], q=[[0.0]], c=[[1.0]], r=[[1.0]], mu0=[0.0], sigma0=[[0.0]]
    )
    approx(ms.kalman_loglik(params, [[0.0]]), -0.5 * math.log(2 * math.pi), 1e-12)
    checks += 1

    # Simulation is deterministic and learnable.
    model = ms.LgssmParams(
        a=[[0.8]], q=[[1.0]], c=[[1.0]], r=[[1.0]], mu0=[0.0], sigma0=[[1.0]]
    )
    z1, x1 = ms.simulate(model, steps=300, seed=42)
    z2, x2 = ms.simulate(model, steps=300, seed=42)
    assert x1 == x2 and z1 == z2
    checks += 1

    init = ms.LgssmParams(
        a=[[0.2]], q=[[1.0]], c=[[1.0]], r=[[1.0]], mu0=[0.0], sigma0=[[1.0]]
    )
    fitted = ms.fit_offline(init, [x1], learning_rate=0.02, iters=150, seed=0)
    a_hat = fitted.a[0][0]
    assert abs(a_hat - 0.8) < 0.15, f"recovered A = {a_hat}"
    checks += 1

    # Imputation reproduces near-noiseless observations at observed steps.
    tight = ms.LgssmParams(
        a=[[0.9]], q=[[0.5]], c=[[1.0]], r=[[1e-10]], mu0=[0.0], sigma0=[[1.0]]
    )
    values = [[0.5], [0.2], [-0.1], [0.4]]
    imputed = ms.impute(tight, values)
    approx(imputed[2][0], -0.1, 1e-4)
    checks += 1

    # Forecast means decay geometrically without process noise.
    decay = ms.LgssmParams(
        a=[[0.5]], q=[[0.0]], c=[[1.0]], r=[[1e-8]], mu0=[0.0], sigma0=[[1.0]]
    )
    _, means_x, _ = ms.forecast(decay, [[8.0]], k=3)
    approx(means_x[0][0] / means_x[1][0], 2.0, 1e-6)
    checks += 1

    # Online learner: window semantics.
    learner = ms.OnlineLearner(model, horizon=5)
    for t in range(12):
        learner.step([float(t)])
    assert learner.window_len == 5
    assert len(learner.loglik_log()) == 12
    checks += 1

    # Deformations: the zero field is the identity, constant fields translate.
    h = w = 24
    zero = [[[0.0, 0.0] for _ in range(w)] for _ in range(h)]
    phi = ms.exp_svf(zero)
    assert all(v == [0.0, 0.0] for row in phi for v in row)
    det = ms.jacobian_det(phi)
    assert all(abs(v - 1.0) < 1e-12 for row in det for v in row)
    checks += 1

    # Identity warp reproduces the phantom exactly.
    image, labels = ms.make_phantom(48, 48, seed=7)
    zero48 = [[[0.0, 0.0] for _ in range(48)] for _ in range(48)]
    warped = ms.warp(image, zero48, mode="bilinear")
    assert warped == image
    checks += 1

    # Metrics.
    ring = [[labels[i][j] == 1 for j in range(48)] for i in range(48)]
    assert ms.dice(ring, ring) == 1.0
    approx(ms.hd95(ring, ring), 0.0, 0.0)
    approx(ms.rmse([[0.0, 0.0]], [[3.0, 4.0]]), math.sqrt(12.5), 1e-12)
    # Self-similarity needs nonconstant local content, so use a textured image.
    textured = [[math.sin(1.7 * i + 0.3 * j) + math.cos(0.9 * j - 0.2 * i) for j in range(32)] for i in range(32)]
    assert ms.lcc(textured, textured, window=9) > 0.999
    checks += 1

    # Held-out forecast scoring.
    loglik, fc_rmse = ms.evaluate_forecast(model, x1[:250], x1[250:])
    assert math.isfinite(loglik) and fc_rmse >= 0.0
    checks += 1

    print(f"motionssm_py smoke test: {checks}/10 checks passed")


if __name__ == "__main__":
    main()
