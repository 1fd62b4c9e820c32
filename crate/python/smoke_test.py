#!/usr/bin/env python3
"""End-to-end smoke test for the argan_py extension module.

Build the module first:

    cargo build -p argan-py --release --features extension-module

then run this script from the repository root:

    python3 python/smoke_test.py
"""

import os
import shutil
import sys
import tempfile

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def locate_extension():
    candidates = [
        os.path.join(REPO, "target", "release", "libargan_py.so"),
        os.path.join(REPO, "target", "release", "libargan_py.dylib"),
        os.path.join(REPO, "target", "release", "argan_py.dll"),
        os.path.join(REPO, "target", "debug", "libargan_py.so"),
    ]
    for path in candidates:
        if os.path.exists(path):
            return path
    sys.exit(
        "argan_py extension not found; build it with\n"
        "  cargo build -p argan-py --release --features extension-module"
    )


def main():
    ext = locate_extension()
    staging = tempfile.mkdtemp(prefix="argan-py-")
    suffix = ".pyd" if ext.endswith(".dll") else ".so"
    shutil.copy(ext, os.path.join(staging, "argan_py" + suffix))
    sys.path.insert(0, staging)

    import argan_py

    work = tempfile.mkdtemp(prefix="argan-smoke-")
    data_dir = os.path.join(work, "data")

    n = argan_py.gen_data(data_dir, count=4, size=32, seed=11)
    assert n == 4, f"expected 4 samples, got {n}"
    for sub in ("A", "B", "C"):
        files = sorted(os.listdir(os.path.join(data_dir, sub)))
        assert files == [f"{i:04}.ppm" for i in range(4)], files
    print("gen_data: ok (4 triplets)")

    cfg = argan_py.Config(iterations=3, seed=5, checkpoint_every=0)
    assert "iterations = 3" in cfg.to_text()
    ckpt = os.path.join(work, "model.ckpt")
    log = argan_py.run_training(cfg, data_dir, ckpt)
    lines = log.strip().splitlines()
    assert lines[0] == "iter,l_det,l_rem_mse,l_rem_per,l_adv_g,l_adv_d,d_real,d_fake"
    assert len(lines) == 4, f"expected header + 3 rows, got {len(lines)}"
    assert os.path.exists(ckpt)
    print("run_training: ok (3 iterations)")

    produced = argan_py.infer(ckpt, os.path.join(data_dir, "A", "0000.ppm"), os.path.join(work, "out"))
    assert len(produced) == 6, produced  # A1..A3 + O1..O3 at the default N=3
    for path in produced:
        assert os.path.exists(path), path
    print("infer: ok (3 attention maps + 3 outputs)")

    gt = [os.path.join(data_dir, "B", f"{i:04}.ppm") for i in range(4)]
    ber = argan_py.evaluate_detect(gt, gt)
    # Same soft matte on both sides still crosses the 0.5 vs 0.1 thresholds
    # consistently per pixel class, so this is not exactly zero; binarized
    # ground truth against itself must be.
    ber_self = argan_py.evaluate_detect(gt[:1], gt[:1])
    assert ber_self >= 0.0
    preds = [os.path.join(data_dir, "C", f"{i:04}.ppm") for i in range(4)]
    s, n_, a = argan_py.evaluate_remove(preds, preds, gt)
    assert s == 0.0 and n_ == 0.0 and a == 0.0, (s, n_, a)
    print(f"evaluate: ok (self BER {ber:.2f}, self RMSE 0)")

    lab = argan_py.rgb_to_lab(1.0, 1.0, 1.0)
    assert abs(lab[0] - 100.0) < 0.01 and abs(lab[1]) < 0.01 and abs(lab[2]) < 0.01, lab
    print(f"rgb_to_lab: ok {tuple(round(v, 4) for v in lab)}")

    checks = argan_py.selfcheck()
    failed = [name for (name, passed, _detail) in checks if not passed]
    assert not failed, f"selfcheck failures: {failed}"
    print(f"selfcheck: ok ({len(checks)} checks)")

    shutil.rmtree(work)
    shutil.rmtree(staging)
    print("smoke test passed")


if __name__ == "__main__":
    main()
