"""Default end-to-end experiment: 10 levels over 0-20 %, 100 packets each, SNR 25 dB."""
import argparse
import time

from soiltag.pipeline import DatasetPlan, run_e2e

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--snr", type=float, default=25.0)
ap.add_argument("--env", nargs="+", default=["empty"])
args = ap.parse_args()

t0 = time.perf_counter()
res = run_e2e(DatasetPlan(snr_db=args.snr, environments=tuple(args.env)), seed=args.seed)
s = res.report.summary()
print(f"train={res.n_train} test={res.n_test} skipped_cells={res.stats.skipped}")
print(f"mean={s['mean']:.3f} median={s['median']:.3f} p90={s['p90']:.3f}  ({time.perf_counter() - t0:.1f} s)")
