"""90th-percentile error of the end-to-end pipeline across SNR."""
import argparse

from soiltag.pipeline import DatasetPlan, sweep

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--snr", type=float, nargs="+", default=[0, 10, 20, 30])
ap.add_argument("--env", default="empty")
args = ap.parse_args()

print("snr_db  n    mean    p90   skipped")
for snr, res in sweep(DatasetPlan(environments=(args.env,)), args.snr, seed=args.seed):
    s = res.report.summary()
    print(f"{snr:6.1f} {s['n']:4d} {s['mean']:7.3f} {s['p90']:6.3f}  {res.stats.skipped}")
