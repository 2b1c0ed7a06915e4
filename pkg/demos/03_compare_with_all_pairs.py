"""
A small Monte-Carlo study
=========================

The two PIE variants next to two references, the all-pairs LASSO on the
expanded design and the oracle refit, on a few replications of a
strong-heredity model.  Use the
``pieqr simulate`` command for full-size runs.
"""

from pieqr.simulation import SimulationSpec, run_replications

spec = SimulationSpec("m1", n=200, p=60, replications=4, base_seed=11)
summary = run_replications(spec, ["piey", "pier", "all_pairs_lasso", "oracle"])

print(f"{'method':<16}{'rate':>8}{'size':>8}{'loss':>8}{'seconds':>9}")
for m in summary.methods:
    print(f"{m:<16}{summary.mean(m, 'rate'):8.1f}{summary.mean(m, 'size'):8.2f}"
          f"{summary.mean(m, 'loss'):8.3f}{summary.mean(m, 'time_seconds'):9.2f}")

# failures are recorded per replication instead of aborting the run
for m, errs in summary.failures.items():
    for r, msg in errs:
        print(f"{m} failed on replication {r}: {msg}")
