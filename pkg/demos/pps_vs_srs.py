"""How the subsampling SE behaves as n grows, PPS against simple random sampling.

Sizes proportional to -lpd make the ratios v_i / pi_i nearly constant, so
the SE of the total stays flat in n. Uniform sampling pays for the spread
of the pointwise values, and its SE of the total grows like n.
"""

import sys

from subloo.experiments import se_sweep, write_table

rows = se_sweep([100, 1000, 10_000], m=100, replicates=50, seed=7, S=2000)
write_table(rows, sys.stdout)

pps = {r["n"]: r["mean_se"] for r in rows if r["method"] == "PPS"}
srs = {r["n"]: r["mean_se"] for r in rows if r["method"] == "SRS"}
print()
print(f"PPS SE range over n: {min(pps.values()):.2f} .. {max(pps.values()):.2f}")
print(f"SRS SE grows by x{srs[10_000] / srs[100]:.0f} from n=100 to n=10000")
