# %% [markdown]
# # Route scans on a synthetic city
# 500 stops, about 300 lines, five concentric fare zones.  Only the final
# McRAPTOR stage is counted as #Scan; the bounding passes are listed separately.

# %%
import numpy as np

from farecfn import Algo, od_queries, run_bench, summarize, synthetic_city

city = synthetic_city()
queries, dropped = od_queries(city.ftt, 30, seed=0)
algos = [Algo.parse(a) for a in ("mcraptor", "mcraptor+ptp", "mcraptor+ptp+fss",
                                 "target_bmrap+ptp+fss@900/1", "tight_bmrap+ptp+fss@0/0",
                                 "tight_bmrap+ptp+fss@900/1", "tight_bmrap+ptp+fss@1800/2")]
records = run_bench(city.ftt, queries, algos)

# %%
print(f"{'algorithm':30} {'#Scan':>8} {'sd':>7} {'all stages':>10} {'ms':>7}")
for row in summarize(records, algos):
    total = np.mean([r.scans + sum(r.stage_scans.values()) for r in records
                     if r.algo == row["algorithm"]])
    print(f"{row['algorithm']:30} {row['scans_avg']:8.1f} {row['scans_sd']:7.1f} "
          f"{total:10.1f} {row['time_ms_avg']:7.1f}")
