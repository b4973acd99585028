# %% [markdown]
# # Comparability and restricted search on small fixtures

# %%
from importlib import resources

from farecfn import Query, Router, check_no_overtaking, load_dataset, price_filter
from farecfn.router import in_restricted, in_restricted_by_own_anchor

data = resources.files("farecfn") / "data"

# %% [markdown]
# `fig4b`: a branching ticket graph where only the root loses full comparability.
# `fig4c`: a weight-dependent branch, which the no-overtaking check rejects with a witness.

# %%
for name in ("fig4b", "fig4c"):
    ftt = load_dataset(data / name)
    part = ftt.fares.partition()
    print(name, {t: part.class_of(t) for t in ftt.graph.ids})
    print("   ", part.evidence["A"])

ftt = load_dataset(data / "fig4c")
print(check_no_overtaking(ftt.graph, "A").witness)

# %% [markdown]
# `fig5`: three journey families from S to T. With slacks (30 min, 1 trip)
# the three-trip journey lies in the union of anchor boxes but not in the
# box of its own anchor.

# %%
ftt = load_dataset(data / "fig5")
res = Router(ftt).tight_bmrap(Query("S", "T", 8 * 3600, variant="tight_bmrap",
                                    slack_arr=1800, slack_tr=1))
print("anchors:", [((a - 8 * 3600) // 60, k) for a, k in res.anchors])
for j in price_filter(res.journeys):
    own = in_restricted_by_own_anchor(j.arrival, j.trips, res.anchors, 1800, 1)
    print(f"{j.ticket} {(j.arrival - 8 * 3600) // 60:3d} min {j.trips} trips  "
          f"restricted={in_restricted(j.arrival, j.trips, res.anchors, 1800, 1)} own_anchor={own}")
