# %% [markdown]
# # Zone tickets around Halle and Leipzig
# The bundled `mdv` dataset is a small two-city network with a zonal fare
# structure: city tickets, short-hop tickets, a zone ladder and a network pass.

# %%
from importlib import resources

from farecfn import Query, Router, load_dataset, price_filter
from farecfn.tickets import CheckMode, format_price

path = resources.files("farecfn") / "data" / "mdv"
ftt = load_dataset(path)
part = ftt.fares.partition(CheckMode("sampled", 100_000, 0))
print(len(ftt.stops), "stops,", len(ftt.routes), "routes after overlap duplication")
print("fully comparable:", sorted(part.full))

# %%
router = Router(ftt, part)
for o, t in ["AL", "AG", "AC", "HL", "EF", "AB", "IL", "JM", "ED", "AD"]:
    best = price_filter(router.mc_raptor(Query(o, t, 8 * 3600)).journeys)
    cheapest = min(best, key=lambda j: j.price)
    print(f"{o} -> {t}: {cheapest.ticket:4} {format_price(cheapest.price):>5}  "
          f"arrives {cheapest.arrival // 3600:02d}:{cheapest.arrival % 3600 // 60:02d}")

# %% [markdown]
# The fare state after every leg shows how the ticket evolves along a journey.

# %%
j = price_filter(router.mc_raptor(Query("A", "L", 8 * 3600)).journeys)[0]
for leg, state in zip(j.legs, j.trace[1:]):
    print(f"{leg.kind:4} {leg.from_stop} -> {leg.to_stop}: {state.ticket}, "
          f"{ftt.monoid.format(state.weight)}")
