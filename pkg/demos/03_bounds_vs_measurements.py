# %% [markdown]
# Closed-form bounds next to measured pull counts
#
# The theory module gives (a) a budget under which every continuation
# policy returns an arm within eps/2 of the best limit and (b) upper bounds
# on the fraction of work a continuation needs compared with starting over.

# %%
from idhb.core import Envelope
from idhb.experiments import theorem2_check, theorem2_instance
from idhb.theory import InstanceSpec, eid_pull_bound, pdid_pull_bound, z_id_sh

env = Envelope(lambda j: 1.0 / j, "1/j")
spec = InstanceSpec(nus=(0, 0.5, 0.5, 1), envelope=env, eta=2, R=1000, eps=0.2)
print("sufficient budget z =", z_id_sh(spec))

# %% How the guaranteed saving grows with reuse (16 arms, 3 rounds, R=100).
for n_old in (0, 4, 8, 10, 12, 15):
    e_raw, e = eid_pull_bound(16, n_old, 2, 100, 2)
    _, pd = pdid_pull_bound(16, n_old, 2, 100, 2)
    print(f"reused {n_old:2d}: eID <= {float(e):.3f} (raw {float(e_raw):.3f}), pID/dID <= {float(pd):.3f}")

# %% Measured ratios on a few random instances.
for seed in range(6):
    res = theorem2_check(theorem2_instance(seed))
    ratios = {m: p / res["sh"] for m, p in res["pulls"].items()}
    bound = float(eid_pull_bound(res["n"], res["n_old"], res["s"], res["R"], res["eta"])[1]) if res["ratio_bounds_checked"] else None
    print(
        f"n={res['n']:2d} reused={res['n_old']:2d} s={res['s']}: measured "
        + " ".join(f"{m}={r:.3f}" for m, r in ratios.items())
        + (f"  eID bound {bound:.3f}" if bound is not None else "  (bound undefined)")
    )
