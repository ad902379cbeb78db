# %% [markdown]
# Successive halving, and three ways to continue it
#
# Eight step-shaped loss curves: each configuration looks one way after a
# single unit of training and another way from two units on. Arms 0-3 were
# already halved in an earlier, smaller run; arms 4-7 are new.

# %%
from idhb.bench import crossing_instance
from idhb.core import CurveOracle, EvaluationCache, PullLedger
from idhb.sh import OldShState, ShInputs, run_sh, run_variant

curves = crossing_instance()
oracle = CurveOracle(curves)
for c, curve in curves.items():
    print(f"arm {c}: loss {curve(1):.2f} at level 1, {curve(2):.2f} from level 2 on")

# %% The earlier run: four arms, levels 1 and 2.
cache = EvaluationCache()
old_ledger = PullLedger()
old_trace = run_sh(ShInputs((0, 1, 2, 3), r=1, eta=2, s=1), oracle, cache, old_ledger)
print("old survivors per round:", old_trace.survivors, "cost", old_ledger.total)
old = OldShState.from_trace(old_trace)

# %% [markdown]
# Now continue with all eight arms. The cache already holds every loss the
# old run observed, so those are free. The three policies differ in which
# old decisions they are willing to take back:
#
# * ``e`` keeps every old promotion and fills only the remaining slots,
# * ``p`` re-decides but lets previously evaluated arms come back,
# * ``d`` re-decides from scratch, exactly like halving all eight arms.

# %%
fresh = ShInputs((4, 5, 6, 7), r=1, eta=2, s=1)
for mode in "epd":
    ledger = PullLedger()
    trace = run_variant(mode, fresh, old, oracle, cache.copy(), ledger)
    print(f"mode {mode}: rounds {trace.survivors}  winner {trace.winner}  new cost {ledger.total}")

# %% For reference, halving all eight arms with nothing cached:
ledger = PullLedger()
trace = run_sh(ShInputs(tuple(range(8)), 1, 2, 1), oracle, EvaluationCache(), ledger)
print("from scratch: winner", trace.winner, "cost", ledger.total)
