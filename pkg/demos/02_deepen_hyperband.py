# %% [markdown]
# Growing the maximum budget of a finished Hyperband run
#
# We run Hyperband with a max size of 16 units on the synthetic benchmark,
# then decide we want 32. Instead of restarting, the run is deepened: every
# new bracket inherits the matching old bracket and only tops it up.

# %%
from idhb.bench import SamplerSpec, SyntheticBenchmark
from idhb.hyperband import (
    ConfigStream,
    HbParams,
    continue_stream,
    deepen,
    incumbent,
    replay_sampler,
    run_hb,
)

bench = SyntheticBenchmark(SamplerSpec(alpha=0.2, eps=0.1, seed=4))
params = HbParams(R=16, eta=2)
print("brackets (s, n_s, r_s):", params.brackets(), " per-bracket budget B =", params.B)

first = run_hb(params, ConfigStream(seed=4), bench)
inc = incumbent(first)
print(f"R=16: incumbent {inc.config} loss {inc.loss:.4f}, spent {first.ledger.total}")

# %% Deepen with each policy. The original state is not modified.
for mode in "epd":
    nxt = deepen(first, mode, continue_stream(first), bench)
    inc = incumbent(nxt)
    print(
        f"mode {mode}: R={nxt.R} incumbent {inc.config} loss {inc.loss:.4f}, "
        f"extra spend {nxt.ledger.total - first.ledger.total}"
    )

# %% The restart baseline sees exactly the same configurations.
restart = run_hb(HbParams(32, 2), replay_sampler(first), bench)
inc = incumbent(restart)
print(f"restart at R=32: incumbent {inc.config} loss {inc.loss:.4f}, spend {restart.ledger.total}")

# %% Deepening can be repeated.
state = first
for _ in range(3):
    state = deepen(state, "e", continue_stream(state), bench)
    print(f"t={state.t} R={state.R} total spend {state.ledger.total} best loss {incumbent(state).loss:.4f}")
