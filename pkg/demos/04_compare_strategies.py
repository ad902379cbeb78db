# %% [markdown]
# Restart versus the three continuation policies over 30 seeds
#
# Each seed runs Hyperband at max size 16, then either restarts at 32
# (``ih``) or deepens with ``e``, ``p`` or ``d``. The restart sees the same
# configurations, so differences come only from the policies.

# %%
from idhb.experiments import aggregate, aggregate_table, compare, rows_to_csv

rows = compare(seeds=range(30), R0=16, eta=2)
print(rows_to_csv(rows[:8]))
print(aggregate_table(aggregate(rows)))

# %% [markdown]
# With independent samples for the restart, the incumbents differ because
# the runs no longer see the same configurations.

# %%
print(aggregate_table(aggregate(compare(seeds=range(30), replay=False))))
