# %% [markdown]
# Tabular benchmarks and resumable state files
#
# A synthetic family can be frozen into a CSV grid, which then behaves like
# any lookup-table benchmark. Run state is a plain JSON document, so a
# search can stop and later be deepened from disk.

# %%
import tempfile
from pathlib import Path

from idhb.bench import SamplerSpec, export_tabular, load_tabular, materialize
from idhb.hyperband import ConfigStream, HbParams, continue_stream, deepen, incumbent, load_state, run_hb, save_state

workdir = Path(tempfile.mkdtemp())
table_path = workdir / "bench.csv"
export_tabular(materialize(SamplerSpec(seed=9), n=300, R_cap=32), table_path)
table = load_tabular(table_path)
print(f"{len(table.configs)} configs x {len(table.fidelities)} fidelities, R_cap={table.R_cap}")

oracle = table.oracle(seed=1)
state = run_hb(HbParams(16, 2), ConfigStream(1, limit=oracle.size), oracle)
state_path = workdir / "state.json"
state_path.write_text(save_state(state))
print("state file:", state_path, f"({state_path.stat().st_size} bytes)")

# %% Later: reload and continue.
restored = load_state(state_path.read_text())
assert save_state(restored) == state_path.read_text()
deeper = deepen(restored, "p", continue_stream(restored, limit=oracle.size), oracle)
inc = incumbent(deeper)
print(f"R={deeper.R}: incumbent {inc.config} loss {inc.loss:.4f} after {deeper.ledger.total} units")
