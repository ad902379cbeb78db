"""Hyperband with iterative deepening: continue a finished search at a larger max budget."""
from .core import (
    ContractError,
    CurveOracle,
    DomainError,
    Envelope,
    EvaluationCache,
    PullLedger,
    envelope_inverse,
    evaluate,
    top_k,
)
from .sh import OldShState, ShInputs, ShTrace, run_did_sh, run_eid_sh, run_pid_sh, run_sh
from .hyperband import (
    ConfigStream,
    HbParams,
    RunState,
    StateLoadError,
    continue_stream,
    deepen,
    incumbent,
    load_state,
    replay_sampler,
    run_hb,
    save_state,
)
from .bench import SamplerSpec, SyntheticBenchmark, TabularBenchmark, load_tabular

__version__ = "0.1.0"
