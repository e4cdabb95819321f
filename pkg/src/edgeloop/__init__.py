"""Deterministic event-driven testbed for cloud-edge industrial control.

A synthetic boiler plant is closed-loop controlled over a simulated
network, either by a value-learning agent served from edge nodes or by a
tuned PID baseline, with module placement decided by an assignment solver.
"""

__version__ = "0.1.0"

from .allocator import (
    AffinityWeights,
    AssignmentPlan,
    ControlModule,
    EdgeResource,
    affinity,
    rebalance,
    solve,
    solve_exact,
    solve_greedy,
    validate,
)
from .boiler import ActuatorCommand, BoilerConfig, BoilerState, SafetyEnvelope
from .config import ConfigError, RunConfig, load_config, save_config
from .dqn import DqnAgent, Hyperparams, MlpPolicy, ReplayBuffer, Transition
from .experiment import (
    MetricsRecord,
    RunResult,
    action_accuracy,
    oracle_action,
    run_experiment,
    run_seed,
)
from .pid import BoilerPid, PidGains, PidState, pid_step, pid_to_command
from .reporting import compare, emit_plot_data, read_metrics, render_table
from .simcore import Kernel, Link, Node, NodeKind, Topology
from .traces import ingest_trace, read_trace, resample

__all__ = [
    "ActuatorCommand",
    "AffinityWeights",
    "AssignmentPlan",
    "BoilerConfig",
    "BoilerPid",
    "BoilerState",
    "ConfigError",
    "ControlModule",
    "DqnAgent",
    "EdgeResource",
    "Hyperparams",
    "Kernel",
    "Link",
    "MetricsRecord",
    "MlpPolicy",
    "Node",
    "NodeKind",
    "PidGains",
    "PidState",
    "ReplayBuffer",
    "RunConfig",
    "RunResult",
    "SafetyEnvelope",
    "Topology",
    "Transition",
    "action_accuracy",
    "affinity",
    "compare",
    "emit_plot_data",
    "ingest_trace",
    "load_config",
    "oracle_action",
    "pid_step",
    "pid_to_command",
    "read_metrics",
    "read_trace",
    "rebalance",
    "render_table",
    "resample",
    "run_experiment",
    "run_seed",
    "save_config",
    "solve",
    "solve_exact",
    "solve_greedy",
    "validate",
]
