"""Scenario orchestration: seeded sweeps of networked control episodes.

Each episode drives the boiler through the event kernel. The plant node
emits a reading every control period; the serving node (an edge server in
edge-collab, the cloud in cloud-only) computes a command; the command is
applied at the next period boundary. Control-loop latency is the simulated
time from a reading's emission to its command's delivery at the plant.

Everything is seeded and integer-timed: per-episode generator streams are
derived from (seed, phase, episode), so a PID arm replays the exact reset
states and process noise of a learning arm's evaluation episodes, and two
runs of the same config produce byte-identical metrics files.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import allocator, boiler, dqn, traces
from .boiler import ActuatorCommand, BoilerState
from .config import RunConfig
from .pid import BoilerPid
from .simcore import CONTROL_PERIOD_MS, Kernel, Node, NodeKind, Outgoing, Topology

CONTROL_MODULE_ID = "boiler-control"
CLOUD_NODE = 0

# stream labels for per-run generator derivation
PHASE_TRAIN = 0
PHASE_EVAL = 1
_STREAM_INIT = 11
_STREAM_EXPLORE = 12
_STREAM_REPLAY = 13
_STREAM_DRIFT = 14
_STREAM_JITTER = 21  # + phase


@dataclass(frozen=True)
class MetricsRecord:
    """Per-episode aggregates, one JSONL row."""

    seed: int
    scenario: str
    controller: str
    phase: str
    episode: int
    uninterrupted_steps: int
    failure_count: int
    cumulative_reward: float
    mean_latency_ms: float
    p95_latency_ms: float
    latency_samples: int
    control_loss: float
    action_accuracy: float
    utilization: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def metrics_from_dict(data: dict) -> MetricsRecord:
    return MetricsRecord(**data)


@dataclass
class SeedResult:
    seed: int
    records: list[MetricsRecord]
    diverged: bool


@dataclass
class RunResult:
    results: dict[int, SeedResult]
    metrics_paths: dict[int, str]
    summary_path: str | None

    def records(self, phase: str | None = None) -> list[MetricsRecord]:
        out = []
        for seed in sorted(self.results):
            for rec in self.results[seed].records:
                if phase is None or rec.phase == phase:
                    out.append(rec)
        return out


def oracle_action(cfg: boiler.BoilerConfig, state: BoilerState, gamma: float) -> int:
    """Reference action: best immediate reward plus discounted greedy value.

    Brute force over the 9 actions under the noise-free plant; the value of
    the landed state is the best single-step reward available from it.
    Ties go to the lowest action index.
    """
    best_action = 0
    best_value = -math.inf
    for a in range(boiler.N_ACTIONS):
        cmd = ActuatorCommand.from_index(a)
        nxt, r, failed = boiler.step(cfg, state, cmd)
        if failed:
            follow = -cfg.failure_penalty
        else:
            follow = max(
                boiler.reward(cfg, nxt, ActuatorCommand.from_index(b))
                for b in range(boiler.N_ACTIONS)
            )
        value = r + gamma * follow
        if value > best_value:
            best_value = value
            best_action = a
    return best_action


def action_accuracy(agent_actions, oracle_actions) -> float:
    """Fraction of positions where the two action sequences agree."""
    if len(agent_actions) != len(oracle_actions):
        raise ValueError(
            f"sequence lengths differ: {len(agent_actions)} vs {len(oracle_actions)}"
        )
    if not agent_actions:
        raise ValueError("empty action sequences")
    hits = sum(1 for a, b in zip(agent_actions, oracle_actions) if a == b)
    return hits / len(agent_actions)


def _percentile(sorted_values: list[int], fraction: float) -> float:
    # nearest-rank percentile on a pre-sorted list
    rank = max(1, math.ceil(fraction * len(sorted_values)))
    return float(sorted_values[rank - 1])


def _setpoint_loss(cfg: boiler.BoilerConfig, state: BoilerState) -> float:
    dl = (state.water_level - cfg.level_setpoint) / cfg.level_setpoint
    dp = (state.pressure - cfg.pressure_setpoint_kpa) / cfg.pressure_setpoint_kpa
    dt = (state.outlet_temp - cfg.outlet_setpoint_c) / cfg.outlet_setpoint_c
    return dl * dl + dp * dp + dt * dt


def load_disturbance(config: RunConfig) -> list[float]:
    """Inlet-temperature offsets replayed from the configured sensor trace.

    The resampled readings of one sensor become per-step offsets relative
    to that sensor's first reading, scaled by trace_disturbance_scale.
    """
    if config.trace_file is None or config.trace_disturbance_scale == 0.0:
        return []
    rows = traces.ingest_trace(config.trace_file)
    if not rows:
        return []
    sensor = config.trace_sensor or rows[0].sensor_id
    values = traces.sensor_values(rows, sensor)
    if not values:
        raise ValueError(f"trace has no rows for sensor {sensor!r}")
    base = values[0]
    return [config.trace_disturbance_scale * (v - base) for v in values]


class _Episode:
    """One episode's mutable state plus the node handlers that drive it."""

    def __init__(self, run: "_SeedRun", phase_code: int, phase_name: str, index: int):
        self.run = run
        self.cfg = run.cfg
        self.plant_cfg = run.cfg.plant
        self.phase_code = phase_code
        self.phase_name = phase_name
        self.index = index
        self.training = run.cfg.controller == "drl" and phase_code == PHASE_TRAIN
        self.greedy = run.cfg.controller == "pid" or phase_code == PHASE_EVAL

        self.plant_rng = np.random.default_rng([run.seed, phase_code, index])
        jitter_rng = np.random.default_rng([run.seed, _STREAM_JITTER + phase_code, index])
        self.topology = run.build_topology()
        self.kernel = Kernel(self.topology, rng=jitter_rng)

        if run.pid is not None:
            run.pid.reset()
        self.state = boiler.reset(self.plant_cfg, self.plant_rng)
        self.pending_cmd = ActuatorCommand(self.state.pump_pos, self.state.valve_pos)
        self.history: list[tuple[BoilerState, float]] = []
        self.ctl_prev_state: BoilerState | None = None
        self.ctl_pending: tuple[np.ndarray, int] | None = None
        self.ctl_last_step = -1

        self.steps = 0
        self.failed = False
        self.done = False
        self.cumulative_reward = 0.0
        self.loss_sum = 0.0
        self.latencies: list[int] = []
        self.busy_ms = 0
        self.acc_hits = 0
        self.acc_n = 0

    # -- plant node ---------------------------------------------------------

    def handle_sensor(self, event):
        if event.kind == "control-command":
            body = event.body
            self.latencies.append(self.kernel.clock - body["emit_ms"])
            self.pending_cmd = ActuatorCommand.from_index(body["action"])
            return None
        return self._tick(event.body["step"])

    def _tick(self, step: int):
        reward = None
        if step > 0:
            disturbance = self.run.disturbance_at(step - 1)
            self.state, reward, self.failed = boiler.step(
                self.plant_cfg,
                self.state,
                self.pending_cmd,
                self.plant_rng,
                inlet_disturbance_c=disturbance,
            )
            self.steps = step
            self.cumulative_reward += reward
            self.loss_sum += _setpoint_loss(self.plant_cfg, self.state)
            self.done = self.failed or step == self.run.max_steps
        route, reply = self.run.reading_route()
        body = {
            "step": step,
            "state": dataclasses.astuple(self.state),
            "reward": reward,
            "done": self.done,
            "emit_ms": self.kernel.clock,
            "route": route[1:],
            "reply": reply,
        }
        if not self.done:
            self.kernel.schedule(
                self.kernel.clock + CONTROL_PERIOD_MS,
                self.run.sensor_node,
                "sensor-reading",
                {"step": step + 1},
            )
        return [Outgoing(route[0], "sensor-reading", body)]

    # -- edge and cloud nodes ------------------------------------------------

    def handle_edge(self, event):
        body = event.body
        if body.get("route"):
            nxt = body["route"][0]
            return [Outgoing(nxt, event.kind, {**body, "route": body["route"][1:]})]
        if event.kind == "sensor-reading":
            return self._serve(body)
        if event.kind == "state-report":
            return self.run.emit_report(event.target)
        if event.kind == "allocation-update":
            return None
        return None

    def handle_cloud(self, event):
        body = event.body
        if event.kind == "sensor-reading":
            return self._serve(body)
        if event.kind == "state-report":
            return self.run.receive_report(body)
        return None

    def _serve(self, body):
        step = body["step"]
        if step <= self.ctl_last_step:
            return None  # stale reading overtaken en route
        self.ctl_last_step = step
        state = BoilerState(*body["state"])
        reward = body["reward"]
        action = self._decide(state, reward, body["done"], step)
        if action is None:
            return None
        if step % self.cfg.accuracy_sample_every == 0:
            reference = oracle_action(self.plant_cfg, state, self.cfg.agent.gamma)
            self.acc_n += 1
            self.acc_hits += 1 if action == reference else 0
        self.busy_ms += self.run.compute_ms
        reply = body["reply"]
        command = {
            "step": step,
            "action": action,
            "emit_ms": body["emit_ms"],
            "route": reply[1:],
        }
        return [
            Outgoing(reply[0], "control-command", command, depart_delay_ms=self.run.compute_ms)
        ]

    def _decide(self, state: BoilerState, reward, done: bool, step: int):
        agent = self.run.agent
        if agent is None:
            if done:
                return None
            return self.run.pid.act(state)
        if self.ctl_prev_state is not None and reward is not None:
            self.history.append((self.ctl_prev_state, reward))
        self.ctl_prev_state = state
        obs = boiler.observe(self.plant_cfg, state, self.history)
        if self.ctl_pending is not None and reward is not None:
            prev_obs, prev_action = self.ctl_pending
            if self.phase_code == PHASE_TRAIN:
                agent.record(dqn.Transition(prev_obs, prev_action, reward, obs, done))
                if self.training:
                    agent.train()
        if done:
            self.ctl_pending = None
            return None
        action = agent.act(obs, greedy=self.greedy)
        self.ctl_pending = (obs, action)
        return action

    # -- driving -------------------------------------------------------------

    def run_to_completion(self) -> MetricsRecord:
        kernel = self.kernel
        kernel.register_handler(self.run.sensor_node, self.handle_sensor)
        kernel.register_handler(CLOUD_NODE, self.handle_cloud)
        for node in self.run.edge_nodes:
            kernel.register_handler(node, self.handle_edge)
        kernel.schedule(0, self.run.sensor_node, "sensor-reading", {"step": 0})
        self.run.schedule_reports(kernel)
        kernel.run()

        ordered = sorted(self.latencies)
        duration_ms = self.steps * CONTROL_PERIOD_MS
        return MetricsRecord(
            seed=self.run.seed,
            scenario=self.cfg.scenario,
            controller=self.cfg.controller,
            phase=self.phase_name,
            episode=self.index,
            uninterrupted_steps=self.steps,
            failure_count=1 if self.failed else 0,
            cumulative_reward=self.cumulative_reward,
            mean_latency_ms=sum(ordered) / len(ordered),
            p95_latency_ms=_percentile(ordered, 0.95),
            latency_samples=len(ordered),
            control_loss=self.loss_sum / self.steps,
            action_accuracy=self.acc_hits / self.acc_n,
            utilization=self.busy_ms / duration_ms,
        )


class _SeedRun:
    """All per-seed state: the learner, allocation registry, and streams."""

    def __init__(self, cfg: RunConfig, seed: int, disturbance: list[float]):
        self.cfg = cfg
        self.seed = seed
        self.disturbance = disturbance
        self.max_steps = cfg.steps_per_episode
        latency = cfg.latency.resolved()
        self.latency = latency
        self.compute_ms = latency["compute_ms"]

        self.edge_nodes = list(range(1, len(cfg.allocator.edges) + 1))
        self.sensor_node = len(cfg.allocator.edges) + 1
        self.attached_edge = 1
        self.node_for_resource = {
            e.id: self.edge_nodes[i] for i, e in enumerate(cfg.allocator.edges)
        }

        if cfg.controller == "drl":
            total_actions = cfg.episodes * self.max_steps
            decay = max(1, round(cfg.agent.epsilon_decay_fraction * total_actions))
            hp = dqn.Hyperparams(
                learning_rate=cfg.agent.learning_rate,
                gamma=cfg.agent.gamma,
                target_update_freq=cfg.agent.target_update_freq,
                batch_size=cfg.agent.batch_size,
                buffer_capacity=cfg.agent.buffer_capacity,
                epsilon_start=cfg.agent.epsilon_start,
                epsilon_end=cfg.agent.epsilon_end,
                epsilon_decay_steps=decay,
                warmup=cfg.agent.warmup,
                td_error_clip=cfg.agent.td_error_clip,
            )
            layers = [boiler.OBSERVATION_LENGTH, *cfg.agent.hidden_layers, boiler.N_ACTIONS]
            self.agent = dqn.DqnAgent(
                layers,
                hp,
                init_rng=np.random.default_rng([seed, _STREAM_INIT]),
                explore_rng=np.random.default_rng([seed, _STREAM_EXPLORE]),
                replay_rng=np.random.default_rng([seed, _STREAM_REPLAY]),
            )
            self.pid = None
        else:
            self.agent = None
            self.pid = BoilerPid(cfg.plant, cfg.pid.level, cfg.pid.pressure)

        self.drift_rng = np.random.default_rng([seed, _STREAM_DRIFT])
        self.edge_loads = {e.id: e.current_load for e in cfg.allocator.edges}
        self.plan = self._solve() if cfg.scenario == "edge-collab" else None
        self.serving_node = self._serving_node()

    # -- allocation ----------------------------------------------------------

    def _resources(self) -> list[allocator.EdgeResource]:
        return [
            dataclasses.replace(e, current_load=self.edge_loads[e.id])
            for e in self.cfg.allocator.edges
        ]

    def _modules(self) -> list[allocator.ControlModule]:
        control = allocator.ControlModule(
            CONTROL_MODULE_ID,
            load=self.cfg.allocator.control_module_load,
            intensity=self.cfg.allocator.control_module_intensity,
        )
        return [control, *self.cfg.allocator.background_modules]

    def _solve(self) -> allocator.AssignmentPlan:
        solver = (
            allocator.solve if self.cfg.allocator.mode == "exact" else allocator.solve_greedy
        )
        return solver(self._modules(), self._resources(), self.cfg.allocator.weights)

    def _serving_node(self) -> int:
        if self.cfg.scenario == "cloud-only" or self.plan is None:
            return CLOUD_NODE
        resource = self.plan.assignment().get(CONTROL_MODULE_ID)
        if resource is None:
            return CLOUD_NODE
        return self.node_for_resource[resource]

    def schedule_reports(self, kernel: Kernel) -> None:
        """Queue the per-edge load-report ticks for one episode."""
        if self.cfg.scenario != "edge-collab":
            return
        interval_ms = self.cfg.allocator.rebalance_interval_steps * CONTROL_PERIOD_MS
        horizon_ms = self.max_steps * CONTROL_PERIOD_MS
        t = interval_ms
        while t <= horizon_ms:
            for node in self.edge_nodes:
                # offset into the period so reports never share a timestamp
                # with control traffic emission
                kernel.schedule(t + CONTROL_PERIOD_MS // 2, node, "state-report", {})
            t += interval_ms

    def emit_report(self, edge_node: int):
        resource = self.cfg.allocator.edges[edge_node - 1]
        drifted = self.edge_loads[resource.id] + self.drift_rng.normal(
            0.0, self.cfg.allocator.load_drift
        )
        self.edge_loads[resource.id] = float(
            np.clip(drifted, 0.0, self.cfg.allocator.load_max)
        )
        body = {"edge": resource.id, "load": self.edge_loads[resource.id], "route": []}
        return [Outgoing(CLOUD_NODE, "state-report", body)]

    def receive_report(self, body):
        self.edge_loads[body["edge"]] = body["load"]
        new_plan = self._solve()
        changed = self.plan is None or new_plan.x != self.plan.x
        self.plan = new_plan
        self.serving_node = self._serving_node()
        if not changed:
            return None
        update = {"assignment": new_plan.assignment(), "route": []}
        return [Outgoing(node, "allocation-update", update) for node in self.edge_nodes]

    # -- routing -------------------------------------------------------------

    def reading_route(self) -> tuple[list[int], list[int]]:
        """Forward hops for a reading and the reply hops for its command."""
        if self.cfg.scenario == "cloud-only":
            forward = [CLOUD_NODE]
        elif self.serving_node == self.attached_edge:
            forward = [self.attached_edge]
        else:
            forward = [self.attached_edge, self.serving_node]
        reply = list(reversed(forward[:-1])) + [self.sensor_node]
        return forward, reply

    def build_topology(self) -> Topology:
        cfg = self.cfg
        lat = self.latency
        jitter = cfg.latency.jitter
        topo = Topology()
        topo.add_node(Node(CLOUD_NODE, NodeKind.CLOUD_CENTER))
        for node in self.edge_nodes:
            topo.add_node(Node(node, NodeKind.EDGE_SERVER))
        topo.add_node(Node(self.sensor_node, NodeKind.SENSOR, attached_to=self.attached_edge))
        topo.validate()

        topo.add_link(self.sensor_node, CLOUD_NODE, lat["cloud_uplink_ms"], jitter)
        topo.add_link(CLOUD_NODE, self.sensor_node, lat["cloud_downlink_ms"], jitter)
        topo.add_link(self.sensor_node, self.attached_edge, lat["edge_uplink_ms"], jitter)
        topo.add_link(self.attached_edge, self.sensor_node, lat["edge_downlink_ms"], jitter)
        for node in self.edge_nodes:
            topo.add_link(node, CLOUD_NODE, lat["edge_cloud_up_ms"], jitter)
            topo.add_link(CLOUD_NODE, node, lat["edge_cloud_down_ms"], jitter)
            for other in self.edge_nodes:
                if other != node:
                    topo.add_link(node, other, lat["inter_edge_ms"], jitter)
        return topo

    def disturbance_at(self, step_index: int) -> float:
        if not self.disturbance:
            return 0.0
        return self.disturbance[step_index % len(self.disturbance)]

    # -- phases ---------------------------------------------------------------

    def run(self) -> SeedResult:
        records: list[MetricsRecord] = []
        diverged = False
        phases = [(PHASE_TRAIN, "train", self.cfg.episodes)]
        if self.cfg.eval_episodes > 0:
            phases.append((PHASE_EVAL, "eval", self.cfg.eval_episodes))
        for phase_code, phase_name, count in phases:
            if diverged:
                break
            for index in range(count):
                episode = _Episode(self, phase_code, phase_name, index)
                try:
                    records.append(episode.run_to_completion())
                except dqn.DivergenceError:
                    diverged = True
                    break
        return SeedResult(seed=self.seed, records=records, diverged=diverged)


def run_seed(cfg: RunConfig, seed: int, disturbance: list[float] | None = None) -> SeedResult:
    if disturbance is None:
        disturbance = load_disturbance(cfg)
    return _SeedRun(cfg, seed, disturbance).run()


def metrics_filename(cfg: RunConfig, seed: int) -> str:
    return f"metrics_{cfg.scenario}_{cfg.controller}_seed{seed}.jsonl"


def write_metrics(records: list[MetricsRecord], path) -> None:
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(rec.to_dict()) + "\n")


def _phase_records(result: SeedResult, phase: str) -> list[MetricsRecord]:
    return [r for r in result.records if r.phase == phase]


def write_summary(results: dict[int, SeedResult], cfg: RunConfig, path) -> None:
    """Run-level CSV: one row per seed."""
    import csv

    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            [
                "seed",
                "scenario",
                "controller",
                "diverged",
                "train_episodes",
                "eval_episodes",
                "train_reward_mean",
                "eval_reward_mean",
                "total_failures",
                "mean_latency_ms",
            ]
        )
        for seed in sorted(results):
            res = results[seed]
            train = _phase_records(res, "train")
            evals = _phase_records(res, "eval")
            all_recs = res.records
            writer.writerow(
                [
                    seed,
                    cfg.scenario,
                    cfg.controller,
                    int(res.diverged),
                    len(train),
                    len(evals),
                    repr(_mean([r.cumulative_reward for r in train])) if train else "",
                    repr(_mean([r.cumulative_reward for r in evals])) if evals else "",
                    sum(r.failure_count for r in all_recs),
                    repr(_mean([r.mean_latency_ms for r in all_recs])) if all_recs else "",
                ]
            )


def _mean(values: list[float]) -> float:
    return sum(values) / len(values)


def run_experiment(cfg: RunConfig, out_dir: str | None = None) -> RunResult:
    """Run every configured seed; optionally write metrics files.

    A diverged seed is marked in the summary and keeps its completed
    episodes; remaining seeds still run.
    """
    disturbance = load_disturbance(cfg)
    results = {seed: run_seed(cfg, seed, disturbance) for seed in cfg.seeds}

    metrics_paths: dict[int, str] = {}
    summary_path = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for seed, result in results.items():
            path = os.path.join(out_dir, metrics_filename(cfg, seed))
            write_metrics(result.records, path)
            metrics_paths[seed] = path
        summary_path = os.path.join(out_dir, "summary.csv")
        write_summary(results, cfg, summary_path)
    return RunResult(results=results, metrics_paths=metrics_paths, summary_path=summary_path)
