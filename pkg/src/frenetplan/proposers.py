"""Goal proposers: random, brute-force oracle, and external wire-protocol seat.

A proposer fills the role of the learned agent: given an observation it emits
one terminal goal per cycle. The oracle runs the full planning pipeline over a
dense uniform grid and returns the goal of the cheapest drivable candidate,
standing in for a perfectly trained policy. External proposers speak a
newline-delimited JSON protocol over a subprocess pipe, this process's own
stdio, or a TCP socket:

    planner -> proposer  {"v":1,"type":"hello","action_space":{...}}
    proposer -> planner  {"v":1,"type":"ready","name":"..."}
    planner -> proposer  {"type":"observe","episode":E,"t":T,"obs":{...}}
    proposer -> planner  {"type":"act","d":...,"s_dot":...}
    planner -> proposer  {"type":"reward","episode":E,"t":T,"r":...,
                          "done":...,"outcome":...}

Unknown keys are ignored; missing required keys are protocol errors.
"""

from __future__ import annotations

import json
import math
import queue
import shlex
import socket
import subprocess
import sys
import threading
from dataclasses import dataclass

import numpy as np

from .errors import ProposerProtocolError, ProposerTimeout
from .planner import (D_BOUNDS, S_DOT_BOUNDS, TAU_FIXED, GoalSpec,
                      _collision_mask, plan_cycle, uniform_goal_grid)
from .trajectory import generate_batch

PROTOCOL_VERSION = 1
DEFAULT_ACT_TIMEOUT_MS = 100
DEFAULT_HANDSHAKE_TIMEOUT_MS = 10000
MIN_ORACLE_GRID = (9, 5)


def hello_message():
    return {"v": PROTOCOL_VERSION, "type": "hello",
            "action_space": {"d": list(D_BOUNDS), "s_dot": list(S_DOT_BOUNDS),
                             "tau": TAU_FIXED}}


def observation_message(obs, episode, t):
    return {"type": "observe", "episode": int(episode), "t": int(t),
            "obs": {"ego": [float(v) for v in obs.ego],
                    "obstacles": [[float(v) for v in row]
                                  for row in obs.obstacle_set],
                    "lanelets": [[float(v) for v in row]
                                 for row in obs.lanelet_set]}}


def reward_message(episode, t, r, done, outcome):
    return {"type": "reward", "episode": int(episode), "t": int(t),
            "r": float(r), "done": bool(done), "outcome": outcome}


class Proposer:
    """Per-episode goal source; subclasses override propose()."""

    name = "proposer"

    def begin_episode(self, scenario, state, cfg, episode_index):
        pass

    def propose(self, observation, ego_state) -> GoalSpec:
        raise NotImplementedError

    def feedback(self, episode, t, reward, done, outcome):
        pass

    def close(self):
        pass


class RandomProposer(Proposer):
    """Uniform draws over the action domain from a per-episode seeded stream."""

    name = "random"

    def __init__(self):
        self._rng = np.random.default_rng(0)

    def begin_episode(self, scenario, state, cfg, episode_index):
        self._rng = np.random.default_rng(scenario.seed)

    def propose(self, observation, ego_state) -> GoalSpec:
        return GoalSpec(float(self._rng.uniform(*D_BOUNDS)),
                        float(self._rng.uniform(*S_DOT_BOUNDS)))


def _violation_counts(ctx, batch):
    """Number of violated checks per row: domain, four kinematic bounds, collision."""
    cart = batch.cart
    counts = (~batch.domain_ok).astype(int)
    counts += np.max(cart.a, axis=-1) > ctx.limits.a_max
    counts += np.max(np.abs(cart.kappa), axis=-1) > ctx.limits.kappa_max
    counts += np.max(np.abs(cart.kappa_dot), axis=-1) > ctx.limits.kappa_dot_max
    counts += np.max(np.abs(cart.psi_dot), axis=-1) > ctx.limits.psi_dot_max
    counts += np.any(_collision_mask(cart.x, cart.y, cart.psi, ctx.obstacles,
                                     ctx.ego_length, ctx.ego_width), axis=-1)
    return counts


def oracle_propose_in_context(ego_state, ctx, grid) -> GoalSpec:
    """Dense-grid argmin; falls back to the least-violating goal if none drive."""
    goals = uniform_goal_grid(*grid)
    result = plan_cycle(ctx, ego_state, goals)
    if result.best is not None:
        return result.best.goal
    batch = generate_batch(ego_state, [g.d for g in goals],
                           [g.s_dot for g in goals], goals[0].tau, ctx.dt,
                           ctx.path)
    counts = _violation_counts(ctx, batch)
    order = np.lexsort((np.arange(len(goals)), np.abs(batch.goal_d), counts))
    return goals[int(order[0])]


def oracle_propose(ego_state, scenario, grid=(40, 20), cfg=None) -> GoalSpec:
    """Standalone oracle call that builds the planning context from a scenario."""
    from .environment import SimConfig, init_episode

    if grid[0] < MIN_ORACLE_GRID[0] or grid[1] < MIN_ORACLE_GRID[1]:
        raise ValueError(f"oracle grid must be at least {MIN_ORACLE_GRID}")
    state = init_episode(scenario, cfg or SimConfig())
    return oracle_propose_in_context(ego_state, state.context, grid)


class OracleProposer(Proposer):
    """Brute-force stand-in for a trained agent; exercises the whole pipeline."""

    name = "oracle"

    def __init__(self, grid=(40, 20)):
        if grid[0] < MIN_ORACLE_GRID[0] or grid[1] < MIN_ORACLE_GRID[1]:
            raise ValueError(f"oracle grid must be at least {MIN_ORACLE_GRID}")
        self.grid = (int(grid[0]), int(grid[1]))
        self._ctx = None

    def begin_episode(self, scenario, state, cfg, episode_index):
        self._ctx = state.context

    def propose(self, observation, ego_state) -> GoalSpec:
        if self._ctx is None:
            raise RuntimeError("begin_episode was not called")
        return oracle_propose_in_context(ego_state, self._ctx, self.grid)


# ---------------------------------------------------------------------------
# external proposer over newline-delimited JSON


class _LineReader:
    """Background reader so that blocking streams honor receive deadlines."""

    _EOF = object()

    def __init__(self, stream):
        self._queue = queue.Queue()
        self._thread = threading.Thread(target=self._pump, args=(stream,),
                                        daemon=True)
        self._thread.start()

    def _pump(self, stream):
        try:
            for line in stream:
                self._queue.put(line)
        except (OSError, ValueError):
            pass
        self._queue.put(self._EOF)

    def readline(self, timeout_s):
        try:
            line = self._queue.get(timeout=timeout_s)
        except queue.Empty:
            raise ProposerTimeout(f"no message within {timeout_s * 1000:.0f} ms")
        if line is self._EOF:
            raise ProposerProtocolError("connection closed by proposer")
        return line


def _parse_message(line, required_type, required_keys):
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProposerProtocolError(f"invalid JSON from proposer: {exc}")
    if not isinstance(msg, dict) or msg.get("type") != required_type:
        raise ProposerProtocolError(
            f"expected {required_type!r} message, got {line.strip()!r}")
    for key in required_keys:
        if key not in msg:
            raise ProposerProtocolError(f"{required_type!r} message missing {key!r}")
    return msg


class ExternalProposer(Proposer):
    """Planner-side endpoint of the wire protocol.

    One connection serves many episodes; observe/act pairs are strictly
    serialized. Construct via spawn(), over_stdio() or connect().
    """

    def __init__(self, reader, writer, act_timeout_ms=DEFAULT_ACT_TIMEOUT_MS,
                 handshake_timeout_ms=DEFAULT_HANDSHAKE_TIMEOUT_MS,
                 process=None, sock=None):
        if not 10 <= act_timeout_ms <= 1000:
            raise ValueError("act timeout must be within [10, 1000] ms")
        self._reader = _LineReader(reader)
        self._writer = writer
        self._act_timeout = act_timeout_ms / 1000.0
        self._handshake_timeout = handshake_timeout_ms / 1000.0
        self._process = process
        self._socket = sock
        self._episode = 0
        self._t = 0
        self.name = "external"

    @classmethod
    def spawn(cls, command, **kwargs):
        """Start the proposer as a subprocess speaking over its stdio."""
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        proc = subprocess.Popen(argv, stdin=subprocess.PIPE,
                                stdout=subprocess.PIPE, stderr=sys.stderr,
                                text=True, bufsize=1)
        return cls(proc.stdout, proc.stdin, process=proc, **kwargs)

    @classmethod
    def connect(cls, host, port, **kwargs):
        """Connect to a proposer listening on a TCP endpoint."""
        sock = socket.create_connection((host, port))
        reader = sock.makefile("r", encoding="utf-8")
        writer = sock.makefile("w", encoding="utf-8")
        return cls(reader, writer, sock=sock, **kwargs)

    def _send(self, msg):
        try:
            self._writer.write(json.dumps(msg) + "\n")
            self._writer.flush()
        except (OSError, ValueError, BrokenPipeError) as exc:
            raise ProposerProtocolError(f"cannot write to proposer: {exc}")

    def handshake(self) -> str:
        """Exchange hello/ready; returns the proposer's declared name."""
        self._send(hello_message())
        line = self._reader.readline(self._handshake_timeout)
        msg = _parse_message(line, "ready", ("v", "name"))
        if msg["v"] != PROTOCOL_VERSION:
            raise ProposerProtocolError(f"protocol version {msg['v']!r} "
                                        f"!= {PROTOCOL_VERSION}")
        if not isinstance(msg["name"], str):
            raise ProposerProtocolError("ready name must be a string")
        self.name = msg["name"]
        return self.name

    def begin_episode(self, scenario, state, cfg, episode_index):
        self._episode = int(episode_index)
        self._t = 0

    def propose(self, observation, ego_state) -> GoalSpec:
        self._send(observation_message(observation, self._episode, self._t))
        line = self._reader.readline(self._act_timeout)
        msg = _parse_message(line, "act", ("d", "s_dot"))
        d, s_dot = msg["d"], msg["s_dot"]
        if not (isinstance(d, (int, float)) and isinstance(s_dot, (int, float))
                and math.isfinite(d) and math.isfinite(s_dot)):
            raise ProposerProtocolError(f"non-numeric act {line.strip()!r}")
        self._t += 1
        return GoalSpec(float(d), float(s_dot))

    def feedback(self, episode, t, reward, done, outcome):
        self._send(reward_message(episode, t, reward, done, outcome))

    def close(self):
        for stream in (self._writer,):
            try:
                stream.close()
            except OSError:
                pass
        if self._process is not None:
            try:
                self._process.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._process.kill()
                self._process.wait()
        if self._socket is not None:
            try:
                self._socket.close()
            except OSError:
                pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_handshake(proposer: ExternalProposer) -> str:
    """Run the hello/ready exchange and return the proposer identity."""
    return proposer.handshake()


@dataclass
class ProposerKind:
    """Factory description: kind plus kind-specific configuration."""

    kind: str  # "Random" | "Oracle" | "External"
    oracle_grid: tuple = (40, 20)
    command: str = ""
    endpoint: str = ""
    act_timeout_ms: int = DEFAULT_ACT_TIMEOUT_MS
    handshake_timeout_ms: int = DEFAULT_HANDSHAKE_TIMEOUT_MS

    def build(self) -> Proposer:
        if self.kind == "Random":
            return RandomProposer()
        if self.kind == "Oracle":
            return OracleProposer(self.oracle_grid)
        if self.kind == "External":
            kwargs = dict(act_timeout_ms=self.act_timeout_ms,
                          handshake_timeout_ms=self.handshake_timeout_ms)
            if self.command:
                proposer = ExternalProposer.spawn(self.command, **kwargs)
            elif self.endpoint:
                host, _, port = self.endpoint.rpartition(":")
                proposer = ExternalProposer.connect(host or "127.0.0.1",
                                                    int(port), **kwargs)
            else:
                raise ValueError("external proposer needs a command or endpoint")
            proposer.handshake()
            return proposer
        raise ValueError(f"unknown proposer kind {self.kind!r}")
