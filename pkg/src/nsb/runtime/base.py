"""Shared runtime types and the adapter interface."""

from __future__ import annotations

import abc
from dataclasses import dataclass, field

from ..util import format_number

ROLES = ("target", "attacker", "benign", "capture")


def params_to_env(params: dict) -> dict:
    """Serialize hook parameters as NSB_<NAME> environment variables with
    decimal rendering for numerics."""
    env = {}
    for name, value in params.items():
        if isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, (int, float)):
            rendered = format_number(value)
        else:
            rendered = str(value)
        env[f"NSB_{name.upper()}"] = rendered
    return env


@dataclass(frozen=True)
class WorkloadSpec:
    name: str
    image_ref: str               # image or bundled command reference, may carry args
    role: str                    # target | attacker | benign | capture
    env: dict = field(default_factory=dict)
    network: str = "nsb"
    published_port: int | None = None
    hook: str | None = None      # declared hook name (attackers)
    readiness_path: str = "/"
    readiness_timeout_s: float = 30.0
    protocol: str = "http"
    log_path: str | None = None


@dataclass
class RuntimeHandle:
    name: str
    runtime_id: str
    started_at: float            # monotonic
    address: str | None          # host:port reachable by probes
    role: str
    spec: WorkloadSpec
    state: dict = field(default_factory=dict)  # adapter-internal


@dataclass(frozen=True)
class StopReport:
    exit_status: int | None
    duration_s: float
    already_stopped: bool = False


@dataclass(frozen=True)
class HookResult:
    started_at: float            # monotonic launch time
    stdout_path: str | None
    ok: bool = True


@dataclass(frozen=True)
class ResourceSample:
    t: float
    cpu_pct: float
    load1: float
    load5: float
    load15: float
    mem_pct: float

    def row(self) -> list:
        return [f"{self.t:.3f}", f"{self.cpu_pct:.2f}", f"{self.load1:.3f}",
                f"{self.load5:.3f}", f"{self.load15:.3f}", f"{self.mem_pct:.2f}"]


RESOURCES_HEADER = ["t_s", "cpu_pct", "load1", "load5", "load15", "mem_pct"]


class RuntimeAdapter(abc.ABC):
    """Start/stop/observe workloads. Safe for concurrent calls from the
    lifecycle timer, probe loop, and resource sampler."""

    name = "abstract"

    @abc.abstractmethod
    def start_workload(self, spec: WorkloadSpec) -> RuntimeHandle:
        ...

    @abc.abstractmethod
    def stop_workload(self, handle: RuntimeHandle, grace_s: float = 1.0) -> StopReport:
        ...

    @abc.abstractmethod
    def exec_hook(self, handle: RuntimeHandle, hook: str, params: dict) -> HookResult:
        ...

    @abc.abstractmethod
    def sample_resources(self, handle: RuntimeHandle) -> ResourceSample:
        ...

    @abc.abstractmethod
    def hook_status(self, handle: RuntimeHandle) -> dict:
        """Exit status / stdout digest of the last launched hook, if any."""

    def close(self):
        pass
