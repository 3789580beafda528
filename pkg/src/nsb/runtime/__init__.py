"""Runtime adapters: start/stop/observe workloads.

Two interchangeable adapters share one surface: the sandbox adapter runs
bundled workloads as supervised local processes on loopback (default, needs
no container engine), the engine adapter drives a container engine's HTTP
API over a local socket.
"""

from .base import (
    HookResult,
    ResourceSample,
    RuntimeAdapter,
    RuntimeHandle,
    StopReport,
    WorkloadSpec,
    params_to_env,
)
from .sandbox import SandboxAdapter


def get_adapter(name: str, **kwargs) -> RuntimeAdapter:
    if name == "sandbox":
        return SandboxAdapter(**kwargs)
    if name == "engine":
        from .engine import EngineAdapter
        return EngineAdapter(**kwargs)
    raise ValueError(f"unknown adapter: {name!r}")


__all__ = [
    "HookResult", "ResourceSample", "RuntimeAdapter", "RuntimeHandle",
    "StopReport", "WorkloadSpec", "params_to_env", "SandboxAdapter",
    "get_adapter",
]
