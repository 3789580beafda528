"""Sandbox adapter: bundled workloads as supervised loopback processes.

Attacker workloads start as an inert supervisor; exec_hook launches the
actual tool process so the attack window is controlled by the lifecycle
timer, mirroring the hook-based triggering of the engine adapter."""

from __future__ import annotations

import os
import subprocess
import sys
import threading
import time

import psutil

from ..errors import (
    HookLaunchFailure,
    HookNotFound,
    ImageUnavailable,
    StartTimeout,
    WorkloadGone,
)
from ..probe import ProbeConfig, probe_once
from ..util import sha256_file
from ..workloads import WORKLOADS
from .base import (
    HookResult,
    ResourceSample,
    RuntimeAdapter,
    RuntimeHandle,
    StopReport,
    WorkloadSpec,
    params_to_env,
)


def _bundled_command(image_ref: str) -> list:
    tokens = image_ref.split()
    if not tokens or tokens[0] not in WORKLOADS:
        raise ImageUnavailable(f"no bundled workload named {tokens[0] if tokens else image_ref!r}")
    return [sys.executable, "-u", "-m", "nsb.workloads"] + tokens


class SandboxAdapter(RuntimeAdapter):
    name = "sandbox"

    def __init__(self):
        self._lock = threading.Lock()
        self._live = {}  # runtime_id -> handle

    # -- lifecycle -------------------------------------------------------

    def start_workload(self, spec: WorkloadSpec) -> RuntimeHandle:
        if spec.role == "attacker":
            cmd = _bundled_command("nsb-idle")
            _bundled_command(spec.image_ref)  # fail early on unknown tool
        else:
            cmd = _bundled_command(spec.image_ref)

        env = dict(os.environ)
        env.update(spec.env)
        log_fh = open(spec.log_path, "ab") if spec.log_path else subprocess.DEVNULL
        try:
            proc = subprocess.Popen(cmd, env=env, stdout=log_fh,
                                    stderr=subprocess.STDOUT,
                                    start_new_session=True)
        finally:
            if spec.log_path:
                log_fh.close()

        handle = RuntimeHandle(
            name=spec.name,
            runtime_id=f"sbx-{proc.pid}",
            started_at=time.perf_counter(),
            address=f"127.0.0.1:{spec.published_port}" if spec.published_port else None,
            role=spec.role,
            spec=spec,
            state={"proc": proc, "hook_procs": [], "stopped": False,
                   "ps": None, "hook": None},
        )
        with self._lock:
            self._live[handle.runtime_id] = handle

        if spec.role == "target" and spec.published_port:
            try:
                self._await_ready(handle)
            except StartTimeout:
                self.stop_workload(handle, grace_s=0.2)
                raise
        try:
            handle.state["ps"] = psutil.Process(proc.pid)
            handle.state["ps"].cpu_percent(None)  # prime the counter
        except psutil.NoSuchProcess:
            pass
        return handle

    def _await_ready(self, handle: RuntimeHandle):
        spec = handle.spec
        host, port = handle.address.rsplit(":", 1)
        cfg = ProbeConfig(protocol=spec.protocol, host=host, port=int(port),
                          path=spec.readiness_path, timeout_s=0.5)
        deadline = time.perf_counter() + spec.readiness_timeout_s
        while time.perf_counter() < deadline:
            if handle.state["proc"].poll() is not None:
                raise StartTimeout(f"{spec.name}: process exited before readiness")
            if probe_once(cfg).ok:
                return
            time.sleep(0.05)
        raise StartTimeout(f"{spec.name}: not ready within {spec.readiness_timeout_s}s")

    def _kill(self, proc, grace_s):
        if proc.poll() is not None:
            return proc.returncode
        proc.terminate()
        try:
            proc.wait(timeout=grace_s)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait(timeout=5)
        return proc.returncode

    def stop_workload(self, handle: RuntimeHandle, grace_s: float = 1.0) -> StopReport:
        with self._lock:
            already = handle.state.get("stopped", False)
            handle.state["stopped"] = True
        if already:
            return StopReport(exit_status=handle.state["proc"].returncode,
                              duration_s=0.0, already_stopped=True)
        for hp in handle.state["hook_procs"]:
            self._kill(hp["proc"], grace_s)
            hp["exit_status"] = hp["proc"].returncode
        status = self._kill(handle.state["proc"], grace_s)
        with self._lock:
            self._live.pop(handle.runtime_id, None)
        return StopReport(exit_status=status,
                          duration_s=time.perf_counter() - handle.started_at)

    # -- hooks -----------------------------------------------------------

    def exec_hook(self, handle: RuntimeHandle, hook: str, params: dict) -> HookResult:
        spec = handle.spec
        if handle.state.get("stopped"):
            raise WorkloadGone(handle.name)
        if spec.hook is None or hook != spec.hook:
            raise HookNotFound(f"{handle.name}: hook {hook!r} not declared")
        cmd = _bundled_command(spec.image_ref)
        env = dict(os.environ)
        env.update(spec.env)
        env.update(params_to_env(params))
        stdout_path = spec.log_path
        out_fh = open(stdout_path, "ab") if stdout_path else subprocess.DEVNULL
        try:
            proc = subprocess.Popen(cmd, env=env, stdout=out_fh,
                                    stderr=subprocess.STDOUT,
                                    start_new_session=True)
        except OSError as exc:
            raise HookLaunchFailure(f"{handle.name}: {exc}")
        finally:
            if stdout_path:
                out_fh.close()
        started_at = time.perf_counter()
        record = {"proc": proc, "stdout_path": stdout_path, "exit_status": None,
                  "started_at": started_at, "hook": hook}
        handle.state["hook_procs"].append(record)
        handle.state["hook"] = record
        return HookResult(started_at=started_at, stdout_path=stdout_path)

    def hook_status(self, handle: RuntimeHandle) -> dict:
        record = handle.state.get("hook")
        if record is None:
            return {}
        status = record["exit_status"]
        if status is None:
            status = record["proc"].poll()
        digest = None
        if record["stdout_path"] and os.path.exists(record["stdout_path"]):
            digest = sha256_file(record["stdout_path"])
        return {"hook": record["hook"], "exit_status": status,
                "stdout_digest": digest}

    # -- observation -----------------------------------------------------

    def sample_resources(self, handle: RuntimeHandle) -> ResourceSample:
        ps = handle.state.get("ps")
        if handle.state.get("stopped") or ps is None:
            raise WorkloadGone(handle.name)
        try:
            cpu = ps.cpu_percent(None)
            for child in ps.children(recursive=True):
                try:
                    cpu += child.cpu_percent(None)
                except psutil.NoSuchProcess:
                    pass
        except psutil.NoSuchProcess:
            raise WorkloadGone(handle.name)
        load1, load5, load15 = os.getloadavg()
        return ResourceSample(
            t=time.perf_counter() - handle.started_at,
            cpu_pct=cpu,
            load1=load1, load5=load5, load15=load15,
            mem_pct=psutil.virtual_memory().percent,
        )

    # -- bookkeeping -----------------------------------------------------

    def live_workloads(self) -> list:
        with self._lock:
            return [h.name for h in self._live.values()
                    if h.state["proc"].poll() is None]

    def close(self):
        with self._lock:
            handles = list(self._live.values())
        for h in handles:
            self.stop_workload(h, grace_s=0.2)
