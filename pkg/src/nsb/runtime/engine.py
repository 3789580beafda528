"""Engine adapter: drives a container engine's versioned HTTP API over a
local unix socket (create/start/exec/stats/stop/remove endpoints). No engine
client library is used; the wire protocol is spoken directly."""

from __future__ import annotations

import http.client
import json
import os
import socket
import time

from ..errors import (
    AdapterUnreachable,
    HookLaunchFailure,
    HookNotFound,
    ImageUnavailable,
    StartTimeout,
    WorkloadGone,
)
from ..probe import ProbeConfig, probe_once
from .base import (
    HookResult,
    ResourceSample,
    RuntimeAdapter,
    RuntimeHandle,
    StopReport,
    WorkloadSpec,
    params_to_env,
)

DEFAULT_SOCKET = "/var/run/docker.sock"


class _UnixHTTPConnection(http.client.HTTPConnection):
    def __init__(self, socket_path, timeout=10.0):
        super().__init__("localhost", timeout=timeout)
        self._socket_path = socket_path

    def connect(self):
        sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        sock.settimeout(self.timeout)
        sock.connect(self._socket_path)
        self.sock = sock


class EngineAdapter(RuntimeAdapter):
    name = "engine"

    def __init__(self, socket_path=DEFAULT_SOCKET, api_version="v1.43",
                 network="nsb", timeout=10.0):
        self.socket_path = socket_path
        self.api_version = api_version
        self.network = network
        self.timeout = timeout
        self._network_ready = False

    # -- wire ------------------------------------------------------------

    def _request(self, method, path, body=None, timeout=None):
        conn = _UnixHTTPConnection(self.socket_path, timeout or self.timeout)
        headers = {}
        payload = None
        if body is not None:
            payload = json.dumps(body).encode("utf-8")
            headers["Content-Type"] = "application/json"
        try:
            conn.request(method, f"/{self.api_version}{path}", body=payload,
                         headers=headers)
            resp = conn.getresponse()
            data = resp.read()
        except (OSError, http.client.HTTPException) as exc:
            raise AdapterUnreachable(f"engine at {self.socket_path}: {exc}")
        finally:
            conn.close()
        parsed = None
        if data:
            try:
                parsed = json.loads(data)
            except ValueError:
                parsed = data
        return resp.status, parsed

    def _expect(self, status, payload, ok_statuses, context):
        if status not in ok_statuses:
            message = payload.get("message") if isinstance(payload, dict) else payload
            raise AdapterUnreachable(f"{context}: HTTP {status}: {message}")

    # -- lifecycle ---------------------------------------------------------

    def _ensure_network(self):
        if self._network_ready:
            return
        status, _ = self._request("GET", f"/networks/{self.network}")
        if status == 404:
            status, payload = self._request(
                "POST", "/networks/create",
                body={"Name": self.network, "Driver": "bridge"})
            self._expect(status, payload, (201,), "network create")
        self._network_ready = True

    def start_workload(self, spec: WorkloadSpec) -> RuntimeHandle:
        self._ensure_network()
        tokens = spec.image_ref.split()
        image, args = tokens[0], tokens[1:]
        body = {
            "Image": image,
            "Env": [f"{k}={v}" for k, v in sorted(spec.env.items())],
            "Labels": {"nsb.role": spec.role, "nsb.name": spec.name},
            "HostConfig": {"NetworkMode": self.network},
        }
        if args:
            body["Cmd"] = args
        if spec.published_port:
            port_key = f"{spec.published_port}/tcp"
            body["ExposedPorts"] = {port_key: {}}
            body["HostConfig"]["PortBindings"] = {
                port_key: [{"HostIp": "127.0.0.1",
                            "HostPort": str(spec.published_port)}]
            }
        status, payload = self._request(
            "POST", f"/containers/create?name={spec.name}", body=body)
        if status == 404:
            raise ImageUnavailable(f"image not available: {image}")
        self._expect(status, payload, (201,), f"create {spec.name}")
        cid = payload["Id"]

        status, payload = self._request("POST", f"/containers/{cid}/start")
        self._expect(status, payload, (204, 304), f"start {spec.name}")

        address = (f"127.0.0.1:{spec.published_port}"
                   if spec.published_port else f"{spec.name}:{spec.published_port or 0}")
        handle = RuntimeHandle(
            name=spec.name, runtime_id=cid,
            started_at=time.perf_counter(),
            address=address, role=spec.role, spec=spec,
            state={"stopped": False, "hook": None},
        )
        if spec.role == "target" and spec.published_port:
            self._await_ready(handle)
        return handle

    def _await_ready(self, handle: RuntimeHandle):
        spec = handle.spec
        host, port = handle.address.rsplit(":", 1)
        cfg = ProbeConfig(protocol=spec.protocol, host=host, port=int(port),
                          path=spec.readiness_path, timeout_s=0.5)
        deadline = time.perf_counter() + spec.readiness_timeout_s
        while time.perf_counter() < deadline:
            if probe_once(cfg).ok:
                return
            time.sleep(0.1)
        self.stop_workload(handle, grace_s=1.0)
        raise StartTimeout(f"{spec.name}: not ready within {spec.readiness_timeout_s}s")

    def stop_workload(self, handle: RuntimeHandle, grace_s: float = 1.0) -> StopReport:
        if handle.state.get("stopped"):
            return StopReport(exit_status=handle.state.get("exit_status"),
                              duration_s=0.0, already_stopped=True)
        cid = handle.runtime_id
        status, payload = self._request(
            "POST", f"/containers/{cid}/stop?t={max(1, int(grace_s))}",
            timeout=max(self.timeout, grace_s + 10))
        if status not in (204, 304, 404):
            self._expect(status, payload, (204,), f"stop {handle.name}")

        exit_status = None
        status, payload = self._request("GET", f"/containers/{cid}/json")
        if status == 200 and isinstance(payload, dict):
            exit_status = payload.get("State", {}).get("ExitCode")
        self._request("DELETE", f"/containers/{cid}?force=true")
        handle.state["stopped"] = True
        handle.state["exit_status"] = exit_status
        return StopReport(exit_status=exit_status,
                          duration_s=time.perf_counter() - handle.started_at)

    # -- hooks -------------------------------------------------------------

    def exec_hook(self, handle: RuntimeHandle, hook: str, params: dict) -> HookResult:
        spec = handle.spec
        if handle.state.get("stopped"):
            raise WorkloadGone(handle.name)
        if spec.hook is None or hook != spec.hook:
            raise HookNotFound(f"{handle.name}: hook {hook!r} not declared")
        env = dict(spec.env)
        env.update(params_to_env(params))
        body = {
            "Cmd": [hook if hook.startswith("/") else f"/{hook}"],
            "Env": [f"{k}={v}" for k, v in sorted(env.items())],
            "AttachStdout": False,
            "AttachStderr": False,
        }
        status, payload = self._request(
            "POST", f"/containers/{handle.runtime_id}/exec", body=body)
        if status == 404:
            raise WorkloadGone(handle.name)
        if status != 201:
            raise HookLaunchFailure(f"{handle.name}: exec create HTTP {status}")
        exec_id = payload["Id"]
        status, payload = self._request(
            "POST", f"/exec/{exec_id}/start", body={"Detach": True})
        if status != 200:
            raise HookLaunchFailure(f"{handle.name}: exec start HTTP {status}")
        started_at = time.perf_counter()
        handle.state["hook"] = {"exec_id": exec_id, "hook": hook,
                                "started_at": started_at}
        return HookResult(started_at=started_at, stdout_path=None)

    def hook_status(self, handle: RuntimeHandle) -> dict:
        record = handle.state.get("hook")
        if record is None:
            return {}
        status, payload = self._request("GET", f"/exec/{record['exec_id']}/json")
        exit_status = payload.get("ExitCode") if status == 200 else None
        return {"hook": record["hook"], "exit_status": exit_status,
                "stdout_digest": None}

    # -- observation ---------------------------------------------------------

    def sample_resources(self, handle: RuntimeHandle) -> ResourceSample:
        if handle.state.get("stopped"):
            raise WorkloadGone(handle.name)
        status, payload = self._request(
            "GET", f"/containers/{handle.runtime_id}/stats?stream=false")
        if status == 404:
            raise WorkloadGone(handle.name)
        self._expect(status, payload, (200,), f"stats {handle.name}")

        cpu_pct = 0.0
        cpu = payload.get("cpu_stats", {})
        pre = payload.get("precpu_stats", {})
        cpu_delta = (cpu.get("cpu_usage", {}).get("total_usage", 0)
                     - pre.get("cpu_usage", {}).get("total_usage", 0))
        sys_delta = (cpu.get("system_cpu_usage", 0)
                     - pre.get("system_cpu_usage", 0))
        if cpu_delta > 0 and sys_delta > 0:
            ncpu = cpu.get("online_cpus") or len(
                cpu.get("cpu_usage", {}).get("percpu_usage") or [1])
            cpu_pct = cpu_delta / sys_delta * ncpu * 100.0

        mem = payload.get("memory_stats", {})
        usage, limit = mem.get("usage", 0), mem.get("limit", 0)
        mem_pct = 100.0 * usage / limit if limit else 0.0

        # the engine stats endpoint carries no load averages; use the host's,
        # which is also the engine host for a local socket
        load1, load5, load15 = os.getloadavg()
        return ResourceSample(
            t=time.perf_counter() - handle.started_at,
            cpu_pct=cpu_pct, load1=load1, load5=load5, load15=load15,
            mem_pct=mem_pct,
        )
