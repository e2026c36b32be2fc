"""Benchmark runners and report emission.

``run_sim_bench`` sweeps a (dim, pairs, sigma) grid through the simulator,
once with hypertoken addressing and once with the single-token baseline.
``run_llm_bench`` scores compiled prompts against a chat-completion
endpoint. Reports are written atomically as CSV or JSON.
"""

from __future__ import annotations

import contextlib
import csv
import dataclasses
import datetime as dt
import io
import json
import logging
import math
import os
import platform
import tempfile
import time
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import httpx
import numpy as np

from hdram import __version__, kernels
from hdram.diagnostics import METRIC_COLUMNS, condition_number, estimate_rip_delta, snr_db
from hdram.errors import ConfigError, EndpointAuthError, ValidationError
from hdram.latent_channel import holobasis
from hdram.promptc import PromptArtifact
from hdram.store import BASELINE, HYPERTOKEN, arm_channel, arm_setup, child_seed, simulate_recall

log = logging.getLogger(__name__)

SIM_COLUMNS = METRIC_COLUMNS + ("arm", "recall_kv", "recall_vk")
LLM_COLUMNS = ("prompt_id", "arm", "mode", "expected", "completion", "correct", "status", "attempts", "error")
RIP_SAMPLES = 200
API_KEY_ENV = "HDRAM_API_KEY"
TRANSIENT_STATUS = frozenset({408, 409, 425, 429, 500, 502, 503, 504})


@dataclass(frozen=True)
class Endpoint:
    base_url: str
    model_name: str
    temperature: float = 0.0
    max_retries: int = 3
    max_tokens: int = 64
    timeout: float = 30.0
    concurrency: int = 2
    backoff: float = 0.5


@dataclass(frozen=True)
class BenchConfig:
    seed: int = 0
    dims: tuple[int, ...] = (64,)
    pair_counts: tuple[int, ...] = (16,)
    sigmas: tuple[float, ...] = (0.0,)
    trials: int = 100
    tau: float = 1.0
    output_path: str | None = None
    endpoint: Endpoint | None = None

    def __post_init__(self):
        for name in ("dims", "pair_counts", "sigmas"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def validate(self) -> None:
        """Raise ``ConfigError`` for any invalid field, before work starts."""
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if not self.dims or any(d < 2 for d in self.dims):
            raise ConfigError(f"dims must be a non-empty list of integers >= 2, got {list(self.dims)}")
        if not self.pair_counts or any(n < 1 for n in self.pair_counts):
            raise ConfigError(f"pair counts must be a non-empty list of integers >= 1, got {list(self.pair_counts)}")
        if not self.sigmas or any(not (s >= 0 and math.isfinite(s)) for s in self.sigmas):
            raise ConfigError(f"sigmas must be finite and >= 0, got {list(self.sigmas)}")
        if not self.tau > 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        ep = self.endpoint
        if ep is not None:
            if not ep.base_url or not ep.model_name:
                raise ConfigError("endpoint needs both a URL and a model name")
            if ep.max_retries < 0 or ep.concurrency < 1:
                raise ConfigError("endpoint max_retries must be >= 0 and concurrency >= 1")

    @property
    def cells(self) -> list[tuple[int, int, float]]:
        return [(d, n, float(s)) for d in self.dims for n in self.pair_counts for s in self.sigmas]


@dataclass
class BenchReport:
    kind: str
    columns: tuple[str, ...]
    rows: list[dict]
    provenance: dict
    summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "columns": list(self.columns),
            "rows": self.rows,
            "provenance": self.provenance,
            "summary": self.summary,
        }

    @classmethod
    def from_dict(cls, data: dict) -> BenchReport:
        try:
            return cls(data["kind"], tuple(data["columns"]), list(data["rows"]),
                       dict(data["provenance"]), dict(data.get("summary", {})))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed report document: {exc}") from exc


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = dt.datetime.fromtimestamp(int(epoch), dt.timezone.utc) if epoch else dt.datetime.now(dt.timezone.utc)
    return when.replace(microsecond=0).isoformat()


def _provenance(config: BenchConfig, seeds: list[int]) -> dict:
    echo = dataclasses.asdict(config)
    return {
        "config": echo,
        "seeds": seeds,
        "versions": {
            "hdram": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "kernels": kernels.BACKEND,
        },
        "timestamp": _timestamp(),
    }


def cell_diagnostics(dim: int, n: int, seed: int) -> dict:
    """Conditioning and RIP of the trial-0 channel of both arms in one grid cell.

    ``kappa_ht`` is the condition number of the hypertoken key holobasis (the
    matrix of the projection map), ``kappa_raw`` that of the baseline's key
    embeddings. RIP is sampled at the arm's codeword length.
    """
    ht = arm_setup(n, HYPERTOKEN)
    table, phase = arm_channel(ht, dim, child_seed(seed, 0))
    basis, _ = holobasis(ht.key_codebook, table, phase)
    base = arm_setup(n, BASELINE)
    btable, _ = arm_channel(base, dim, child_seed(seed, 0))
    raw = btable.rows([k.tokens[0] for k in base.keys]).T
    k_ht, _ = condition_number(basis)
    k_raw, _ = condition_number(raw)
    rip_ht = estimate_rip_delta(basis, basis.shape[1], len(ht.keys[0]), RIP_SAMPLES, seed).delta
    rip_raw = estimate_rip_delta(raw, raw.shape[1], 1, RIP_SAMPLES, seed).delta
    return {"kappa_ht": k_ht, "kappa_raw": k_raw, HYPERTOKEN: rip_ht, BASELINE: rip_raw}


def run_sim_bench(config: BenchConfig) -> BenchReport:
    """Run both arms on every grid cell; two rows per cell (hypertoken first)."""
    config.validate()
    rows, seeds = [], []
    for ci, (d, n, sigma) in enumerate(config.cells):
        cs = child_seed(config.seed, ci)
        seeds.append(cs)
        diag = cell_diagnostics(d, n, cs)
        for arm in (HYPERTOKEN, BASELINE):
            st = simulate_recall(d, n, sigma, config.trials, cs, arm, config.tau)
            rows.append({
                "dim": d, "n": n, "sigma": sigma,
                "collision_rate": st.collision_rate,
                "entropy_bits": st.entropy_bits,
                "snr_db": snr_db(st.mean_margin, sigma),
                "kappa_ht": diag["kappa_ht"],
                "kappa_raw": diag["kappa_raw"],
                "rip_delta": diag[arm],
                "seed": cs,
                "arm": arm,
                "recall_kv": st.recall_kv,
                "recall_vk": st.recall_vk,
            })
            log.info("cell %d %s d=%d n=%d sigma=%g recall_kv=%.4f", ci, arm, d, n, sigma, st.recall_kv)
    return BenchReport("sim", SIM_COLUMNS, rows, _provenance(config, seeds))


def _completion_text(payload) -> str:
    try:
        return payload["choices"][0]["message"]["content"] or ""
    except (KeyError, IndexError, TypeError) as exc:
        raise ValueError(f"unexpected response shape: {exc}") from exc


class ChatClient:
    """Minimal chat-completion client with retry on transient failures."""

    def __init__(self, endpoint: Endpoint, transport: httpx.BaseTransport | None = None, sleep=time.sleep):
        self.endpoint = endpoint
        self.sleep = sleep
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(API_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self.http = httpx.Client(transport=transport, headers=headers, timeout=endpoint.timeout)

    def close(self):
        self.http.close()

    def complete(self, content: str) -> tuple[str | None, int, str]:
        """Return ``(completion, attempts, error)``; ``completion`` is ``None`` on failure."""
        ep = self.endpoint
        body = {
            "model": ep.model_name,
            "messages": [{"role": "user", "content": content}],
            "temperature": ep.temperature,
            "max_tokens": ep.max_tokens,
        }
        error = ""
        for attempt in range(ep.max_retries + 1):
            if attempt:
                self.sleep(ep.backoff * 2 ** (attempt - 1))
            try:
                resp = self.http.post(ep.base_url, json=body)
            except httpx.TimeoutException:
                error = "timeout"
                continue
            except httpx.TransportError as exc:
                error = f"transport: {exc}"
                continue
            if resp.status_code in (401, 403):
                raise EndpointAuthError(
                    f"endpoint rejected credentials (HTTP {resp.status_code}); "
                    f"export a valid key in {API_KEY_ENV}"
                )
            if resp.status_code in TRANSIENT_STATUS:
                error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                return None, attempt + 1, f"HTTP {resp.status_code}"
            try:
                return _completion_text(resp.json()), attempt + 1, ""
            except ValueError as exc:
                return None, attempt + 1, str(exc)
        return None, ep.max_retries + 1, error


def improvement_ratio(hypertoken_recall: float | None, control_recall: float | None) -> float | None:
    if hypertoken_recall is None or control_recall is None:
        return None
    if control_recall == 0:
        return math.inf if hypertoken_recall > 0 else None
    return hypertoken_recall / control_recall


def _recall(rows, arm):
    sel = [r for r in rows if r["arm"] == arm]
    return sum(r["correct"] for r in sel) / len(sel) if sel else None


def run_llm_bench(config: BenchConfig, prompts: Sequence[PromptArtifact], controls: Sequence[PromptArtifact] = (),
                  transport: httpx.BaseTransport | None = None, sleep=time.sleep) -> BenchReport:
    """Send each prompt as one user message and exact-match the completion.

    Hypertoken prompts and plain-text ``controls`` are scored separately;
    the summary carries both recalls and their ratio. Failed requests are
    scored incorrect and marked ``failed``.

    Raises:
        EndpointAuthError: the endpoint rejected the credentials (aborts the run).
    """
    config.validate()
    if config.endpoint is None:
        raise ConfigError("run_llm_bench needs an endpoint")
    jobs = [(f"ht-{i}", HYPERTOKEN, p) for i, p in enumerate(prompts)]
    jobs += [(f"ctl-{i}", "control", p) for i, p in enumerate(controls)]
    client = ChatClient(config.endpoint, transport, sleep)

    def run(job):
        pid, arm, art = job
        completion, attempts, error = client.complete(art.text)
        ok = completion is not None and completion.strip() == art.expected_answer.strip()
        return {
            "prompt_id": pid, "arm": arm, "mode": art.mode, "expected": art.expected_answer,
            "completion": completion if completion is not None else "",
            "correct": bool(ok), "status": "ok" if completion is not None else "failed",
            "attempts": attempts, "error": error,
        }

    try:
        with ThreadPoolExecutor(max_workers=config.endpoint.concurrency) as pool:
            futures = [pool.submit(run, job) for job in jobs]
            rows = []
            for fut in futures:
                try:
                    rows.append(fut.result())
                except EndpointAuthError:
                    for other in futures:
                        other.cancel()
                    raise
    finally:
        client.close()
    ht, ctl = _recall(rows, HYPERTOKEN), _recall(rows, "control")
    summary = {
        "prompts": len(rows),
        "failed": sum(r["status"] == "failed" for r in rows),
        "recall_hypertoken": ht,
        "recall_control": ctl,
        "improvement_ratio": improvement_ratio(ht, ctl),
    }
    return BenchReport("llm", LLM_COLUMNS, rows, _provenance(config, [config.seed]), summary)


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def render(report: BenchReport, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(report.columns)
        for row in report.rows:
            w.writerow([_csv_cell(row.get(c)) for c in report.columns])
        return buf.getvalue()
    if fmt == "json":
        return json.dumps(report.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    raise ValidationError(f"format must be 'csv' or 'json', got {fmt!r}")


def atomic_write(path, text: str) -> Path:
    """Write via a temp file in the target directory, then rename into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise
    return path


def emit_report(report: BenchReport, fmt: str, path) -> Path:
    """Render ``report`` as ``csv`` or ``json`` and write it atomically to ``path``."""
    return atomic_write(path, render(report, fmt))


def load_report(path) -> BenchReport:
    return BenchReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
