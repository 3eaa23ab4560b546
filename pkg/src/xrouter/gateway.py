"""HTTP surface: chat-completions facade plus the reset/step environment
protocol used by external trainers.

Every endpoint is plain request/response JSON; seeds always travel in the
request (never server-generated) so callers own reproducibility. Session
handles are unique per reset; the deterministic episode ids that make runs
replayable live inside the episode results themselves.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field

from fastapi import Body, FastAPI, Header, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import __version__
from .config import AppConfig, ConfigError
from .episode import Difficulty, EpisodeMachine, Task, load_tasks_jsonl, run_episode, task_from_dict
from .ledger import CostConfig
from .money import nano_usd, usd_string
from .orchestrator import EpisodeLimits
from .protocol import ProtocolError, parse_router_message
from .providers import CacheStore, PoolBackend
from .reward import RewardParams


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse({"error": {"code": code, "message": message}}, status_code=status)


@dataclass
class _Session:
    machine: EpisodeMachine
    lock: threading.Lock = field(default_factory=threading.Lock)
    last_used: float = field(default_factory=time.monotonic)


class _Metrics:
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.counters = {
            "episodes_started": 0,
            "episodes_completed": 0,
            "chat_requests": 0,
            "total_cost_nano_usd": 0,
        }

    def bump(self, key: str, amount: int = 1) -> None:
        with self._lock:
            self.counters[key] += amount

    def snapshot(self) -> dict:
        with self._lock:
            return dict(self.counters)


def _apply_overrides(config: AppConfig, overrides: dict):
    """Per-session tweaks allowed on reset: reward knobs and episode limits."""
    limits = config.limits
    reward = config.reward_params
    cost = config.cost_config
    if "max_turns" in overrides or "fan_out_cap" in overrides or "episode_budget_usd" in overrides:
        limits = EpisodeLimits(
            max_turns=int(overrides.get("max_turns", limits.max_turns)),
            fan_out_cap=int(overrides.get("fan_out_cap", limits.fan_out_cap)),
            retry_max=limits.retry_max,
            retry_debounce_ms=limits.retry_debounce_ms,
            episode_budget=(
                nano_usd(overrides["episode_budget_usd"])
                if "episode_budget_usd" in overrides
                else limits.episode_budget
            ),
            call_deadline_ms=limits.call_deadline_ms,
        )
    if "k" in overrides or "lambda" in overrides:
        reward = RewardParams(
            success_bonus_k=float(overrides.get("k", reward.success_bonus_k)),
            cost_penalty_lambda=float(overrides.get("lambda", reward.cost_penalty_lambda)),
        )
    if "per_turn_cap_usd" in overrides:
        cost = CostConfig(
            per_turn_cap=nano_usd(overrides["per_turn_cap_usd"]),
            router_self_prices=cost.router_self_prices,
        )
    return limits, reward, cost


def create_app(config: AppConfig | None = None, tasks: list[Task] | None = None) -> FastAPI:
    config = config or AppConfig()
    app = FastAPI(title="xrouter", version=__version__)

    store = CacheStore(config.cache_path) if config.cache_path else None
    task_index: dict[str, Task] = {t.id: t for t in (tasks or [])}
    if tasks is None and config.tasks_path:
        task_index = {t.id: t for t in load_tasks_jsonl(config.tasks_path)}

    sessions: dict[str, _Session] = {}
    sessions_lock = threading.Lock()
    session_counter = [0]
    metrics = _Metrics()

    def make_backend(seed: int) -> PoolBackend:
        return PoolBackend(
            seed=seed,
            store=store,
            endpoints=config.endpoints,
            cache_enabled=config.cache_enabled and store is not None,
        )

    @app.exception_handler(RequestValidationError)
    def _validation_error(request: Request, exc: RequestValidationError):
        return _error(400, "bad-request", "malformed request body")

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "version": __version__}

    @app.get("/metrics")
    def metrics_endpoint():
        snap = metrics.snapshot()
        with sessions_lock:
            snap["sessions_active"] = len(sessions)
        return snap

    def _resolve_task(payload: dict) -> Task | JSONResponse:
        if "task" in payload:
            try:
                return task_from_dict(payload["task"])
            except (KeyError, ValueError, TypeError) as exc:
                return _error(400, "bad-task", f"invalid inline task: {exc}")
        task_id = payload.get("task_id")
        if not isinstance(task_id, str):
            return _error(400, "bad-request", "need 'task' or 'task_id'")
        task = task_index.get(task_id)
        if task is None:
            return _error(404, "unknown-task", f"no task with id {task_id!r}")
        return task

    @app.post("/env/reset")
    def env_reset(payload: dict = Body(...)):
        task = _resolve_task(payload)
        if isinstance(task, JSONResponse):
            return task
        seed = payload.get("seed", 0)
        if not isinstance(seed, int):
            return _error(400, "bad-request", "seed must be an integer")
        overrides = payload.get("overrides") or {}
        try:
            limits, reward, cost = _apply_overrides(config, overrides)
        except (ValueError, ConfigError) as exc:
            return _error(400, "bad-overrides", str(exc))
        run_config = config.run_config(seed)
        run_config = type(run_config)(
            catalog=run_config.catalog,
            limits=limits,
            reward_params=reward,
            cost_config=cost,
            seed=seed,
        )
        machine = EpisodeMachine(task, run_config, backend=make_backend(seed))
        with sessions_lock:
            session_counter[0] += 1
            session_id = f"sess-{session_counter[0]:06d}"
            sessions[session_id] = _Session(machine=machine)
        metrics.bump("episodes_started")
        return {"episode_id": session_id, "observation": machine.observation().to_dict()}

    def _get_session(session_id: str) -> _Session | JSONResponse:
        with sessions_lock:
            session = sessions.get(session_id)
            if session is None:
                return _error(404, "unknown-episode", f"no session {session_id!r}")
            if time.monotonic() - session.last_used > config.session_idle_timeout_s:
                del sessions[session_id]
                return _error(410, "session-expired", f"session {session_id!r} expired")
        return session

    @app.post("/env/step")
    def env_step(payload: dict = Body(...)):
        session_id = payload.get("episode_id")
        if not isinstance(session_id, str):
            return _error(400, "bad-request", "episode_id missing")
        session = _get_session(session_id)
        if isinstance(session, JSONResponse):
            return session
        if not session.lock.acquire(blocking=False):
            return _error(409, "session-busy", "a step is already in flight for this episode")
        try:
            session.last_used = time.monotonic()
            machine = session.machine
            if machine.done:
                return _error(409, "episode-finished", "episode already reached a terminal state")
            action = payload.get("action")
            if action is None:
                return _error(400, "bad-request", "action missing")
            try:
                message = parse_router_message(action, after_tool_calls=machine.after_tool_calls)
                machine.step(message)
            except ProtocolError:
                machine.fail("protocol-error")
            if machine.done:
                result = machine.result()
                metrics.bump("episodes_completed")
                metrics.bump("total_cost_nano_usd", result.cost)
                return {
                    "final": result.to_dict(),
                    "reward": result.reward,
                    "done": True,
                    "info": {
                        "cost_nano_usd": result.cost,
                        "cost_usd": usd_string(result.cost),
                        "records": [r.to_dict() for r in result.records],
                    },
                }
            state = machine.state
            running_cost = state.accumulated_cost + state.router_cost
            return {
                "observation": machine.observation().to_dict(),
                "reward": 0.0,
                "done": False,
                "info": {
                    "cost_nano_usd": running_cost,
                    "cost_usd": usd_string(running_cost),
                },
            }
        finally:
            session.lock.release()

    @app.post("/v1/chat/completions")
    def chat_completions(payload: dict = Body(...), x_seed: str | None = Header(default=None)):
        metrics.bump("chat_requests")
        model = payload.get("model")
        messages = payload.get("messages")
        if not isinstance(model, str) or not isinstance(messages, list) or not messages:
            return _error(400, "bad-request", "need 'model' and non-empty 'messages'")
        try:
            policy = config.build_policy(model)
        except ConfigError as exc:
            return _error(404, "unknown-policy", str(exc))
        try:
            seed = int(x_seed) if x_seed is not None else 0
        except ValueError:
            return _error(400, "bad-request", "x-seed header must be an integer")
        user_texts = [
            str(m.get("content", "")) for m in messages if isinstance(m, dict) and m.get("role") == "user"
        ]
        prompt = user_texts[-1] if user_texts else str(messages[-1].get("content", ""))
        digest = hashlib.sha256(
            json.dumps(messages, sort_keys=True, separators=(",", ":")).encode()
        ).hexdigest()[:12]
        task = Task(
            id=f"adhoc-{digest}",
            prompt=prompt,
            reference_answer="",
            verifier="contains",
            difficulty=Difficulty(pass_rate=0.5, tier="medium"),
        )
        result = run_episode(task, policy, config.run_config(seed), backend=make_backend(seed))
        metrics.bump("episodes_started")
        metrics.bump("episodes_completed")
        metrics.bump("total_cost_nano_usd", result.cost)
        if result.failure_reason == "transport-error":
            return _error(502, "upstream-failure", "decision transport failed")
        prompt_tokens = sum(r.usage.prompt_tokens for r in result.records)
        completion_tokens = sum(r.usage.completion_tokens for r in result.records)
        return {
            "id": f"chatcmpl-{digest}",
            "object": "chat.completion",
            "created": 0,
            "model": model,
            "choices": [
                {
                    "index": 0,
                    "message": {"role": "assistant", "content": result.final_answer or ""},
                    "finish_reason": "stop",
                }
            ],
            "usage": {
                "prompt_tokens": prompt_tokens,
                "completion_tokens": completion_tokens,
                "total_tokens": prompt_tokens + completion_tokens,
            },
            "xrouter": {
                "status": result.status,
                "failure_reason": result.failure_reason,
                "cost_nano_usd": result.cost,
                "cost_usd": usd_string(result.cost),
                "record_count": len(result.records),
            },
        }

    return app
