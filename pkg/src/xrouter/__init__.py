"""Cost-aware LLM routing and orchestration engine.

A tool-calling router decides, per task, whether to answer directly or
offload to models from a priced catalog; the orchestration engine dispatches
calls, enforces limits, accounts every nano-USD, and scores episodes with a
success-gated cost-penalized reward. A deterministic simulated model pool
makes the whole loop verifiable offline.
"""

__version__ = "0.1.0"

from .catalog import (
    CapabilityProfile,
    Catalog,
    CatalogError,
    ModelDescriptor,
    PriceSchedule,
    load_catalog,
    perturb_costs,
    refresh_catalog,
    render_catalog_prompt,
)
from .episode import (
    Difficulty,
    EpisodeMachine,
    EpisodeResult,
    Observation,
    RunConfig,
    Task,
    evaluate_success,
    run_episode,
    stratify_tasks,
)
from .harness import EvalReport, ParetoPoint, cost_utility, distributions, pareto_frontier, run_eval
from .ledger import (
    AuditVerdict,
    CallRecord,
    CostConfig,
    TokenUsage,
    aggregate,
    audit_check,
    call_cost,
    normalize_cost,
)
from .money import Money, usd_string
from .orchestrator import EpisodeLimits, Orchestrator
from .policies import (
    cascade_policy,
    direct_policy,
    epsilon_greedy_policy,
    external_policy,
    single_model_policy,
)
from .protocol import (
    CallModel,
    DirectAnswer,
    FinalSynthesis,
    ProtocolError,
    SelectResponse,
    ToolCalls,
    parse_router_message,
    serialize_router_message,
    serialize_tool_result,
    validate_calls,
)
from .providers import (
    CacheStore,
    CachingBackend,
    PoolBackend,
    ProviderFailure,
    ProviderRequest,
    ProviderResponse,
    SimulatedBackend,
    normalize_query,
)
from .reward import Outcome, RewardParams, expected_reward, reward
