"""Standby-based deadlock avoidance for multi-agent pickup and delivery."""
from .graph import (
    EnvGraph,
    articulation_points,
    associated_standby_nodes,
    free_standby_nodes,
    load_env,
    potential_standby_nodes,
    resolve_env,
    shortest_distance,
)
from .hte import HtePlanner
from .kinematics import DEFAULT_TIMING, AgentPose, Plan, Timing, space_time_astar
from .planner import SbdaParams, SbdaPlanner, Task
from .sim import Scenario, TrialMetrics, generate_tasks, run_trial
from .smt import StatusToken
from .trace import EventTrace, validate_trace

__all__ = [
    "AgentPose", "DEFAULT_TIMING", "EnvGraph", "EventTrace", "HtePlanner", "Plan", "SbdaParams",
    "SbdaPlanner", "Scenario", "StatusToken", "Task", "Timing", "TrialMetrics", "articulation_points",
    "associated_standby_nodes", "free_standby_nodes", "generate_tasks", "load_env",
    "potential_standby_nodes", "resolve_env", "run_trial", "shortest_distance", "space_time_astar",
    "validate_trace",
]
