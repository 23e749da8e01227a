from .grid_traffic import GridTraffic, TrafficState, nearest_neighbors
from .nav_game import DEFAULT_PAYOFF, NavGame, nav_game_step
from .scenario import Scenario, ScenarioError, default_scenario, load_scenario, save_scenario

__all__ = [
    "DEFAULT_PAYOFF",
    "GridTraffic",
    "NavGame",
    "Scenario",
    "ScenarioError",
    "TrafficState",
    "default_scenario",
    "load_scenario",
    "nav_game_step",
    "nearest_neighbors",
    "save_scenario",
]
