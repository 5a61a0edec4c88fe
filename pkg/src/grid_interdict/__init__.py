"""Critical attack vectors of power grids via bilevel interdiction with DC and linearized AC lower levels."""

from importlib.resources import files

from .analysis import ComparisonReport, ScoreTable, compare_formulations, score_across_timesteps
from .grid_model import LoadCase, Network, apply_case, load_network, load_timeseries
from .interdiction import (EXHAUSTIVE, AttackVector, CavEntry, CavList, SearchConfig,
                           brute_force_cavs, enumerate_cavs, solve_worst_case)
from .lp_core import LinearProgram, LpSolution, dual_of, solve_lp
from .milp_core import MixedIntegerProgram, solve_mip
from .opf_formulations import (FormulationConfig, LacConfig, build_dc, build_interdiction_mip,
                               build_lac, evaluate_ac_feasible)

__version__ = "0.1.0"

TOY_GRIDS = {"meshed5": "toy5_meshed.json", "radial7": "toy7_radial.json",
             "reactive6": "toy6_reactive.json"}


def data_path(name: str):
    """Path of a bundled data file, e.g. ``data_path("toy5_meshed.json")``."""
    return files(__package__) / "data" / name


def load_toy(name: str) -> Network:
    """One of the bundled example grids: ``meshed5``, ``radial7`` or ``reactive6``."""
    return load_network(data_path(TOY_GRIDS[name]))
