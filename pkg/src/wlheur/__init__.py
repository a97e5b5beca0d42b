"""Learned planning heuristics from edge-labelled Weisfeiler-Leman features of
instance learning graphs."""

from .errors import *  # noqa: F401,F403
from .features import FeatureConfig
from .ilg import ColouredGraph, build_ilg, build_state_ilg
from .lwl import collect_colours_2lwl, featurize_2lwl, lwl2_refine
from .models import (Bundle, GPModel, Hyperparameters, KernelModel, LinearModel, fit, load_model,
                     predict, save_model, train_gpr, train_svr_linear, train_svr_rbf)
from .pddl import (GroundAction, LiftedTask, applicable, apply, ground_actions, parse_domain,
                   parse_problem)
from .plans import build_dataset, optimal_cost, optimal_plan, parse_plan, validate_plan
from .search import SearchLimits, SearchResult, gbfs, make_heuristic
from .wl import ABSENT, ColourTable, collect_colours, featurize, wl_refine

__version__ = "0.1.0"
