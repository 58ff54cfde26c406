"""Symbolic temporal-pattern baseline: SAX, KarmaLego TIRPs and boosted trees."""
from .gbt import GbtConfig, GbtModel, gbt_fit, gbt_predict
from .karmalego import Tirp, TirpMatcher, allen_relation, karma, lego, mine_tirps, tirp_features
from .sax import StateInterval, abstract_entity, extract_intervals, sax_discretize
from .symbolic import SymbolicConfig, SymbolicModel, fit_symbolic, select_rows

__all__ = [
    "GbtConfig", "GbtModel", "StateInterval", "SymbolicConfig", "SymbolicModel", "Tirp", "TirpMatcher",
    "abstract_entity", "allen_relation", "extract_intervals", "fit_symbolic", "gbt_fit", "gbt_predict",
    "karma", "lego", "mine_tirps", "sax_discretize", "select_rows", "tirp_features",
]
