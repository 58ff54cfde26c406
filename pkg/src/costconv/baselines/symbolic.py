"""TIRP + gradient boosting cost predictor.

Selected feature rows are symbolised per patient, frequent TIRPs are mined on
the training patients, each patient becomes a vector of mean TIRP durations
and a boosted tree ensemble maps that vector to dollars.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..claims import FeatureTaxonomy
from .gbt import GbtConfig, GbtModel, gbt_fit
from .karmalego import Tirp, TirpMatcher, mine_tirps
from .sax import StateInterval, abstract_entity

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SymbolicConfig:
    top_medical: int = 20
    min_vertical_support: float = 0.6
    max_size: int = 3
    epsilon: int = 0
    max_mining_entities: int = 0  # 0 mines on every training patient
    seed: int = 0
    target_transform: str = "identity"
    gbt: GbtConfig = field(default_factory=GbtConfig)


def select_rows(taxonomy: FeatureTaxonomy, X_train, top_medical: int = 20) -> np.ndarray:
    """Cost and visit rows plus the ``top_medical`` medical rows with the most nonzero cells.

    Ties in activity go to the lower row index.  Returned rows are sorted.
    """
    med = taxonomy.rows("medical")
    counts = np.zeros(med.size, dtype=np.int64)
    for s in range(0, X_train.shape[0], 512):
        counts += np.count_nonzero(X_train[s:s + 512][:, med, :], axis=(0, 2))
    top = med[np.argsort(-counts, kind="stable")[:top_medical]]
    return np.sort(np.concatenate([taxonomy.rows("cost"), taxonomy.rows("visit"), top]))


def abstract_cohort(X, rows) -> list[list[StateInterval]]:
    return [abstract_entity(X[i], rows) for i in range(X.shape[0])]


@dataclass
class SymbolicModel:
    rows: np.ndarray
    tirps: list[Tirp]
    gbt: GbtModel
    epsilon: int = 0

    def features(self, X) -> np.ndarray:
        matcher = TirpMatcher(self.tirps, self.epsilon)
        out = np.zeros((X.shape[0], len(self.tirps)))
        for i in range(X.shape[0]):
            out[i] = matcher.features(abstract_entity(X[i], self.rows))
        return out

    def predict(self, X) -> np.ndarray:
        return self.gbt.predict(self.features(X))


def fit_symbolic(X_train, y_train, taxonomy: FeatureTaxonomy, config: SymbolicConfig = SymbolicConfig()):
    rows = select_rows(taxonomy, X_train, config.top_medical)
    entities = abstract_cohort(X_train, rows)
    mining = entities
    if 0 < config.max_mining_entities < len(entities):
        pick = np.sort(np.random.default_rng(config.seed).choice(len(entities), config.max_mining_entities,
                                                                 replace=False))
        mining = [entities[i] for i in pick]
    tirps = mine_tirps(mining, config.min_vertical_support, config.max_size, config.epsilon)
    log.info("mined %d TIRPs from %d patients", len(tirps), len(mining))
    model = SymbolicModel(rows, tirps, None, config.epsilon)
    matcher = TirpMatcher(tirps, config.epsilon)
    F = np.array([matcher.features(e) for e in entities]).reshape(len(entities), len(tirps))
    model.gbt = gbt_fit(F, y_train, config.gbt, config.target_transform)
    return model
