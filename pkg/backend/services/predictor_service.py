"""
Predictor Service

Handles training, evaluation and persistence of viewer-demand models.
"""

import json
import logging
import time
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from backend.core import (
    EmptyTrainingSetError,
    EncoderConfig,
    ForestModel,
    RegionSet,
    VideoRecord,
    encode_many,
    fit_forest,
    fit_tree,
    r_squared_per_region,
    r_squared_pooled,
)
from backend.core.forest import MODEL_FORMAT_VERSION, round_demand
from backend.schemas import GridPoint, RegionScore, TrainingReport


logger = logging.getLogger(__name__)


def _rounded(raw: np.ndarray) -> np.ndarray:
    return np.asarray([round_demand(row).counts for row in raw], dtype=np.float64)


class PredictorService:
    """Service for fitting and evaluating demand predictors."""

    def build_dataset(
        self,
        records: Sequence[VideoRecord],
        regions: RegionSet,
        encoder: EncoderConfig,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Encoded features and actual viewer counts of every record that has both.

        Returns:
            (X, Y) with one row per usable record
        """
        usable = [r for r in records if r.features is not None and r.actual_viewers is not None]
        if not usable:
            raise EmptyTrainingSetError(
                "No records with both features and actual viewers",
                {"records": len(records)},
            )
        X = encode_many([r.features for r in usable], regions, encoder)
        Y = np.asarray([r.actual_viewers.counts for r in usable], dtype=np.float64)
        return X, Y

    def split(self, n: int, train_fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
        """Random train/validation split of row indices; both sides non-empty when n >= 2."""
        order = np.random.default_rng(seed).permutation(n)
        n_train = int(round(n * train_fraction))
        n_train = min(max(n_train, 1), max(n - 1, 1))
        return order[:n_train], order[n_train:]

    def train(
        self,
        records: Sequence[VideoRecord],
        regions: RegionSet,
        encoder: Optional[EncoderConfig] = None,
        n_trees_grid: Sequence[int] = (30,),
        max_depth_grid: Sequence[Optional[int]] = (None,),
        min_samples_leaf: int = 1,
        feature_subsample: Union[float, str] = "sqrt",
        train_fraction: float = 0.8,
        seed: int = 0,
        jobs: int = 1,
        test_records: Optional[Sequence[VideoRecord]] = None,
    ) -> Tuple[ForestModel, TrainingReport]:
        """
        Fit forests over the hyper-parameter grid and keep the best one.

        Args:
            records: Training trace
            regions: Region set the demand vectors refer to
            encoder: Feature encoding settings
            n_trees_grid: Forest sizes to try
            max_depth_grid: Depth limits to try (None = unlimited)
            min_samples_leaf: Minimum samples per leaf
            feature_subsample: Features drawn per split ("sqrt", "third" or a fraction)
            train_fraction: Share of records used for fitting
            seed: Split and forest seed
            jobs: Parallel tree fits
            test_records: Optional unseen trace evaluated with the selected model

        Returns:
            (selected model, training report)
        """
        start_time = time.perf_counter()
        encoder = encoder or EncoderConfig()

        X, Y = self.build_dataset(records, regions, encoder)
        train_idx, val_idx = self.split(len(X), train_fraction, seed)
        if len(val_idx) == 0:
            raise EmptyTrainingSetError("Validation split is empty; need at least 2 records", {"records": len(X)})
        X_train, Y_train = X[train_idx], Y[train_idx]
        X_val, Y_val = X[val_idx], Y[val_idx]

        best: Optional[Tuple[float, ForestModel]] = None
        grid: List[GridPoint] = []
        for n_trees in n_trees_grid:
            for max_depth in max_depth_grid:
                model = fit_forest(
                    X_train, Y_train,
                    n_trees=n_trees,
                    max_depth=max_depth,
                    min_samples_leaf=min_samples_leaf,
                    rng_seed=seed,
                    feature_subsample=feature_subsample,
                    jobs=jobs,
                    encoder=encoder,
                )
                score = r_squared_pooled(Y_val, _rounded(model.predict_raw(X_val)))
                grid.append(GridPoint(n_trees=n_trees, max_depth=max_depth, pooled_r2=score))
                logger.debug("[PredictorService] trees=%s depth=%s pooled R2=%.4f", n_trees, max_depth, score)
                if best is None or score > best[0]:
                    best = (score, model)

        pooled_rf, model = best
        rf_pred = _rounded(model.predict_raw(X_val))

        tree = fit_tree(
            X_train, Y_train,
            max_depth=model.max_depth,
            min_samples_leaf=min_samples_leaf,
            rng=np.random.default_rng(seed),
        )
        dt_pred = _rounded(tree.predict_matrix(X_val))

        rf_scores = r_squared_per_region(Y_val, rf_pred)
        dt_scores = r_squared_per_region(Y_val, dt_pred)
        test_scores: List[Optional[float]] = [None] * regions.n
        pooled_test = None
        if test_records:
            X_test, Y_test = self.build_dataset(test_records, regions, encoder)
            test_pred = _rounded(model.predict_raw(X_test))
            test_scores = r_squared_per_region(Y_test, test_pred)
            pooled_test = r_squared_pooled(Y_test, test_pred)

        elapsed_ms = int((time.perf_counter() - start_time) * 1000)

        report = TrainingReport(
            n_train=len(train_idx),
            n_validation=len(val_idx),
            n_trees=model.n_trees,
            max_depth=model.max_depth,
            pooled_rf_r2=pooled_rf,
            pooled_dt_r2=r_squared_pooled(Y_val, dt_pred),
            pooled_test_r2=pooled_test,
            regions=[
                RegionScore(region=name, rf_r2=rf, dt_r2=dt, test_r2=te)
                for name, rf, dt, te in zip(regions.names(), rf_scores, dt_scores, test_scores)
            ],
            grid=grid,
            elapsed_ms=elapsed_ms,
        )
        logger.info(
            "[PredictorService] Trained on %d records (%d validation): RF R2=%.4f, DT R2=%.4f in %d ms",
            report.n_train, report.n_validation, report.pooled_rf_r2, report.pooled_dt_r2, elapsed_ms,
        )
        return model, report

    def save_model(self, model: ForestModel, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(model.model_dump_json(), encoding="utf-8")
        return path

    def load_model(self, path: Union[str, Path]) -> ForestModel:
        """Load a model file written by save_model."""
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        if data.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(
                f"Unsupported model format_version {data.get('format_version')}, expected {MODEL_FORMAT_VERSION}"
            )
        model = ForestModel.model_validate(data)
        logger.info("[PredictorService] Loaded %d-tree model from %s", model.n_trees, path)
        return model

    def write_report_csv(self, report: TrainingReport, path: Union[str, Path]) -> Path:
        """Per-region R² table (region, rf_r2, dt_r2, test_r2) plus a pooled row."""
        rows = [score.model_dump() for score in report.regions]
        rows.append({
            "region": "pooled",
            "rf_r2": report.pooled_rf_r2,
            "dt_r2": report.pooled_dt_r2,
            "test_r2": report.pooled_test_r2,
        })
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(rows, columns=["region", "rf_r2", "dt_r2", "test_r2"]).to_csv(path, index=False)
        return path


# Singleton instance
predictor_service = PredictorService()
