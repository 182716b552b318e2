"""
Region Service

Loads the region universe, the RTT matrix and the price table.

Prices come in two shapes:
- a catalog of monthly list prices per region name, prorated here to the
  period length (alpha = storage_gb_month * hours / hours_per_month);
- a raw CostParams object (alpha, eta, omega, tiers) used as-is.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import ValidationError

from backend.core import (
    CostParams,
    DimensionMismatchError,
    Region,
    RegionSet,
    RttMatrix,
    TierPrice,
    synthesize_rtt,
)
from backend.core.geo import DEFAULT_BASE_RTT_MS, DEFAULT_MS_PER_KM
from backend.utils import read_matrix_path


logger = logging.getLogger(__name__)

# Packaged data files; several locations so the CLI works from any working directory
DATA_DIRS = [
    Path(__file__).parent.parent / "data",
    Path.cwd() / "backend" / "data",
    Path.cwd() / "data",
]

DEFAULT_HOURS_PER_MONTH = 730.0


def _find_data_file(name: str) -> Path:
    for directory in DATA_DIRS:
        path = directory / name
        if path.exists():
            return path
    raise FileNotFoundError(f"{name} not found in any candidate path: {[str(d) for d in DATA_DIRS]}")


class RegionService:
    """Service for region, RTT and price data."""

    def load_regions(self, path: Optional[Union[str, Path]] = None) -> List[Region]:
        """
        Read regions from a JSON file: a list of {id, name, lat, lon} or an
        object with a "regions" key holding that list.
        """
        data_path = Path(path) if path is not None else _find_data_file("regions.json")
        with open(data_path, "r", encoding="utf-8") as f:
            data = json.load(f)
        rows = data.get("regions", []) if isinstance(data, dict) else data

        regions = []
        for i, row in enumerate(rows):
            try:
                regions.append(Region(
                    id=row["id"],
                    name=row["name"],
                    latitude=row.get("lat", row.get("latitude")),
                    longitude=row.get("lon", row.get("longitude")),
                ))
            except (KeyError, TypeError, ValidationError) as e:
                raise ValueError(f"Invalid region entry {i} in {data_path}: {e}")

        logger.info("[RegionService] Loaded %d regions from %s", len(regions), data_path)
        return regions

    def load_rtt(self, path: Union[str, Path]) -> RttMatrix:
        """Measured RTT matrix from a JSON, CSV or XLSX file (ms)."""
        rtt = RttMatrix(d=read_matrix_path(path))
        logger.info("[RegionService] Loaded %dx%d RTT matrix from %s", rtt.n, rtt.n, path)
        return rtt

    def region_set(
        self,
        regions_path: Optional[Union[str, Path]] = None,
        rtt_path: Optional[Union[str, Path]] = None,
        base_ms: float = DEFAULT_BASE_RTT_MS,
        ms_per_km: float = DEFAULT_MS_PER_KM,
    ) -> RegionSet:
        """Regions plus a measured RTT matrix when given, otherwise a synthesized one."""
        regions = self.load_regions(regions_path)
        if rtt_path is not None:
            rtt = self.load_rtt(rtt_path)
        else:
            rtt = synthesize_rtt(regions, base_ms, ms_per_km)
        return RegionSet(regions=regions, rtt=rtt)

    def catalog_to_cost_params(
        self,
        catalog: Dict[str, Any],
        regions: RegionSet,
        period_length_hours: float = 1.0,
        hours_per_month: Optional[float] = None,
    ) -> CostParams:
        """
        Prorate a monthly price catalog to per-period CostParams, ordered by region id.

        Raises:
            DimensionMismatchError: if a region of the set has no catalog entry
        """
        hours_per_month = hours_per_month or catalog.get("hours_per_month", DEFAULT_HOURS_PER_MONTH)
        factor = period_length_hours / hours_per_month
        by_name = {entry["name"]: entry for entry in catalog.get("regions", [])}

        missing = [name for name in regions.names() if name not in by_name]
        if missing:
            raise DimensionMismatchError(
                "Price catalog lacks entries for some regions",
                {"missing": missing},
            )

        alpha, eta, omega, tiers = [], [], [], []
        has_tiers = False
        for name in regions.names():
            entry = by_name[name]
            alpha.append(entry["storage_gb_month"] * factor)
            eta.append(entry["inter_region_gb"])
            omega.append(entry["transfer_out_gb"])
            table = [
                TierPrice(threshold_gb=t["threshold_gb"], price=t["gb_month"] * factor)
                for t in entry.get("storage_tiers", [])
            ]
            has_tiers = has_tiers or bool(table)
            tiers.append(table)

        return CostParams(alpha=alpha, eta=eta, omega=omega, tiers=tiers if has_tiers else None)

    def load_prices(
        self,
        regions: RegionSet,
        path: Optional[Union[str, Path]] = None,
        period_length_hours: float = 1.0,
        hours_per_month: Optional[float] = None,
    ) -> CostParams:
        """
        Load prices for ``regions`` from a catalog or a raw CostParams JSON file.

        Raises:
            DimensionMismatchError: if the price vectors do not cover the region set
        """
        data_path = Path(path) if path is not None else _find_data_file("prices.json")
        with open(data_path, "r", encoding="utf-8") as f:
            data = json.load(f)

        if "alpha" in data:
            prices = CostParams.model_validate(data)
            source = "raw"
        else:
            prices = self.catalog_to_cost_params(data, regions, period_length_hours, hours_per_month)
            source = "catalog"

        if prices.n != regions.n:
            raise DimensionMismatchError(
                f"Prices cover {prices.n} regions, region set has {regions.n}",
                {"prices": prices.n, "regions": regions.n},
            )
        logger.info("[RegionService] Loaded %s prices for %d regions from %s", source, prices.n, data_path)
        return prices


# Singleton instance
region_service = RegionService()
