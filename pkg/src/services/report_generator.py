"""
Report Generation Service
Plot-ready CSV and JSON exports for curves, sweeps and simulated event streams
"""
import json
from typing import List, Optional

import pandas as pd
from pydantic import BaseModel

from src.models import GapCurve, HazardCurve, VariancePoint
from src.schemas import SweepOutcome
from src.services.simulator import EventStream
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

SWEEP_COLUMNS = [
    "order",
    "index",
    "scv_margin",
    "min_gap",
    "argmin_t",
    "overdispersion_holds",
    "hazard_holds",
    "scv_holds",
    "order_holds",
    "lemma1_consistent",
]


class ReportGenerator:
    """Build tables with stable column order and render them as CSV or JSON"""

    def hazard_frame(self, curve: HazardCurve) -> pd.DataFrame:
        """Columns: t, value (hazard), derivative"""
        return pd.DataFrame({"t": curve.times, "value": curve.hazard, "derivative": curve.derivative})

    def gap_frame(self, curve: GapCurve) -> pd.DataFrame:
        """Columns: t, value (stochastic-order gap)"""
        return pd.DataFrame({"t": curve.times, "value": curve.gap})

    def variance_frame(self, points: List[VariancePoint]) -> pd.DataFrame:
        """Columns: t, value (Var/E), mean, variance"""
        return pd.DataFrame(
            {
                "t": [p.t for p in points],
                "value": [p.ratio for p in points],
                "mean": [p.mean for p in points],
                "variance": [p.variance for p in points],
            }
        )

    def sweep_frame(self, outcome: SweepOutcome) -> pd.DataFrame:
        """
        Per-instance margins of a sweep

        Args:
            outcome: Completed sweep

        Returns:
            DataFrame with SWEEP_COLUMNS, one row per successful instance
        """
        rows = [record.model_dump(include=set(SWEEP_COLUMNS)) for record in outcome.instances]
        return pd.DataFrame(rows, columns=SWEEP_COLUMNS)

    def events_frame(self, stream: EventStream) -> pd.DataFrame:
        """Columns: event_index, time, phase_after_event"""
        return pd.DataFrame(
            {
                "event_index": range(1, stream.n_events + 1),
                "time": stream.event_times,
                "phase_after_event": stream.phases_after,
            }
        )

    def to_csv(self, frame: pd.DataFrame) -> str:
        return frame.to_csv(index=False)

    def to_json(self, frame: pd.DataFrame) -> str:
        """Records as JSON; floats keep full precision"""
        return json.dumps(frame.to_dict(orient="records"), indent=2)

    def render(self, frame: pd.DataFrame, fmt: str) -> str:
        """
        Render a table in the requested format

        Raises:
            ValueError: For formats other than csv and json
        """
        if fmt == "csv":
            return self.to_csv(frame)
        if fmt == "json":
            return self.to_json(frame) + "\n"
        raise ValueError(f"Unsupported format {fmt!r}; expected 'csv' or 'json'")

    def schema_json(self, payload: BaseModel, exclude: Optional[set] = None) -> str:
        return payload.model_dump_json(indent=2, exclude=exclude) + "\n"


# Global instance
report_generator = ReportGenerator()
