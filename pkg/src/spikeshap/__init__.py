"""Price-spike forensics for electricity-market time series.

Detect spike events against percentile or fixed thresholds, summarize the
surrounding market state, classify spike vs calm segments with a
from-scratch random forest, attribute each detection to driver categories
through exact Shapley values, cluster the spike states, and render radar
reports. See the module docstrings for the individual pieces; ``pipeline``
ties them together and ``cli`` exposes them as commands.
"""

from .cluster import ClusterModel, ElbowResult, elbow
from .cluster import fit as fit_clusters
from .detect import (
    EventStats,
    Segment,
    SpikeEvent,
    ThresholdSpec,
    detect_points,
    event_statistics,
    group_events,
    resolve_thresholds,
    segment,
)
from .drivers import DriverReport, DriverSummary, aggregate, attribute
from .features import Dataset, StateVector, build_dataset, summarize
from .forest import (
    Forest,
    Hyperparams,
    Metrics,
    Tree,
    classify,
    evaluate,
    load,
    predict_proba,
    save,
    split_train_test,
    train,
)
from .market import (
    ChannelMeta,
    DriverCategory,
    MarketSeries,
    fill_gaps,
    load_csv,
    load_schema,
    write_csv,
)
from .report import ReportInputs, cluster_radars, radar_chart, render_report
from .shapley import (
    Explanation,
    ForestExplainer,
    brute_force_shapley,
    explain_forest,
    explain_tree,
    forest_subset_value,
    rank_drivers,
    tree_subset_value,
)
from .synth import InjectedEvent, Scenario, SynthConfig, generate, write_scenario

__version__ = "0.1.0"
