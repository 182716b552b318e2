# Core module exports
from .errors import (
    AllocationError,
    DimensionMismatchError,
    InvalidDecisionError,
    InfeasibleError,
    InstanceTooLargeError,
    EmptyRegionSetError,
    HashDimensionError,
    EmptyTrainingSetError,
    ZeroVarianceError,
    FeatureWidthError,
    TraceFormatError,
    SimulationError,
)

from .domain import (
    GeoPoint,
    Region,
    RegionSet,
    RttMatrix,
    TierPrice,
    CostParams,
    RawFeatures,
    DemandVector,
    VideoRecord,
    PlacementDecision,
    ActiveVideo,
    PeriodLedger,
    PeriodMetrics,
    validate_decision,
    gbit_to_gb,
    DEFAULT_VIDEO_SIZE_GB,
    DEFAULT_DURATION_PERIODS,
)

from .geo import (
    haversine_km,
    nearest_region,
    synthesize_rtt,
    build_region_set,
)

from .features import (
    EncoderConfig,
    cluster_time_period,
    hash_feature,
    encode,
    encode_many,
)

from .forest import (
    TreeNode,
    ForestModel,
    fit_tree,
    fit_forest,
    predict,
    predict_many,
    r_squared,
    r_squared_per_region,
    r_squared_pooled,
)

from .optimizer import (
    VideoInstance,
    SolveReport,
    video_cost,
    check_delay,
    minimum_average_delay,
    solve_video,
    brute_force_solve,
    solve_period,
)

from .simulator import (
    SimConfig,
    SimResult,
    LatencyGapRow,
    step,
    run,
    latency_gap_report,
)

from .workload import (
    GeneratorConfig,
    TraceHeader,
    load_trace,
    save_trace,
    generate,
)
