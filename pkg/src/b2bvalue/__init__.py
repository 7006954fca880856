"""Grid-value analysis of a back-to-back converter tie between two feeders."""

from .engine import ConverterSpec, GridLimits, TransferResult, UNLIMITED, apply_converter, curtailed_energy, net_load
from .errors import (
    AggregationError,
    B2BValueError,
    ConfigError,
    DegenerateInputError,
    EvaluationError,
    GenerationError,
    ModelError,
    ProfileParseError,
    ResolutionError,
    SingularSensitivityError,
    ValidationError,
)
from .hosting import (
    AggMode,
    Bus,
    HostingQuery,
    HostingResult,
    Line,
    RadialNetwork,
    Vlsm,
    aggregate_hosting,
    estimate_vlsm,
    evaluate_hosting,
    hosting_delta,
    load_network_json,
    load_vlsm_csv,
    solve_lindistflow,
    voltage_shift,
    write_vlsm_csv,
)
from .metrics import (
    MarginalCurve,
    ScenarioResult,
    StatSummary,
    SystemResult,
    evaluate_pair,
    evaluate_scenario,
    marginal_sweep,
    reduction_rate,
    summarize,
)
from .profiles import (
    PoolClass,
    PoolEntry,
    Profile,
    ProfilePool,
    aggregate,
    load_pool_manifest,
    parse_profile_csv,
    peak,
    scale,
    write_profile_csv,
)
from .scenario import (
    MixSpec,
    PvSpec,
    Scenario,
    ScenarioDatabase,
    SetSpec,
    ShuffleMode,
    SubsetSpec,
    assign_pv,
    compose_feeder_load,
    derive_sub_seed,
    generate_database,
    save_database,
)
from .storage import (
    AbsorbMode,
    ClampMode,
    StorageConfig,
    StorageSizing,
    StorageTrajectory,
    count_deep_cycles,
    simulate_storage,
    size_storage,
)
from .study import StudyConfig, TOOLKIT_VERSION, load_study_config, run_study, write_report

__version__ = TOOLKIT_VERSION
