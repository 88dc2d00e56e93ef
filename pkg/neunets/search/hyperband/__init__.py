from neunets.search.hyperband.groups import (
    DatasetGroup,
    GroupStore,
    GroupStoreError,
    assign_group,
    feature_distance,
    feature_scales,
    meta_features,
)
from neunets.search.hyperband.run import (
    GroupedResult,
    HalvingState,
    HyperbandResult,
    HyperbandSettings,
    SuccessiveHalving,
    Trial,
    TrialRecord,
    promote,
    run_hyperband,
    search_with_groups,
)
from neunets.search.hyperband.schedule import HyperbandSchedule, ScheduleError, build_schedule
from neunets.search.hyperband.space import (
    HyperbandConfig,
    HyperbandSpace,
    Representation,
    decode_config,
    sample_config,
    sample_network,
)
