from neunets.search.tapas.dcn import ProbeNetConfig, compute_dcn, probe_network
from neunets.search.tapas.encoding import ChainEncoding, encode_chain, encode_pair, initial_accuracy
from neunets.search.tapas.lde import (
    DCN_THRESHOLD,
    DatasetCharacterization,
    ExperimentRecord,
    LdeFormatError,
    LifelongDatabase,
    dataset_fingerprint,
    lde_select,
)
from neunets.search.tapas.predictor import (
    EmptyTrainingSetError,
    TapConfig,
    TapModel,
    load_tap,
    predict_accuracy,
    predict_rollouts,
    save_tap,
    train_tap,
)
from neunets.search.tapas.search import (
    InsufficientExperienceError,
    TapasConfig,
    TapasResult,
    initialize_lde,
    rank_candidates,
    tapas_search,
)
from neunets.search.tapas.space import (
    ChainArchitecture,
    ChainElement,
    ChainSpaceConfig,
    ElementKind,
    decode_chain,
    sample_chain,
)
