from neunets.training.events import EpochEvent, EventLog
from neunets.training.ledger import BudgetLedger
from neunets.training.pool import JobOutcome, run_parallel
from neunets.training.trainer import (
    DivergenceError,
    EpochRecord,
    NonChainGraphError,
    TrainJob,
    TrainResult,
    attach_head,
    chain_body,
    evaluate_fitness,
    incremental_train,
    train,
    train_step,
)
