from services.optimizer.adamw import OptimizerConfig, OptimizerState, adamw_step
from services.optimizer.tammes import (
    DEFAULT_RESTARTS,
    TAMMES_OPTIMIZER,
    RestartResult,
    TammesSolution,
    solve_tammes,
)
from services.optimizer.tuning import (
    TRACE_COLUMNS,
    ToyEncoder,
    TraceRow,
    prompt_gradient,
    random_prompts,
    trace_frame,
    tune_features,
    tune_prompts,
    write_trace,
)
