from .config import (  # noqa: F401
    Beat,
    MessageBufferPair,
    ParallelismConfig,
    PipelineStrategy,
    SimReport,
    iter_beats,
)
from .costs import (  # noqa: F401
    ScheduleRules,
    adapter_route,
    mp_unit_cost,
    nt_unit_cost,
    rebatch_beat_cycles,
    strategy_rules,
)
from .engine import ENGINE_NAME, run_pass  # noqa: F401
from .simulate import simulate  # noqa: F401
