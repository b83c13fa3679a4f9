from .tasks import TaskSpec, make_task, task_manifest, PRETRAIN_TASKS, EVAL_TASKS, OBS_DIM, N_ACTIONS
from .grid import GridState, StepOutcome, reset, step, observe, check_solvable
from .vec import VecGridEnv

__all__ = [
    "TaskSpec",
    "make_task",
    "task_manifest",
    "PRETRAIN_TASKS",
    "EVAL_TASKS",
    "OBS_DIM",
    "N_ACTIONS",
    "GridState",
    "StepOutcome",
    "reset",
    "step",
    "observe",
    "check_solvable",
    "VecGridEnv",
]
