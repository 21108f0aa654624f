"""Goal-conditioned DDPG with hindsight relabeling, mixed sparse/dense rewards and rotation subgoals."""

from hershape.agent import (
    DdpgAgent,
    Episode,
    HerStrategy,
    ReplayBuffer,
    Transition,
    critic_target,
    ddpg_update,
    her_relabel,
    partial_goal_relabel,
    sample_batch,
    select_action,
    store_episode,
    transfer_init,
)
from hershape.config import RunConfig, parse_config, serialize_config
from hershape.envs import NoiseSpec, make_env, reward_lift, reward_xy, reward_z
from hershape.geometry import (
    EulerAngles,
    SubgoalPlan,
    UnitQuaternion,
    compose_elementary,
    decompose,
    geodesic_angle,
    plan_subgoals,
    quat_multiply,
    quat_to_matrix,
)
from hershape.neuralnet import Mlp, load_checkpoint, mlp_init, save_checkpoint
from hershape.training import evaluate, run_training

__version__ = "0.1.0"

__all__ = [
    "DdpgAgent",
    "Episode",
    "EulerAngles",
    "HerStrategy",
    "Mlp",
    "NoiseSpec",
    "ReplayBuffer",
    "RunConfig",
    "SubgoalPlan",
    "Transition",
    "UnitQuaternion",
    "compose_elementary",
    "critic_target",
    "ddpg_update",
    "decompose",
    "evaluate",
    "geodesic_angle",
    "her_relabel",
    "load_checkpoint",
    "make_env",
    "mlp_init",
    "parse_config",
    "partial_goal_relabel",
    "plan_subgoals",
    "quat_multiply",
    "quat_to_matrix",
    "reward_lift",
    "reward_xy",
    "reward_z",
    "run_training",
    "sample_batch",
    "save_checkpoint",
    "select_action",
    "serialize_config",
    "store_episode",
    "transfer_init",
]
