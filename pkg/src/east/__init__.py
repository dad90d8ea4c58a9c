"""Safe navigation: clearance-aware planning, reference-governor tracking,
and barrier-constrained governor input filtering, with a deterministic
2D simulator."""

from .geometry import (
    ConeSet,
    DirectionalMetric,
    ball_overapprox,
    cone_from_state,
    cone_to_obstacles_distance,
    directional_cone_distance,
    point_to_cone_distance,
)
from .governor import LocalSafeZone, check_init, governor_step, local_safe_zone, nominal_input
from .gridmap import (
    CLEARANCE_DESIGNS,
    FREE,
    OCCUPIED,
    UNKNOWN,
    ClearanceField,
    ClearanceParams,
    DistanceField,
    OccupancyGrid,
    RangeScan,
    clearance_cost,
    distance_transform,
    integrate_scan,
    is_traversable,
)
from .planner import (
    NoPath,
    OutOfBounds,
    PiecewisePath,
    PlanQuery,
    PlanResult,
    UntraversableEndpoint,
    path_cost,
    path_eval,
    plan,
)
from .safe_input import (
    CbfConstraint,
    MovingObstacle,
    SafeInputResult,
    brute_force_oracle,
    cbf_constraint,
    cbf_value,
    solve_safe_input,
)
from .scenario import InvalidScenario, Scenario, load_scenario, load_scenario_file
from .simulator import Metrics, Simulation, compute_metrics, lidar_scan, run_scenario
from .unicycle import ControlInput, RobotState, adaptive_gain, control_law, integrate

__version__ = "0.1.0"
