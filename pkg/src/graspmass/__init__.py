"""graspmass: grasped-payload mass estimation from joint-level sensing.

A serial-chain dynamics core, a sliding-mode disturbance observer whose
filtered injection reconstructs the payload's gravity torque, and a
deterministic closed-loop simulation harness that turns that torque into
a mass estimate.
"""

from .model_io import (
    DEFAULT_GRAVITY,
    Joint,
    KinematicModel,
    Link,
    ModelError,
    TopologyError,
    UnknownFrameError,
    UnsupportedJointError,
    UrdfParseError,
    ValidationError,
    extract_chain,
    fixture_path,
    outbound_direction,
    parse_urdf,
    parse_urdf_file,
    scale_inertial,
    serialize_urdf,
)
from .dynamics import (
    DynamicsError,
    FramePose,
    RobotState,
    forward_dynamics,
    forward_kinematics,
    frame_pitch,
    gravity_vector,
    inverse_dynamics,
    mass_matrix,
    pitch_is_degenerate,
)
from .plant import (
    Payload,
    PlantConfig,
    PlantDivergenceError,
    SensorModel,
    attach_payload,
    command_torque,
    measure,
    quantize_position,
    quantize_torque,
    step_plant,
)
from .observers import (
    CovarianceError,
    EkfState,
    FilterDesignError,
    FilterState,
    ObserverDivergenceError,
    SmoGains,
    SmoState,
    design_lowpass,
    ekf_step,
    equivalent_injection,
    make_ekf_state,
    make_smo_state,
    smo_step,
)
from .control import (
    ControlGains,
    TrajectoryPlan,
    pd_gravity_torque,
    plan_quintic,
    sample_trajectory,
)
from .estimation import (
    EstimationConfig,
    MassAverager,
    MassEstimate,
    SelectionError,
    SingularPitchError,
    disturbance_torque,
    estimate_mass,
    gated_mass_estimate,
    lever_pitch,
    select_estimation_joint,
)
from .harness import (
    Bus,
    PoseSegment,
    RunResult,
    ScenarioConfig,
    ScenarioError,
    export_logs,
    export_sweep,
    load_scenario,
    run_katana_replication,
    run_l4_sensitivity,
    run_parameter_sensitivity,
    run_scenario,
    scenario_hash,
)

__version__ = "0.1.0"
