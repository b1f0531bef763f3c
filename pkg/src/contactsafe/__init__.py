"""Contact-safe torque control for a simulated serial manipulator."""

from .model import Pose, RobotModel, dynamics, forward_kinematics, jacobian, load_model, mass_matrix
from .harness import Scenario, compare, load_scenario, run_scenario

__version__ = "0.1.0"

__all__ = [
    "Pose", "RobotModel", "Scenario", "compare", "dynamics", "forward_kinematics", "jacobian",
    "load_model", "load_scenario", "mass_matrix", "run_scenario",
]
