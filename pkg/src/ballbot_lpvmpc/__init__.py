"""Planar ballbot modelling, parameter refinement and LPV model predictive control."""
from .errors import (BallbotError, ConfigError, DegenerateAngle, Diverged, Infeasible,
                     NoConvergence, SchedulingOutOfRange, SingularJacobian, SingularMass,
                     StepFailure)
from .integrators import LtvStep, discretize_ltv, rk4_step, simulate_plant
from .lpv import (LpvMatrices, SchedulingBox, SchedulingPoint, lpv_dynamics,
                  lpv_dynamics_given_rho, lpv_matrices, scheduling_map, sinc)
from .model import (PAPER_2024, MotorTorques, PhysicalParams, RigidBodyMatrices,
                    assemble_matrices, nonlinear_dynamics, virtual_to_motor_torques)
from .mpc import (LpvMpcController, MpcConfig, MpcStepResult, Trajectory, build_condensed_qp,
                  closed_loop, mpc_step, shift_scheduling, update_scheduling)
from .qp import QpProblem, QpSolution, QpStatus, solve_qp
from .refine import (LinearParams, PAPER_P, RefineResult, h_functions, jacobian_F,
                     newton_refine, residual_F)
from .synthesis import (GridCertificate, LinearModel, LqrSolution, hurwitz_grid_check,
                        linearize_at_origin, solve_dare)

__all__ = [
    "BallbotError",
    "ConfigError",
    "DegenerateAngle",
    "Diverged",
    "GridCertificate",
    "Infeasible",
    "LinearModel",
    "LinearParams",
    "LpvMatrices",
    "LpvMpcController",
    "LqrSolution",
    "LtvStep",
    "MotorTorques",
    "MpcConfig",
    "MpcStepResult",
    "NoConvergence",
    "PAPER_2024",
    "PAPER_P",
    "PhysicalParams",
    "QpProblem",
    "QpSolution",
    "QpStatus",
    "RefineResult",
    "RigidBodyMatrices",
    "SchedulingBox",
    "SchedulingOutOfRange",
    "SchedulingPoint",
    "SingularJacobian",
    "SingularMass",
    "StepFailure",
    "Trajectory",
    "assemble_matrices",
    "build_condensed_qp",
    "closed_loop",
    "discretize_ltv",
    "h_functions",
    "hurwitz_grid_check",
    "jacobian_F",
    "linearize_at_origin",
    "lpv_dynamics",
    "lpv_dynamics_given_rho",
    "lpv_matrices",
    "mpc_step",
    "newton_refine",
    "nonlinear_dynamics",
    "residual_F",
    "rk4_step",
    "scheduling_map",
    "shift_scheduling",
    "simulate_plant",
    "sinc",
    "solve_dare",
    "solve_qp",
    "update_scheduling",
    "virtual_to_motor_torques",
]

__version__ = "0.1.0"
