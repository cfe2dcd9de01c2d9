from .model import (NUM_BETAS, ToyBodyModel, body_forward, generate_toy_body, joints_from_mesh,
                    load_body_model, project_weak_perspective)
from .regressor import BodyParams, Regressor, regress_params
from .rotation import axis_angle_to_matrix

__all__ = [
    "NUM_BETAS", "BodyParams", "Regressor", "ToyBodyModel", "axis_angle_to_matrix", "body_forward",
    "generate_toy_body", "joints_from_mesh", "load_body_model", "project_weak_perspective",
    "regress_params",
]
