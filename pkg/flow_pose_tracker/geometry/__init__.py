from .camera import CameraIntrinsics, project, backproject, flow_jacobian, flow_jacobian_row
from .quaternion import (
    UnitQuaternion, quat_transition, geodesic_angle, geodesic_angles,
    quat_multiply, quat_conjugate, quat_exp, quat_log, quat_to_matrix,
)
from .types import Pose, Twist, FlowField, DepthMap, Mask, mask_iou
