"""Human-pose affordance modeling: pose-class prediction plus conditional-VAE
scale/deformation generation, with the mining pipeline, dataset tooling, and
annotation service around it."""

__version__ = "0.1.0"

from .pose import (  # noqa: F401
    BONES,
    JOINT_NAMES,
    N_JOINTS,
    NormalizedPose,
    Pose,
    ScaleDeform,
    decode,
    encode,
    normalize,
    procrustes_distance,
)
