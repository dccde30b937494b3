"""Joint defogging and demosaicking of raw Bayer data."""

from .imaging import CfaImage, ColorImage, DepthMap, TransmissionMap, load_image, save_image
from .fog import FogParams, NoiseParams
from .tls import SolverConfig, joint_defog_demosaick
from .transmission import DcpConfig

__all__ = ["CfaImage", "ColorImage", "DepthMap", "TransmissionMap", "load_image", "save_image",
           "FogParams", "NoiseParams", "SolverConfig", "DcpConfig", "joint_defog_demosaick"]
__version__ = "0.1.0"
