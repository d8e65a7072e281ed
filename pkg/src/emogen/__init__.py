"""emogen: genetic evolution of facial expressions on a blendshape rig."""

__version__ = "0.1.0"

from .rig import BlendshapeRig, Mesh, RigError, Shape  # noqa: F401
from .synth import RigGenParams, generate_synthetic_rig  # noqa: F401
