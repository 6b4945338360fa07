"""baryflow: turn a registered still-life painting into a dynamic painting.

Three animated passes are ray-traced over proxy geometry -- an unlit
shadow-texture pass, an unlit lit-texture pass, and a lit flat-material
weight pass -- then composited per pixel with the weight as a barycentric
blend factor. Manipulating only the weight sequence restyles the result
without re-rendering.
"""

from .composite import (
    CompositeJob,
    ManipulatorChain,
    apply_chain,
    classical_composite,
    composite_frame,
    composite_sequence,
)
from .errors import (
    BaryflowError,
    ConfigError,
    FormatError,
    InputIOError,
    ShapeError,
    TrackNotFoundError,
    ValidationError,
)
from .filters import DitherSpec, dither, gaussian_blur, hue_shift, saturate
from .image import Image, linear_to_srgb, load_png, new_image, save_png, srgb_to_linear
from .render import (
    FrameGeometry,
    HitRecord,
    PassKind,
    Ray,
    intersect,
    light_visibility,
    reflect,
    render_sequence,
    render_texture_pass,
    render_weight_pass,
)
from .scene import (
    AreaLight,
    Camera,
    Material,
    Mesh,
    Scene,
    Timeline,
    interpolate_track,
    load_obj,
    load_scene,
    parse_scene,
    project_uv,
    sample_texture,
)
from .testscenes import SCENE_NAMES, gen_testscene

__version__ = "0.1.0"
