"""salshift: parametric photo edits that steer predicted visual attention.

Given an image and a region mask, the optimizer searches a 70-dimensional
space of global edit parameters (applied separately to foreground and
background) so a saliency model predicts more (or less) attention inside
the mask, while the edit stays subtle.  Recipes are resolution-independent
and can be interpolated for interactive control.
"""

from .errors import (
    DegenerateInputError,
    ImageFormatError,
    InputTooSmallError,
    MaskError,
    NumericError,
    ProviderError,
    RangeError,
    RecipeFormatError,
    SalshiftError,
    ShapeError,
    VideoError,
)
from .imaging import (
    EditRecipe,
    MaskLayer,
    ParamSet,
    RasterImage,
    adjust_contrast,
    adjust_exposure,
    apply_curve,
    apply_param_set,
    composite,
    identity_params,
    identity_recipe,
    interpolate_params,
    luminance,
    render_edit,
    sharpen,
)
from .metrics import (
    MetricsReport,
    compute_report,
    fidelity_splits,
    pearson_cc,
    saliency_increase,
    weighted_fbeta,
)
from .optimizer import (
    ObjectiveBreakdown,
    ObjectiveConfig,
    OptimizerConfig,
    finite_diff_gradient,
    multi_style,
    objective,
    optimize,
)
from .providers import parse_provider_spec, query_provider
from .recipes import load_recipes, parse_recipe, recipe_to_json, save_recipes, serialize_recipe
from .saliency import (
    ProxySaliencyConfig,
    SaliencyMap,
    attention_loss,
    compute_proxy_saliency,
    mean_mask_saliency,
    normalize_softmax,
)

__version__ = "0.1.0"
