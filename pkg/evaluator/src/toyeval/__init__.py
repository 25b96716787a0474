"""Reference fitness evaluator: small-CNN training behind a JSON-lines protocol."""

from .descriptor import DEFAULT_BLOCK_KERNELS, Descriptor, DescriptorError, parse_descriptor
from .model import build_model, conv_count
from .server import handle_request, serve
from .train import ToyTrainConfig, train_and_score

__version__ = "0.1.0"
