from .main import COMMANDS, EXIT_DIVERGED, EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE, build_parser, main
from .manifest import RunManifest
