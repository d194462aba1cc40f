from services.cli.app import GradCheckConfig, SimulateConfig, build_parser, main
from services.cli.manifest import RunManifest
