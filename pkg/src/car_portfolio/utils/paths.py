# Define paths using the project path as the root

from pathlib import Path

# Define the root path of the project
# NOTE: change this if this file location's changes
PROJECT_ROOT_PATH = Path(__file__).resolve().parent.parent.parent.parent

CONFIGS_PATH = PROJECT_ROOT_PATH / "data" / "configs"
OUTPUTS_PATH = PROJECT_ROOT_PATH / "data" / "outputs"
