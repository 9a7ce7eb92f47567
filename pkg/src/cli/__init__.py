# Command-line interface
from .commands import main
