# Data modules
from .artifacts import Artifacts, msg
