# Minimax DAE Observer - worst-case optimal state estimation for descriptor systems
__version__ = "1.0.0"
