# Core modules
from .errors import ObserverError, InputError, InfeasibleError, NumericalError
from .matspace import Tol, Subspace, DEFAULT_TOL
from .dae_core import DaeTriple, WeightSpec, Functional, SolutionTuple
from .simulate import TrajectoryGrid, LinearField, SignalSpec
from .reduction import AssocLti, StabLti, assoc_lti, stab_assoc_lti
from .riccati import DreSolution, CareSolution, solve_dre, solve_care
from .observer import FiniteHorizonObserver, ObserverLti, design_finite, design_infinite
from .data_loader import DataLoader
from .report_writer import ReportWriter
