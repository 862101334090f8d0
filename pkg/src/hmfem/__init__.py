"""P1 finite elements for the Hasegawa-Mima drift-wave equation on a periodic square."""
from .assembly import (AnalyticGradient, ConstantGradient, assemble, assemble_R, assemble_S,
                       local_mass, local_R, local_S, local_stiffness)
from .mesh import Mesh, build_mesh, reduce_index, triangle
from .sparse import CsrMatrix, add_scaled, solve_general, solve_spd, spmv
from .stepper import (Discretization, SchemeConfig, State, init_state, run, step_fixedpoint,
                      step_semilinear)

__version__ = "0.1.0"
