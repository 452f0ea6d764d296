"""Direct and inverse spectral theory of 2x2 canonical systems ``J Y' = z H Y``."""

from .core import (
    CanonError,
    Complex2Vector,
    J,
    Matrix2,
    NumericalError,
    Polynomial,
    RealPolynomial,
    ValidationError,
    mat2_mul,
    poly_complex_roots,
    poly_real_roots,
)
from .hamiltonian import (
    BoundaryContext,
    Constant,
    Hamiltonian,
    RankOne,
    Reparametrization,
    Sampled,
    boundary_parameter_map,
    dirac_to_canonical,
    exact_type,
    free_hamiltonian,
    normalize_trace,
    schrodinger_to_canonical,
    string_to_canonical,
)
from .jacobi import (
    JacobiMatrix,
    RankOneChain,
    hamiltonian_to_jacobi,
    jacobi_from_spectral_data,
    jacobi_to_hamiltonian,
)
from .evolve import (
    AtomicMeasure,
    SolutionPair,
    accumulated_hamiltonian,
    de_branges_function,
    fundamental_columns,
    greens_matrix,
    monodromy,
    polynomial_monodromy,
    singular_interval_monodromy,
    spectral_measure_alpha,
    spectrum_alpha,
)
from .debranges import (
    HBPolynomial,
    HerglotzData,
    e_from_theta,
    herglotz_decomposition,
    inner_product,
    is_hermite_biehler,
    membership_check,
    numeric_type,
    reconstruct_second_column,
    reproducing_kernel,
    system_length_from_e,
    theta_from_e,
)
from .inverse import (
    FactorizationStep,
    RegularHBSpec,
    factor_step,
    regular_inverse,
    segment_from_nilpotent,
    solve_finite_measure_inverse,
    solve_polynomial_inverse,
    terminal_segment,
    theta_from_atoms,
)
from .weyl import (
    MeasureDescriptor,
    Schedule,
    WeylDisk,
    herglotz_transform,
    inverse_singular,
    m_function,
    spectral_density,
    weyl_disk,
)

__version__ = "0.1.0"
