"""Command-line front end.

Every command reads its inputs from JSON files, writes its result to
``<out>/output.json`` (or ``output.csv``) and echoes it to stdout, and always
writes ``<out>/report.json`` with the command line, SHA-256 digests of the
inputs, the outputs, the named residual checks and the collected warnings.

Exit codes: 0 success, 2 usage error, 3 validation error, 4 failed
numerical gate (some residual above its tolerance).  ``CANON_LOG`` sets the
log level on stderr (``error``, ``info`` or ``debug``).
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import sys
import warnings as pywarnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import click
import numpy as np

from .core import CanonError, NumericalError, Polynomial, ValidationError
from .debranges import (
    HBPolynomial,
    is_hermite_biehler,
    log_abs_polynomial,
    numeric_type,
    reconstruct_second_column,
    reproducing_kernel,
    system_length_from_e,
    trace_derivative_at_zero,
)
from .evolve import (
    AtomicMeasure,
    accumulated_hamiltonian,
    log_abs_de_branges,
    monodromy,
    polynomial_monodromy,
    spectral_measure_alpha,
    spectrum_alpha,
    theta_norms,
    transfer_matrices,
)
from .hamiltonian import (
    Hamiltonian,
    exact_type,
    free_hamiltonian,
    normalize_trace,
    schrodinger_to_canonical,
    dirac_to_canonical,
    string_to_canonical,
)
from .inverse import (
    RegularHBSpec,
    solve_finite_measure_inverse,
    solve_polynomial_inverse,
    regular_inverse,
)
from .jacobi import JacobiMatrix, RankOneChain, hamiltonian_to_jacobi, jacobi_to_hamiltonian
from .weyl import (
    MeasureDescriptor,
    Schedule,
    herglotz_test_points,
    herglotz_transform,
    inverse_singular,
    m_function,
    spectral_density,
    weyl_disk,
)

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_GATE = 0, 2, 3, 4
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class GateFailure(CanonError):
    """A residual check exceeded its tolerance."""


# --------------------------------------------------------------------------
# run report


@dataclass
class RunReport:
    """Everything a run did, written to ``report.json``."""

    command: list[str]
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: Any = None
    residuals: dict[str, dict] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    exit_code: int = EXIT_OK
    error: str | None = None

    def check(self, name: str, value: float, tol: float) -> None:
        """Record ``value <= tol`` as a named residual."""
        value = float(value)
        self.residuals[name] = {"value": value, "tol": float(tol), "ok": bool(value <= tol)}

    @property
    def failed(self) -> list[str]:
        return sorted(k for k, r in self.residuals.items() if not r["ok"])

    def to_json(self) -> dict:
        return _plain(asdict(self))


class _Collector(logging.Handler):
    def __init__(self, sink: list[str]):
        super().__init__(logging.WARNING)
        self.sink = sink

    def emit(self, record):
        self.sink.append(f"{record.name}: {record.getMessage()}")


def _plain(obj):
    """JSON-ready copy: numpy scalars and arrays to lists, complex to ``[re, im]``."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _dump(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# shared plumbing


class ComplexParam(click.ParamType):
    name = "complex"

    def convert(self, value, param, ctx):
        if isinstance(value, complex):
            return value
        try:
            return complex(str(value).replace(" ", "").replace("i", "j"))
        except ValueError:
            self.fail(f"{value!r} is not a complex number like 1+2i", param, ctx)


COMPLEX = ComplexParam()


class AngleParam(click.ParamType):
    """Radians as a float or as ``[k*]pi[/m]``, e.g. ``pi/2`` or ``3*pi/4``."""

    name = "angle"

    def convert(self, value, param, ctx):
        if isinstance(value, float):
            return value
        text = str(value).replace(" ", "").lower()
        try:
            return float(text)
        except ValueError:
            pass
        num, _, den = text.partition("/")
        k, star, p = num.rpartition("*")
        try:
            if (p if star else num) != "pi":
                raise ValueError
            val = (float(k) if star else 1.0) * math.pi
            return val / float(den) if den else val
        except ValueError:
            self.fail(f"{value!r} is not an angle like 1.2, pi/2 or 3*pi/4", param, ctx)


ANGLE = AngleParam()


def _state() -> dict:
    return click.get_current_context().find_root().obj


def _store(ctx, param, value):
    if value is not None or param.name not in ctx.find_root().obj:
        ctx.find_root().obj[param.name] = value
    return value


def common(fn):
    """Attach the output, format, tolerance and thread options to a command."""
    opts = [
        click.option("--out", type=click.Path(file_okay=False), default=None, expose_value=False,
                     callback=_store, help="Output directory (default: current directory)."),
        click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
                     expose_value=False, callback=_store, help="Output format of the result."),
        click.option("--tol", type=float, default=None, expose_value=False, callback=_store,
                     help="Override the tolerance of the numerical gates."),
        click.option("--threads", type=click.IntRange(min=1), default=1, expose_value=False,
                     callback=_store, help="Worker threads for parameter sweeps."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _tol(default: float) -> float:
    t = _state().get("tol")
    return default if t is None else t


def _read(path: str) -> dict:
    raw = Path(path).read_bytes()
    _state()["report"].inputs[path] = hashlib.sha256(raw).hexdigest()
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc.msg})") from exc


def _load(path: str, cls):
    try:
        return cls.from_json(_read(path))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: bad {cls.__name__} JSON ({exc})") from exc


def _sweep(fn: Callable, items: Sequence) -> list:
    # map preserves order, so outputs do not depend on the thread count
    n = _state().get("threads") or 1
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _emit(result, csv_header: Sequence[str] | None = None, csv_rows=None) -> None:
    """Store the result, write it to the output directory and echo it."""
    st = _state()
    st["report"].outputs = result
    out = Path(st.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    if st.get("fmt") == "csv":
        if csv_header is None:
            raise click.UsageError("this command has no tabular output; use --format json")
        lines = [",".join(csv_header)]
        lines += [",".join(_csv_cell(v) for v in row) for row in csv_rows]
        text = "\n".join(lines) + "\n"
        (out / "output.csv").write_text(text)
    else:
        text = _dump(result)
        (out / "output.json").write_text(text)
    click.echo(text, nl=False)


def _csv_cell(v) -> str:
    if isinstance(v, (complex, np.complexfloating)):
        return f"{float(v.real)!r},{float(v.imag)!r}"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# --------------------------------------------------------------------------
# command tree


@click.group()
def cli():
    """Direct and inverse spectral theory of 2x2 canonical systems."""


@cli.command()
@click.option("--h", "h_file", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Hamiltonian JSON.")
@common
def normalize(h_file):
    """Reparametrize a Hamiltonian to trace 1."""
    H = _load(h_file, Hamiltonian)
    Hn, rep = normalize_trace(H)
    x = min(Hn.length, 10.0)
    if x > 0:
        G = accumulated_hamiltonian(Hn, x)
        _state()["report"].check("trace_identity", abs(np.trace(G) - x) / max(1.0, x), _tol(1e-10))
    _emit({"hamiltonian": Hn.to_json(), "length": Hn.length,
           "reparametrization": {"x": rep.grid, "xi": rep.values}})


@cli.group()
def reduce():
    """Rewrite Schroedinger, Dirac or string equations as canonical systems."""


def _samples(path: str, key: str):
    obj = _read(path)
    if not isinstance(obj, dict) or key not in obj:
        raise ValidationError(f"{path}: needs a '{key}' entry")
    return obj[key], float(obj.get("length", 1.0))


@reduce.command("schrodinger")
@click.option("--q", "q_file", required=True, type=click.Path(exists=True, dir_okay=False),
              help='Potential samples on a uniform grid: {"values": [...], "length": L}.')
@click.option("--bc-h", type=float, required=True, help="Left boundary parameter in y'(0) = h y(0).")
@click.option("--grid-n", type=int, default=256, show_default=True)
@common
def reduce_schrodinger(q_file, bc_h, grid_n):
    """-y'' + q y = lambda y  ->  canonical system and boundary data."""
    q, length = _samples(q_file, "values")
    H, ctx = schrodinger_to_canonical(np.asarray(q, dtype=float), bc_h, grid_n, length)
    _state()["report"].check("wronskian_drift", ctx.wronskian_drift, _tol(1e-8))
    _emit({"hamiltonian": H.to_json(), "boundary": asdict(ctx)})


@reduce.command("dirac")
@click.option("--q", "q_file", required=True, type=click.Path(exists=True, dir_okay=False),
              help='Symmetric potential: {"matrices": [[[..]]...] or [[a,b],[b,c]], "length": L}.')
@click.option("--grid-n", type=int, default=256, show_default=True)
@common
def reduce_dirac(q_file, grid_n):
    """J X' + Q X = 0  ->  canonical system H = X^T X."""
    Q, length = _samples(q_file, "matrices")
    H = dirac_to_canonical(np.asarray(Q, dtype=float), grid_n, length)
    _emit({"hamiltonian": H.to_json()})


@reduce.command("string")
@click.option("--rho", "rho_file", required=True, type=click.Path(exists=True, dir_okay=False),
              help='Density cell values: {"values": [...], "length": L}.')
@common
def reduce_string(rho_file):
    """String with density rho  ->  canonical system diag(rho, 1)."""
    rho, length = _samples(rho_file, "values")
    H = string_to_canonical(np.asarray(rho, dtype=float), length)
    _emit({"hamiltonian": H.to_json()})


@cli.group()
def jacobi():
    """Convert between rank-one chains and Jacobi matrices."""


@jacobi.command("to")
@click.option("--h", "h_file", required=True, type=click.Path(exists=True, dir_okay=False))
@common
def jacobi_to(h_file):
    """Jacobi matrix of a chain of finite rank-one segments."""
    chain = RankOneChain.from_hamiltonian(_load(h_file, Hamiltonian)).oriented()
    jm = hamiltonian_to_jacobi(chain)
    back = jacobi_to_hamiltonian(jm, chain.vectors[0], float(chain.lengths[0]))
    err = max(float(np.max(np.abs(back.lengths - chain.lengths) / chain.lengths)),
              float(np.max(np.abs(back.vectors - chain.vectors))))
    _state()["report"].check("roundtrip", err, _tol(1e-8))
    rows = [(j, jm.q[j], jm.rho[j] if j < len(jm) - 1 else "") for j in range(len(jm))]
    _emit({"jacobi": jm.to_json(), "e1": chain.vectors[0], "delta1": chain.lengths[0]},
          ["j", "q", "rho"], rows)


@jacobi.command("from")
@click.option("--jacobi", "j_file", required=True, type=click.Path(exists=True, dir_okay=False),
              help='Jacobi JSON {"q": [...], "rho": [...]}.')
@click.option("--e1", nargs=2, type=float, required=True, help="First direction (unit vector).")
@click.option("--delta1", type=float, required=True, help="First segment length.")
@common
def jacobi_from(j_file, e1, delta1):
    """Chain of rank-one segments with a given Jacobi matrix."""
    jm = _load(j_file, JacobiMatrix)
    chain = jacobi_to_hamiltonian(jm, np.asarray(e1), delta1)
    back = hamiltonian_to_jacobi(chain)
    err = float(max(np.max(np.abs(back.q - jm.q)),
                    np.max(np.abs(back.rho - jm.rho), initial=0.0)) / max(1.0, np.max(np.abs(jm.matrix()))))
    _state()["report"].check("roundtrip", err, _tol(1e-8))
    _emit({"hamiltonian": chain.to_hamiltonian().to_json(), "chain": chain.to_json()})


@cli.group()
def direct():
    """Monodromy matrices, spectra and spectral measures."""


def _boundary_residual(H: Hamiltonian, alpha: float, lam: np.ndarray) -> float:
    if lam.size == 0:
        return 0.0
    M = transfer_matrices(H, lam)
    th = M[..., :, 0].real
    val = th[:, 0] * math.cos(alpha) + th[:, 1] * math.sin(alpha)
    return float(np.max(np.abs(val) / np.linalg.norm(th, axis=1)))


@direct.command("monodromy")
@click.option("--h", "h_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--z", type=COMPLEX, required=True, help="Spectral parameter, e.g. 1+2i.")
@click.option("--x", type=float, default=None, help="Endpoint (default: the whole interval).")
@common
def direct_monodromy(h_file, z, x):
    """M(x, z), the fundamental matrix at x."""
    H = _load(h_file, Hamiltonian)
    M = monodromy(H, z, x)
    # det is formed from products of size |M|^2, so the gate is relative to that
    _state()["report"].check("det_minus_one", abs(M.det() - 1.0) / max(1.0, M.norm() ** 2), _tol(1e-10))
    arr = M.to_array()
    _emit({"z": z, "x": H.length if x is None else x, "matrix": arr},
          ["row", "col", "re", "im"],
          [(i + 1, j + 1, arr[i, j].real, arr[i, j].imag) for i in range(2) for j in range(2)])


_alpha = click.option("--alpha", type=ANGLE, default="pi/2", show_default=True,
                      help="Boundary angle at the right end (radians, or like pi/2).")
_window = click.option("--window", nargs=2, type=float, required=True, help="Spectral window LO HI.")


@direct.command("spectrum")
@click.option("--h", "h_file", required=True, type=click.Path(exists=True, dir_okay=False))
@_alpha
@_window
@common
def direct_spectrum(h_file, alpha, window):
    """Eigenvalues for the boundary angle alpha inside the window."""
    H = _load(h_file, Hamiltonian)
    lam = spectrum_alpha(H, alpha, tuple(window))
    _state()["report"].check("boundary_residual", _boundary_residual(H, alpha, lam), _tol(1e-8))
    _emit({"alpha": alpha, "eigenvalues": lam}, ["lambda"], [(v,) for v in lam])


@direct.command("measure")
@click.option("--h", "h_file", required=True, type=click.Path(exists=True, dir_okay=False))
@_alpha
@_window
@common
def direct_measure(h_file, alpha, window):
    """Spectral measure: eigenvalues with weights 1 / ||Theta||^2."""
    H = _load(h_file, Hamiltonian)
    mu = spectral_measure_alpha(H, alpha, tuple(window))
    _state()["report"].check("boundary_residual", _boundary_residual(H, alpha, mu.t), _tol(1e-8))
    _emit(mu.to_json(), ["t", "w"], list(zip(mu.t, mu.w)))


@cli.group()
def debranges():
    """Reproducing kernels, second column, length and type of E."""


_e_opt = click.option("--e", "e_file", required=True, type=click.Path(exists=True, dir_okay=False),
                      help="HBPolynomial JSON.")


@debranges.command("kernel")
@_e_opt
@click.option("--lam", type=COMPLEX, required=True)
@click.option("--z", type=COMPLEX, required=True)
@common
def debranges_kernel(e_file, lam, z):
    """Reproducing kernel K(lam, z) of H(E)."""
    hb = _load(e_file, HBPolynomial)
    k = reproducing_kernel(hb, lam, z)
    k_swap = reproducing_kernel(hb, z, lam)
    _state()["report"].check("hermitian_symmetry", abs(k - np.conj(k_swap)) / max(1.0, abs(k)), _tol(1e-10))
    _emit({"lam": lam, "z": z, "kernel": k})


@debranges.command("phi")
@_e_opt
@common
def debranges_phi(e_file):
    """Second column (Phi+, Phi-) with det [Theta, Phi] = 1."""
    hb = _load(e_file, HBPolynomial)
    sc = reconstruct_second_column(hb, check=False)
    rep = _state()["report"]
    rep.check("det_residual", sc.det_residual, _tol(1e-9))
    rep.check("thplu_residual", sc.thplu_residual, _tol(1e-8))
    rep.check("herglotz_sign", max(0.0, -sc.herglotz_min_im), 0.0)
    _emit({"phi_plus": sc.phi_plus.to_json(), "phi_minus": sc.phi_minus.to_json()})


@debranges.command("length")
@_e_opt
@common
def debranges_length(e_file):
    """Length of the system with de Branges function E."""
    hb = _load(e_file, HBPolynomial)
    L = system_length_from_e(hb)
    # the trace identity gives the same number from the second column
    _state()["report"].check("trace_identity", abs(L - trace_derivative_at_zero(hb)) / max(1.0, L), _tol(1e-8))
    _emit({"length": L})


_ymax = click.option("--y-max", type=float, default=1e4, show_default=True,
                     help="Upper end of the fit range [y_max/10, y_max] on the imaginary axis.")


@debranges.command("type")
@_e_opt
@_ymax
@common
def debranges_type(e_file, y_max):
    """Numeric exponential type of E (zero for polynomials)."""
    hb = _load(e_file, HBPolynomial)
    _emit({"numeric_type": numeric_type(log_abs_polynomial(hb.e), y_max)})


@cli.command("type")
@click.option("--h", "h_file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--e", "e_file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--numeric", is_flag=True, help="Fit ln|E(iy)| instead of integrating sqrt(det H).")
@_ymax
@common
def type_cmd(h_file, e_file, numeric, y_max):
    """Exponential type from H (exact or numeric) or from a polynomial E."""
    if (h_file is None) == (e_file is None):
        raise click.UsageError("give exactly one of --h and --e")
    if e_file is not None:
        hb = _load(e_file, HBPolynomial)
        _emit({"numeric_type": numeric_type(log_abs_polynomial(hb.e), y_max)})
        return
    H = _load(h_file, Hamiltonian)
    if not math.isfinite(H.length):
        raise ValidationError("the type is defined for systems on a finite interval")
    if numeric:
        _emit({"numeric_type": numeric_type(lambda y: log_abs_de_branges(H, 1j * y), y_max)})
    else:
        _emit({"exact_type": exact_type(H)})


@cli.group()
def inverse():
    """Recover Hamiltonians from E, from atomic measures or from regular data."""


def _coeff_error(p: Polynomial, q: Polynomial) -> float:
    n = max(p.coeffs.size, q.coeffs.size)
    a = np.zeros(n, dtype=complex)
    b = np.zeros(n, dtype=complex)
    a[: p.coeffs.size] = p.coeffs
    b[: q.coeffs.size] = q.coeffs
    return float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))))


@inverse.command("poly")
@_e_opt
@click.option("--method", type=click.Choice(["spectral", "kernel", "leading"]), default="spectral",
              show_default=True)
@common
def inverse_poly(e_file, method):
    """Hamiltonian whose de Branges function is the polynomial E."""
    hb = _load(e_file, HBPolynomial)
    H = solve_polynomial_inverse(hb, method=method)
    P = polynomial_monodromy(H)
    rep = _state()["report"]
    rep.check("theta_plus", _coeff_error(P[0][0], hb.theta_plus), _tol(1e-7))
    rep.check("theta_minus", _coeff_error(P[1][0], hb.theta_minus), _tol(1e-7))
    rep.check("segment_count", abs(len(H.segments) - hb.degree), 0.0)
    _emit({"hamiltonian": H.to_json(), "length": H.length})


@inverse.command("measure")
@click.option("--atoms", "a_file", required=True, type=click.Path(exists=True, dir_okay=False),
              help="AtomicMeasure JSON with an atom at 0.")
@click.option("--d1", type=float, default=0.0, show_default=True, help="Herglotz constant.")
@click.option("--method", type=click.Choice(["spectral", "kernel", "leading"]), default="spectral",
              show_default=True)
@common
def inverse_measure(a_file, d1, method):
    """Finite system whose pi/2 spectral measure is the given atomic measure."""
    mu = _load(a_file, AtomicMeasure)
    H = solve_finite_measure_inverse(mu, d1, method=method)
    lam = np.sort(np.linalg.eigvalsh(hamiltonian_to_jacobi(H).matrix()))
    rep = _state()["report"]
    rep.check("positions", float(np.max(np.abs(lam - mu.t))) / max(1.0, float(np.max(np.abs(mu.t)))),
              _tol(1e-7))
    w = 1.0 / theta_norms(H, mu.t)
    rep.check("weights", float(np.max(np.abs(w - mu.w) / mu.w)), _tol(1e-6))
    _emit({"hamiltonian": H.to_json(), "length": H.length})


@inverse.command("regular")
@click.option("--spec", "s_file", required=True, type=click.Path(exists=True, dir_okay=False),
              help="RegularHBSpec JSON.")
@click.option("--n", "n", type=click.IntRange(min=1), required=True, help="Truncation order.")
@click.option("--grid-n", type=click.IntRange(min=1), default=64, show_default=True)
@common
def inverse_regular(s_file, n, grid_n):
    """Approximate the Hamiltonian of a regular HB function from its zeros and residues."""
    spec = _load(s_file, RegularHBSpec)
    res = regular_inverse(spec, n, grid_n)
    _state()["report"].warnings.extend(res.warnings)
    G = np.asarray(res.F)
    _emit({"hamiltonian": res.hamiltonian.to_json(), "length": res.length, "grid": res.grid, "F": G,
           "approximant_lengths": res.approximant_lengths, "increments": res.increments,
           "padded": res.padded},
          ["x", "F11", "F12", "F22"], [(x, g[0, 0], g[0, 1], g[1, 1]) for x, g in zip(res.grid, G)])


@cli.group()
def weyl():
    """Weyl disks, the m-function and the singular inverse problem."""


@weyl.command("disk")
@click.option("--h", "h_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--x", "xs", type=float, multiple=True, required=True,
              help="Truncation point; repeat for a trajectory.")
@click.option("--z", type=COMPLEX, required=True)
@common
def weyl_disk_cmd(h_file, xs, z):
    """Weyl disks D_X(z); CSV columns: X, center_re, center_im, radius."""
    H = _load(h_file, Hamiltonian)
    disks = _sweep(lambda X: weyl_disk(H, X, z), list(xs))
    rep = _state()["report"]
    res = [d.energy_residual for d in disks if not math.isnan(d.energy_residual)]
    rep.check("energy_residual", max(res, default=0.0), _tol(1e-7))
    order = np.argsort(xs, kind="stable")
    nest = 0.0
    for i, j in zip(order[:-1], order[1:]):
        a, b = disks[i], disks[j]
        nest = max(nest, abs(b.center - a.center) + b.radius - a.radius)
    rep.check("nesting", nest, _tol(1e-9))
    _emit({"z": z, "disks": [d.to_json() for d in disks]},
          ["X", "center_re", "center_im", "radius"], [(d.X, d.center, d.radius) for d in disks])


@weyl.command("m")
@click.option("--h", "h_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--z", "zs", type=COMPLEX, multiple=True, required=True, help="Point of C+; repeatable.")
@common
def weyl_m(h_file, zs):
    """Weyl coefficient m(z) of a semiaxis system (--tol is the disk diameter target)."""
    H = _load(h_file, Hamiltonian)
    tol = _tol(1e-8)
    ms = _sweep(lambda z: m_function(H, z, tol), list(zs))
    _state()["report"].check("herglotz_sign", max(0.0, -min(m.imag for m in ms)), 0.0)
    _emit({"z": list(zs), "m": ms}, ["z_re", "z_im", "m_re", "m_im"], list(zip(zs, ms)))


@weyl.command("density")
@click.option("--h", "h_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--t", "t_range", nargs=3, type=(float, float, int), required=True, help="LO HI COUNT.")
@click.option("--eps", type=float, default=1e-3, show_default=True, help="Distance above the axis.")
@common
def weyl_density(h_file, t_range, eps):
    """Smoothed spectral density Im m(t + i eps) / pi on a grid."""
    H = _load(h_file, Hamiltonian)
    lo, hi, n = t_range
    t = np.linspace(lo, hi, n)
    d = spectral_density(H, t, eps)
    _emit({"t": t, "eps": eps, "density": d}, ["t", "density"], list(zip(t, d)))


@weyl.command("inverse")
@click.option("--measure", "m_file", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Measure descriptor JSON.")
@click.option("--schedule", "s_file", required=True, type=click.Path(exists=True, dir_okay=False),
              help='Schedule JSON {"N": [...], "s": [...], "x_max": X}.')
@common
def weyl_inverse(m_file, s_file):
    """Semiaxis Hamiltonian with a given spectral measure, on [0, x_max]."""
    mu = _load(m_file, MeasureDescriptor)
    sched = _load(s_file, Schedule)
    res = inverse_singular(mu, sched)
    rep = _state()["report"]
    rep.warnings.extend(res.warnings)
    zs = list(herglotz_test_points())
    ms = _sweep(lambda z: m_function(res.semiaxis, z), zs)
    err = max(abs(m - herglotz_transform(mu, z)) for m, z in zip(ms, zs))
    rep.check("herglotz_mismatch", err, _tol(5e-2))
    cells = res.hamiltonian.segments[0].matrices
    _emit({"hamiltonian": res.hamiltonian.to_json(), "grid": res.grid, "G": res.G,
           "approximant_lengths": res.approximant_lengths, "increments": res.increments},
          ["cell", "H11", "H12", "H22"], [(k, c[0, 0], c[0, 1], c[1, 1]) for k, c in enumerate(cells)])


@cli.command()
@common
def selftest():
    """Run the fast identity suite on built-in systems."""
    rep = _state()["report"]
    free = free_hamiltonian(math.pi)
    lam = spectrum_alpha(free, math.pi / 2, (-5.0, 5.0))
    rep.check("free_spectrum", float(np.max(np.abs(lam - np.arange(-4.0, 5.0, 2.0)))), 1e-8)
    M = monodromy(free, 3.0 + 4.0j)
    rep.check("det_minus_one", abs(M.det() - 1.0) / max(1.0, M.norm() ** 2), 1e-10)
    G = accumulated_hamiltonian(free, 2.0)
    rep.check("trace_identity", abs(np.trace(G) - 2.0), 1e-10)
    E = HBPolynomial.from_e(Polynomial([1.0, -2.0j, -1.0]))
    H = solve_polynomial_inverse(E)
    rep.check("worked_factorization_length", abs(H.length - 2.5), 1e-8)
    rep.check("length_from_e", abs(system_length_from_e(E) - 2.5), 1e-8)
    ok, _ = is_hermite_biehler(E)
    rep.check("hermite_biehler", 0.0 if ok else 1.0, 0.0)
    mu = AtomicMeasure(np.array([-1.0, 0.0, 2.0]), np.array([0.3, 0.5, 0.2]))
    Hm = solve_finite_measure_inverse(mu)
    back = spectral_measure_alpha(Hm, math.pi / 2, (-3.0, 3.0))
    rep.check("measure_roundtrip", float(np.max(np.abs(back.w - mu.w) / mu.w)), 1e-6)
    jm = JacobiMatrix(np.array([0.5, -1.0, 2.0]), np.array([1.0, 0.7]))
    chain = jacobi_to_hamiltonian(jm, np.array([1.0, 0.0]), 1.0)
    rep.check("jacobi_roundtrip", float(np.max(np.abs(hamiltonian_to_jacobi(chain).q - jm.q))), 1e-8)
    rep.check("free_m", abs(m_function(free_hamiltonian(), 1.0 + 1.0j) - 1j), 1e-6)
    _emit({name: r["ok"] for name, r in rep.residuals.items()},
          ["check", "value", "tol", "ok"], [(k, r["value"], r["tol"], r["ok"]) for k, r in rep.residuals.items()])


# --------------------------------------------------------------------------
# entry point


def _configure_logging() -> None:
    level = LOG_LEVELS.get(os.environ.get("CANON_LOG", "error").lower(), logging.ERROR)
    root = logging.getLogger("canonsys")
    root.setLevel(logging.DEBUG)
    if not any(getattr(h, "_canon_stderr", False) for h in root.handlers):
        h = logging.StreamHandler(sys.stderr)
        h._canon_stderr = True
        h.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        root.addHandler(h)
    for h in root.handlers:
        if getattr(h, "_canon_stderr", False):
            h.setLevel(level)


def _raw_out(argv: list[str]) -> str:
    # used when parsing failed before --out was handled
    for k, arg in enumerate(argv):
        if arg == "--out" and k + 1 < len(argv):
            return argv[k + 1]
        if arg.startswith("--out="):
            return arg[len("--out="):]
    return "."


def main(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and return the exit code; ``report.json`` is always written."""
    argv = list(sys.argv[1:] if argv is None else argv)
    _configure_logging()
    report = RunReport(command=["canonsys", *argv])
    state: dict = {"report": report}
    collector = _Collector(report.warnings)
    logger = logging.getLogger("canonsys")
    logger.addHandler(collector)
    try:
        with pywarnings.catch_warnings(record=True) as caught:
            pywarnings.simplefilter("always")
            try:
                cli.main(args=argv, prog_name="canonsys", obj=state, standalone_mode=False)
            finally:
                report.warnings.extend(f"{w.category.__name__}: {w.message}" for w in caught)
        if report.failed:
            raise GateFailure("numerical gates failed: " + ", ".join(report.failed))
    except click.exceptions.Exit as exc:
        report.exit_code = exc.exit_code
    except click.UsageError as exc:
        report.exit_code, report.error = EXIT_USAGE, exc.format_message()
    except click.ClickException as exc:
        report.exit_code, report.error = EXIT_USAGE, exc.format_message()
    except click.Abort:
        report.exit_code, report.error = EXIT_USAGE, "aborted"
    except ValidationError as exc:
        report.exit_code, report.error = EXIT_VALIDATION, str(exc)
    except (GateFailure, NumericalError) as exc:
        report.exit_code, report.error = EXIT_GATE, str(exc)
    finally:
        logger.removeHandler(collector)
    out = Path(state.get("out") or _raw_out(argv))
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(_dump(report.to_json()))
    if report.error:
        click.echo(f"error: {report.error}", err=True)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
