"""Matter, mode and auxiliary-qubit models and their Liouvillians.

Basis ordering of every composite operator is ``system (x) env (x) mode (x) aux``.
The *system* factor carries an excitation-number grading; the optional *env*
factor (e.g. a pair of classical-noise fluctuators) is ungraded and is never
truncated.  Manifold restriction keeps basis states whose total excitation
(system + photons + aux) does not exceed a cap.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import liouville as lv


@dataclass(frozen=True, eq=False)
class MatterModel:
    """Matter Hamiltonian, field coupling and extra dissipators.

    All operators act on ``system (x) env`` with dimension
    ``len(grading) * env_dim``.  ``frame`` records the frequency already
    subtracted per excitation by :func:`rotating_frame`.
    """

    hamiltonian: np.ndarray
    coupling: np.ndarray
    grading: tuple
    dissipators: tuple = ()
    omega0: float = 0.0
    measured_state: int = 1
    ground_state: int = 0
    env_dim: int = 1
    env_initial: np.ndarray = None
    frame: float = 0.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "hamiltonian", lv.as_operator(self.hamiltonian))
        object.__setattr__(self, "coupling", lv.as_operator(self.coupling))
        object.__setattr__(self, "dissipators", tuple(lv.as_operator(y) for y in self.dissipators))
        object.__setattr__(self, "grading", tuple(int(g) for g in self.grading))
        env0 = self.env_initial
        if env0 is None:
            env0 = np.zeros((self.env_dim, self.env_dim), dtype=complex)
            env0[0, 0] = 1.0
        object.__setattr__(self, "env_initial", lv.as_operator(env0))

    @property
    def system_dim(self):
        return len(self.grading)

    @property
    def dim(self):
        return self.system_dim * self.env_dim

    def full_grading(self):
        """Excitation count of every basis state of ``system (x) env``."""
        return np.repeat(np.asarray(self.grading), self.env_dim)

    def number_operator(self):
        return np.diag(self.full_grading()).astype(complex)

    def ground_density(self):
        g = np.zeros((self.system_dim, self.system_dim), dtype=complex)
        g[self.ground_state, self.ground_state] = 1.0
        return np.kron(g, self.env_initial)

    def measured_projector(self):
        p = np.zeros((self.system_dim, self.system_dim), dtype=complex)
        p[self.measured_state, self.measured_state] = 1.0
        return np.kron(p, np.eye(self.env_dim))


@dataclass(frozen=True)
class ModeSpec:
    """Single bosonic mode standing in for the photon field."""

    n_max: int = 1
    initial_fock: int = 1

    def __post_init__(self):
        if self.n_max < 1 or not 0 <= self.initial_fock <= self.n_max:
            raise ValueError(f"need 0 <= initial_fock <= n_max and n_max >= 1, got {self}")


@dataclass(frozen=True, eq=False)
class AuxSpec:
    """Fast-decaying auxiliary qubit with decay amplitude ``chi``.

    ``J`` is the matter lowering operator coupled to the aux raising
    operator.  ``None`` selects ``J = chi * L / 2`` so that the eliminated
    dissipator ``D[2 J / chi]`` equals ``D[L]``.
    """

    chi: float
    J: np.ndarray = None

    def __post_init__(self):
        if not self.chi > 0:
            raise ValueError(f"chi must be positive, got {self.chi}")

    def coupling_operator(self, matter):
        if self.J is None:
            return 0.5 * self.chi * matter.coupling
        return lv.as_operator(self.J)


def _lowering_violations(op, grading, name, strict=True):
    problems = []
    rows, cols = np.nonzero(np.abs(op) > 1e-14)
    for r, c in zip(rows, cols):
        step = grading[r] - grading[c]
        if (strict and step != -1) or (not strict and step > 0):
            what = "strictly lower" if strict else "not raise"
            problems.append(f"{name} must {what} the excitation grading (entry [{r},{c}])")
            break
    return problems


def validate(model):
    """Return a list of human-readable problems; empty means well formed."""
    problems = []
    d = model.dim
    for label, op in [("H_M", model.hamiltonian), ("L", model.coupling)]:
        if op.shape != (d, d):
            problems.append(f"{label} has shape {op.shape}, expected {(d, d)}")
    for k, y in enumerate(model.dissipators):
        if y.shape != (d, d):
            problems.append(f"Y[{k}] has shape {y.shape}, expected {(d, d)}")
    if model.env_initial.shape != (model.env_dim, model.env_dim):
        problems.append("env_initial does not match env_dim")
    if problems:
        return problems
    if not lv.is_hermitian(model.hamiltonian):
        problems.append("H_M is not Hermitian")
    grading = model.full_grading()
    offdiag = np.abs(grading[:, None] - grading[None, :]) > 0
    if np.any(np.abs(model.hamiltonian[offdiag]) > 1e-12):
        problems.append("H_M does not conserve the excitation grading")
    problems += _lowering_violations(model.coupling, grading, "L grading")
    for k, y in enumerate(model.dissipators):
        problems += _lowering_violations(y, grading, f"Y[{k}] grading", strict=False)
    if model.measured_state == model.ground_state:
        problems.append("measured_state equals ground_state")
    for label, idx in [("measured_state", model.measured_state), ("ground_state", model.ground_state)]:
        if not 0 <= idx < model.system_dim:
            problems.append(f"{label} {idx} outside system basis of size {model.system_dim}")
    if model.system_dim and 0 <= model.ground_state < model.system_dim:
        if model.grading[model.ground_state] != 0:
            problems.append("ground_state must have zero excitations")
    return problems


def ensure_valid(model):
    problems = validate(model)
    if problems:
        raise ValueError("invalid matter model: " + "; ".join(problems))
    return model


def rotating_frame(model, omega=None):
    """Shift ``H_M`` by ``-omega * N_exc`` (default ``omega = model.omega0``).

    The frequency removed is accumulated in ``model.frame`` so repeated
    calls compose, and ``omega`` followed by ``-omega`` is the identity.
    """
    if model.grading is None:
        raise ValueError("rotating frame needs an excitation grading")
    omega = model.omega0 if omega is None else float(omega)
    if omega == 0:
        return model
    h = model.hamiltonian - omega * model.number_operator()
    return replace(model, hamiltonian=h, frame=model.frame + omega)


def carrier_frame(model):
    """Return ``model`` expressed in the frame rotating at its carrier ``omega0``."""
    return rotating_frame(model, model.omega0 - model.frame)


def restrict_manifold(op, grading, cap):
    """Project ``op`` onto basis states with excitation count ``<= cap``.

    Returns ``(reduced_op, kept_indices)``.
    """
    grading = np.asarray(grading)
    op = lv.as_operator(op)
    if grading.shape[0] != op.shape[0]:
        raise ValueError(f"grading has {grading.shape[0]} entries for a {op.shape[0]}-dim operator")
    kept = np.flatnonzero(grading <= cap)
    if kept.size == 0:
        raise ValueError(f"no basis state has at most {cap} excitations")
    return op[np.ix_(kept, kept)], kept


def build_continuum_generator(model, cap=None):
    """Damped generator of the continuum-coupled matter system.

    ``-i[H_M, .] - {L^dag L, .}/2 + sum_k D[Y_k]``; the ``L rho L^dag`` feed
    is left out on purpose (it only repopulates the ground state).  With
    ``cap`` set, operators are first restricted to that excitation manifold.
    Returns ``(generator, kept_indices)``.
    """
    ensure_valid(model)
    ops = [model.hamiltonian, model.coupling, *model.dissipators]
    kept = np.arange(model.dim)
    if cap is not None:
        grading = model.full_grading()
        kept = np.flatnonzero(grading <= cap)
        ops = [op[np.ix_(kept, kept)] for op in ops]
    h, l, *ys = ops
    gen = -1j * lv.commutator_super(h) - 0.5 * lv.anticommutator_super(lv.dag(l) @ l)
    for y in ys:
        gen = gen + lv.dissipator_super(y)
    return gen, kept


@dataclass(frozen=True, eq=False)
class CompositeModel:
    """Matter (x) single mode (x) optional aux qubit, restricted to a manifold."""

    matter: MatterModel
    mode: ModeSpec = field(default_factory=ModeSpec)
    aux: AuxSpec = None
    manifold_cap: int = 1

    def __post_init__(self):
        ensure_valid(self.matter)
        if self.manifold_cap < self.mode.initial_fock:
            raise ValueError(
                f"manifold_cap {self.manifold_cap} is below the initial photon number {self.mode.initial_fock}"
            )

    @property
    def aux_dim(self):
        return 1 if self.aux is None else 2

    @cached_property
    def _factors(self):
        m = carrier_frame(self.matter)
        nm = self.mode.n_max + 1
        na = self.aux_dim
        eye_m, eye_a, eye_s = np.eye(nm), np.eye(na), np.eye(m.dim)
        a = np.diag(np.sqrt(np.arange(1, nm)), k=1).astype(complex)

        def on_matter(op):
            return lv.kron(op, eye_m, eye_a)

        h0 = on_matter(m.hamiltonian)
        l_full = on_matter(m.coupling)
        a_full = lv.kron(eye_s, a, eye_a)
        drive = 1j * (l_full @ lv.dag(a_full) - lv.dag(l_full) @ a_full)
        collapse = [on_matter(y) for y in m.dissipators]
        if self.aux is not None:
            sx = lv.kron(eye_s, eye_m, lv.SIGMA_MINUS)
            j_full = on_matter(self.aux.coupling_operator(m))
            hmx = j_full @ lv.dag(sx)
            h0 = h0 + hmx + lv.dag(hmx)
            collapse.append(self.aux.chi * sx)
        grading = (
            np.asarray(m.full_grading())[:, None, None]
            + np.arange(nm)[None, :, None]
            + np.arange(na)[None, None, :]
        ).reshape(-1)
        kept = np.flatnonzero(grading <= self.manifold_cap)
        cut = lambda op: op[np.ix_(kept, kept)]  # noqa: E731
        return {
            "matter": m,
            "h0": cut(h0),
            "drive": cut(drive),
            "collapse": [cut(c) for c in collapse],
            "kept": kept,
            "full_shape": (m.system_dim, m.env_dim, nm, na),
            "grading": grading[kept],
        }

    @property
    def dim(self):
        return len(self._factors["kept"])

    @property
    def kept(self):
        return self._factors["kept"]

    def basis_labels(self):
        """``(system, env, photons, aux)`` index tuple of every retained state."""
        shape = self._factors["full_shape"]
        return [tuple(int(i) for i in np.unravel_index(k, shape)) for k in self.kept]

    def _restrict_full(self, op):
        kept = self.kept
        return op[np.ix_(kept, kept)]

    def initial_state(self):
        m = self._factors["matter"]
        nm = self.mode.n_max + 1
        fock = np.zeros((nm, nm), dtype=complex)
        fock[self.mode.initial_fock, self.mode.initial_fock] = 1.0
        aux0 = np.zeros((self.aux_dim, self.aux_dim), dtype=complex)
        aux0[0, 0] = 1.0
        return self._restrict_full(lv.kron(m.ground_density(), fock, aux0))

    def measured_projector(self):
        m = self._factors["matter"]
        return self._restrict_full(
            lv.kron(m.measured_projector(), np.eye(self.mode.n_max + 1), np.eye(self.aux_dim))
        )

    def generator(self, gamma=0.0):
        """Single-mode Liouvillian for a constant coupling ``gamma``."""
        if not np.isfinite(gamma):
            raise ValueError(f"coupling gamma must be finite, got {gamma}")
        f = self._factors
        return lv.lindbladian(f["h0"] + gamma * f["drive"], f["collapse"])


def build_single_mode_generator(composite, gamma):
    return composite.generator(gamma)


# ---------------------------------------------------------------- presets


def _site_ops(n_sites):
    """Lowering operators of ``n_sites`` two-level sites in a tensor product."""
    eye = np.eye(2)
    ops = []
    for k in range(n_sites):
        factors = [eye] * n_sites
        factors[k] = lv.SIGMA_MINUS
        ops.append(lv.kron(*factors))
    return ops


def preset_example1(omega1=1.0, l1_sq=0.0036, omega2=0.8, l2_sq=0.0064):
    """Two uncoupled chromophores sharing a ground state, measured on state 1."""
    h = np.diag([0.0, omega1, omega2]).astype(complex)
    l = np.zeros((3, 3), dtype=complex)
    l[0, 1], l[0, 2] = np.sqrt(l1_sq), np.sqrt(l2_sq)
    return MatterModel(
        hamiltonian=h,
        coupling=l,
        grading=(0, 1, 1),
        omega0=omega1,
        measured_state=1,
        name="example1",
    )


@dataclass(frozen=True)
class Fluctuator:
    name: str
    omega: float
    coupling: float
    gamma_sq: float


EXAMPLE2_PARAMS = dict(
    omega=(1.0, 0.8, 0.9, 0.5),
    omega_env=(0.1, 0.1),
    J12=0.096,
    J23=0.1,
    J_env=(0.02, 0.02),
    l=0.01,
    gamma_f_sq=0.4,
    gamma_env_sq=(0.25, 0.5),
    omega0=1.0,
)


def preset_example2(env_initial="ground", **overrides):
    """Three-site transfer chain with sink ``f`` and two noise fluctuators.

    The chain sites ``1, 2, 3, f`` form the graded system factor (16 states);
    the fluctuators ``alpha, beta`` form the ungraded env factor (4 states).
    ``env_initial`` is ``"ground"`` or ``"mixed"`` (maximally mixed).
    Returns ``(model, fluctuators)``.
    """
    p = {**EXAMPLE2_PARAMS, **overrides}
    s1, s2, s3, sf = _site_ops(4)
    ea, eb = _site_ops(2)
    eye_s, eye_e = np.eye(16), np.eye(4)
    on_sys = lambda op: np.kron(op, eye_e)  # noqa: E731
    on_env = lambda op: np.kron(eye_s, op)  # noqa: E731
    num = lambda s: lv.dag(s) @ s  # noqa: E731

    h = sum(w * on_sys(num(s)) for w, s in zip(p["omega"], (s1, s2, s3, sf)))
    h = h + sum(w * on_env(num(e)) for w, e in zip(p["omega_env"], (ea, eb)))
    for jval, (a, b) in [(p["J12"], (s1, s2)), (p["J23"], (s2, s3))]:
        hop = jval * on_sys(lv.dag(a) @ b)
        h = h + hop + lv.dag(hop)
    for jval, e in zip(p["J_env"], (ea, eb)):
        h = h + jval * np.kron(num(s2), num(e))

    l = p["l"] * on_sys(s1)
    y_f = np.sqrt(p["gamma_f_sq"]) * on_sys(s3 @ lv.dag(sf))
    sx_a = np.kron(lv.SIGMA_X, np.eye(2))
    sx_b = np.kron(np.eye(2), lv.SIGMA_X)
    ys = (y_f,) + tuple(np.sqrt(g) * on_env(sx) for g, sx in zip(p["gamma_env_sq"], (sx_a, sx_b)))

    grading = [bin(k).count("1") for k in range(16)]
    # index of |0001> (site f excited) in the 4-site tensor basis
    f_index = 0b0001
    if env_initial == "ground":
        env0 = None
    elif env_initial == "mixed":
        env0 = np.eye(4) / 4
    else:
        raise ValueError(f"env_initial must be 'ground' or 'mixed', got {env_initial!r}")
    model = MatterModel(
        hamiltonian=h,
        coupling=l,
        grading=grading,
        dissipators=ys,
        omega0=p["omega0"],
        measured_state=f_index,
        env_dim=4,
        env_initial=env0,
        name="example2",
    )
    fluct = tuple(
        Fluctuator(name, w, j, g)
        for name, w, j, g in zip(("alpha", "beta"), p["omega_env"], p["J_env"], p["gamma_env_sq"])
    )
    return model, fluct


def single_emitter(l_sq=0.0036, omega=1.0, omega0=None):
    """Two-level emitter ``L = l sigma^-``; handy for analytic checks."""
    return MatterModel(
        hamiltonian=np.diag([0.0, omega]).astype(complex),
        coupling=np.sqrt(l_sq) * lv.SIGMA_MINUS,
        grading=(0, 1),
        omega0=omega if omega0 is None else omega0,
        measured_state=1,
        name="single_emitter",
    )


def restrict_model(model, cap=1):
    """Same model with system and operators restricted to ``<= cap`` excitations."""
    keep_sys = [k for k, g in enumerate(model.grading) if g <= cap]
    kept = np.asarray([s * model.env_dim + e for s in keep_sys for e in range(model.env_dim)])
    cut = lambda op: op[np.ix_(kept, kept)]  # noqa: E731
    remap = {old: new for new, old in enumerate(keep_sys)}
    return replace(
        model,
        hamiltonian=cut(model.hamiltonian),
        coupling=cut(model.coupling),
        dissipators=tuple(cut(y) for y in model.dissipators),
        grading=tuple(model.grading[k] for k in keep_sys),
        measured_state=remap[model.measured_state],
        ground_state=remap[model.ground_state],
    )
