"""Staggered phase-field solver: alternating minimization with history.

Each loading step prescribes a rod-line displacement and alternates
between two convex subproblems until neither field moves the other:

* a linear displacement solve at frozen damage, which a single Newton
  iteration closes exactly (asserted against the pre-solve residual);
* a bound-constrained damage solve driven by the history field, the
  running maximum of the undegraded strain energy density, with the
  previous damage as lower bound and the pinned rod-line zones held
  at zero.

Convergence is judged at the start of each alternation: the
displacement residual under the newest damage, relative to the
reaction-force scale, and the projected optimality residual of the
damage solve, relative to its driving term, must both drop below the
staggered tolerance. Steps that fail to converge are retried through
recursive bisection of the load increment; the run stops early once
the reaction force has collapsed below a set fraction of its running
peak for several steps in a row.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import (
    AssemblyContext,
    damage_system,
    elastic_energy,
    energy_density,
    make_context,
    stiffness_matrix,
    surface_energy,
)
from .curves import LoadDeflectionCurve
from .linsys import DirichletSet, solve_box_constrained, solve_dirichlet
from .mesh import SpecimenMesh
from .phasefield import PhaseFieldLaw


class StaggerDivergenceError(RuntimeError):
    """Raised when the staggered loop exhausts its iteration budget."""

    def __init__(self, target: float, iterations: int, u_residual: float,
                 d_residual: float):
        super().__init__(
            f"staggered loop did not converge at u_bar={target:g} after "
            f"{iterations} alternations (u residual {u_residual:.3e}, "
            f"damage residual {d_residual:.3e})"
        )
        self.target = target
        self.iterations = iterations


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances and controls of the staggered driver."""

    stagger_tol: float = 1e-3
    newton_tol: float = 1e-6
    max_stagger: int = 400
    residual_floor: float = 1e-14
    max_bisections: int = 4
    drop_fraction: float = 0.05
    drop_steps: int = 3
    linear_method: str = "auto"

    def __post_init__(self):
        if not 0.0 < self.stagger_tol < 1.0:
            raise ValueError("stagger_tol must be in (0, 1)")
        if not 0.0 < self.newton_tol < 1.0:
            raise ValueError("newton_tol must be in (0, 1)")
        if self.max_stagger < 1:
            raise ValueError("max_stagger must be at least 1")
        if self.max_bisections < 0:
            raise ValueError("max_bisections must be non-negative")
        if not 0.0 < self.drop_fraction < 1.0:
            raise ValueError("drop_fraction must be in (0, 1)")
        if self.drop_steps < 1:
            raise ValueError("drop_steps must be at least 1")


@dataclass
class SimState:
    """Mutable fields carried between loading steps."""

    u: np.ndarray
    d: np.ndarray
    history: np.ndarray
    u_bar: float = 0.0

    def copy(self) -> "SimState":
        return SimState(self.u.copy(), self.d.copy(), self.history.copy(),
                        self.u_bar)


@dataclass(frozen=True)
class StepRecord:
    """Converged state summary of one loading step."""

    u_bar: float
    force: float
    iterations: int
    elastic_energy: float
    dissipated_energy: float
    max_damage: float
    bisection_depth: int = 0


@dataclass(frozen=True)
class SimulationResult:
    """Full history of a displacement-driven run."""

    steps: tuple[StepRecord, ...]
    state: SimState
    snapshots: tuple[tuple[float, np.ndarray, np.ndarray], ...] = ()
    terminated_early: bool = False

    @property
    def curve(self) -> LoadDeflectionCurve:
        u = np.array([s.u_bar for s in self.steps])
        f = np.array([s.force for s in self.steps])
        return LoadDeflectionCurve(u, f)

    @property
    def peak_force(self) -> float:
        return max(s.force for s in self.steps)


def uniform_schedule(u_max: float, n_steps: int) -> np.ndarray:
    """Evenly spaced displacement targets ending at u_max."""
    if u_max <= 0.0 or n_steps < 1:
        raise ValueError("u_max must be positive and n_steps at least 1")
    return np.linspace(u_max / n_steps, u_max, n_steps)


def reaction_force(k_mat, u: np.ndarray, nodes: np.ndarray, component: int,
                   dim: int) -> float:
    """Sum of nodal residual forces on one component of a node set."""
    r = k_mat @ u
    dofs = np.asarray(nodes, dtype=np.int64) * dim + component
    return float(r[dofs].sum())


class StaggeredSolver:
    """Displacement-driven staggered solver on one specimen mesh."""

    def __init__(self, mesh: SpecimenMesh, c_matrix: np.ndarray,
                 law: PhaseFieldLaw, settings: SolverSettings | None = None,
                 element_scale: np.ndarray | None = None):
        self.mesh = mesh
        self.c_matrix = np.asarray(c_matrix, dtype=float)
        n_strain = {1: 1, 2: 3, 3: 6}[mesh.dim]
        if self.c_matrix.shape != (n_strain, n_strain):
            raise ValueError(
                f"stiffness matrix must be {n_strain}x{n_strain} for a "
                f"{mesh.dim}D mesh"
            )
        if element_scale is not None:
            element_scale = np.asarray(element_scale, dtype=float)
            if element_scale.shape != (mesh.n_elements,):
                raise ValueError("element_scale must hold one factor per element")
            if np.any(element_scale <= 0.0):
                raise ValueError("element_scale factors must be positive")
        self.element_scale = element_scale
        self.law = law
        self.settings = settings or SolverSettings()
        self.ctx: AssemblyContext = make_context(mesh)
        if not mesh.support_nodes or mesh.load_nodes.size == 0:
            raise ValueError("mesh carries no support or loading lines")
        self._load_sign = 1.0 if mesh.dim == 1 else -1.0
        self._fixed_dofs, self._load_dofs = self._constraint_layout()
        self._bc_dofs = np.concatenate([self._fixed_dofs, self._load_dofs])
        self._free_mask = np.ones(self.ctx.n_dof, dtype=bool)
        self._free_mask[self._bc_dofs] = False
        # the stiffness depends on state only through damage, so both the
        # matrix and its reduced factorization are reused while d is unchanged
        self._k_cache: tuple[np.ndarray, object] | None = None
        self._k_factor: tuple[object, object] | None = None

    # -- boundary conditions -------------------------------------------------

    def _constraint_layout(self) -> tuple[np.ndarray, np.ndarray]:
        dim = self.mesh.dim
        comp = dim - 1
        fixed: list[int] = []
        for line in self.mesh.support_nodes:
            fixed.extend(int(n) * dim + comp for n in line)
        if dim >= 2:
            anchor_line = self.mesh.support_nodes[0]
            order = np.argsort(self.mesh.nodes[anchor_line, -2], kind="stable") \
                if dim == 3 else np.arange(len(anchor_line))
            first = int(anchor_line[order[0]])
            fixed.append(first * dim + 0)
            if dim == 3:
                last = int(anchor_line[order[-1]])
                if last != first:
                    fixed.append(last * dim + 0)
                fixed.append(first * dim + 1)
        load_dofs = self.mesh.load_nodes.astype(np.int64) * dim + comp
        return np.array(sorted(set(fixed)), dtype=np.int64), load_dofs

    def boundary_condition(self, u_bar: float) -> DirichletSet:
        dofs = np.concatenate([self._fixed_dofs, self._load_dofs])
        values = np.concatenate([
            np.zeros(len(self._fixed_dofs)),
            np.full(len(self._load_dofs), self._load_sign * u_bar),
        ])
        return DirichletSet(dofs, values)

    # -- damage bounds -------------------------------------------------------

    def _damage_bounds(self, d_floor: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lower = np.maximum(d_floor, 0.0)
        upper = np.ones(self.mesh.n_nodes)
        pinned = self.mesh.pinned_nodes
        if pinned.size:
            lower = lower.copy()
            lower[pinned] = 0.0
            upper[pinned] = 0.0
        return lower, upper

    # -- single loading step -------------------------------------------------

    def initial_state(self) -> SimState:
        return SimState(
            u=np.zeros(self.ctx.n_dof),
            d=np.zeros(self.mesh.n_nodes),
            history=np.zeros((self.mesh.n_elements, self.ctx.n_gauss)),
        )

    def _stiffness(self, d: np.ndarray):
        cached = self._k_cache
        if cached is not None and np.array_equal(cached[0], d):
            return cached[1]
        k_mat = stiffness_matrix(self.ctx, self.c_matrix, d, self.law.g0,
                                 self.element_scale)
        self._k_cache = (d.copy(), k_mat)
        return k_mat

    def step(self, state: SimState, u_bar: float) -> tuple[SimState, StepRecord]:
        """Advance to one displacement target; the input state is untouched."""
        s = self.settings
        work = state.copy()
        bc = self.boundary_condition(u_bar)
        free_mask = self._free_mask

        alternations = 0
        d_rel = 0.0
        u_rel = np.inf
        d_dirty = True
        u_fresh = False
        k_mat = None
        while True:
            if d_dirty:
                k_mat = self._stiffness(work.d)
                d_dirty = False
                u_fresh = False
            if alternations >= 1:
                r = k_mat @ work.u
                norm_free = float(np.max(np.abs(r[free_mask]), initial=0.0))
                norm_reac = float(np.max(np.abs(r[bc.dofs]), initial=0.0))
                u_rel = norm_free / max(norm_reac, s.residual_floor)
                if norm_free <= s.residual_floor or u_rel <= s.stagger_tol:
                    if d_rel <= s.stagger_tol:
                        if not u_fresh:
                            # close the step on the final damage state so
                            # reactions balance to solver precision
                            work.u = self._newton_solve(k_mat, bc, work.u)
                        break
            if alternations >= s.max_stagger:
                raise StaggerDivergenceError(u_bar, alternations, u_rel, d_rel)
            work.u = self._newton_solve(k_mat, bc, work.u)
            u_fresh = True
            np.maximum(work.history,
                       energy_density(self.ctx, work.u, self.c_matrix,
                                      self.element_scale),
                       out=work.history)
            d_prev = work.d
            work.d, d_rel = self._damage_solve(work.history, d_prev)
            d_dirty = bool(np.any(work.d != d_prev))
            alternations += 1

        work.u_bar = u_bar
        force = self._load_sign * float((k_mat @ work.u)[self._load_dofs].sum())
        record = StepRecord(
            u_bar=u_bar,
            force=force,
            iterations=alternations,
            elastic_energy=elastic_energy(self.ctx, work.u, self.c_matrix,
                                          work.d, self.law.g0,
                                          self.element_scale),
            dissipated_energy=surface_energy(self.ctx, work.d, self.law),
            max_damage=float(work.d.max(initial=0.0)),
        )
        return work, record

    def _solve_free(self, key, a_ff, rhs_f: np.ndarray,
                    x0_f: np.ndarray) -> np.ndarray:
        """Solve the free-dof displacement system for one stiffness matrix.

        The factorization of an earlier stiffness stays in use as a
        preconditioner: damage usually moves little between
        alternations, so a few conjugate-gradient iterations absorb
        the difference. The system is refactored outright once the
        iteration count betrays a stale factor.
        """
        cached = self._k_factor
        if cached is not None:
            ref_key, lu = cached
            if ref_key is key:
                return lu.solve(rhs_f)
            counter = {"n": 0}

            def count(_):
                counter["n"] += 1

            precond = spla.LinearOperator(a_ff.shape, matvec=lu.solve)
            norm = np.linalg.norm(rhs_f)
            x_f, info = spla.cg(a_ff, rhs_f, x0=x0_f, M=precond, rtol=1e-13,
                                atol=1e-13 * max(norm, 1e-30), maxiter=40,
                                callback=count)
            if info == 0 and counter["n"] <= 25:
                return x_f
        lu = spla.splu(a_ff.tocsc(), permc_spec="MMD_AT_PLUS_A")
        self._k_factor = (key, lu)
        return lu.solve(rhs_f)

    def _newton_solve(self, k_mat, bc: DirichletSet, u_start: np.ndarray) -> np.ndarray:
        s = self.settings
        u_init = u_start.copy()
        u_init[bc.dofs] = bc.values
        free = self._free_mask
        r0 = float(np.max(np.abs((k_mat @ u_init)[free]), initial=0.0))
        if s.linear_method == "cg":
            u = solve_dirichlet(k_mat, np.zeros(len(u_init)), bc,
                                method="cg", x0=u_init)
        else:
            try:
                reduced = k_mat.tocsr()[free]
                rhs_f = -(reduced[:, self._bc_dofs] @ bc.values)
                u = np.zeros(len(u_init))
                u[bc.dofs] = bc.values
                u[free] = self._solve_free(k_mat, reduced[:, free], rhs_f,
                                           u_init[free])
            except MemoryError:
                u = solve_dirichlet(k_mat, np.zeros(len(u_init)), bc,
                                    method="auto", x0=u_init)
        r1 = float(np.max(np.abs((k_mat @ u)[free]), initial=0.0))
        # noise floor of the inner linear solve: its stopping rule is
        # relative to the boundary forcing, whose 2-norm scale is
        # |K| * |u| * sqrt(#prescribed dofs); anything this small is
        # orders below every physical residual the stagger loop weighs
        floor = (100.0 * s.residual_floor
                 * float(np.abs(k_mat.diagonal()).max())
                 * max(float(np.max(np.abs(u), initial=0.0)), 1e-30)
                 * np.sqrt(len(bc.dofs)))
        if r1 > max(s.newton_tol * r0, floor):
            raise RuntimeError(
                "displacement solve left a residual a single Newton iteration "
                f"should have closed ({r1:.3e} vs initial {r0:.3e})"
            )
        return u

    def _damage_solve(self, history: np.ndarray,
                      d_floor: np.ndarray) -> tuple[np.ndarray, float]:
        a_mat, b = damage_system(self.ctx, history, self.law)
        lower, upper = self._damage_bounds(d_floor)
        d, info = solve_box_constrained(a_mat, b, lower, upper, x0=d_floor,
                                        method=self.settings.linear_method)
        scale = max(float(np.max(np.abs(b), initial=0.0)),
                    self.settings.residual_floor)
        return d, info.projected_residual / scale

    # -- load stepping -------------------------------------------------------

    def run(self, schedule: np.ndarray, snapshot_at=(),
            initial: SimState | None = None) -> SimulationResult:
        """Walk a strictly increasing displacement schedule.

        ``snapshot_at`` lists scheduled targets whose converged fields
        are kept; the final state is always retained.
        """
        schedule = np.asarray(schedule, dtype=float)
        if schedule.ndim != 1 or len(schedule) == 0:
            raise ValueError("schedule must be a non-empty 1-d array")
        if np.any(schedule <= 0.0) or np.any(np.diff(schedule) <= 0.0):
            raise ValueError("schedule must be strictly increasing and positive")
        snapshot_at = np.asarray(list(snapshot_at), dtype=float)

        s = self.settings
        state = initial.copy() if initial is not None else self.initial_state()
        records: list[StepRecord] = []
        snaps: list[tuple[float, np.ndarray, np.ndarray]] = []
        peak = 0.0
        drops = 0
        terminated = False
        prev = state.u_bar
        for target in schedule:
            if target <= prev:
                continue
            state, recs = self._advance(state, prev, float(target), 0)
            for rec in recs:
                records.append(rec)
                peak = max(peak, rec.force)
                if rec.force < s.drop_fraction * peak:
                    drops += 1
                else:
                    drops = 0
                if drops >= s.drop_steps:
                    terminated = True
                    break
            if snapshot_at.size and np.any(np.isclose(snapshot_at, target,
                                                      rtol=1e-9, atol=1e-12)):
                snaps.append((float(target), state.u.copy(), state.d.copy()))
            if terminated:
                break
            prev = float(target)
        return SimulationResult(
            steps=tuple(records),
            state=state,
            snapshots=tuple(snaps),
            terminated_early=terminated,
        )

    def _advance(self, state: SimState, u_from: float, u_to: float,
                 depth: int) -> tuple[SimState, list[StepRecord]]:
        try:
            new_state, rec = self.step(state, u_to)
            if depth:
                rec = replace(rec, bisection_depth=depth)
            return new_state, [rec]
        except StaggerDivergenceError:
            if depth >= self.settings.max_bisections:
                raise
            mid = (u_from + u_to) / 2.0
            state, recs = self._advance(state, u_from, mid, depth + 1)
            state, tail = self._advance(state, mid, u_to, depth + 1)
            return state, recs + tail


def solve_damage_profile(ctx: AssemblyContext, law: PhaseFieldLaw,
                         history: np.ndarray | None = None,
                         pin_nodes=(), pin_value: float = 1.0,
                         method: str = "auto") -> np.ndarray:
    """Stationary damage field for a frozen driving field.

    Solves the bound-constrained damage problem once, with selected
    nodes pinned to a fixed value; with zero history and a single
    pinned node this yields the optimal localized profile of the
    chosen regularization.
    """
    if history is None:
        history = np.zeros((ctx.mesh.n_elements, ctx.n_gauss))
    a_mat, b = damage_system(ctx, history, law)
    lower = np.zeros(ctx.mesh.n_nodes)
    upper = np.ones(ctx.mesh.n_nodes)
    pins = np.asarray(list(pin_nodes), dtype=np.int64)
    if pins.size:
        lower[pins] = pin_value
        upper[pins] = pin_value
    d, _ = solve_box_constrained(a_mat, b, lower, upper, method=method)
    return d
