"""Matrix-free eigenvalue drivers over the filtered wave-solve operator.

The operator is symmetric (in the trapezoid inner product carried by the
operator's ``weights``), its spectrum lives in [-1/2, 1], and the eigenpairs
of interest are the ones of largest magnitude.  Three drivers are provided:

* :func:`power_iteration` for the single dominant pair,
* :func:`simultaneous_iteration`, a block power method with Rayleigh-Ritz
  extraction, mainly used to study convergence rates,
* :func:`implicit_restart_solve`, a restarted Arnoldi method with exact
  shifts and locking of converged pairs, the production driver.

All of them recover the Laplacian eigenvalue of each converged vector through
the Rayleigh quotient in :func:`rayleigh_lambda`; the operator's own
eigenvalue (a filter value) is not invertible back to a frequency.

Starting vectors come from a tiny counter-based 64-bit generator so that runs
are reproducible bit-for-bit from an integer seed, independent of numpy's
global state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConvergenceError, InvariantError

_EPS = np.finfo(float).eps

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


class SplitMix64:
    """Counter-based splitmix64 stream; state advances by a fixed increment."""

    def __init__(self, seed):
        self.seed = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
        self.counter = 0

    def uniform(self, n):
        """n doubles uniform in (-1, 1)."""
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = self.seed + idx * _GAMMA
            z = (z ^ (z >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
            z = z ^ (z >> np.uint64(31))
        u = (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        return 2.0 * u - 1.0


def small_symmetric_eig(a, tol=1e-8):
    """All eigenpairs of a dense symmetric matrix, ascending.

    Rejects matrices whose asymmetry exceeds ``tol`` relative to their norm,
    then diagonalizes the symmetrized matrix.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    scale = np.max(np.abs(a))
    if scale > 0 and np.max(np.abs(a - a.T)) > tol * scale:
        raise ValueError("matrix is not symmetric to the requested tolerance")
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    return w, v


def rayleigh_lambda(lap, phi):
    """Laplacian frequency of a vector: lambda = sqrt(-<phi, L phi>/<phi, phi>).

    Plain unweighted sums over active points; exact for eigenvectors.  A
    clearly positive quotient (the operator is negative semi-definite) means
    the vector is not physical and raises ValueError.
    """
    phi = np.asarray(phi, dtype=float)
    den = float(phi @ phi)
    if den == 0.0:
        raise ValueError("cannot take a Rayleigh quotient of the zero vector")
    lphi = lap.apply_packed(phi)
    lam2 = -float(phi @ lphi) / den
    if lam2 < 0.0:
        floor = 1e-10 * float(np.linalg.norm(lphi)) / np.sqrt(den)
        if -lam2 > max(floor, 1e-30):
            raise ValueError(f"negative radicand {lam2:.3e}: vector is not an "
                             f"approximate eigenvector of the operator")
        lam2 = 0.0
    return float(np.sqrt(lam2))


@dataclass
class PowerResult:
    beta: float
    vector: np.ndarray
    lam: float
    iterations: int
    history: list


def power_iteration(op, v0, tol=1e-12, max_iters=300, lap=None):
    """Dominant eigenpair of the operator by plain power iteration.

    The eigenvalue estimate is the Rayleigh quotient of the operator at the
    current unit iterate.  Stops when the estimate is stationary to ``tol``
    relative, or immediately when the fixed-point residual already meets it.
    """
    lap = lap if lap is not None else op.lap
    w_ip = op.weights

    def wdot(u, v):
        return float(u @ (w_ip * v))

    v = np.asarray(v0, dtype=float)
    nv = np.sqrt(wdot(v, v))
    if nv == 0.0:
        raise ValueError("starting vector must be nonzero")
    v = v / nv
    history = []
    beta_old = None
    for k in range(1, max_iters + 1):
        w = op.apply(v)
        beta = wdot(w, v)
        history.append(beta)
        res = np.sqrt(max(wdot(w - beta * v, w - beta * v), 0.0))
        nw = np.sqrt(wdot(w, w))
        converged = res <= tol * max(abs(beta), _EPS)
        if beta_old is not None and abs(beta - beta_old) <= tol * abs(beta):
            converged = True
        if converged:
            phi = v if nw == 0.0 else w / nw
            return PowerResult(beta, phi, rayleigh_lambda(lap, phi), k, history)
        if nw == 0.0:
            raise ConvergenceError("operator annihilated the iterate", history=history)
        v = w / nw
        beta_old = beta
    raise ConvergenceError(
        f"power iteration did not converge in {max_iters} sweeps; the two "
        f"leading filter values may be (near-)degenerate", history=history)


@dataclass
class EigenSolveResult:
    """Converged eigenpairs, sorted by descending |beta|."""

    betas: np.ndarray
    vectors: np.ndarray          # one column per pair, unit norm
    lambdas: np.ndarray
    residuals: np.ndarray        # fresh-application residuals of the S-problem
    n_converged: int
    converged: bool              # all requested pairs found
    counters: dict
    diagnostics: dict = field(default_factory=dict)


@dataclass
class ArnoldiFactorization:
    """S V_m = V_m H_m + f e_m^T with orthonormal columns V_m.

    ``h`` is allocated (m_max+1) x m_max; the square part h[:m, :m] is the
    projected matrix (numerically symmetric tridiagonal since the operator is
    symmetric) and h[m, m-1] duplicates the residual norm once the next vector
    is formed.
    """

    v: np.ndarray
    h: np.ndarray
    f: np.ndarray
    m: int

    @property
    def h_square(self):
        return self.h[:self.m, :self.m]


def _make_wdot(weights):
    if weights is None:
        return lambda u, v: float(u @ v)
    return lambda u, v: float(u @ (weights * v))


def _deflate(w, locked, weights):
    """Project ``w`` against the locked orthonormal set (twice, for safety)."""
    if locked is None or locked.shape[1] == 0:
        return w
    wy = locked.T @ (weights * w) if weights is not None else locked.T @ w
    w = w - locked @ wy
    wy = locked.T @ (weights * w) if weights is not None else locked.T @ w
    return w - locked @ wy


def arnoldi_expand(fact, op, to_size, locked=None, start=None,
                   breakdown_tol=1e-14):
    """Grow the factorization to ``to_size`` columns.

    Each new direction is one operator application followed by modified
    Gram-Schmidt against the basis plus one full re-orthogonalization pass;
    locked vectors are projected out of every product.  Returns
    ``(fact, lucky)`` where ``lucky`` reports a breakdown: the residual
    vanished, so the current basis spans an exact invariant subspace.
    """
    wdot = _make_wdot(op.weights)
    while fact.m < to_size:
        j = fact.m
        if j == 0:
            if start is None:
                raise ConfigError("empty factorization needs a start vector")
            vec = _deflate(start.astype(float, copy=True), locked, op.weights)
            norm = np.sqrt(wdot(vec, vec))
            if norm <= breakdown_tol:
                raise ConfigError("start vector lies in the locked subspace")
            vec /= norm
        else:
            norm = np.sqrt(wdot(fact.f, fact.f))
            if norm <= breakdown_tol:
                return fact, True
            fact.h[j, j - 1] = norm
            vec = fact.f / norm
        fact.v[:, j] = vec
        w = op.apply(vec)
        w = _deflate(w, locked, op.weights)
        basis = fact.v[:, :j + 1]
        for i in range(j + 1):
            hij = wdot(basis[:, i], w)
            w -= hij * basis[:, i]
            fact.h[i, j] += hij
        for i in range(j + 1):          # one full re-orthogonalization pass
            corr = wdot(basis[:, i], w)
            w -= corr * basis[:, i]
            fact.h[i, j] += corr
        fact.f = w
        fact.m = j + 1
    return fact, False


def _check_symmetry(h, m, solver_tol):
    """Guard: the projected matrix must be symmetric up to the solve noise."""
    hm = h[:m, :m]
    scale = np.max(np.abs(hm))
    if scale == 0.0:
        return 0.0
    asym = np.max(np.abs(hm - hm.T))
    allowed = scale * max(1e-8, 20.0 * solver_tol)
    if asym > allowed:
        raise InvariantError(
            f"projected matrix asymmetry {asym:.3e} exceeds {allowed:.3e}; "
            f"the operator is not behaving symmetrically")
    return asym


def _ritz(fact):
    """Ritz pairs of the symmetrized projection, sorted by descending |theta|."""
    hs = 0.5 * (fact.h_square + fact.h_square.T)
    theta, y = np.linalg.eigh(hs)
    order = np.argsort(-np.abs(theta), kind="stable")
    return theta[order], y[:, order]


def _wanted_cut(theta, n_wanted, cluster_rtol=1e-8):
    """Partition size that does not split a degenerate magnitude cluster."""
    m = len(theta)
    k = min(n_wanted, m - 1)
    while 0 < k < m:
        gap = abs(abs(theta[k - 1]) - abs(theta[k]))
        if gap > cluster_rtol * max(abs(theta[k - 1]), _EPS):
            break
        k += 1
    return min(k, m - 1) if m > 1 else 1


def _givens(x, z):
    r = np.hypot(x, z)
    if r == 0.0:
        return 1.0, 0.0
    return x / r, z / r


def _apply_shift(t, q, mu):
    """One implicitly shifted symmetric QR step on a tridiagonal, in place.

    ``t`` is stored densely but kept numerically tridiagonal: the bulge
    created at the top of each unreduced block is chased out with local
    Givens rotations, so no off-tridiagonal fill survives truncation later.
    Negligible off-diagonals split the matrix into blocks and the shift is
    applied to each block, which is what keeps exact shifts stable after
    earlier deflations.  Rotations accumulate into ``q``.
    """
    m = t.shape[0]
    starts = [0]
    for i in range(m - 1):
        if abs(t[i + 1, i]) <= _EPS * (abs(t[i, i]) + abs(t[i + 1, i + 1])):
            t[i + 1, i] = t[i, i + 1] = 0.0
            starts.append(i + 1)
    starts.append(m)
    for b in range(len(starts) - 1):
        lo, hi = starts[b], starts[b + 1]
        if hi - lo < 2:
            continue
        x = t[lo, lo] - mu
        z = t[lo + 1, lo]
        for i in range(lo, hi - 1):
            c, s = _givens(x, z)
            rot = np.array([[c, -s], [s, c]])
            rows = [i, i + 1]
            t[rows, :] = rot.T @ t[rows, :]
            t[:, rows] = t[:, rows] @ rot
            q[:, rows] = q[:, rows] @ rot
            if i < hi - 2:
                x = t[i + 1, i]
                z = t[i + 2, i]
    # the chase keeps fill at roundoff; restore exact symmetry
    t[...] = 0.5 * (t + t.T)


def implicit_restart_solve(op, n_requested, n_max=None, tol=1e-12,
                           max_restarts=120, seed=12345, lap=None,
                           stall_cycles=4, verify=False):
    """Restarted Arnoldi with exact shifts for the largest-|beta| eigenpairs.

    The factorization is expanded to ``n_max`` columns, the Ritz values of the
    projected matrix are split into a wanted set (largest magnitude, never
    splitting a degenerate cluster) and shifts, the shifts are applied as
    implicitly shifted QR steps, and the factorization is contracted back to
    the wanted size.  A wanted pair counts as converged when the classical
    bound ``|f| |e_m^T y| <= tol * max(|theta|, eps)`` holds.

    Converged pairs are locked: once progress stalls (or everything wanted has
    converged), they are moved to a deflation basis that every subsequent
    operator product is orthogonalized against, and the process restarts on
    the remaining wanted count from a fresh seeded vector.  The lock-and-
    restart pass is what recovers the extra copies of multiple eigenvalues,
    which a single Krylov sequence only reaches through rounding noise.

    Returns every converged pair found (possibly more than requested), with
    the recurrence residual estimates; ``verify=True`` replaces them with
    fresh operator applications (one extra wave solve per pair) and drops
    pairs that fail.  If the restart budget runs out a ConvergenceError is
    raised carrying the partial result.
    """
    if n_requested < 1:
        raise ConfigError(f"n_requested must be >= 1, got {n_requested}")
    n = op.n
    if n_max is None:
        n_max = 2 * n_requested + 1
    n_max = min(n_max, n)
    if n_max < n_requested + 1:
        raise ConfigError(f"n_max={n_max} must exceed n_requested={n_requested}")
    lap = lap if lap is not None else op.lap
    solver_tol = getattr(op.solver_spec, "tol", 1e-13)
    inner_tol = 0.1 * tol
    rng = SplitMix64(seed)
    wdot = _make_wdot(op.weights)

    locked_x = np.zeros((n, 0))
    locked_beta = []
    locked_res = []
    restarts_used = 0
    phases = 0
    noise_floor = 0.0
    diagnostics = {"restart_cycles": 0, "phases": 0, "locked_events": 0,
                   "dropped": 0}

    def lock(pairs):
        nonlocal locked_x
        for beta_val, x, est in pairs:
            x = _deflate(x.copy(), locked_x, op.weights)
            norm = np.sqrt(wdot(x, x))
            if norm < 1e-8:       # already represented in the locked basis
                continue
            x /= norm
            locked_x = np.hstack([locked_x, x[:, None]])
            locked_beta.append(beta_val)
            locked_res.append(est)
        diagnostics["locked_events"] += 1

    budget_left = True
    while budget_left:
        want = n_requested - locked_x.shape[1]
        if want <= 0:
            break
        if phases > 0:
            # a reseeded phase costs one unit of the restart budget
            restarts_used += 1
            if restarts_used > max_restarts:
                break
        phases += 1
        # the subspace keeps its full size in every phase: a shrunken basis
        # cripples the restart polynomial exactly when the stragglers
        # (typically extra copies of multiple eigenvalues) need it most
        na = min(n_max, n - locked_x.shape[1])
        if na < 2:
            break
        fact = ArnoldiFactorization(np.zeros((n, n_max)),
                                    np.zeros((n_max + 1, n_max)),
                                    np.zeros(n), 0)
        start = rng.uniform(n)
        fact, lucky = arnoldi_expand(fact, op, na, locked=locked_x, start=start)
        prev_worst = np.inf
        stalled = 0
        while True:
            noise_floor = max(noise_floor,
                              _check_symmetry(fact.h, fact.m, solver_tol))
            theta, y = _ritz(fact)
            fnorm = np.sqrt(max(wdot(fact.f, fact.f), 0.0))
            res_est = fnorm * np.abs(y[fact.m - 1, :])
            eff_tol = max(inner_tol, 2.0 * noise_floor)
            conv = res_est <= eff_tol * np.maximum(np.abs(theta), _EPS)
            cut = (_wanted_cut(theta, min(n_requested, fact.m - 1))
                   if not lucky else fact.m)
            n_conv_wanted = int(np.count_nonzero(conv[:cut])) if not lucky else cut
            if lucky or n_conv_wanted >= min(want, cut):
                # everything wanted in this phase converged: lock and move on
                take = np.nonzero(conv)[0] if not lucky else np.arange(fact.m)
                pairs = [(theta[i], fact.v[:, :fact.m] @ y[:, i], res_est[i])
                         for i in take]
                lock(pairs)
                break
            # progress check: the worst unconverged wanted residual must keep
            # shrinking cycle over cycle; even slow geometric decay counts.
            # It jumps when a hidden copy of a multiple eigenvalue surfaces,
            # which costs a grace cycle before the decay resumes.
            worst = float(np.max(res_est[:cut][~conv[:cut]]))
            if worst <= 0.999 * prev_worst:
                stalled = 0
            else:
                stalled += 1
            prev_worst = min(prev_worst, worst) if worst <= prev_worst else worst
            if stalled >= stall_cycles or restarts_used >= max_restarts:
                # lock what has converged, then either reseed in a new phase
                # or stop because the restart budget ran out
                take = np.nonzero(conv)[0]
                pairs = [(theta[i], fact.v[:, :fact.m] @ y[:, i], res_est[i])
                         for i in take]
                if pairs:
                    lock(pairs)
                if restarts_used >= max_restarts:
                    budget_left = False
                break
            restarts_used += 1
            diagnostics["restart_cycles"] += 1
            # exact shifts: the unwanted Ritz values
            shifts = theta[cut:]
            hs = 0.5 * (fact.h_square + fact.h_square.T)
            q = np.eye(fact.m)
            for mu in shifts:
                _apply_shift(hs, q, mu)
            k = cut
            beta_k = hs[k, k - 1] if k < fact.m else 0.0
            sigma_k = q[fact.m - 1, k - 1]
            vq = fact.v[:, :fact.m] @ q[:, :k + 1]
            f_new = (vq[:, k] * beta_k if k < fact.m else np.zeros(n)) \
                + fact.f * sigma_k
            fact.v[:, :k] = vq[:, :k]
            fact.v[:, k:] = 0.0
            fact.h[...] = 0.0
            fact.h[:k, :k] = hs[:k, :k]
            fact.f = f_new
            fact.m = k
            fact, lucky = arnoldi_expand(fact, op, na, locked=locked_x)

    diagnostics["phases"] = phases
    diagnostics["noise_floor"] = noise_floor

    if locked_x.shape[1] and noise_floor > 1000.0 * tol:
        # the solve noise dominates the requested tolerance by orders: one
        # Rayleigh-Ritz pass over the converged span re-mixes the vectors to
        # the accuracy the perturbed operator actually supports (one product
        # per pair); below that the recurrence vectors are already saturated
        x_all = locked_x
        sx = np.column_stack([op.apply(x_all[:, j])
                              for j in range(x_all.shape[1])])
        w_ip = op.weights
        proj = x_all.T @ (w_ip[:, None] * sx) if w_ip is not None else x_all.T @ sx
        theta_r, c_r = np.linalg.eigh(0.5 * (proj + proj.T))
        order_r = np.argsort(-np.abs(theta_r))
        theta_r, c_r = theta_r[order_r], c_r[:, order_r]
        locked_x = x_all @ c_r
        locked_beta = list(theta_r)
        residual_mat = sx @ c_r - locked_x * theta_r
        locked_res = [np.sqrt(max(wdot(residual_mat[:, j], residual_mat[:, j]),
                                  0.0))
                      for j in range(locked_x.shape[1])]
        diagnostics["refined"] = True

    # assemble and sort by |beta| descending; residuals are the recurrence
    # estimates unless a fresh verification pass is requested
    betas, vecs, lams, resids = [], [], [], []
    keep_tol = max(tol, 5.0 * noise_floor)
    for i in range(locked_x.shape[1]):
        x = locked_x[:, i]
        beta_val = locked_beta[i]
        res = locked_res[i]
        if verify:
            sx = op.apply(x)
            beta_val = wdot(sx, x) / wdot(x, x)
            r = sx - beta_val * x
            res = np.sqrt(max(wdot(r, r), 0.0))
            if res > keep_tol * max(abs(beta_val), 1.0):
                diagnostics["dropped"] += 1
                continue
        betas.append(beta_val)
        vecs.append(x)
        lams.append(rayleigh_lambda(lap, x))
        resids.append(res)
    order = np.argsort(-np.abs(np.asarray(betas))) if betas else []
    betas = np.asarray(betas)[order]
    vectors = (np.stack(vecs, axis=1)[:, order] if len(vecs)
               else np.zeros((n, 0)))
    lams = np.asarray(lams)[order]
    resids = np.asarray(resids)[order]
    result = EigenSolveResult(betas, vectors, lams, resids,
                              n_converged=len(betas),
                              converged=len(betas) >= n_requested,
                              counters=op.counters(), diagnostics=diagnostics)
    if not result.converged:
        raise ConvergenceError(
            f"restarted Arnoldi found {result.n_converged} of "
            f"{n_requested} requested pairs within {max_restarts} restarts",
            partial=result)
    return result


def simultaneous_iteration(op, n_block, n_requested, tol=1e-10,
                           max_sweeps=200, seed=12345, lap=None, verify=False,
                           start_block=None):
    """Block power method with Rayleigh-Ritz extraction.

    Applies the operator to an orthonormal block of ``n_block`` columns each
    sweep, projects onto the block (a small symmetric eigenproblem), and
    converges the ``n_requested`` Ritz pairs of largest magnitude by their
    operator residual.  Columns that collapse during re-orthonormalization are
    reseeded from the deterministic generator and counted.  ``start_block``
    overrides the seeded random initial block.

    Diagnostics include the per-sweep residual history of the leading
    ``n_requested`` pairs, which the convergence-rate studies consume.
    """
    if n_block < n_requested:
        raise ConfigError(f"block size {n_block} is smaller than the "
                          f"requested count {n_requested}")
    n = op.n
    n_block = min(n_block, n)
    lap = lap if lap is not None else op.lap
    rng = SplitMix64(seed)
    wdot = _make_wdot(op.weights)
    solver_tol = getattr(op.solver_spec, "tol", 1e-13)
    reseeds = 0
    history = []

    def orthonormalize(block):
        nonlocal reseeds
        q = block.copy()
        for j in range(q.shape[1]):
            for _ in range(2):
                for i in range(j):
                    q[:, j] -= wdot(q[:, i], q[:, j]) * q[:, i]
            norm = np.sqrt(wdot(q[:, j], q[:, j]))
            if norm <= 1e-12:
                q[:, j] = rng.uniform(n)
                reseeds += 1
                for _ in range(2):
                    for i in range(j):
                        q[:, j] -= wdot(q[:, i], q[:, j]) * q[:, i]
                norm = np.sqrt(wdot(q[:, j], q[:, j]))
            q[:, j] /= norm
        return q

    if start_block is None:
        start_block = rng.uniform(n * n_block).reshape(n, n_block, order="F")
    elif start_block.shape != (n, n_block):
        raise ConfigError(f"start block must have shape {(n, n_block)}")
    q = orthonormalize(start_block)
    noise_floor = 0.0
    for sweep in range(1, max_sweeps + 1):
        sq = np.column_stack([op.apply(q[:, j]) for j in range(n_block)])
        w = op.weights
        proj = q.T @ (w[:, None] * sq) if w is not None else q.T @ sq
        scale = max(np.max(np.abs(proj)), _EPS)
        asym = np.max(np.abs(proj - proj.T))
        if asym > scale * max(1e-8, 20.0 * solver_tol):
            raise InvariantError(f"block projection asymmetry {asym:.3e} too large")
        noise_floor = max(noise_floor, asym)
        theta, c = np.linalg.eigh(0.5 * (proj + proj.T))
        order = np.argsort(-np.abs(theta))
        theta, c = theta[order], c[:, order]
        ritz = q @ c
        sritz = sq @ c
        resid = np.array([np.sqrt(max(wdot(sritz[:, j] - theta[j] * ritz[:, j],
                                           sritz[:, j] - theta[j] * ritz[:, j]), 0.0))
                          for j in range(n_requested)])
        history.append(resid)
        eff_tol = max(tol, 2.0 * noise_floor)
        if np.all(resid <= eff_tol * np.maximum(np.abs(theta[:n_requested]), _EPS)):
            betas, vecs, lams, resids = [], [], [], []
            for j in range(n_requested):
                x = ritz[:, j] / np.sqrt(wdot(ritz[:, j], ritz[:, j]))
                if verify:
                    sx = op.apply(x)
                    b = wdot(sx, x)
                    r = np.sqrt(max(wdot(sx - b * x, sx - b * x), 0.0))
                else:
                    b, r = theta[j], resid[j]
                betas.append(b)
                vecs.append(x)
                lams.append(rayleigh_lambda(lap, x))
                resids.append(r)
            return EigenSolveResult(
                np.asarray(betas), np.stack(vecs, axis=1), np.asarray(lams),
                np.asarray(resids), n_converged=n_requested, converged=True,
                counters=op.counters(),
                diagnostics={"sweeps": sweep, "reseeds": reseeds,
                             "residual_history": history,
                             "noise_floor": noise_floor})
        q = orthonormalize(sq)
    raise ConvergenceError(
        f"simultaneous iteration did not converge {n_requested} pairs in "
        f"{max_sweeps} sweeps", history=history)
