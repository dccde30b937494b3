"""Joint defogging and demosaicking by patch-based constrained TLS regression.

For every output pixel and color k the estimator is

    x_hat = (s0 - beta')^T C alpha + gamma_defogged

where C holds basis vectors whose weights on the two non-target color
classes sum to zero, and alpha is learned in a total-least-squares sense
from same-color patches on the stride-2 sublattice of the mosaic.  The
unobservable fog-free statistics are recovered from the foggy patch
covariance by undoing the transmission scaling and subtracting the sensor
noise floor.  Patch means and covariances are weighted by the similarity
weights a_m^2, and a relative ridge on the detail columns of Q picks the
low-norm answer where single-color training leaves near-ties.

All numerical routines accept arbitrary leading batch dimensions so the
full-image solver runs them vectorized over blocks of pixels.
"""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .cfa import bilinear_demosaick
from .fog import FogParams, defog
from .imaging import (COLORS, CfaImage, ColorImage, TransmissionMap, _color_index,
                      color_at, color_origins, pad_cfa, pad_symmetric, shifted_phase)

log = logging.getLogger(__name__)

TIE_RTOL = 1e-10
NONGENERIC_TOL = 1e-8
SAME_COLOR_RIDGE = 0.1


@dataclass(frozen=True)
class SolverConfig:
    patch_side: int = 5
    search_side: int = 25
    max_m: int = 121
    t_tolerance: float = 0.1
    kappa: float = 0.01
    b_last: float = 1.0
    epsilon: float = 0.01
    outlier_low: float = -0.25
    outlier_high: float = 1.25
    # noise model assumed when correcting covariances
    sigma: float = 0.01
    gain: float = 1000.0
    # shrinkage of the detail columns relative to their mean variance, see
    # regularize_q
    detail_ridge: float = 1.0
    chunk_rows: int = 8  # sublattice rows per vectorized batch

    def __post_init__(self):
        if self.patch_side < 3 or self.patch_side % 2 == 0:
            raise ValueError("patch_side must be odd and >= 3")
        if self.search_side < self.patch_side + 2:
            raise ValueError("search_side too small for patch_side")
        if self.kappa <= 0 or self.b_last <= 0:
            raise ValueError("kappa and b_last must be positive")
        if self.t_tolerance <= 0 or not 0 < self.epsilon < 1:
            raise ValueError("bad t_tolerance or epsilon")
        if self.gain <= 0 or self.sigma < 0:
            raise ValueError("bad noise model")
        if self.detail_ridge < 0:
            raise ValueError("detail_ridge must be non-negative")

    @property
    def n(self) -> int:
        return self.patch_side ** 2

    @property
    def candidate_radius(self) -> int:
        # candidate centers sit on the stride-2 lattice with their stride-1
        # patch footprint inside the search window: 25x25 / 5x5 -> 11x11
        return (self.search_side // 2 - self.patch_side // 2) // 2


# -- basis ---------------------------------------------------------------------

@dataclass(frozen=True)
class BasisMatrix:
    C: np.ndarray  # (N, L)
    target_color: int
    site_colors: np.ndarray  # (side, side) color index per patch position
    column_colors: tuple[int, ...]  # color class each column lives on

    @property
    def L(self) -> int:
        return self.C.shape[1]

    def class_sums(self, w: np.ndarray) -> dict[int, np.ndarray]:
        """Sum of `w` over the sites of each non-target color."""
        flat = self.site_colors.ravel()
        return {c: w[..., flat == c].sum(axis=-1)
                for c in range(3) if c != self.target_color}


def _gram_schmidt(F: np.ndarray, tol: float = 1e-9) -> list[np.ndarray]:
    basis: list[np.ndarray] = []
    for f in F.T:
        f = f.copy()
        for _ in range(2):
            for q in basis:
                f -= (q @ f) * q
        nrm = np.linalg.norm(f)
        if nrm > tol:
            basis.append(f / nrm)
    return basis


def build_basis(patch_side: int, target_color, phase_at_center: str) -> BasisMatrix:
    """Lowpass target column plus zero-sum quadratic detail ladders.

    `phase_at_center` is the Bayer phase of the mosaic re-originated at the
    patch center.  Column 1 averages the target-color sites.  Then, for the
    target color first and each other color after it, the monomials u, v,
    u^2, uv, v^2 restricted to that color's sites are de-meaned and
    orthonormalized, so every detail column sums to zero over its class
    and the target-class sum is carried by column 1 alone.  Classes with
    too few sites lose the dependent columns.
    """
    if patch_side % 2 == 0:
        raise ValueError("patch_side must be odd")
    k = _color_index(target_color)
    half = patch_side // 2
    u, v = np.meshgrid(np.arange(-half, half + 1), np.arange(-half, half + 1), indexing="ij")
    sites = color_at(phase_at_center, u, v)
    flat = sites.ravel()
    uf, vf = u.ravel().astype(float), v.ravel().astype(float)
    if not np.any(flat == k):
        raise ValueError(f"no {COLORS[k]} sites in a {patch_side}x{patch_side} patch")

    cols = [(flat == k) / np.count_nonzero(flat == k)]
    owners = [k]
    for c in [k] + [c for c in range(3) if c != k]:
        m = flat == c
        if not m.any():
            continue
        pu, pv = uf[m], vf[m]
        F = np.stack([pu, pv, pu * pu, pu * pv, pv * pv], axis=1)
        F -= F.mean(axis=0)
        for q in _gram_schmidt(F):
            q = q - q.mean()  # exact zero sum after roundoff
            col = np.zeros(flat.size)
            col[m] = q
            cols.append(col)
            owners.append(c)
    C = np.stack(cols, axis=1)
    C.setflags(write=False)
    return BasisMatrix(C, k, sites, tuple(owners))


@lru_cache(maxsize=None)
def _cached_basis(patch_side: int, k: int, phase: str) -> BasisMatrix:
    return build_basis(patch_side, k, phase)


# -- patch systems ---------------------------------------------------------------

@dataclass(frozen=True)
class PatchSystem:
    """One (or a batch of) TLS learning systems.

    Arrays may carry leading batch dimensions.  Candidates excluded by the
    transmission-similarity rule stay in `S` with `mask` False and weight 0.
    """
    S: np.ndarray  # (..., N, M) candidate patches as columns
    s0: np.ndarray  # (..., N) patch at the anchor site
    a: np.ndarray  # (..., M) diagonal of A
    mask: np.ndarray  # (..., M) selected candidates
    beta_prime: np.ndarray  # (..., N) mean selected patch
    gamma: np.ndarray  # (...) mean selected center
    t_values: np.ndarray  # (..., M) transmission at candidate centers
    t_anchor: np.ndarray  # (...)
    sensor_floor: np.ndarray | float
    ok: np.ndarray  # (...) at least 2N candidates survived

    @property
    def n(self) -> int:
        return self.S.shape[-2]

    @property
    def m(self) -> np.ndarray:
        return self.mask.sum(axis=-1)

    @property
    def center(self) -> int:
        return self.n // 2


def _candidate_offsets(radius: int) -> np.ndarray:
    a, b = np.meshgrid(np.arange(-radius, radius + 1), np.arange(-radius, radius + 1),
                       indexing="ij")
    offs = np.stack([a.ravel(), b.ravel()], axis=1)
    order = np.lexsort((offs[:, 1], offs[:, 0], (offs ** 2).sum(axis=1)))
    return offs[order]  # nearest first; (0, 0) leads


def _select(t_cand: np.ndarray, t_anchor: np.ndarray, tol: float, max_m: int) -> np.ndarray:
    close = np.abs(t_cand - t_anchor[..., None]) <= tol
    return close & (np.cumsum(close, axis=-1) <= max_m)


def _system_from_plane(plane: np.ndarray, tplane: np.ndarray, p: np.ndarray, q: np.ndarray,
                       cfg: SolverConfig, sensor_floor) -> PatchSystem:
    """Systems anchored at sublattice positions (p, q) of one color plane."""
    rc, ph = cfg.candidate_radius, cfg.patch_side // 2
    pad = rc + ph
    windows = sliding_window_view(pad_symmetric(plane, pad), (cfg.patch_side,) * 2)
    tpad = pad_symmetric(tplane, pad)
    offs = _candidate_offsets(rc)
    pr = p[..., None] + rc + offs[:, 0]
    qr = q[..., None] + rc + offs[:, 1]
    patches = windows[pr, qr].reshape(pr.shape + (cfg.n,))  # (..., M, N)
    S = np.swapaxes(patches, -1, -2)
    t_cand = tpad[pr + ph, qr + ph]
    t_anchor = tplane[p, q]

    need = 2 * cfg.n
    mask = _select(t_cand, t_anchor, cfg.t_tolerance, cfg.max_m)
    short = mask.sum(axis=-1) < need
    if np.any(short):
        wide = _select(t_cand, t_anchor, 2 * cfg.t_tolerance, cfg.max_m)
        mask = np.where(short[..., None], wide, mask)
    ok = mask.sum(axis=-1) >= need

    count = np.maximum(mask.sum(axis=-1), 1)
    beta_prime = (S * mask[..., None, :]).sum(axis=-1) / count[..., None]
    gamma = beta_prime[..., cfg.n // 2]
    return PatchSystem(S=S, s0=S[..., 0], a=mask.astype(np.float64), mask=mask,
                       beta_prime=beta_prime, gamma=gamma, t_values=t_cand,
                       t_anchor=t_anchor, sensor_floor=sensor_floor, ok=ok)


def anchor_site(phase: str, i: int, j: int, color, origin: tuple[int, int] | None = None
                ) -> tuple[int, int]:
    """Site of `color` inside the 2x2 tile containing (i, j).

    Green has two sites per tile; `origin` picks one, defaulting to the
    first in row-major order.
    """
    origins = color_origins(phase, color)
    o = origins[0] if origin is None else origin
    if o not in origins:
        raise ValueError(f"origin {o} does not carry {color}")
    return (i - i % 2 + o[0], j - j % 2 + o[1])


def collect_patches(h: CfaImage, center: tuple[int, int], t_map: TransmissionMap,
                    color=None, search_half: int = 12, patch_half: int = 2,
                    max_m: int = 121, t_tolerance: float = 0.1,
                    sensor_floor: float = 0.0, origin=None) -> PatchSystem:
    """Learning system for estimating `color` at pixel `center`.

    Candidates are same-color sites near the anchor (the `color` site in the
    pixel's 2x2 tile), kept nearest-first when their transmission lies within
    `t_tolerance` of the anchor's.  The tolerance is doubled once if fewer
    than 2N candidates survive; `ok` is False if that still falls short.
    """
    i, j = center
    k = color_at(h.phase, i, j) if color is None else _color_index(color)
    ai, aj = anchor_site(h.phase, i, j, k, origin)
    o = (ai % 2, aj % 2)
    cfg = SolverConfig(patch_side=2 * patch_half + 1, search_side=2 * search_half + 1,
                       max_m=max_m, t_tolerance=t_tolerance)
    plane = h.data[o[0]::2, o[1]::2]
    tplane = t_map.data[o[0]::2, o[1]::2]
    return _system_from_plane(plane, tplane, np.asarray(ai // 2), np.asarray(aj // 2),
                              cfg, sensor_floor)


def weight_matrix_a(system: PatchSystem, kappa: float) -> np.ndarray:
    """a_m = exp(-(s0_c - s_m_c)^2 / kappa) on selected candidates, else 0."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    c = system.center
    diff = system.s0[..., c, None] - system.S[..., c, :]
    return np.exp(-diff ** 2 / kappa) * system.mask


def reweight(system: PatchSystem, a: np.ndarray) -> PatchSystem:
    """Attach weights a and move beta' and gamma to the a^2-weighted means.

    The weighted residual is minimized over the offsets too, and its
    minimizers are the weighted means; uniform weights give the plain means.
    """
    w2 = np.asarray(a, dtype=np.float64) ** 2
    mass = np.maximum(w2.sum(axis=-1), np.finfo(float).tiny)
    beta = (system.S * w2[..., None, :]).sum(axis=-1) / mass[..., None]
    return dataclasses.replace(system, a=a, beta_prime=beta, gamma=beta[..., system.center])


def covariance_s(system: PatchSystem) -> np.ndarray:
    """(S - beta' 1) A^2 (S - beta' 1)^T."""
    D = system.S - system.beta_prime[..., None]
    return (D * system.a[..., None, :] ** 2) @ np.swapaxes(D, -1, -2)


@dataclass(frozen=True)
class Covariances:
    sigma_x: np.ndarray  # (..., N, N)
    sigma_sx: np.ndarray
    sigma_sxc: np.ndarray  # (..., N)
    sigma_xc: np.ndarray  # (...)
    t_bar: np.ndarray  # (...)
    sigma_s: np.ndarray  # (..., N, N) the foggy scatter the others came from


def psd_project(m: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues of symmetric matrices to zero."""
    m = 0.5 * (m + np.swapaxes(m, -1, -2))
    w, V = np.linalg.eigh(m)
    neg = (w < 0).any(axis=-1)
    if not np.any(neg):
        return m
    clipped = (V * np.maximum(w, 0)[..., None, :]) @ np.swapaxes(V, -1, -2)
    return np.where(neg[..., None, None], clipped, m)


def correct_covariances(sigma_s: np.ndarray, t_values: np.ndarray, sensor_floor,
                        weights: np.ndarray | None = None, center: int | None = None,
                        epsilon: float = 0.01) -> Covariances:
    """Fog-free covariance from the foggy one.

    With s = t x + (1 - t) l_a + n, the weighted scatter of s about its mean
    is t^2 times that of x plus the noise floor times the weight mass
    sum(a_m^2).  t is collapsed to its a^2-weighted mean (floored at
    epsilon) since candidates were selected for similar transmission.

    sigma_x is projected onto the PSD cone.  The center column of Sigma_SX
    and the center variance are taken before that projection: the noise
    only touches their center entry, and clipping eigenvalues elsewhere
    would leak estimation noise from unrelated directions into them.
    """
    t_values = np.asarray(t_values, dtype=np.float64)
    if weights is None:
        weights = np.ones(t_values.shape)
    w2 = np.asarray(weights, dtype=np.float64) ** 2
    mass = w2.sum(axis=-1)
    t_bar = (w2 * t_values).sum(axis=-1) / np.maximum(mass, np.finfo(float).tiny)
    t_bar = np.maximum(t_bar, epsilon)
    n = sigma_s.shape[-1]
    c = n // 2 if center is None else center
    eye = np.eye(n)
    floor = np.asarray(sensor_floor, dtype=np.float64) * mass
    t2 = (t_bar ** 2)[..., None, None]
    sigma_x = psd_project((sigma_s - floor[..., None, None] * eye) / t2)
    sigma_sxc = sigma_s[..., :, c].copy()
    sigma_sxc[..., c] -= floor
    sigma_sxc = sigma_sxc / t_bar[..., None]
    sigma_xc = np.maximum((sigma_s[..., c, c] - floor) / t_bar ** 2, 0.0)
    return Covariances(sigma_x, t_bar[..., None, None] * sigma_x, sigma_sxc, sigma_xc, t_bar,
                       sigma_s)


def compose_q(sigma_s: np.ndarray, sigma_sxc: np.ndarray, sigma_xc, C: np.ndarray,
              b: np.ndarray) -> np.ndarray:
    """Q = B^T [C 0; 0 1]^T [[S_S, S_Sx], [S_Sx^T, S_x]] [C 0; 0 1] B."""
    top_left = np.swapaxes(C, -1, -2) @ sigma_s @ C
    top_right = (sigma_sxc[..., None, :] @ C)[..., 0, :]
    L = C.shape[-1]
    Q = np.empty(top_left.shape[:-2] + (L + 1, L + 1))
    Q[..., :L, :L] = top_left
    Q[..., :L, L] = top_right
    Q[..., L, :L] = top_right
    Q[..., L, L] = sigma_xc
    return Q * b[:, None] * b[None, :]


def regularize_q(Q: np.ndarray, basis: BasisMatrix, ridge: float,
                 same_color: float = SAME_COLOR_RIDGE) -> np.ndarray:
    """Shrink the detail columns of Q toward zero weight.

    Adds `ridge` times the mean detail variance to the diagonal of every
    cross-color detail column and `same_color` times that to the
    target-color detail columns.  Training patches come from one color
    plane, where all detail columns see the same signal and near-ties are
    common; the shrinkage picks the low-norm solution and prefers
    same-color detail.  The lowpass column and the estimand row are
    untouched.
    """
    cols = np.asarray(basis.column_colors)
    idx = np.arange(1, cols.size)
    if ridge == 0 or idx.size == 0:
        return Q
    factor = ridge * np.where(cols[idx] == basis.target_color, same_color, 1.0)
    diag = Q[..., idx, idx]
    Q = Q.copy()
    Q[..., idx, idx] = diag + diag.mean(axis=-1, keepdims=True) * factor
    return Q


def smallest_eigvec(Q: np.ndarray) -> np.ndarray:
    """Eigenvector of the smallest eigenvalue, with a deterministic tie-break.

    When several eigenvalues tie at the minimum, the vector in their span
    with the largest last component is returned (the projection of the last
    unit vector).  The sign makes the first nonzero component positive.
    """
    w, V = np.linalg.eigh(0.5 * (Q + np.swapaxes(Q, -1, -2)))
    scale = np.maximum(np.abs(w).max(axis=-1, keepdims=True), np.finfo(float).tiny)
    tie = w <= w[..., :1] + TIE_RTOL * scale
    last = np.where(tie, V[..., -1, :], 0.0)
    u = (V * last[..., None, :]).sum(axis=-1)
    nrm = np.linalg.norm(u, axis=-1, keepdims=True)
    v = np.where(nrm > 0, u / np.where(nrm > 0, nrm, 1.0), V[..., :, 0])
    nz = np.abs(v) > 1e-15
    first = np.take_along_axis(v, np.argmax(nz, axis=-1)[..., None], axis=-1)
    return v * np.where(first < 0, -1.0, 1.0)


def solve_alpha(Q: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """alpha_l = -b_l v_l / (b_{L+1} v_{L+1}) from the smallest eigenpair of Q.

    Returns (alpha, ok); ok is False for nongeneric systems whose last
    eigenvector component is below 1e-8 in magnitude.
    """
    v = smallest_eigvec(Q)
    last = v[..., -1]
    ok = np.abs(last) >= NONGENERIC_TOL
    safe = np.where(ok, last, 1.0)
    alpha = -b[:-1] * v[..., :-1] / (b[-1] * safe)[..., None]
    return np.where(ok[..., None], alpha, 0.0), ok


def dc_level(gamma, la, t_bar, epsilon: float):
    """Defogged level of the mean center value."""
    return (gamma - la) / np.maximum(t_bar, epsilon) + la


def estimate_pixel(system: PatchSystem, basis: BasisMatrix, alpha: np.ndarray,
                   la: float, t_bar, epsilon: float, patch: np.ndarray | None = None,
                   bounds: tuple[float, float] = (-0.25, 1.25)):
    """x_hat = (patch - beta')^T C alpha + defogged gamma.

    `patch` is the stride-1 mosaic patch around the output pixel; it defaults
    to the anchor's own sublattice patch.  Returns (estimate clamped to
    `bounds`, pruned flag).
    """
    patch = system.s0 if patch is None else patch
    w = alpha @ basis.C.T
    raw = ((patch - system.beta_prime) * w).sum(axis=-1) + dc_level(
        system.gamma, la, t_bar, epsilon)
    pruned = (raw < bounds[0]) | (raw > bounds[1])
    return np.clip(raw, *bounds), pruned


# -- full image ------------------------------------------------------------------

@dataclass
class JointResult:
    image: ColorImage
    fallback: np.ndarray  # (H, W, 3) bool
    counts: dict
    max_constraint_residual: float

    @property
    def fallback_rate(self) -> float:
        return float(self.fallback.mean())


def _solve_plane(h: CfaImage, hpad: np.ndarray, tmap: np.ndarray, k: int,
                 origin: tuple[int, int], la_k: float, cfg: SolverConfig,
                 rows: slice, out: np.ndarray, valid: np.ndarray, stats: dict) -> None:
    """Estimate color k for every pixel whose tile anchor lies in `rows`."""
    H, W = h.data.shape
    plane = h.data[origin[0]::2, origin[1]::2]
    tplane = tmap[origin[0]::2, origin[1]::2]
    p, q = np.meshgrid(np.arange(rows.start, rows.stop), np.arange(plane.shape[1]),
                       indexing="ij")
    floor = la_k / cfg.gain + cfg.sigma ** 2
    system = _system_from_plane(plane, tplane, p, q, cfg, floor)
    system = reweight(system, weight_matrix_a(system, cfg.kappa))
    cov = correct_covariances(covariance_s(system), system.t_values, floor, weights=system.a)
    windows = sliding_window_view(hpad, (cfg.patch_side,) * 2)
    resid = 0.0
    n_short = n_nongeneric = n_pruned = 0
    for di in (0, 1):
        for dj in (0, 1):
            ii = 2 * p + di
            jj = 2 * q + dj
            inside = (ii < H) & (jj < W)
            if not inside.any():
                continue
            basis = _cached_basis(cfg.patch_side, k, shifted_phase(h.phase, di, dj))
            b = np.ones(basis.L + 1)
            b[-1] = cfg.b_last
            Q = regularize_q(compose_q(cov.sigma_s, cov.sigma_sxc, cov.sigma_xc,
                                       basis.C, b), basis, cfg.detail_ridge)
            alpha, generic = solve_alpha(Q, b)
            w = alpha @ basis.C.T
            for s in basis.class_sums(w).values():
                resid = max(resid, float(np.abs(s).max(initial=0.0)))
            patch = windows[np.minimum(ii, H - 1), np.minimum(jj, W - 1)].reshape(
                ii.shape + (cfg.n,))
            est, pruned = estimate_pixel(system, basis, alpha, la_k, cov.t_bar, cfg.epsilon,
                                         patch=patch,
                                         bounds=(cfg.outlier_low, cfg.outlier_high))
            good = system.ok & generic & ~pruned
            n_short += int((~system.ok & inside).sum())
            n_nongeneric += int((system.ok & ~generic & inside).sum())
            n_pruned += int((system.ok & generic & pruned & inside).sum())
            out[ii[inside], jj[inside]] = est[inside]
            valid[ii[inside], jj[inside]] = good[inside]
    stats["short"] = stats.get("short", 0) + n_short
    stats["nongeneric"] = stats.get("nongeneric", 0) + n_nongeneric
    stats["pruned"] = stats.get("pruned", 0) + n_pruned
    stats["residual"] = max(stats.get("residual", 0.0), resid)


def joint_defog_demosaick(h: CfaImage, t_map: TransmissionMap, la,
                          config: SolverConfig = SolverConfig(),
                          threads: int = 1) -> JointResult:
    """Jointly demosaick and defog a noisy foggy mosaic.

    Every pixel gets an R, G and B estimate from its own TLS system; green
    averages the systems of both green sublattices when both are valid.
    Pixels whose system is short of candidates, nongeneric or out of bounds
    fall back to bilinear demosaicking followed by direct defogging.
    Chunks are fixed by `config.chunk_rows`, so results do not depend on
    `threads`.
    """
    la = np.broadcast_to(np.asarray(la, dtype=np.float64), (3,)).copy()
    H, W = h.data.shape
    tmap = t_map.data
    if tmap.shape != (H, W):
        raise ValueError("transmission map does not match the mosaic")
    hpad = pad_cfa(h.data, config.patch_side // 2)

    jobs = []
    results = {}
    for k in range(3):
        for origin in color_origins(h.phase, k):
            n_rows = len(range(origin[0], H, 2))
            key = (k, origin)
            results[key] = (np.zeros((H, W)), np.zeros((H, W), dtype=bool), {})
            for r0 in range(0, n_rows, config.chunk_rows):
                rows = slice(r0, min(r0 + config.chunk_rows, n_rows))
                jobs.append((key, rows))

    def run(job):
        (k, origin), rows = job
        out, valid, _ = results[(k, origin)]
        stats: dict = {}
        _solve_plane(h, hpad, tmap, k, origin, la[k], config, rows, out, valid, stats)
        return stats

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            all_stats = list(pool.map(run, jobs))
    else:
        all_stats = [run(j) for j in jobs]

    counts = {"short": 0, "nongeneric": 0, "pruned": 0}
    resid = 0.0
    for st in all_stats:
        for key in counts:
            counts[key] += st.get(key, 0)
        resid = max(resid, st.get("residual", 0.0))

    fallback_img = defog(bilinear_demosaick(h), tmap,
                         FogParams(airlight=tuple(la), epsilon=config.epsilon)).data
    out = np.empty((H, W, 3))
    fallback = np.zeros((H, W, 3), dtype=bool)
    for k in range(3):
        ests = [results[(k, o)] for o in color_origins(h.phase, k)]
        num = sum(np.where(v, e, 0.0) for e, v, _ in ests)
        den = sum(v.astype(np.float64) for _, v, _ in ests)
        good = den > 0
        out[..., k] = np.where(good, num / np.where(good, den, 1.0), fallback_img[..., k])
        fallback[..., k] = ~good
    out = np.clip(out, config.outlier_low, config.outlier_high)
    counts["fallback_pixels"] = int(fallback.sum())
    if fallback.mean() > 0.05:
        log.warning("fallback rate %.1f%%", 100 * fallback.mean())
    return JointResult(ColorImage(out), fallback, counts, resid)
