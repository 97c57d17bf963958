"""Root counting, root location, gamma-curves, residues and instability tests."""
from __future__ import annotations

import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from . import evans as ev
from .errors import (AssumptionViolation, ContourDegeneracyError, SingularIntegrandError,
                     UnresolvedClusterError, UnsupportedMultiplicityError)
from .model import ModelSpec, eval_nonlinearities
from .profile import SingularOrbit, takeoff_derivative

LAMBDA_DEFAULT = -0.5
OMEGA_DEFAULT = 10.0
VARPI_DEFAULT = 3 * math.pi / 4
GUARD_DEFAULT = 0.05
CANCEL_TOL = 1e-6


# ------------------------------------------------------------- helpers

def _polar(val):
    """(unit phase, log modulus) of a complex number or EvansValue."""
    if isinstance(val, ev.EvansValue):
        z, led = complex(val.value), float(val.scaling_ledger)
    else:
        z, led = complex(val), 0.0
    a = abs(z)
    if a == 0.0 or not np.isfinite(a):
        return 0j, -np.inf
    return z / a, math.log(a) + led


def _ratio(a, b):
    """a / b for complex numbers or EvansValues."""
    if isinstance(a, ev.EvansValue):
        return a.ratio(b)
    return complex(a) / complex(b)


def _pmap(fn, items, workers=1):
    items = list(items)
    if workers and workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(z) for z in items]


def _cached(f):
    """Memoize a function of one complex argument (shared contour nodes)."""
    return functools.lru_cache(maxsize=None)(lambda z: f(z))


# ------------------------------------------------------------- contours

@dataclass
class ContourSpec:
    """Closed contour: circle, axis-aligned rectangle or polygon.

    ``Lambda``, ``omega`` and ``varpi`` describe the admissible search
    region Re lam in (Lambda, omega), |arg(omega - lam)| < pi - varpi.
    """

    center: complex = 0j
    shape: str = "circle"
    radius: float = 1.0
    width: float = 2.0
    height: float = 2.0
    vertices: tuple = ()
    node_count: int = 64
    Lambda: float = LAMBDA_DEFAULT
    omega: float = OMEGA_DEFAULT
    varpi: float = VARPI_DEFAULT

    @classmethod
    def circle(cls, center, radius, node_count=64, **kw):
        return cls(center=complex(center), shape="circle", radius=float(radius), node_count=node_count, **kw)

    @classmethod
    def rectangle(cls, x0, x1, y0, y1, node_count=64, **kw):
        return cls(center=complex((x0 + x1) / 2, (y0 + y1) / 2), shape="rectangle", width=float(x1 - x0),
                   height=float(y1 - y0), node_count=node_count, **kw)

    @classmethod
    def default_region(cls, Lambda=LAMBDA_DEFAULT, omega=OMEGA_DEFAULT, varpi=VARPI_DEFAULT, node_count=128):
        """Truncated sector with apex at omega opening to the left."""
        hgt = (omega - Lambda) * math.tan(math.pi - varpi)
        verts = (complex(omega, 0), complex(Lambda, hgt), complex(Lambda, -hgt))
        return cls(center=complex((2 * Lambda + omega) / 3, 0), shape="polygon", vertices=verts,
                   node_count=node_count, Lambda=Lambda, omega=omega, varpi=varpi)

    def _polygon(self):
        if self.shape == "rectangle":
            c, w, h = self.center, self.width / 2, self.height / 2
            return [c + complex(-w, -h), c + complex(w, -h), c + complex(w, h), c + complex(-w, h)]
        return [complex(v) for v in self.vertices]

    def path(self, t):
        """Point at parameter t in [0, 1), counter-clockwise."""
        t = np.asarray(t, float) % 1.0
        if self.shape == "circle":
            return self.center + self.radius * np.exp(2j * np.pi * t)
        verts = self._polygon()
        n = len(verts)
        s = t * n
        k = np.minimum(np.floor(s).astype(int), n - 1)
        a = np.array(verts)[k]
        b = np.array(verts)[(k + 1) % n]
        return a + (s - k) * (b - a)

    def nodes(self):
        t = np.arange(self.node_count) / self.node_count
        return t, self.path(t)

    def contains(self, z):
        z = complex(z)
        if self.shape == "circle":
            return abs(z - self.center) < self.radius
        verts = self._polygon()
        inside = False
        n = len(verts)
        for i in range(n):
            a, b = verts[i], verts[(i + 1) % n]
            if (a.imag > z.imag) != (b.imag > z.imag):
                x = a.real + (z.imag - a.imag) * (b.real - a.real) / (b.imag - a.imag)
                if x > z.real:
                    inside = not inside
        return inside

    def bounding_box(self):
        if self.shape == "circle":
            c, r = self.center, self.radius
            return (c.real - r, c.real + r, c.imag - r, c.imag + r)
        v = np.array(self._polygon())
        return (v.real.min(), v.real.max(), v.imag.min(), v.imag.max())

    def check(self, guards=(), guard_radius=GUARD_DEFAULT):
        """Contour must stay right of Lambda and clear of guard discs."""
        _, pts = self.nodes()
        if np.min(pts.real) <= self.Lambda:
            raise ContourDegeneracyError(f"contour leaves Re lam > {self.Lambda}", point=complex(pts[np.argmin(pts.real)]))
        for g in guards:
            d = np.min(np.abs(pts - g))
            if d < guard_radius:
                raise ContourDegeneracyError(f"contour passes within {d:.3g} of the guarded point {g}", point=g)
        return True


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def winding_number(f, contour: ContourSpec, max_angle=np.pi / 2, max_insert=14, vanish_tol=1e-10,
                   workers=1, details=False):
    """Winding number of f along the contour with adaptive node insertion."""
    t, pts = contour.nodes()
    vals = _pmap(f, pts, workers)
    pol = [_polar(v) for v in vals]
    logs = np.array([p[1] for p in pol])
    if not np.all(np.isfinite(logs)):
        k = int(np.argmin(logs))
        raise ContourDegeneracyError("function vanishes on the contour; perturb the contour", point=complex(pts[k]))
    ref = float(np.median(logs))
    floor = ref + math.log(vanish_tol)
    total = 0.0
    n_eval = len(pts)
    min_log = float(np.min(logs))
    tt = list(t) + [1.0]
    pp = pol + [pol[0]]
    for i in range(len(t)):
        stack = [(tt[i], tt[i + 1], pp[i], pp[i + 1], 0)]
        while stack:
            a, b, pa, pb, depth = stack.pop()
            d = float(np.angle(pb[0] / pa[0]))
            if abs(d) < max_angle:
                total += d
                continue
            if depth >= max_insert:
                raise ContourDegeneracyError("argument increment unresolved; a zero is too close to the contour",
                                             point=complex(contour.path((a + b) / 2)))
            m = (a + b) / 2
            pm = _polar(f(complex(contour.path(m))))
            n_eval += 1
            if not np.isfinite(pm[1]) or pm[1] < floor:
                raise ContourDegeneracyError("function nearly vanishes on the contour; perturb the contour",
                                             point=complex(contour.path(m)))
            min_log = min(min_log, pm[1])
            stack.append((m, b, pm, pb, depth + 1))
            stack.append((a, m, pa, pm, depth + 1))
    if min_log < floor:
        raise ContourDegeneracyError("function nearly vanishes on the contour; perturb the contour",
                                     point=complex(pts[int(np.argmin(logs))]))
    w = total / (2 * np.pi)
    count = int(round(w))
    if details:
        return count, {"raw": w, "evaluations": n_eval, "min_log_modulus": min_log, "ref_log_modulus": ref}
    return count


def count_roots_contour(f, contour: ContourSpec, **kw):
    """Zeros minus poles of f inside the contour (argument principle)."""
    return winding_number(f, contour, **kw)


# ------------------------------------------------------------- roots

def _complex_derivative(g, z, h):
    return (g(z + h) - g(z - h) - 1j * g(z + 1j * h) + 1j * g(z - 1j * h)) / (4 * h)


def newton_polish(f, z0, tol=1e-12, max_iter=40, h=None, box=None, multiplicity=1):
    """Newton iteration on f/f(z0) with a complex-step stencil derivative.

    ``multiplicity`` k uses the step k f/f', which keeps quadratic
    convergence at a k-fold root.  Returns (root, |f(root)/f(z0)|) or raises ContourDegeneracyError when the
    iteration leaves ``box``.
    """
    ref = f(complex(z0))
    g = lambda z: _ratio(f(complex(z)), ref)
    z = complex(z0)
    scale = 1.0 if box is None else max(box[1] - box[0], box[3] - box[2])
    hh = h if h is not None else 1e-4 * scale
    for _ in range(max_iter):
        gz = g(z)
        dg = _complex_derivative(g, z, hh)
        if dg == 0 or not np.isfinite(dg):
            break
        step = multiplicity * gz / dg
        z = z - step
        if box is not None and not (box[0] - 0.05 * scale <= z.real <= box[1] + 0.05 * scale and
                                    box[2] - 0.05 * scale <= z.imag <= box[3] + 0.05 * scale):
            raise ContourDegeneracyError("Newton left the box", point=z)
        hh = min(hh, max(abs(step), 1e-7 * (1 + abs(z))))
        if abs(step) < tol * (1 + abs(z)):
            return z, abs(g(z))
    return z, abs(g(z))


def find_roots(f, region, tol=1e-10, max_depth=16, nodes_per_edge=16, cluster_size=1e-7, workers=1,
               newton_size=None):
    """Roots of f in a rectangle (x0, x1, y0, y1) or ContourSpec region.

    Quadtree subdivision by winding numbers with off-centre splits, Newton
    polishing in cells holding one root, multiplicities from winding counts.
    A cell with winding w > 1 is reported as one w-fold root when all w
    zeros sit inside a circle of radius max(1e-3 diam, 100 cluster_size)
    around the modified-Newton limit.
    Returns a list of (root, multiplicity) sorted by real then imaginary part.
    """
    f = _cached(f)
    if isinstance(region, ContourSpec):
        box0 = region.bounding_box()
        keep = region.contains
    else:
        box0 = tuple(float(v) for v in region)
        keep = lambda z: True
    size0 = max(box0[1] - box0[0], box0[3] - box0[2])
    if newton_size is None:
        newton_size = size0

    def count(box):
        c = ContourSpec.rectangle(*box, node_count=4 * nodes_per_edge)
        return winding_number(f, c, workers=workers)

    total = count(box0)
    roots, unresolved = [], []
    queue = [(box0, total, 0)] if total else []
    splits = ((0.45, 0.55), (0.4, 0.6), (0.55, 0.45), (0.6, 0.4), (0.37, 0.63))
    while queue:
        box, w, depth = queue.pop()
        x0, x1, y0, y1 = box
        diam = max(x1 - x0, y1 - y0)
        if w < 0:
            raise AssumptionViolation("find_roots expects a pole-free region")
        if w == 1 and diam <= newton_size:
            try:
                z, res = newton_polish(f, complex((x0 + x1) / 2, (y0 + y1) / 2), tol=tol, box=box)
                if x0 <= z.real <= x1 and y0 <= z.imag <= y1 and res < 1e-6:
                    roots.append((z, 1))
                    continue
            except ContourDegeneracyError:
                pass
        if w > 1 and diam <= newton_size:
            # a single w-fold root: modified Newton, then all w zeros inside a tiny circle
            try:
                z, res = newton_polish(f, complex((x0 + x1) / 2, (y0 + y1) / 2), tol=tol, box=box,
                                       multiplicity=w)
                rho = max(1e-3 * diam, 100 * cluster_size)
                if x0 <= z.real <= x1 and y0 <= z.imag <= y1 and \
                        winding_number(f, ContourSpec.circle(z, rho, 32), workers=workers) == w:
                    roots.append((z, w))
                    continue
            except ContourDegeneracyError:
                pass
        if diam < cluster_size:
            roots.append((complex((x0 + x1) / 2, (y0 + y1) / 2), w))
            continue
        if depth >= max_depth:
            unresolved.append(box)
            continue
        for fx, fy in splits:
            xm, ym = x0 + fx * (x1 - x0), y0 + fy * (y1 - y0)
            kids = [(x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)]
            try:
                ws = [count(k) for k in kids]
            except ContourDegeneracyError:
                continue
            if sum(ws) != w:
                continue
            queue.extend((k, c, depth + 1) for k, c in zip(kids, ws) if c)
            break
        else:
            unresolved.append(box)
    if unresolved:
        raise UnresolvedClusterError(f"{len(unresolved)} cells unresolved at depth {max_depth}", boxes=unresolved)
    # merge duplicates found from neighbouring cells
    out = []
    for z, k in sorted(roots, key=lambda r: (round(r[0].real, 9), round(r[0].imag, 9))):
        if out and abs(out[-1][0] - z) < 1e3 * tol * (1 + abs(z)):
            continue
        if keep(z):
            out.append((z, k))
    if sum(k for _, k in out) != total and not isinstance(region, ContourSpec):
        raise UnresolvedClusterError("root multiplicities do not add up to the boundary winding number")
    return out


# ------------------------------------------------------------- gamma curves

@dataclass
class SpectrumCurve:
    theta: np.ndarray
    gamma: np.ndarray
    lam: np.ndarray
    branch: int
    closure_defect: float
    flags: tuple = ()


def trace_gamma_curves(F, seeds, theta=None, root_tol=1e-10, max_refine=8, workers=1):
    """Continue each gamma = 1 root of F(lam, gamma) over theta in [0, 2 pi].

    Secant prediction in theta, Newton correction in lam, step halving when
    the corrector fails or jumps.  Returns one SpectrumCurve per seed.
    """
    if theta is None:
        theta = np.linspace(0.0, 2 * np.pi, 65)
    theta = np.asarray(theta, float)

    def trace(args):
        b, seed = args
        z0, _ = newton_polish(lambda lam: F(lam, np.exp(1j * theta[0])), seed, tol=root_tol)
        ths, lams, flags = [theta[0]], [complex(z0)], []
        for k in range(1, len(theta)):
            target = theta[k]
            while ths[-1] < target - 1e-15:
                dth = target - ths[-1]
                ok = False
                for _ in range(max_refine + 1):
                    th = ths[-1] + dth
                    g = np.exp(1j * th)
                    if len(lams) > 1:
                        pred = lams[-1] + (lams[-1] - lams[-2]) * dth / (ths[-1] - ths[-2])
                    else:
                        pred = lams[-1]
                    try:
                        z, res = newton_polish(lambda lam: F(lam, g), pred, tol=root_tol)
                    except ContourDegeneracyError:
                        z, res = np.nan, np.inf
                    jump = abs(z - lams[-1]) if np.isfinite(z) else np.inf
                    lim = 4 * abs(lams[-1] - lams[-2]) + 0.05 if len(lams) > 1 else 0.2
                    if res < 1e-6 and jump <= lim:
                        ok = True
                        break
                    dth /= 2
                if not ok:
                    flags.append(f"fold_or_collision_at_theta={ths[-1]:.6g}")
                    break
                ths.append(th)
                lams.append(z)
            if flags:
                break
        ths = np.array(ths)
        lams = np.array(lams)
        closure = float(abs(lams[-1] - lams[0])) if not flags else float("nan")
        return SpectrumCurve(ths, np.exp(1j * ths), lams, b, closure, tuple(flags))

    return _pmap(trace, list(enumerate(seeds)), workers)


def conjugation_defect(curves, tol=1e-8):
    """Max distance between conj(lam(theta)) and the traced set at 2 pi - theta."""
    pts = {}
    for c in curves:
        for th, lam in zip(c.theta, c.lam):
            pts.setdefault(round(th, 12), []).append(lam)
    worst = 0.0
    for th, lams in pts.items():
        mirror = pts.get(round(2 * np.pi - th, 12))
        if mirror is None:
            continue
        for lam in lams:
            worst = max(worst, float(np.min(np.abs(np.array(mirror) - np.conj(lam)))))
    return worst


def trace_bands(model: ModelSpec, orbit: SingularOrbit, lam_grid, h=0.05, refine_tol=1e-10, poles=()):
    """Real intervals where t(lam) in [-2, 2] (m = 1).

    Edges are roots of t = +-2 refined by brentq in every grid cell with a
    sign change, so bands narrower than the grid spacing are still found.
    Cells containing one of ``poles`` (fast zeros) are skipped.
    """
    lam_grid = np.asarray(lam_grid, float)
    tf = lambda x: ev.trace_criterion(model, orbit, x, h=h)["t"].real
    t = np.array([tf(x) for x in lam_grid])
    poles = [float(np.real(p)) for p in poles]
    inside = lambda y: -2.0 <= y <= 2.0
    edges = []
    for i in range(len(lam_grid) - 1):
        a, b = lam_grid[i], lam_grid[i + 1]
        if any(a <= p <= b for p in poles):
            continue
        for level in (-2.0, 2.0):
            if (t[i] - level) * (t[i + 1] - level) < 0:
                edges.append(float(optimize.brentq(lambda x: tf(x) - level, a, b, xtol=refine_tol)))
    # grid points that start or end a band without a crossing (scan ends, pole gaps)
    for i, x in enumerate(lam_grid):
        if not inside(t[i]):
            continue
        left_open = i == 0 or any(lam_grid[i - 1] <= p <= x for p in poles)
        right_open = i == len(lam_grid) - 1 or any(x <= p <= lam_grid[i + 1] for p in poles)
        if left_open or right_open:
            edges.append(float(x))
    edges = sorted(set(edges))
    bands = []
    for a, b in zip(edges, edges[1:]):
        if b - a > 0 and not any(a < p < b for p in poles) and inside(tf(0.5 * (a + b))):
            if bands and bands[-1][1] == a:
                bands[-1] = (bands[-1][0], b)
            else:
                bands.append((a, b))
    return bands, t


# ------------------------------------------------------------- residues

@dataclass
class CancelationReport:
    lambda_diamond: complex
    residue: complex
    inner_products: tuple
    u_boundary: complex
    verdict: str
    scale: float = 0.0
    parity: int = 1
    extras: dict = field(default_factory=dict)


def _fast_integrals(model, hom, lam_d, h=0.05):
    ef = ev.fast_eigenfunction(model, hom, lam_d, h=h)
    xs = ef["stage_x"]
    v, _ = hom.state(xs)
    u = np.full(xs.shape + (1,), hom.u0[0])
    nl = eval_nonlinearities(model, u, v, 0.0, check_domain=False)
    w = ef["weights"]
    sv = ef["stage_v"]
    # half-line stage samples; odd eigenfunctions integrate to zero against even weights
    fac = 1 + ef["parity"]
    A = fac * np.sum(w * nl.H2_v[..., 0, 0] * sv)
    B = fac * np.sum(w * nl.G_u[..., 0, 0] * np.conj(sv))
    nA = math.sqrt(2 * np.sum(w * np.abs(nl.H2_v[..., 0, 0]) ** 2))
    nB = math.sqrt(2 * np.sum(w * np.abs(nl.G_u[..., 0, 0]) ** 2))
    return complex(A), complex(B), nA, nB, ef


def residue_slow_at_fast_zero(model: ModelSpec, orbit: SingularOrbit, lam_d, multiplicity=1,
                              cancel_tol=CANCEL_TOL, h=0.05, abs_floor=1e-12):
    """Singular coefficient of E_s0 at a simple fast zero (m = n = 1).

    residue = -u(2 L0, lam_d) * (int dvH2 v) * (int v dG/du); E_s0 then has
    principal part -gamma * residue / (lam - lam_d).  The zero of E_f0
    persists iff the residue vanishes relative to its Cauchy-Schwarz scale.
    """
    if multiplicity != 1:
        raise UnsupportedMultiplicityError(f"fast zero {lam_d} has multiplicity {multiplicity}")
    if model.m != 1 or model.n != 1:
        raise AssumptionViolation("residues are implemented for m = n = 1")
    lam_d = complex(lam_d)
    A, B, nA, nB, ef = _fast_integrals(model, orbit.homoclinic, lam_d, h)
    ub = ev.slow_boundary_value(model, orbit, lam_d)
    res = -ub * A * B
    scale = abs(ub) * nA * nB
    verdict = "persists" if abs(res) <= cancel_tol * scale + abs_floor else "cancels"
    return CancelationReport(lam_d, complex(res), (A, B), complex(ub), verdict, float(scale), ef["parity"])


def laurent_coefficient(fn, center, radius=1e-3, n=32):
    """Coefficient of 1/(lam - center) from a trapezoidal circle average."""
    th = 2 * np.pi * np.arange(n) / n
    z = radius * np.exp(1j * th)
    return complex(np.mean([zz * fn(center + zz) for zz in z]))


def _reduced_parts(model, orbit, h=0.05):
    """Cached lam -> (E_f0 EvansValue, slow evaluator) for repeated gamma sweeps."""

    @functools.lru_cache(maxsize=None)
    def fast(lam):
        return ev.evans_fast_reduced(model, orbit.homoclinic, lam, h)

    @functools.lru_cache(maxsize=None)
    def trace(lam):
        return ev.trace_criterion(model, orbit, lam, h=h)["t"]

    def E0(lam, gamma):
        lam = complex(lam)
        ef = fast(lam)
        if model.m == 1:
            es = gamma * gamma - trace(lam) * gamma + 1.0
        else:
            es = ev.evans_slow_reduced(model, orbit, lam, gamma, h).total()
        val = (-gamma) ** model.n * ef.value * es
        return ev.EvansValue(lam, complex(gamma), complex(val), ef.scaling_ledger, "reduced_product")

    return E0, fast, trace


def cancelation_scan(model: ModelSpec, orbit: SingularOrbit, lam_d, gamma_samples=16, radius=GUARD_DEFAULT,
                     node_count=64, report=None, max_shrink=3, h=0.05, workers=1):
    """Winding count of E_0(., gamma) on a small circle around lam_d for each gamma.

    Count 0 means the zero of E_f0 is cancelled by the pole of E_s0; count 1
    means an eigenvalue survives for that gamma.
    """
    if np.isscalar(gamma_samples):
        gs = np.exp(2j * np.pi * (np.arange(int(gamma_samples)) + 0.5) / int(gamma_samples))
    else:
        gs = np.asarray(gamma_samples, complex)
    E0, _, _ = _reduced_parts(model, orbit, h)
    r = radius
    for attempt in range(max_shrink + 1):
        try:
            c = ContourSpec.circle(lam_d, r, node_count)
            counts = [count_roots_contour(lambda z, g=g: E0(z, g), c) for g in gs]
            break
        except ContourDegeneracyError:
            if attempt == max_shrink:
                raise
            r /= 2
    if report is None:
        try:
            report = residue_slow_at_fast_zero(model, orbit, lam_d, h=h)
        except (AssumptionViolation, UnsupportedMultiplicityError):
            report = None
    verdicts = ["persists" if k >= 1 else "cancels" for k in counts]
    overall = "persists" if all(k >= 1 for k in counts) else ("cancels" if all(k == 0 for k in counts) else "mixed")
    return {"lambda_diamond": complex(lam_d), "radius": r, "gamma": list(gs), "counts": counts, "verdicts": verdicts,
            "verdict": overall, "residue_report": report,
            "consistent": None if report is None else (report.verdict == overall)}


# ------------------------------------------------------------- fast zeros and instability

def fast_zeros(model: ModelSpec, orbit_or_hom, region=(LAMBDA_DEFAULT, 4.0, -1.0, 1.0), tol=1e-10, h=0.05,
               workers=1):
    hom = orbit_or_hom.homoclinic if isinstance(orbit_or_hom, SingularOrbit) else orbit_or_hom
    return find_roots(lambda z: ev.evans_fast_reduced(model, hom, z, h), region, tol=tol, workers=workers)


def largest_fast_zero(model, orbit, omega=OMEGA_DEFAULT, h=0.05):
    """Largest positive simple zero lam_0 of E_f0 (n = 1 Sturm structure: real zeros)."""
    roots = fast_zeros(model, orbit, region=(GUARD_DEFAULT, omega, -0.5, 0.5), h=h)
    if not roots:
        raise AssumptionViolation("E_f0 has no positive zero")
    z, k = max(roots, key=lambda r: r[0].real)
    if k != 1:
        raise UnsupportedMultiplicityError("largest fast zero is not simple")
    return float(z.real)


def _rofe_beketov_integrand(model, slow):
    D1 = float(model.D1[0])

    def parts(xi):
        u, p = slow.state(np.atleast_1d(xi))
        u = u.reshape(-1, 1)
        us = p.reshape(-1) / D1
        nl = eval_nonlinearities(model, u, np.zeros_like(u), 0.0, check_domain=False)
        H1 = nl.H1[:, 0]
        dH1 = nl.H1_u[:, 0, 0]
        return us, H1, dH1

    return parts


RB_WRONSKIAN = -1.0


def rofe_beketov_solution(model: ModelSpec, slow, xi):
    """Second solution z of u'' = dH1(u_s) u built from u_s' (D1 = 1), symmetric about L0."""
    parts = _rofe_beketov_integrand(model, slow)
    xi = np.atleast_1d(np.asarray(xi, float))

    def g(y):
        a, b, c = parts(y)
        return float(((c + 1.0) * (a ** 2 - b ** 2) / (a ** 2 + b ** 2) ** 2)[0])

    out = np.empty(xi.shape)
    for i, x in enumerate(xi):
        K = integrate.quad(g, slow.L0, x, epsabs=1e-13, epsrel=1e-12, limit=400)[0]
        a, b, _ = parts(x)
        out[i] = a[0] * K - b[0] / (a[0] ** 2 + b[0] ** 2)
    return out


def instability_criteria(model: ModelSpec, orbit: SingularOrbit, lam0=None, h=0.05, singular_tol=1e-10,
                         cancel_tol=CANCEL_TOL):
    """I1, I2, G0 and the resulting instability verdict (m = n = 1).

    The trace t(lam) has principal part -I1 / (lam - lam0) at the positive
    fast zero and t(lam) -> +inf as lam -> +inf.  I1 > 0 therefore forces a
    band crossing on (lam0, inf); I1 = 0 leaves the fast zero uncancelled;
    for I1 < 0 and a symmetric segment t(0) = 2 I2 > -2 forces a crossing on
    (0, lam0).
    """
    if model.m != 1 or model.n != 1:
        raise AssumptionViolation("the instability criteria need m = n = 1")
    if lam0 is None:
        lam0 = largest_fast_zero(model, orbit, h=h)
    rep = residue_slow_at_fast_zero(model, orbit, lam0, h=h, cancel_tol=cancel_tol)
    A, B = rep.inner_products
    I1 = (rep.u_boundary * A * B).real
    u0 = orbit.u0
    G0 = 2.0 * float(np.atleast_1d(takeoff_derivative(model, u0))[0])
    slow = orbit.slow
    I2 = I2_literal = None
    if slow.symmetric and float(model.D1[0]) == 1.0:
        parts = _rofe_beketov_integrand(model, slow)
        grid = np.linspace(0.0, slow.L0, 2001)
        us, H1, _ = parts(grid)
        den = us ** 2 + H1 ** 2
        if np.min(den) < singular_tol:
            raise SingularIntegrandError("u_s' and H1(u_s) vanish together on the slow segment")

        def integrand(xi):
            a, b, c = parts(xi)
            return float(((c + 1.0) * (a ** 2 - b ** 2) / (a ** 2 + b ** 2) ** 2)[0])

        val, err = integrate.quad(integrand, 0.0, slow.L0, epsabs=1e-13, epsrel=1e-12, limit=400)
        a0, b0, _ = parts(0.0)
        a0, b0 = float(a0[0]), float(b0[0])
        I2_literal = a0 * (G0 * a0 - 2 * b0) * val + (a0 ** 2 + G0 * b0 * a0 - b0 ** 2) / (a0 ** 2 + b0 ** 2)
        # the Rofe-Beketov pair has W(z, u_s') = z u_s'' - z' u_s' = -1, so t(0) = 2 I2 needs the sign flip
        I2 = I2_literal / RB_WRONSKIAN
    zero_I1 = rep.verdict == "persists"
    if zero_I1 or I1 > 0:
        verdict = "unstable_by_I1"
    elif I2 is not None and I2 > -1:
        verdict = "unstable_by_I2"
    else:
        verdict = "inconclusive"
    return {"I1": float(I1), "I2": None if I2 is None else float(I2),
            "I2_literal": None if I2_literal is None else float(I2_literal), "G0": G0, "lambda0": float(lam0),
            "verdict": verdict, "residue": rep.residue, "u_boundary": rep.u_boundary,
            "inner_products": rep.inner_products}


# ------------------------------------------------------------- cancelation failure in mu

def zeropole_mu(family, u0, lam0, k=1, mu_guess=None, tol=1e-12):
    """Solve mu = lam0 + (k pi / (2 L0(mu)))^2 by fixed-point iteration.

    ``family(mu)`` returns the ModelSpec; L0(mu) is the numerically computed
    slow half-period.
    """
    from .profile import singular_orbit

    def L0(mu):
        return singular_orbit(family(mu), u0).L0

    g = lambda mu: lam0 + (k * np.pi / (2 * L0(float(mu)))) ** 2
    if mu_guess is None:
        mu_guess = lam0 + 1.0
    return float(optimize.fixed_point(g, mu_guess, xtol=tol, maxiter=500))


# ------------------------------------------------------------- convergence

def _hausdorff(a, b):
    a, b = np.asarray(a, complex), np.asarray(b, complex)
    if len(a) == 0 and len(b) == 0:
        return 0.0
    if len(a) == 0 or len(b) == 0:
        return float("inf")
    d = np.abs(a[:, None] - b[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def compare_convergence(model: ModelSpec, orbit: SingularOrbit, eps_list, contour: ContourSpec, gamma=1.0,
                        h=0.05, locate=True, workers=1, profiles=None):
    """Per-eps interior counts and root sets of the full Evans function vs the reduced prediction."""
    from .profile import shoot_periodic_orbit

    gamma = complex(gamma)
    E0, fast, trace = _reduced_parts(model, orbit, h)
    red_count = count_roots_contour(lambda z: E0(z, gamma), contour, workers=workers)
    fast_count = count_roots_contour(fast, contour, workers=workers)
    red_roots = []
    if locate:
        try:
            red_roots = [z for z, k in find_roots(lambda z: E0(z, gamma), contour, workers=workers)
                         for _ in range(k)]
        except (UnresolvedClusterError, AssumptionViolation):
            red_roots = []
    rows = []
    for i, eps in enumerate(eps_list):
        row = {"eps": float(eps)}
        try:
            prof = profiles[i] if profiles is not None else shoot_periodic_orbit(model, eps, orbit, h=h)
            fn = lambda z, p=prof: ev.evans_full(p, model, z, gamma, gauge=True)
            row["count_full"] = count_roots_contour(fn, contour, workers=workers)
            if locate and row["count_full"] > 0:
                roots = find_roots(fn, contour, workers=workers)
                row["roots_full"] = [z for z, k in roots for _ in range(k)]
                row["distance"] = _hausdorff(row["roots_full"], red_roots)
            else:
                row["roots_full"] = []
                row["distance"] = 0.0 if not red_roots else float("inf")
        except Exception as exc:  # partial table with annotation
            row["failure"] = f"{type(exc).__name__}: {exc}"
        row["count_reduced"] = red_count
        rows.append(row)
    d = [(r["eps"], r["distance"]) for r in rows if np.isfinite(r.get("distance", np.inf)) and r.get("distance", 0) > 0]
    rate = float(np.polyfit(np.log([e for e, _ in d]), np.log([x for _, x in d]), 1)[0]) if len(d) > 1 else None
    return {"rows": rows, "count_reduced": red_count, "count_fast": fast_count,
            "count_slow_net": red_count - fast_count, "roots_reduced": red_roots, "empirical_rate": rate}


# ------------------------------------------------------------- report

@dataclass
class SpectrumReport:
    roots: list = field(default_factory=list)
    curves: list = field(default_factory=list)
    residues: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "roots": [{"lambda": z, "multiplicity": k} for z, k in self.roots],
            "curves": [{"branch": c.branch, "theta": list(c.theta), "lambda": list(c.lam),
                        "closure_defect": c.closure_defect, "flags": list(c.flags)} for c in self.curves],
            "residues": [{"lambda_diamond": r.lambda_diamond, "residue": r.residue,
                          "inner_products": list(r.inner_products), "u_boundary": r.u_boundary,
                          "verdict": r.verdict, "scale": r.scale, "parity": r.parity} for r in self.residues],
            "verdicts": self.verdicts,
            "provenance": self.provenance,
        }
