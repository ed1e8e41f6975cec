"""验收判据组

逐条运行 12 个验收判据，每条给出测量值、容差与通过与否。
quick 模式缩减面板但保持相同容差。报告不含计时信息，
同一种子下逐字节一致。
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import permutations
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.dispersion.oscint import (
    OscIntQuery, QuadControl, decay_probe, eval_I_lambda, eval_I_xi, linear_propagator,
    lp_norm, propagator_decay_probe, scaling_identity_check, small_t_probe, strichartz_probe,
)
from src.dispersion.stationary import Region, factorization_check, solve_Q
from src.dispersion.symbol_core import symbol_array
from src.dispersion.xsb import (
    SpaceTimeField, XsbSpec, bilinear_probe, dyadic_range, free_wave, project_QL, shell_weight, xsb_norm,
)
from src.solver.grid import GridSpec, RealField2D
from src.solver.kp_limit import KpSign, evolve_limit_snapshots, kappa_sweep, kp_initial_data, kp_map_check
from src.solver.nv_solver import (
    BlowupParams, NVState, blowup_residual, evolve_tracked, gaussian, hermitian_drift, invariant_drift,
    invariants, kdv_profile, kdv_reference, nv_rhs, real_form_rhs, recovery_identities,
    scaling_symmetry_check,
)
from src.utils.error_formatter import SuiteFormatter
from src.utils.error_handler import NVLabError

try:
    import config
except ImportError:
    class config:
        DEFAULT_SEED = 20240611
        DEFAULT_KAPPAS = [4.0, 8.0, 16.0, 32.0]
        DEFAULT_DECAY_TIMES = [10.0 ** (3.0 * k / 7.0) for k in range(8)]
        DEFAULT_SMALL_T_TIMES = [10.0 ** (-3 + 0.5 * k) for k in range(7)]


# ============================================================================
# 结果类型
# ============================================================================

@dataclass
class Check:
    """单项检查：measured 与 tolerance 按 comparison 比较"""
    name: str
    measured: Optional[float]
    tolerance: float
    comparison: str = "<="

    @property
    def passed(self) -> bool:
        if self.measured is None or not math.isfinite(self.measured):
            return False
        if self.comparison == "<=":
            return self.measured <= self.tolerance
        if self.comparison == ">=":
            return self.measured >= self.tolerance
        return self.measured == self.tolerance

    @property
    def margin(self) -> float:
        """越大越接近失败；用于挑选表中展示的那一项"""
        if not self.passed:
            return math.inf
        if self.comparison == "<=" and self.tolerance > 0:
            return self.measured / self.tolerance
        return 0.0

    def to_record(self) -> Dict[str, Any]:
        return {"name": self.name, "measured": self.measured, "tolerance": self.tolerance,
                "comparison": self.comparison, "passed": self.passed}


@dataclass
class CriterionResult:
    """一条判据的结果

    属性:
        id / name: 判据编号与名称
        checks: 组成该判据的单项检查
        status: "OK" 或错误码（NON_CONVERGED / RESOLUTION / ...）
        reason: 失败原因
        detail: 附加信息（失败查询、拟合斜率等）
    """
    id: int
    name: str
    checks: List[Check] = field(default_factory=list)
    status: str = "OK"
    reason: str = ""
    detail: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "OK" and bool(self.checks) and all(c.passed for c in self.checks)

    def headline(self) -> Optional[Check]:
        """表中展示的检查：最接近（或已经）失败的一项"""
        if not self.checks:
            return None
        return max(self.checks, key=lambda c: c.margin)

    def to_record(self) -> Dict[str, Any]:
        head = self.headline()
        return {
            "id": self.id,
            "name": self.name,
            "passed": self.passed,
            "measured": head.measured if head else None,
            "tolerance": head.tolerance if head else None,
            "comparison": head.comparison if head else "<=",
            "status": self.status,
            "reason": self.reason,
            "checks": [c.to_record() for c in self.checks],
            "detail": self.detail,
        }


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = float(np.linalg.norm(b))
    diff = float(np.linalg.norm(a - b))
    return diff / scale if scale > 0 else diff


def _q_residual(u: complex, z: complex) -> float:
    return abs(3.0 * z ** 3 - 0.5 * u.conjugate() * z * z + 0.5 * u * z - 3.0)


def _match_distance(roots: Sequence[complex], expected: Sequence[complex]) -> float:
    """最优配对下的最大距离（三根，穷举排列）"""
    return min(max(abs(r - e) for r, e in zip(roots, perm)) for perm in permutations(expected))


# ============================================================================
# 判据组
# ============================================================================

class AcceptanceSuite:
    """验收判据组

    每条判据是一个返回 CriterionResult 的方法；领域异常被转换为
    失败结果并保留错误码与上下文，其余异常继续抛出。
    """

    def __init__(self, quick: bool = False, seed: int = config.DEFAULT_SEED,
                 workers: int = 1, logger=None):
        """初始化判据组

        参数:
            quick: 缩减面板（容差不变）
            seed: 随机种子（随机场、随机 u 与 λ、双线性样本）
            workers: scipy.fft 线程数与探针线程池大小
            logger: 可选 Logger，用于逐条进度输出
        """
        self.quick = quick
        self.seed = int(seed)
        self.workers = max(1, int(workers))
        self.logger = logger
        self.criteria: List[Tuple[int, str, Callable[[], CriterionResult]]] = [
            (1, "cross-representation", self.cross_representation),
            (2, "energy scaling identity", self.energy_scaling),
            (3, "decay upper bound", self.decay_bound),
            (4, "stationary root battery", self.root_battery),
            (5, "KdV reduction", self.kdv_reduction),
            (6, "radial mass vanishing", self.radial_mass),
            (7, "blow-up closed form", self.blowup_closed_form),
            (8, "scaling symmetry", self.scaling_symmetry),
            (9, "complex/real form equivalence", self.real_form_equivalence),
            (10, "KP ansatz identities", self.kp_identities),
            (11, "X^{s,b} toolbox", self.xsb_toolbox),
            (12, "propagator properties", self.propagator_properties),
        ]

    def _grid(self, nx: int, ny: int, Lx: float, Ly: float) -> GridSpec:
        return GridSpec(nx, ny, Lx, Ly, workers=self.workers)

    def _rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream])

    def run(self, only: Optional[Sequence[int]] = None) -> List[CriterionResult]:
        """依次运行判据

        参数:
            only: 可选的判据编号子集

        返回:
            CriterionResult 列表（按编号排序）
        """
        results = []
        for cid, name, method in self.criteria:
            if only is not None and cid not in only:
                continue
            start = time.time()
            if self.logger:
                self.logger.info(f"criterion {cid}: {name}")
            try:
                result = method()
            except NVLabError as e:
                result = CriterionResult(cid, name, status=e.code, reason=str(e),
                                         detail=dict(e.detail))
            if self.logger:
                verdict = "PASS" if result.passed else "FAIL"
                self.logger.debug(f"criterion {cid} {verdict} in {time.time() - start:.1f}s")
                if result.passed:
                    self.logger.success(f"criterion {cid} ({name}) passed")
                else:
                    self.logger.warning(f"criterion {cid} ({name}) failed: {result.reason or 'tolerance'}")
            results.append(result)
        return results

    # ------------------------------------------------------------------
    # 振荡积分
    # ------------------------------------------------------------------

    def cross_representation(self) -> CriterionResult:
        ts = (1.0, 5.0) if self.quick else (1.0, 5.0, 25.0)
        us = (0j, 1 + 1j) if self.quick else (0j, 18 + 0j, 1 + 1j)
        quad = QuadControl(tol=1e-4)
        points = [(t, u) for t in ts for u in us]

        def run(point):
            q = OscIntQuery(point[0], point[1], -1.0, 0.5, 0.0, quad)
            return q, eval_I_xi(q, strict=False), eval_I_lambda(q, strict=False)

        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            evaluated = list(pool.map(run, points))

        result = CriterionResult(1, "cross-representation")
        worst = 0.0
        failed_queries = []
        for q, xi, lam in evaluated:
            if not (xi.converged and lam.converged):
                failed_queries.append({"t": q.t, "u": [q.u.real, q.u.imag], "alpha": q.alpha,
                                       "xi": f"{xi.status}:{xi.reason}",
                                       "lambda": f"{lam.status}:{lam.reason}"})
                continue
            worst = max(worst, abs(xi.value - lam.value) / abs(lam.value))
        result.checks.append(Check("max |I_xi - I_lambda| / |I|", worst, 1e-3))
        if failed_queries:
            result.status = "NON_CONVERGED"
            result.reason = "STABILIZATION"
            result.detail["queries"] = failed_queries
        result.detail["panel"] = {"t": list(ts), "u": [[u.real, u.imag] for u in us]}
        return result

    def energy_scaling(self) -> CriterionResult:
        cases = [(-4.0, 2.0, 8 + 0j, 0.5)]
        if not self.quick:
            cases.append((-0.25, 4.0, 0.1j, 0.0))
        quad = QuadControl(tol=1e-4)
        result = CriterionResult(2, "energy scaling identity")
        for E, t, u, alpha in cases:
            gap = scaling_identity_check(t, u, E, alpha, 0.0, quad)
            result.checks.append(Check(f"E={E:g} t={t:g} u={u}", gap, 1e-3))
        return result

    def decay_bound(self) -> CriterionResult:
        alphas = (0.5,) if self.quick else (0.0, 0.5, 0.9)
        betas = (0.0,) if self.quick else (0.0, 5.0)
        u_set = [0j, 18 + 0j] if self.quick else [0j, 18 + 0j, -6 + 0j, 1 + 1j, 100 + 0j]
        result = CriterionResult(3, "decay upper bound")
        unbounded, missing = [], 0
        for alpha in alphas:
            for beta in betas:
                report = decay_probe(alpha, beta, u_set, config.DEFAULT_DECAY_TIMES,
                                     workers=self.workers)
                missing += sum(1 for row in report.rows if row["abs_I"] is None)
                unbounded += [f"alpha={alpha:g} beta={beta:g} u={k}"
                              for k, ok in sorted(report.bounded.items()) if not ok]
            short = small_t_probe(alpha, 0.0, u_set[:1] if self.quick else u_set,
                                  config.DEFAULT_SMALL_T_TIMES, workers=self.workers)
            missing += sum(1 for row in short.rows if row["abs_I"] is None)
            unbounded += [f"small-t alpha={alpha:g} u={k}"
                          for k, ok in sorted(short.bounded.items()) if not ok]
        result.checks.append(Check("series not bounded up to factor 3", float(len(unbounded)), 0.0, "=="))
        result.checks.append(Check("non-converged points", float(missing), 0.0, "=="))
        if unbounded:
            result.detail["unbounded"] = unbounded
        return result

    # ------------------------------------------------------------------
    # 驻点
    # ------------------------------------------------------------------

    def root_battery(self) -> CriterionResult:
        result = CriterionResult(4, "stationary root battery")
        triple = solve_Q(18)
        result.checks.append(Check("u=18 residual", max(_q_residual(18 + 0j, z) for z in triple.zeta_roots), 1e-8))
        result.checks.append(Check("u=18 triple root at 1", max(abs(z - 1) for z in triple.zeta_roots), 1e-4))
        result.checks.append(Check("u=18 boundary", float(triple.classification is not Region.BOUNDARY), 0.0, "=="))
        double = solve_Q(-6)
        result.checks.append(Check("u=-6 residual", max(_q_residual(-6 + 0j, z) for z in double.zeta_roots), 1e-8))
        result.checks.append(Check("u=-6 roots {1,-1,-1}", _match_distance(double.zeta_roots, (1, -1, -1)), 1e-6))
        cube = solve_Q(0)
        unity = [complex(math.cos(2 * math.pi * k / 3), math.sin(2 * math.pi * k / 3)) for k in range(3)]
        result.checks.append(Check("u=0 cube roots of unity", _match_distance(cube.zeta_roots, unity), 1e-8))

        rng = self._rng(4)
        n_vieta = 1000 if self.quick else 10_000
        us = 30.0 * (rng.uniform(-1, 1, n_vieta) + 1j * rng.uniform(-1, 1, n_vieta))
        sum_err = prod_err = 0.0
        for u in us:
            z = solve_Q(u).zeta_roots
            sum_err = max(sum_err, abs(sum(z) - u.conjugate() / 6.0) / (1.0 + abs(u) / 6.0))
            prod_err = max(prod_err, abs(z[0] * z[1] * z[2] - 1.0))
        result.checks.append(Check("Vieta sum", sum_err, 1e-9))
        result.checks.append(Check("Vieta product", prod_err, 1e-9))

        n_fact = 200 if self.quick else 1000
        us = 30.0 * (rng.uniform(-1, 1, n_fact) + 1j * rng.uniform(-1, 1, n_fact))
        lams = rng.uniform(0.5, 2.0, n_fact) * np.exp(1j * rng.uniform(0, 2 * np.pi, n_fact))
        fact = max(factorization_check(u, lam) for u, lam in zip(us, lams))
        result.checks.append(Check("factorization residual", fact, 1e-8))
        return result

    # ------------------------------------------------------------------
    # 求解器
    # ------------------------------------------------------------------

    def kdv_reduction(self) -> CriterionResult:
        grid = self._grid(256, 16, 40.0, 10.0)
        c, x0, E = 1.0, -4.0, -1.0
        T = 0.25 if self.quick else 1.0
        dt = 1e-3 * grid.Lx / grid.nx
        v0 = kdv_profile(grid, c, x0)
        mean = float(v0.values.mean())
        final, rows = evolve_tracked(NVState.from_v(v0, E), T, dt, samples=10)
        reference = kdv_reference(grid, c, x0, E, final.t, mean)
        drift = invariant_drift(rows)
        result = CriterionResult(5, "KdV reduction")
        result.checks.append(Check("relative L2 error at T", _rel(final.v.values, reference.values), 1e-3))
        result.checks.append(Check("invariant drift", max(drift.values()), 1e-6))
        result.detail.update({"T": final.t, "dt": dt, "drift": drift})
        return result

    def radial_mass(self) -> CriterionResult:
        grid = self._grid(128, 128, 20.0, 20.0)
        v0 = gaussian(grid, 1.0, 1.0)
        mass = invariants(NVState.from_v(v0, -1.0)).mass
        result = CriterionResult(6, "radial mass vanishing")
        result.checks.append(Check("|M| / ||v||^2", abs(mass) / v0.l2_norm() ** 2, 1e-10))
        return result

    def blowup_closed_form(self) -> CriterionResult:
        result = CriterionResult(7, "blow-up closed form")
        result.checks.append(Check("relative residual at t=0", blowup_residual(BlowupParams(1.0, 1.0, 1.0)), 1e-5))
        return result

    def scaling_symmetry(self) -> CriterionResult:
        grid = self._grid(64, 64, 20.0, 20.0)
        v0 = gaussian(grid, 0.5, 1.0)
        scales = (2.0,) if self.quick else (0.5, 2.0)
        T = 0.05 if self.quick else 0.1
        result = CriterionResult(8, "scaling symmetry")
        for lam in scales:
            result.checks.append(Check(f"lambda={lam:g}", scaling_symmetry_check(v0, -1.0, lam, T, 1e-3), 1e-6))
        return result

    def _band_limited(self, grid: GridSpec, rng: np.random.Generator, band: int = 8) -> RealField2D:
        mx, my = grid.mode_indices()
        inside = (np.abs(mx) <= band) & (np.abs(my) <= band)
        coeffs = (rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)) * inside
        values = grid.ifft(coeffs).real
        return RealField2D(grid, values / np.abs(values).max())

    def real_form_equivalence(self) -> CriterionResult:
        grid = self._grid(64, 64, 20.0, 20.0)
        count = 5 if self.quick else 20
        rhs_gap = recovery = 0.0
        for k in range(count):
            v = self._band_limited(grid, self._rng(900 + k))
            state = NVState.from_v(v, -1.0)
            rhs_gap = max(rhs_gap, _rel(real_form_rhs(state).values, nv_rhs(state).values))
            recovery = max(recovery, *recovery_identities(v).values())
        result = CriterionResult(9, "complex/real form equivalence")
        result.checks.append(Check("complex vs real RHS", rhs_gap, 1e-10))
        result.checks.append(Check("recovery identities", recovery, 1e-10))
        off_centre = gaussian(self._grid(32, 32, 20.0, 20.0), 0.5, 1.0, 1.5, -2.0)
        drift = hermitian_drift(NVState.from_v(off_centre, -1.0), 1e-3, 1000)
        result.checks.append(Check("hermitian drift over 1000 steps", drift, 1e-11))
        result.detail["fields"] = count
        return result

    def kp_identities(self) -> CriterionResult:
        grid = self._grid(64, 64, 40.0, 40.0)
        v0 = kp_initial_data("dx_gaussian", grid)
        signs = (KpSign.MINUS,) if self.quick else (KpSign.MINUS, KpSign.PLUS)
        result = CriterionResult(10, "KP ansatz identities")
        for sign in signs:
            sweep = kappa_sweep(v0, config.DEFAULT_KAPPAS, sign, T=0.1, dt=1e-3)
            label = sign.value
            result.checks.append(Check(f"{label} (b) residual", max(r["res_b2b"] for r in sweep.rows), 1e-12))
            result.checks.append(Check(f"{label} (c) closed-form gap", max(r["res_b2c_gap"] for r in sweep.rows), 1e-12))
            result.checks.append(Check(f"{label} (a) slope in log kappa", sweep.slope, -0.7))
            result.detail[f"{label}_slope"] = sweep.slope

            h = 0.01
            times = [0.05 + k * h for k in range(-2, 3)]
            report = kp_map_check(evolve_limit_snapshots(v0, times, 1e-3, sign), h, sign)
            result.checks.append(Check(f"{label} {report.equation} residual", report.residual,
                                       10.0 * report.estimate + 1e-9))
            result.detail[f"{label}_kp_map"] = report.to_record()
        return result

    # ------------------------------------------------------------------
    # X^{s,b} 与传播子
    # ------------------------------------------------------------------

    def xsb_toolbox(self) -> CriterionResult:
        result = CriterionResult(11, "X^{s,b} toolbox")
        s = np.linspace(0.0, 64.0, 20001)
        total = sum(shell_weight(s, N) for N in dyadic_range(64.0))
        result.checks.append(Check("partition of unity", float(np.abs(total - 1.0).max()), 1e-12))

        grid = self._grid(8, 8, 2.0 * math.pi, 2.0 * math.pi)
        nt, T, E = 16, math.pi, -1.0
        spec = XsbSpec(0.75, 0.6, 0.05, E)
        X, Y = grid.mesh()
        t = T * np.arange(nt) / nt
        samples = np.exp(1j * Y)[None] * np.exp(-2j * t)[:, None, None]
        f = SpaceTimeField(grid, T, samples, "periodic")
        sig = 2.0 - float(symbol_array(0.0, 1.0, E))
        closed = math.sqrt(T * grid.Lx * grid.Ly) * (1.0 + sig * sig) ** (spec.b / 2.0) * 2.0 ** (spec.s / 2.0)
        result.checks.append(Check("single-mode norm", abs(xsb_norm(f, spec) - closed) / closed, 1e-10))
        wave = free_wave(np.cos(X), grid, E, nt, math.pi / 4.0, "periodic")
        leak = _rel(project_QL(wave, 1, E).values, wave.values)
        result.checks.append(Check("free wave outside the L=1 shell", leak, 1e-12))

        rows = bilinear_probe(XsbSpec(0.75, 0.0, 0.05, E), self._grid(16, 16, 4.0 * math.pi, 4.0 * math.pi),
                              32, 4.0, samples=5 if self.quick else 20, seed=self.seed, workers=self.workers)
        finite = all(math.isfinite(r["ratio"]) and math.isfinite(r["ratio_fine"]) for r in rows)
        result.checks.append(Check("bilinear ratio finite", float(not finite), 0.0, "=="))
        result.checks.append(Check("bilinear drift under doubling", max(r["drift"] for r in rows), 0.1))
        return result

    def propagator_properties(self) -> CriterionResult:
        result = CriterionResult(12, "propagator properties")
        grid = self._grid(128, 128, 40.0, 40.0)
        v0 = gaussian(grid, 1.0, 1.0)
        vt = linear_propagator(v0.values, grid, -1.0, 1.0)
        l2_0 = lp_norm(v0.values, grid.cell_area, 2.0)
        result.checks.append(Check("L2 isometry", abs(lp_norm(vt, grid.cell_area, 2.0) - l2_0) / l2_0, 1e-12))
        strichartz = strichartz_probe(v0, 0.0, 0.5, -1.0, np.linspace(0.0, 2.0, 17))
        finite = all(math.isfinite(strichartz[key]) for key in ("mixed_ratio", "l4_ratio"))
        result.checks.append(Check("Strichartz ratios finite", float(not finite), 0.0, "=="))
        result.detail["strichartz"] = strichartz

        fine = self._grid(1024, 1024, 80.0, 80.0)
        table = propagator_decay_probe(gaussian(fine, 1.0, 0.25), 0.0, 1.0, -1.0,
                                       [2.0 ** -k for k in range(3, -1, -1)])
        result.checks.append(Check("sup-norm decay exponent", table.fitted_exponent, -0.6))
        result.detail["sup_norm"] = [{"t": r["t"], "norm": r["norm_p"]} for r in table.rows]
        return result


# ============================================================================
# 报告
# ============================================================================

def emit_suite_report(results: Sequence[CriterionResult], quick: bool = False,
                      seed: Optional[int] = None) -> Tuple[Dict[str, Any], str]:
    """生成机器可读报告与终端表格

    参数:
        results: 判据结果列表
        quick: 是否为缩减面板
        seed: 随机种子（回显）

    返回:
        (JSON 文档, 表格字符串)；文档不含计时，同配置同种子下逐字节一致
    """
    records = [r.to_record() for r in results]
    overall = "pass" if records and all(r["passed"] for r in records) else "fail"
    document = {
        "overall": overall,
        "quick": quick,
        "seed": seed,
        "passed": sum(1 for r in records if r["passed"]),
        "total": len(records),
        "criteria": records,
    }
    formatter = SuiteFormatter(records)
    table = "\n\n".join([formatter.format_table()] + formatter.format_failures())
    return document, table
