"""命令行接口 (CLI)

解析子命令与参数，调度各数值模块，并把结果写成 CSV / JSON / 快照与 manifest。
"""

import argparse
import sys
from typing import Any, Dict

from src.dispersion.oscint import OscIntQuery, QuadControl, decay_probe, eval_I, small_t_probe
from src.dispersion.stationary import factorization_check, solve_Q, wirtinger_report
from src.dispersion.symbol_core import SpectralPoint, multiplier_m, sigma, symbol_w
from src.dispersion.xsb import XsbSpec, bilinear_energy_trend, bilinear_probe, resonance_region_probe
from src.frontend.run_config import SUBCOMMANDS, RunConfig, RunConfigParser, schema_for
from src.frontend.suite import AcceptanceSuite, emit_suite_report
from src.solver.grid import GridSpec, resolution_check
from src.solver.kp_limit import KpSign, evolve_limit_snapshots, kappa_sweep, kp_initial_data, kp_map_check
from src.solver.nv_solver import (
    NVState, evolve_tracked, initial_data, invariant_drift, invariants, kdv_reference,
)
from src.utils.artifacts import ArtifactWriter, rows_with_reason
from src.utils.error_handler import ErrorHandler, NaNDetectedError, NVLabError, UsageError
from src.utils.logger import Logger

# 导入配置文件
try:
    import config
except ImportError:
    # 如果 config.py 不存在，使用默认值
    class config:
        TOOL_NAME = "nvlab"
        TOOL_VERSION = "0.3.0"
        DEFAULT_DECAY_TIMES = [10.0 ** (3.0 * k / 7.0) for k in range(8)]


# 子命令 → 别名（与 run_config.ALIASES 一致）
_SUBCOMMAND_ALIASES = {
    "symbol": ["sym"], "roots": ["r"], "oscint": ["o"], "decay": ["d"], "evolve": ["e"],
    "invariants": ["inv"], "bilinear": ["bl"], "resonance": ["res"], "kplimit": ["kp"], "suite": ["s"],
}

_SUBCOMMAND_HELP = {
    "symbol": "色散符号 w(ξ; E)、调制 σ 与乘子 m",
    "roots": "驻点三次方程的根与分类",
    "oscint": "振荡积分 I(t, u; E) 的单点求值",
    "decay": "|I| 随时间的衰减探针",
    "evolve": "NV 方程的伪谱演化",
    "invariants": "初值的守恒量",
    "bilinear": "X^{s,b} 双线性比值探针",
    "resonance": "低-高频近共振集测度",
    "kplimit": "高能 KP 极限的残差扫描",
    "suite": "运行全部验收判据",
}


class _ArgumentParser(argparse.ArgumentParser):
    """把 argparse 的用法错误转换为 UsageError（退出码 1）"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


class NVLabCLI:
    """NV 数值实验室 CLI 类

    管理命令行参数解析、配置合并与各子命令的调度。
    """

    def __init__(self):
        """初始化CLI"""
        self.logger = Logger()
        self.error_handler = ErrorHandler()

    def run(self, args: list = None) -> int:
        """运行CLI程序

        参数:
            args: 命令行参数列表，如果为None则使用sys.argv

        返回:
            程序退出码（0 成功；2 未收敛/超差/NaN；1 用法或输入错误）
        """
        self.error_handler.reset()
        try:
            parsed = self._build_parser().parse_args(args)
            if not parsed.command:
                raise UsageError(f"missing subcommand; expected one of {', '.join(SUBCOMMANDS)}")
            self.logger = Logger(verbose=parsed.verbose, quiet=parsed.quiet)
            cfg = self._resolve(parsed)
        except NVLabError as e:
            return self.error_handler.handle_error(e)

        writer = None
        try:
            writer = ArtifactWriter(cfg.output_dir)
            handler = getattr(self, f"_cmd_{cfg.subcommand}")
            code = handler(cfg, writer)
            self._finish(cfg, writer, "ok" if code == 0 else "fail")
            return code
        except NVLabError as e:
            if writer is not None:
                self._finish(cfg, writer, e.code)
            return self.error_handler.handle_error(e)
        except Exception as e:
            return self.error_handler.handle_error(e)

    def _build_parser(self) -> argparse.ArgumentParser:
        """构建命令行参数解析器

        返回值: ArgumentParser 对象

        说明: 每个子命令的标志由 run_config 的参数模式自动生成，
              默认值为 None，以便区分"未给出"与"显式给出"。
        """
        common = _ArgumentParser(add_help=False)
        common.add_argument('--config', help='JSON 配置文档路径')
        common.add_argument('--output-dir', dest='output_dir', help='输出目录')
        common.add_argument('--seed', type=int, help='随机种子')
        common.add_argument('-v', '--verbose', action='store_true', help='输出调试信息')
        common.add_argument('-q', '--quiet', action='store_true', help='只输出警告和错误')

        parser = _ArgumentParser(prog=config.TOOL_NAME, description='NV 方程数值实验室')
        parser.add_argument('--version', action='version',
                            version=f'{config.TOOL_NAME} {config.TOOL_VERSION}')
        subparsers = parser.add_subparsers(dest='command', parser_class=_ArgumentParser)

        for name in SUBCOMMANDS:
            sub = subparsers.add_parser(name, aliases=_SUBCOMMAND_ALIASES[name], parents=[common],
                                        help=_SUBCOMMAND_HELP[name])
            for key, kind, default, help_text in schema_for(name):
                flags = [f'--{key}']
                if '_' in key:
                    flags.append(f'--{key.replace("_", "-")}')
                text = f'{help_text}（默认：{default}）'
                if kind == 'bool':
                    sub.add_argument(*flags, dest=key, action='store_const', const=True, default=None, help=text)
                else:
                    sub.add_argument(*flags, dest=key, default=None, help=text)
        return parser

    def _resolve(self, parsed) -> RunConfig:
        flags = {key: getattr(parsed, key, None) for key, _, _, _ in schema_for(parsed.command)}
        document = RunConfigParser.load_document(parsed.config) if parsed.config else None
        return RunConfigParser.resolve(parsed.command, document, flags, parsed.seed,
                                       parsed.output_dir, RunConfigParser.threads_from_env())

    def _finish(self, cfg: RunConfig, writer: ArtifactWriter, status: str) -> None:
        path = writer.write_manifest(config.TOOL_NAME, config.TOOL_VERSION, cfg.subcommand,
                                     cfg.to_record(), cfg.seed, status)
        self.logger.section(f"{cfg.subcommand} summary")
        self.logger.field("Status", status)
        self.logger.field("Artifacts", len(writer.files))
        self.logger.field("Manifest", path)
        self.logger.field("Elapsed", f"{self.logger.elapsed():.1f}s")
        self.logger.info(Logger.RULE)
        if self.error_handler.get_warning_count():
            self.error_handler.print_warnings()
        if self.error_handler.has_errors():
            self.logger.error(f"{cfg.subcommand} finished with {self.error_handler.get_error_count()} error(s)")
            self.error_handler.print_errors()
        elif status == "ok":
            self.logger.success(f"{cfg.subcommand} finished")

    def _warn(self, message: str, context: str) -> None:
        """记录警告：终端立即输出，并在运行摘要后汇总"""
        self.logger.warning(message)
        self.error_handler.add_warning(message, context)

    @staticmethod
    def _quad(p: Dict[str, Any]) -> QuadControl:
        return QuadControl(cutoff_radius=p["cutoff_radius"], richardson_levels=p["levels"],
                           tol=p["tol"], node_budget=p["node_budget"])

    @staticmethod
    def _grid(p: Dict[str, Any], threads: int) -> GridSpec:
        return GridSpec(p["nx"], p["ny"], p["Lx"], p["Ly"], p["dealias"], workers=threads)

    @staticmethod
    def _initial(p: Dict[str, Any], grid: GridSpec):
        keys = ("c", "x0", "amplitude", "sigma", "kx", "ky", "a", "d")
        return initial_data(p["preset"], grid, **{k: p[k] for k in keys})

    # ------------------------------------------------------------------
    # 子命令
    # ------------------------------------------------------------------

    def _cmd_symbol(self, cfg: RunConfig, writer: ArtifactWriter) -> int:
        p = cfg.params
        point = SpectralPoint(p["xi1"], p["xi2"], p["tau"])
        w = symbol_w(point, p["E"])
        m = multiplier_m(point)
        writer.write_json("symbol.json", {
            "xi1": point.xi1, "xi2": point.xi2, "tau": point.tau, "E": p["E"],
            "w": w.value, "at_origin_convention": w.at_origin_convention,
            "sigma": sigma(point, p["E"]), "m": [m.real, m.imag],
        })
        self.logger.info(f"w = {w.value:.17g}")
        return 0

    def _cmd_roots(self, cfg: RunConfig, writer: ArtifactWriter) -> int:
        u = cfg.params["u"]
        analysis = solve_Q(u)
        z = analysis.zeta_roots
        document = analysis.to_record()
        document["coincident_pairs"] = [list(pair) for pair in analysis.coincident_pairs]
        document["vieta"] = {"sum": z[0] + z[1] + z[2], "expected_sum": u.conjugate() / 6.0,
                             "product": z[0] * z[1] * z[2]}
        lam = cfg.params["lam"]
        if lam is not None:
            document["factorization_residual"] = factorization_check(u, lam)
            document["wirtinger"] = wirtinger_report(u, lam)
        writer.write_json("roots.json", document)
        self.logger.info(f"u = {u}: {analysis.classification.value}")
        return 0

    def _cmd_oscint(self, cfg: RunConfig, writer: ArtifactWriter) -> int:
        p = cfg.params
        query = OscIntQuery(p["t"], p["u"], p["E"], p["alpha"], p["beta"], self._quad(p))
        representations = ["xi", "lambda"] if p["representation"] == "both" else [p["representation"]]
        rows = []
        results = {}
        for rep in representations:
            res = eval_I(query, rep, strict=False)
            results[rep] = res
            ok = res.converged
            rows.append({
                "representation": rep, "t": query.t, "u_re": query.u.real, "u_im": query.u.imag,
                "E": query.E, "alpha": query.alpha, "beta": query.beta,
                "I_re": res.value.real if ok else None, "I_im": res.value.imag if ok else None,
                "abs_I": abs(res.value) if ok else None,
                "stab_err": res.stabilization_error if ok else None,
                "nodes": res.nodes_used, "reason": "" if ok else f"{res.status}:{res.reason}",
            })
        writer.write_csv("oscint.csv", rows_with_reason(rows), [
            "representation", "t", "u_re", "u_im", "E", "alpha", "beta",
            "I_re", "I_im", "abs_I", "stab_err", "nodes", "reason"])
        converged = all(r.converged for r in results.values())
        if len(results) == 2 and converged:
            gap = abs(results["xi"].value - results["lambda"].value) / abs(results["lambda"].value)
            writer.write_json("oscint_cross.json", {"relative_difference": gap, "tolerance": 1e-3,
                                                    "passed": gap <= 1e-3})
            self.logger.info(f"cross-representation difference {gap:.3e}")
        if not converged:
            self._warn("stabilization did not converge; see the reason column", cfg.subcommand)
            return 2
        return 0

    def _cmd_decay(self, cfg: RunConfig, writer: ArtifactWriter) -> int:
        p = cfg.params
        quad = self._quad(p)
        if p["small_t"]:
            t_grid = None if p["t_grid"] == list(config.DEFAULT_DECAY_TIMES) else p["t_grid"]
            report = small_t_probe(p["alpha"], p["beta"], p["u_set"], t_grid, p["E"], quad,
                                   p["eps"], p["representation"], cfg.threads)
        else:
            report = decay_probe(p["alpha"], p["beta"], p["u_set"], p["t_grid"], p["E"], quad,
                                 p["eps"], representation=p["representation"], workers=cfg.threads)
        writer.write_csv("decay.csv", rows_with_reason(report.rows), [
            "t", "u_re", "u_im", "E", "alpha", "beta", "I_re", "I_im", "abs_I", "stab_err", "reason"])
        writer.write_json("decay_fits.json", {
            "alpha": report.alpha, "beta": report.beta,
            "target_exponent": report.target_exponent, "eps": p["eps"],
            "fits": {label: fit.to_record() if fit else None for label, fit in report.fits.items()},
            "envelope": report.envelope.to_record() if report.envelope else None,
            "bounded": report.bounded,
        })
        missing = sum(1 for row in report.rows if row["abs_I"] is None)
        for label, ok in sorted(report.bounded.items()):
            if not ok:
                self._warn(f"u = {label}: compensated |I| not bounded up to factor 3", cfg.subcommand)
        if missing:
            self._warn(f"{missing} point(s) did not converge", cfg.subcommand)
        return 0 if report.all_bounded and not missing else 2

    def _cmd_evolve(self, cfg: RunConfig, writer: ArtifactWriter) -> int:
        p = cfg.params
        grid = self._grid(p, cfg.threads)
        v0 = self._initial(p, grid)
        resolution_check(v0, tol=p["tail_tol"])
        dt = p["dt"] if p["dt"] is not None else 1e-3 * grid.Lx / grid.nx
        header = {"grid": grid.to_record(), "E": p["E"], "field": "v"}
        writer.write_snapshot("v_initial", v0.values, dict(header, t=0.0))
        self.logger.info(f"evolving {p['preset']} on {grid.nx}x{grid.ny} to T = {p['T']:g} with dt = {dt:g}")
        try:
            final, rows = evolve_tracked(NVState.from_v(v0, p["E"]), p["T"], dt,
                                         p["samples"], nonlinear=not p["linear"])
        except NaNDetectedError as e:
            if e.state is not None:
                writer.write_snapshot("v_last_finite", e.state.v.values, dict(header, t=e.time))
            raise
        writer.write_snapshot("v_final", final.v.values, dict(header, t=final.t))
        writer.write_csv("invariants.csv", rows, ["t", "l1", "mass_re", "mass_im", "energy_re", "energy_im"])
        summary = {"T": final.t, "dt": dt, "steps": int(round(p["T"] / dt)), "drift": invariant_drift(rows)}
        if p["preset"] == "kdv_soliton" and not p["linear"]:
            reference = kdv_reference(grid, p["c"], p["x0"], p["E"], final.t, float(v0.values.mean()))
            diff = final.v.values - reference.values
            summary["kdv_reference_error"] = float((diff ** 2).sum() ** 0.5 / (reference.values ** 2).sum() ** 0.5)
        writer.write_json("evolve.json", summary)
        self.logger.info(f"invariant drift: {summary['drift']}")
        return 0

    def _cmd_invariants(self, cfg: RunConfig, writer: ArtifactWriter) -> int:
        p = cfg.params
        v0 = self._initial(p, self._grid(p, cfg.threads))
        report = invariants(NVState.from_v(v0, p["E"]))
        parts = report.parts
        writer.write_json("invariants.json", {
            "l1": report.l1_integral, "mass": report.mass, "energy": report.energy,
            "energy_alt": report.energy_alt,
            "parts": {"dispersive": parts.dispersive, "potential": parts.potential, "cubic": parts.cubic},
            "mass_over_l2_squared": abs(report.mass) / v0.l2_norm() ** 2,
        })
        self.logger.info(f"M = {report.mass:.6e}, H = {report.energy:.6e}")
        return 0

    def _cmd_bilinear(self, cfg: RunConfig, writer: ArtifactWriter) -> int:
        p = cfg.params
        grid = GridSpec(p["n"], p["n"], p["L"], p["L"], workers=cfg.threads)
        spec = XsbSpec(p["s"], 0.5 + p["eps"], p["eps"], p["E"])
        rows = bilinear_probe(spec, grid, p["nt"], p["T"], p["samples"], cfg.seed, cfg.threads)
        writer.write_csv("bilinear.csv", rows,
                         ["sample_id", "s", "eps", "E", "ratio", "ratio_fine", "drift", "grid"])
        if p["trend"]:
            trend = bilinear_energy_trend(p["trend"], p["s"], p["eps"], grid, p["nt"], p["T"], cfg.seed)
            writer.write_csv("bilinear_trend.csv", trend, ["E", "ratio", "envelope", "ratio_over_envelope"])
        self.logger.info(f"max drift under grid doubling: {max(r['drift'] for r in rows):.3e}")
        return 0

    def _cmd_resonance(self, cfg: RunConfig, writer: ArtifactWriter) -> int:
        p = cfg.params
        report = resonance_region_probe(p["N"], p["Nhat"], p["L"], p["Lhat"], p["E"],
                                        p["samples"], p["trials"], cfg.seed)
        writer.write_json("resonance.json", report)
        if report.flagged:
            self._warn(f"derivative lower bound ratio {report.min_derivative_ratio:.3e} below watch threshold",
                       cfg.subcommand)
        return 0

    def _cmd_kplimit(self, cfg: RunConfig, writer: ArtifactWriter) -> int:
        p = cfg.params
        grid = GridSpec(p["nx"], p["ny"], p["Lx"], p["Ly"], workers=cfg.threads)
        sign = KpSign.parse(p["sign"])
        v0 = kp_initial_data(p["preset"], grid, p["amplitude"], p["sigma"], p["c"])
        resolution_check(v0)
        sweep = kappa_sweep(v0, p["kappas"], sign, p["T"], p["dt"])
        writer.write_csv("kplimit.csv", sweep.table(),
                         ["kappa", "res_b2b", "res_b2c", "res_b2c_gap", "res_b2a", "slope_fit"])
        h = p["h"]
        t0 = max(p["T"], 2.0 * h)
        snapshots = evolve_limit_snapshots(v0, [t0 + k * h for k in range(-2, 3)], p["dt"], sign)
        report = kp_map_check(snapshots, h, sign)
        writer.write_json("kp_map.json", dict(report.to_record(), t0=t0, h=h, sign=sign.value))
        self.logger.info(f"slope of (a) residual in log kappa: {sweep.slope:.3f}")
        self.logger.info(f"{report.equation} residual {report.residual:.3e} (estimate {report.estimate:.3e})")
        return 0

    def _cmd_suite(self, cfg: RunConfig, writer: ArtifactWriter) -> int:
        quick = cfg.params["quick"]
        suite = AcceptanceSuite(quick=quick, seed=cfg.seed, workers=cfg.threads, logger=self.logger)
        results = suite.run()
        document, table = emit_suite_report(results, quick, cfg.seed)
        writer.write_json("suite_report.json", document)
        print(table)
        for result in results:
            if not result.passed:
                self.error_handler.add_error(result.status if result.status != "OK" else "TOLERANCE",
                                             result.reason or "tolerance exceeded", result.name)
        return 0 if document["overall"] == "pass" else 2


def main(args: list = None) -> int:
    """CLI的主入口函数

    参数:
        args: 命令行参数列表

    返回:
        程序退出码

    说明:
        供 main.py 或其他脚本调用。
    """
    cli = NVLabCLI()
    return cli.run(args)


if __name__ == '__main__':
    sys.exit(main())
