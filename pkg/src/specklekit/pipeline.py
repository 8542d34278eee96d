"""End-to-end despeckling: transform, group, solve, aggregate, invert.

The run is fully deterministic given the input bytes and the configuration,
and every run produces a manifest capturing the config snapshot, the data
actually derived along the way (selected exponent, standardization, solver
behaviour, coverage), and the no-reference metrics of the result against its
input. Writing the manifest next to the output is what makes a run
reproducible: feeding it back through ``load_config`` replays the exact
configuration.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateInputError, DomainError
from .metrics import MetricReport, epd_roa, epi, mean_intensity, sqi
from .patches import aggregate, block_match, extract_references
from .raster import Raster
from .sparse import (
    AdmmControls,
    build_weights,
    reconstruct,
    solve_weighted_lasso_admm,
    svd_dictionary,
    unit_weights,
)
from .speckle import estimate_patch_sigma
from .transform import select_lambda, yeo_johnson, yeo_johnson_inverse

__all__ = ["PipelineConfig", "RunManifest", "despeckle", "load_config"]


@dataclass
class PipelineConfig:
    """Every tunable of the despeckling run.

    ``use_transform`` switches the Gaussianizing transform on or off and
    ``use_weights`` does the same for both weight vectors; the four
    combinations are the standard ablation rows. ``standardize`` controls
    whether the transformed image is mapped back to the scale of the log
    image by matching robust noise levels ("noise") or left as produced
    ("none"); matching keeps one ``c`` meaningful across images and
    exponents.
    """

    patch_size: int = 16
    stack_count: int = 10
    stride: int = 4
    search_window: int = 40
    c: float = 1.5
    lambda_min: float = -2.0
    lambda_max: float = 4.0
    lambda_step: float = 0.01
    admm_rho: float = 1.0
    admm_max_iters: int = 200
    admm_tol_primal: float = 1e-8
    admm_tol_dual: float = 1e-8
    use_transform: bool = True
    use_weights: bool = True
    seed: int = 0
    s_floor: float = 1e-6
    log_epsilon_factor: float = 1e-3
    standardize: str = "noise"
    record_timings: bool = False

    def validate(self) -> None:
        if self.patch_size < 2:
            raise ConfigError("patch_size must be at least 2")
        if self.stack_count < 1:
            raise ConfigError("stack_count must be at least 1")
        if self.use_weights and self.stack_count < 2:
            raise ConfigError(
                "per-column noise weighting needs stack_count >= 2; "
                "set use_weights = false for single-patch stacks"
            )
        if self.stride < 1:
            raise ConfigError("stride must be at least 1")
        if self.search_window < self.patch_size:
            raise ConfigError("search_window must be at least patch_size")
        if self.c < 0:
            raise ConfigError("c must be non-negative")
        if self.lambda_step <= 0:
            raise ConfigError("lambda_step must be positive")
        if self.lambda_min > self.lambda_max:
            raise ConfigError("lambda_min must not exceed lambda_max")
        if self.standardize not in ("noise", "none"):
            raise ConfigError("standardize must be 'noise' or 'none'")
        if self.s_floor <= 0:
            raise ConfigError("s_floor must be positive")
        if self.log_epsilon_factor <= 0:
            raise ConfigError("log_epsilon_factor must be positive")
        try:
            self.admm_controls().validate()
        except DomainError as exc:
            raise ConfigError(str(exc)) from None

    def lambda_grid(self) -> np.ndarray:
        count = int(round((self.lambda_max - self.lambda_min) / self.lambda_step)) + 1
        return np.linspace(self.lambda_min, self.lambda_max, count)

    def admm_controls(self) -> AdmmControls:
        return AdmmControls(
            rho=self.admm_rho,
            max_iters=self.admm_max_iters,
            tol_primal=self.admm_tol_primal,
            tol_dual=self.admm_tol_dual,
        )

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name: f.type for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {
            key: _coerce(key, known[key], value) for key, value in data.items()
        }
        return cls(**kwargs)


_TRUE_WORDS = {"true", "1", "yes", "on"}
_FALSE_WORDS = {"false", "0", "no", "off"}


def _coerce(key: str, type_name: str, value):
    """Convert ``value`` (native or string) to the field's declared type."""
    base = type_name.split("|")[0].strip() if isinstance(type_name, str) else type_name
    if base == "bool":
        if isinstance(value, bool):
            return value
        if isinstance(value, str):
            word = value.strip().lower()
            if word in _TRUE_WORDS:
                return True
            if word in _FALSE_WORDS:
                return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    if base == "int":
        if isinstance(value, bool):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        if isinstance(value, int):
            return value
        if isinstance(value, str):
            try:
                return int(value.strip())
            except ValueError:
                raise ConfigError(f"{key}: expected an integer, got {value!r}") from None
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if base == "float":
        if isinstance(value, bool):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value.strip())
            except ValueError:
                raise ConfigError(f"{key}: expected a number, got {value!r}") from None
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if isinstance(value, str):
        return value.strip()
    raise ConfigError(f"{key}: expected a string, got {value!r}")


def load_config(path) -> PipelineConfig:
    """Read a configuration from flat ``key = value`` text or JSON.

    A JSON object may either be a plain config mapping or a full run
    manifest, in which case its ``config`` section is used; that is what
    makes ``despeckle --config previous-manifest.json`` replay a run.
    """
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if isinstance(data.get("config"), dict):
            data = data["config"]
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object of settings")
        return PipelineConfig.from_dict(data)

    settings: dict = {}
    names = {f.name for f in fields(PipelineConfig)}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {number}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in names:
            raise ConfigError(f"{path}: line {number}: unknown setting {key!r}")
        settings[key] = value.strip()
    try:
        return PipelineConfig.from_dict(settings)
    except ConfigError as exc:
        # attach the line for single-line diagnostics where possible
        for number, raw in enumerate(text.splitlines(), start=1):
            key = raw.split("#", 1)[0].partition("=")[0].strip()
            if key and f"{key}:" in str(exc):
                raise ConfigError(f"{path}: line {number}: {exc}") from None
        raise


@dataclass
class RunManifest:
    """Everything recorded about one despeckling run."""

    config: dict
    input_sha256: str
    height: int
    width: int
    selected_lambda: float | None
    log_epsilon: float
    standardization: dict | None
    lambda_fallback: bool
    degenerate_passthrough: bool
    group_count: int
    padded_groups: int
    solver: dict
    coverage: dict
    metrics: dict
    warnings: list
    timings: dict
    record_timings: bool

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "input": {
                "sha256": self.input_sha256,
                "height": self.height,
                "width": self.width,
            },
            "transform": {
                "selected_lambda": self.selected_lambda,
                "log_epsilon": self.log_epsilon,
                "standardization": self.standardization,
                "lambda_fallback": self.lambda_fallback,
            },
            "degenerate_passthrough": self.degenerate_passthrough,
            "groups": {
                "count": self.group_count,
                "padded": self.padded_groups,
                "coverage": self.coverage,
            },
            "solver": self.solver,
            "metrics": self.metrics,
            "warnings": self.warnings,
        }
        if self.record_timings:
            payload["timings"] = self.timings
        return json.dumps(payload, indent=2) + "\n"


def _noise_scale(img: np.ndarray) -> float:
    """Robust noise level from horizontal first differences.

    Differencing cancels smooth scene content; the median absolute deviation
    of the differences, rescaled to the Gaussian convention, estimates the
    per-pixel noise scale times sqrt(2).
    """
    diffs = np.diff(img, axis=1).ravel()
    mad = np.median(np.abs(diffs - np.median(diffs)))
    return float(1.4826 * mad / math.sqrt(2.0))


def _no_reference_metrics(out: Raster, noisy: Raster) -> dict:
    return MetricReport(
        epi=epi(out, noisy),
        epd_h=epd_roa(out, noisy, "h"),
        epd_v=epd_roa(out, noisy, "v"),
        sqi=sqi(out, noisy),
        mean_intensity=mean_intensity(out),
    ).to_dict()


def despeckle(
    noisy: Raster,
    config: PipelineConfig | None = None,
    threads: int = 1,
) -> tuple[Raster, RunManifest]:
    """Despeckle an intensity raster and report how it was done.

    The image is always taken to the log domain first. With
    ``use_transform`` on, a Yeo-Johnson exponent is selected on the log
    pixels and applied, optionally followed by the standardizing affine map;
    groups of similar patches are then denoised independently by sparse
    coding and averaged back. The inverse chain exponentiates and clamps at
    zero, so the output is a valid intensity image of the same size.

    ``threads`` sets the worker count for the per-group solves; it never
    affects the output bytes, only wall time.
    """
    config = config or PipelineConfig()
    config.validate()
    if not isinstance(noisy, Raster):
        noisy = Raster(np.asarray(noisy, dtype=np.float64))
    noisy.require_intensity()
    threads = max(1, int(threads))

    timings: dict = {}
    clock = time.perf_counter
    t_start = clock()
    digest = hashlib.sha256(noisy.data.tobytes()).hexdigest()
    warnings: list[str] = []

    peak = float(noisy.data.max())
    if peak == 0.0:
        out = Raster(noisy.data.copy())
        warnings.append("input image is constant zero; returned unchanged")
        total = noisy.data.size
        timings["total_s"] = clock() - t_start
        manifest = RunManifest(
            config=config.to_dict(),
            input_sha256=digest,
            height=noisy.height,
            width=noisy.width,
            selected_lambda=None,
            log_epsilon=float(config.log_epsilon_factor),
            standardization=None,
            lambda_fallback=False,
            degenerate_passthrough=True,
            group_count=0,
            padded_groups=0,
            solver={
                "total_iterations": 0,
                "non_converged_groups": 0,
                "max_primal_residual": 0.0,
                "max_dual_residual": 0.0,
            },
            coverage={
                "total_pixels": int(total),
                "covered_pixels": 0,
                "uncovered_pixels": int(total),
                "coverage_fraction": 0.0,
            },
            metrics=_no_reference_metrics(out, noisy),
            warnings=warnings,
            timings=timings,
            record_timings=config.record_timings,
        )
        return out, manifest

    # forward: log always, exponent and standardization only when asked
    t0 = clock()
    eps = config.log_epsilon_factor * peak
    log_img = np.log(noisy.data + eps)
    lam: float | None = None
    lambda_fallback = False
    affine: tuple[float, float, float] | None = None
    std_report: dict | None = None
    work = log_img
    if config.use_transform:
        try:
            lam = select_lambda(log_img.ravel(), config.lambda_grid())
        except DegenerateInputError:
            lam = 1.0
            lambda_fallback = True
            warnings.append(
                "log image is constant; exponent selection degenerate, "
                "using the identity exponent"
            )
        transformed = yeo_johnson(log_img, lam)
        if config.standardize == "noise":
            mu_log = float(log_img.mean())
            scale_log = _noise_scale(log_img)
            mu_tr = float(transformed.mean())
            scale_tr = _noise_scale(transformed)
            gain = scale_log / scale_tr if scale_tr > 0 else 1.0
            work = (transformed - mu_tr) * gain + mu_log
            affine = (mu_log, mu_tr, gain)
            std_report = {
                "mode": "noise",
                "log_mean": mu_log,
                "log_noise_scale": scale_log,
                "transformed_mean": mu_tr,
                "transformed_noise_scale": scale_tr,
                "gain": float(gain),
            }
        else:
            work = transformed
            std_report = {"mode": "none"}
    timings["transform_s"] = clock() - t0

    # group and solve, one task per reference row
    t0 = clock()
    refs = extract_references(work, config.patch_size, config.stride)
    row_tasks: list[list[tuple[int, int]]] = []
    for ref in refs:
        if row_tasks and row_tasks[-1][0][0] == ref[0]:
            row_tasks[-1].append(ref)
        else:
            row_tasks.append([ref])
    controls = config.admm_controls()

    def process_row(row_refs):
        chunk = []
        for ref in row_refs:
            group = block_match(
                work, ref, config.patch_size, config.stack_count,
                config.search_window,
            )
            dictionary = svd_dictionary(group.patches)
            if config.use_weights:
                group.sigmas = estimate_patch_sigma(group.patches)
                weights = build_weights(
                    group.sigmas, dictionary.singular_values, config.s_floor
                )
            else:
                weights = unit_weights(dictionary.rank, group.k)
            solved = solve_weighted_lasso_admm(
                dictionary, group.patches, weights, config.c, controls
            )
            chunk.append((group, reconstruct(dictionary, solved.coeffs), solved))
        return chunk

    if threads == 1:
        chunks = [process_row(row) for row in row_tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(process_row, row_tasks))
    solved_groups = [item for chunk in chunks for item in chunk]
    timings["group_solve_s"] = clock() - t0

    t0 = clock()
    estimates = [(group, values) for group, values, _ in solved_groups]
    agg, coverage = aggregate(estimates, work.shape, fallback=work)
    if coverage["uncovered_pixels"]:
        warnings.append(
            f"{coverage['uncovered_pixels']} pixels fell outside every patch "
            "and were copied from the transformed input"
        )
    timings["aggregate_s"] = clock() - t0

    # inverse chain back to intensities
    t0 = clock()
    restored = agg
    if config.use_transform:
        if affine is not None:
            mu_log, mu_tr, gain = affine
            restored = (restored - mu_log) / gain + mu_tr
        if lam < 0:
            restored = np.minimum(restored, (-1.0 / lam) * (1 - 1e-9))
        if lam > 2:
            restored = np.maximum(restored, (1.0 / (2 - lam)) * (1 - 1e-9))
        restored = yeo_johnson_inverse(restored, lam)
    out = Raster(np.maximum(np.exp(restored) - eps, 0.0))
    timings["inverse_s"] = clock() - t0

    results = [solved for _, _, solved in solved_groups]
    non_converged = sum(1 for r in results if not r.converged)
    if non_converged:
        warnings.append(
            f"{non_converged} of {len(results)} group solves stopped at the "
            "iteration cap before the residual tolerances"
        )
    solver_stats = {
        "total_iterations": int(sum(r.iterations for r in results)),
        "non_converged_groups": int(non_converged),
        "max_primal_residual": float(max(r.primal_residual for r in results)),
        "max_dual_residual": float(max(r.dual_residual for r in results)),
    }

    t0 = clock()
    metrics = _no_reference_metrics(out, noisy)
    timings["metrics_s"] = clock() - t0
    timings["total_s"] = clock() - t_start

    manifest = RunManifest(
        config=config.to_dict(),
        input_sha256=digest,
        height=noisy.height,
        width=noisy.width,
        selected_lambda=None if lam is None else float(lam),
        log_epsilon=float(eps),
        standardization=std_report,
        lambda_fallback=lambda_fallback,
        degenerate_passthrough=False,
        group_count=len(solved_groups),
        padded_groups=int(sum(1 for g, _, _ in solved_groups if g.padded)),
        solver=solver_stats,
        coverage=coverage,
        metrics=metrics,
        warnings=warnings,
        timings=timings,
        record_timings=config.record_timings,
    )
    return out, manifest
