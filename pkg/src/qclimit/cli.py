"""Command line: run pipeline stages from a config and write flat-file artifacts.

    qclimit poles --g 0.05 --out run/
    qclimit scenario run configs/flat_band.json --out run/ --format json

Every run writes ``manifest.json`` listing each artifact with its stage,
parameters and sha256.  A failing stage is named on stderr, the exit code
is 2 and the manifest keeps the artifacts written so far with
``"status": "failed"``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import DEFAULT_MODEL, SCHEMA_VERSION, ScenarioConfig, load_config
from .errors import QCLimitError

STAGE_ORDER = ("poles", "evolve", "timescales", "modes", "wigner", "trajectory", "classical")


# ------------------------------------------------------------------ emit


@dataclass
class Artifact:
    name: str
    columns: list
    rows: list
    meta: dict = field(default_factory=dict)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if np.isfinite(v) else str(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_json_value(x) for x in v]
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    return v


def emit(artifact: Artifact, fmt: str, directory) -> Path:
    """Write ``artifact`` as CSV (header row, 17 significant digits) or JSON."""
    directory = Path(directory)
    path = directory / f"{artifact.name}.{fmt}"
    try:
        directory.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            lines = [f"# {k}={_fmt(v)}" for k, v in artifact.meta.items()]
            lines.append(",".join(artifact.columns))
            lines += [",".join(_fmt(v) for v in row) for row in artifact.rows]
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        elif fmt == "json":
            body = {"columns": list(artifact.columns), "meta": _json_value(artifact.meta),
                    "rows": [_json_value(list(r)) for r in artifact.rows]}
            path.write_text(json.dumps(body, indent=1) + "\n", encoding="utf-8")
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def phase_space_artifact(name: str, fn, extra: dict | None = None) -> Artifact:
    g = fn.grid
    x, p = g.mesh()
    vals = fn.values
    cplx = np.iscomplexobj(vals) and np.max(np.abs(np.imag(vals))) > 0
    meta = {"x_min": g.x_min, "x_max": g.x_max, "p_min": g.p_min, "p_max": g.p_max,
            "n_x": g.n_x, "n_p": g.n_p, "hbar": g.hbar, "kind": fn.kind, "order": "row-major"}
    meta.update(extra or {})
    cols = ["x", "p", "re", "im"] if cplx else ["x", "p", "value"]
    flat = [x.ravel(), p.ravel(), np.real(vals).ravel()] + ([np.imag(vals).ravel()] if cplx else [])
    return Artifact(name, cols, list(zip(*flat)), meta)


def rle_rows(mask: np.ndarray, label) -> list:
    """(label, row, start, length) runs of True cells, row by row."""
    rows = []
    for r, line in enumerate(np.asarray(mask, dtype=np.int8)):
        d = np.diff(np.concatenate([[0], line, [0]]))
        starts = np.flatnonzero(d == 1)
        ends = np.flatnonzero(d == -1)
        rows += [(label, r, int(s), int(e - s)) for s, e in zip(starts, ends)]
    return rows


# ---------------------------------------------------------------- stages


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class Runner:
    """Sequential stage execution with shared intermediate results."""

    def __init__(self, cfg: ScenarioConfig, out, fmt: str = "csv"):
        from .scenarios import BandModel

        self.cfg = cfg
        self.out = Path(out)
        self.fmt = fmt
        self.model = BandModel.from_config(cfg.model)
        self.rng = np.random.default_rng(cfg.seed)
        self.records: list[dict] = []
        self._pole = None
        self._qubit = None

    # shared pieces
    @property
    def pole(self):
        if self._pole is None:
            self._pole = self.model.pole(self.cfg.tolerance("pole"))
        return self._pole

    @property
    def qubit(self):
        if self._qubit is None:
            from .scenarios import qubit_scenario

            o = self.cfg.option
            self._qubit = qubit_scenario(self.model, o("excited_population"), o("mode_span"),
                                         o("mode_samples"))
        return self._qubit

    def write(self, stage: str, art: Artifact, sub: str = "", params: dict | None = None):
        path = emit(art, self.fmt, self.out / sub if sub else self.out)
        self.records.append({"path": str(path.relative_to(self.out)), "stage": stage,
                             "params": _json_value(params or {})})
        return path

    def write_json(self, stage: str, name: str, data: dict, sub: str = ""):
        d = self.out / sub if sub else self.out
        d.mkdir(parents=True, exist_ok=True)
        path = d / f"{name}.json"
        path.write_text(json.dumps(_json_value(data), indent=1, sort_keys=True) + "\n",
                        encoding="utf-8")
        self.records.append({"path": str(path.relative_to(self.out)), "stage": stage,
                             "params": {}})
        return path

    def run_stage(self, stage: str, sub: str = "", params: dict | None = None):
        try:
            getattr(self, f"stage_{stage}")(sub, params or {})
        except (QCLimitError, ValueError, ArithmeticError, OSError, np.linalg.LinAlgError) as exc:
            raise StageError(stage, exc) from exc

    # individual stages
    def stage_poles(self, sub, params):
        from .poles import pole_ladder

        n = int(self.cfg.option("ladder"))
        ladder = pole_ladder(self.pole, n)
        t_r = self.model.hbar / self.pole.gamma
        rows = [(k + 1, p.omega, p.gamma, t_r) for k, p in enumerate(ladder)]
        self.write("poles", Artifact("poles", ["n", "omega", "gamma", "t_R"], rows,
                                     {"units": "energy", "hbar": self.model.hbar}), sub, params)

    def stage_evolve(self, sub, params):
        from .scenarios import golden_rule

        o = self.cfg.option
        res = golden_rule(self.model, o("span"), o("n_times"))
        prob = np.abs(res.survival) ** 2
        rows = list(zip(res.times, res.survival.real, res.survival.imag, prob))
        self.write("evolve", Artifact("survival", ["t", "re_A", "im_A", "prob"], rows,
                                      {"gamma_pole": res.gamma_pole, "gamma_fit": res.gamma_fit}),
                   sub, params)

    def stage_timescales(self, sub, params):
        from .scenarios import pair_decoherence

        rows = []
        for L in self.cfg.option("separations"):
            r = pair_decoherence(float(L), self.model)
            rows.append((r.separation, r.t_d, r.t_r, r.ratio, r.predicted_ratio))
        self.write("timescales", Artifact("timescales",
                                          ["L", "t_D", "t_R", "t_D_over_t_R", "predicted"],
                                          rows), sub, params)

    def stage_modes(self, sub, params):
        run = self.qubit
        rows = []
        for name, dec in zip(("sx", "sy", "sz"), run.modeset.decomps):
            for i, m in enumerate(dec.modes):
                rows.append((name, i, m.amplitude, m.phase, m.freq, m.gamma))
        self.write("modes", Artifact("modes", ["observable", "mode", "amplitude", "phase",
                                               "freq", "gamma"], rows,
                                     {"gamma_eff": run.gamma_eff, "t_D": run.t_d,
                                      "t_R": run.t_r, "slow_modes": run.slow_count}), sub, params)
        late = run.times > run.t_d
        rows = list(zip(run.times, run.distances, run.repair))
        self.write("modes", Artifact("privileged", ["t", "trace_distance", "repair"], rows,
                                     {"max_distance_after_t_D": float(run.distances[late].max())}),
                   sub, params)

    def stage_wigner(self, sub, params):
        from .scenarios import oscillator_grid
        from .wwm import lattice_states, wigner_transform

        run = self.qubit
        grid = oscillator_grid(self.model.hbar, int(self.cfg.option("wigner_sites")))
        vecs = lattice_states(grid, 2)
        for k, frac in enumerate(self.cfg.option("wigner_times")):
            idx = int(np.argmin(np.abs(run.times - frac * run.t_r)))
            rho = vecs @ run.privileged[idx].rho.entries @ vecs.conj().T
            w = wigner_transform(rho, grid, state=True)
            self.write("wigner", phase_space_artifact(f"wigner_{k}", w,
                                                      {"t": run.times[idx]}), sub, params)

    def stage_trajectory(self, sub, params):
        from .classical import trajectory_surfaces
        from .scenarios import trajectory_scenario

        run = self.qubit
        o = self.cfg.option
        t_end = min(float(o("trajectory_span")) * run.t_r, run.times[-1])
        tr = trajectory_scenario(run, t_end=t_end, n_out=int(o("trajectory_samples")),
                                 gauge=o("gauge"))
        rep = trajectory_surfaces(tr.trajectory.times, tr.trajectory.Pi_bar,
                                  tr.trajectory.Phi_bar, run.t_r,
                                  rel_threshold=self.cfg.tolerance("equilibrium"))
        rows = list(zip(rep.times, rep.Pi_bar, rep.Phi_bar, rep.flags))
        self.write("trajectory", Artifact("trajectory",
                                          ["t", "Pi_bar", "Phi_bar", "equilibrium_flag"], rows,
                                          {"gauge": o("gauge")}), sub, params)
        self.write_json("trajectory", "equilibrium", {
            "equilibrium": rep.equilibrium, "equilibrium_time": rep.equilibrium_time,
            "flag_time": rep.flag_time, "thresholds": list(rep.thresholds),
            "t_R": run.t_r, "drift_over_t_R": tr.drift(run.t_r)}, sub)

    def stage_classical(self, sub, params):
        from .scenarios import number_band_domains

        o = self.cfg.option
        fam = number_band_domains(float(o("classical_hbar")), float(o("classical_max_action")),
                                  int(o("classical_bands")), int(o("classical_sites")),
                                  threshold=self.cfg.tolerance("domain_threshold"),
                                  overlap_tol=self.cfg.tolerance("overlap"))
        rows = []
        for k, d in enumerate(fam.domains):
            rows += rle_rows(d.mask, k)
        g = fam.grid
        self.write("classical", Artifact("domains", ["domain", "row", "start", "length"], rows,
                                         {"x_min": g.x_min, "x_max": g.x_max, "p_min": g.p_min,
                                          "p_max": g.p_max, "n_x": g.n_x, "n_p": g.n_p,
                                          "hbar": g.hbar}), sub, params)
        self.write_json("classical", "partition", {
            "bands": fam.bands, "connected": [d.connected for d in fam.domains],
            "components": [d.n_components for d in fam.domains],
            "volumes": fam.partition.volumes, "total_volume": fam.partition.total_volume,
            "max_overlap_fraction": float(np.max(fam.partition.overlap_fraction)),
            "passed": fam.partition.passed}, sub)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: Path, cfg: ScenarioConfig, records: list, status: str,
                   failure: dict | None = None) -> Path:
    for r in records:
        p = out / r["path"]
        r["sha256"] = _sha256(p)
        r["bytes"] = p.stat().st_size
    body = {"schema_version": SCHEMA_VERSION, "version": __version__, "status": status,
            "config": cfg.to_dict(), "seed": cfg.seed, "artifacts": records}
    if failure:
        body["failure"] = failure
    path = out / "manifest.json"
    path.write_text(json.dumps(body, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def run_scenario(cfg: ScenarioConfig, out, fmt: str = "csv") -> dict:
    """Run every requested output (per sweep point) and write the manifest.

    Raises StageError after the manifest has been written with the failure marker.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    records: list[dict] = []
    stages = [s for s in STAGE_ORDER if s in cfg.outputs]
    points = cfg.expand()
    try:
        for k, (assign, sub_cfg) in enumerate(points):
            sub = f"point_{k:03d}" if len(points) > 1 else ""
            runner = Runner(sub_cfg, out, fmt)
            try:
                for stage in stages:
                    runner.run_stage(stage, sub, assign)
            finally:
                records += runner.records
    except StageError as exc:
        write_manifest(out, cfg, records, "failed", {"stage": exc.stage, "error": str(exc.cause)})
        raise
    write_manifest(out, cfg, records, "ok")
    return {"status": "ok", "artifacts": [r["path"] for r in records]}


# ------------------------------------------------------------------- CLI


def _model_args(p: argparse.ArgumentParser) -> None:
    d = DEFAULT_MODEL
    p.add_argument("--config", help="scenario config; model flags are ignored when given")
    p.add_argument("--g", type=float, default=d["density"]["g"])
    p.add_argument("--width", type=float, default=d["density"]["width"])
    p.add_argument("--band", choices=("flat", "parabolic"), default="flat")
    p.add_argument("--omega", type=float, default=d["omega"])
    p.add_argument("--hbar", type=float, default=d["hbar"])
    p.add_argument("--mass", type=float, default=d["mass"])
    p.add_argument("--n-modes", type=int, default=d["n_modes"])


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default="qclimit_out", help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qclimit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {"poles": "pole ladder and relaxation time",
             "evolve": "exact survival amplitude",
             "modes": "mode fit, effective width and privileged state",
             "wigner": "Wigner snapshots of the privileged state",
             "classical": "characteristic domains of number-band projectors"}
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _model_args(p)
        _common(p)
    sc = sub.add_parser("scenario", help="run a scenario config")
    scsub = sc.add_subparsers(dest="action", required=True)
    run = scsub.add_parser("run", help="run all outputs of a config file")
    run.add_argument("file")
    _common(run)
    val = scsub.add_parser("validate", help="check a config file")
    val.add_argument("file")
    return ap


def _config_from_args(args, outputs) -> ScenarioConfig | list:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
        if isinstance(cfg, list):
            return cfg
        cfg.outputs = list(outputs)
        return cfg
    model = {"omega": args.omega, "hbar": args.hbar, "mass": args.mass,
             "n_modes": args.n_modes,
             "density": {"kind": args.band, "g": args.g, "width": args.width}}
    text = json.dumps({"schema_version": SCHEMA_VERSION, "model": model,
                       "outputs": list(outputs)})
    from .config import validate_config

    return validate_config(text)


def _report_errors(errors) -> int:
    for path, msg in errors:
        print(f"config error at {path or '<root>'}: {msg}", file=sys.stderr)
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "scenario":
        cfg = load_config(args.file)
        if isinstance(cfg, list):
            return _report_errors(cfg)
        if args.action == "validate":
            print(cfg.to_json())
            return 0
    else:
        outputs = {"evolve": ["poles", "evolve"], "modes": ["modes"],
                   "wigner": ["wigner"], "classical": ["classical"],
                   "poles": ["poles"]}[args.command]
        cfg = _config_from_args(args, outputs)
        if isinstance(cfg, list):
            return _report_errors(cfg)
    if args.seed is not None:
        cfg.seed = args.seed
    try:
        res = run_scenario(cfg, args.out, args.format)
    except StageError as exc:
        print(f"qclimit: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"qclimit: {exc}", file=sys.stderr)
        return 3
    for path in res["artifacts"]:
        print(os.path.join(args.out, path))
    return 0


if __name__ == "__main__":
    sys.exit(main())
