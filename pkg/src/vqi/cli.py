"""Command-line front end: ``vqi run``, ``vqi audit``, ``vqi list``.

Exit codes: 0 success/pass, 1 audit fail, 2 input error, 3 execution error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import re
import sys
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .audit import AuditReport, InputFamily, default_family, full_audit
from .engine import Trajectory, execute, validate
from .linalg import VQIError, partial_trace
from .measures import von_neumann_entropy
from .scenarios import DESCRIPTIONS, KINDS, RelativitySettings, ScenarioSpec, build

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_ENGINE = 0, 1, 2, 3

TOP_KEYS = {"kind", "params", "times", "relativity", "variants", "family", "mode"}
PARAM_KEYS = {"theta", "phi", "p", "n"}
TIME_KEYS = {"t1", "t_send", "t2", "t_arrive"}
RELATIVITY_KEYS = {"enabled", "speed", "positions"}
VARIANT_KEYS = {"discard_source", "mixed_input_p"}
FAMILY_KEYS = {"grid", "random", "p_grid"}

_RATIONAL = re.compile(r"^\s*-?\d+\s*(/\s*\d+\s*)?$")


class InputError(VQIError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class ScenarioFile:
    """A parsed and validated scenario document."""

    def __init__(self, spec: ScenarioSpec, family: InputFamily, mode: dict, digest: str, path: str):
        self.spec = spec
        self.family = family
        self.mode = mode
        self.digest = digest
        self.path = path


def _line_of(text: str, key: str) -> Optional[int]:
    i = text.find(f'"{key}"')
    return text.count("\n", 0, i) + 1 if i >= 0 else None


def _check_keys(obj, allowed: set, where: str, text: str) -> dict:
    if not isinstance(obj, dict):
        raise InputError(f"{where} must be an object", _line_of(text, where))
    for k in obj:
        if k not in allowed:
            raise InputError(f"unknown key {k!r} in {where}", _line_of(text, k))
    return obj


def _rational(value, key: str, text: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise InputError(f"{key} must be an integer or a 'num/den' string", _line_of(text, key))
    if isinstance(value, str) and not _RATIONAL.match(value):
        raise InputError(f"{key}={value!r} is not a rational 'num/den'", _line_of(text, key))
    try:
        return Fraction(value.replace(" ", "") if isinstance(value, str) else value)
    except ZeroDivisionError:
        raise InputError(f"{key} has a zero denominator", _line_of(text, key)) from None


def _number(value, key: str, text: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InputError(f"{key} must be a number", _line_of(text, key))
    return float(value)


def _positive_int(value, key: str, text: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise InputError(f"{key} must be a positive integer", _line_of(text, key))
    return value


def parse_family(obj, text: str) -> InputFamily:
    _check_keys(obj, FAMILY_KEYS, "family", text)
    grid = rnd = pg = None
    if "grid" in obj:
        g = _check_keys(obj["grid"], {"theta_steps", "phi_steps"}, "grid", text)
        grid = (
            _positive_int(g.get("theta_steps"), "theta_steps", text),
            _positive_int(g.get("phi_steps"), "phi_steps", text),
        )
    if "random" in obj:
        r = _check_keys(obj["random"], {"count", "seed"}, "random", text)
        seed = r.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise InputError("seed must be a non-negative integer", _line_of(text, "seed"))
        rnd = (_positive_int(r.get("count"), "count", text), seed)
    if "p_grid" in obj:
        p = _check_keys(obj["p_grid"], {"steps"}, "p_grid", text)
        pg = _positive_int(p.get("steps"), "steps", text)
    fam = InputFamily(grid=grid, random=rnd, p_grid=pg)
    try:
        fam.samples()
    except VQIError as exc:
        raise InputError(str(exc), _line_of(text, "family")) from None
    return fam


def parse_mode(obj, text: str) -> dict:
    if obj == "ensemble":
        return {"mode": "ensemble"}
    if isinstance(obj, dict) and set(obj) == {"sampled"}:
        s = _check_keys(obj["sampled"], {"seed", "shots"}, "sampled", text)
        seed = s.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise InputError("seed must be a non-negative integer", _line_of(text, "seed"))
        return {"mode": "sampled", "seed": seed, "shots": _positive_int(s.get("shots", 4096), "shots", text)}
    raise InputError('mode must be "ensemble" or {"sampled": {...}}', _line_of(text, "mode"))


def parse_scenario(text: str, path: str = "<string>") -> ScenarioFile:
    """Parse and validate a scenario document; raises :class:`InputError`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON: {exc.msg}", exc.lineno) from None
    _check_keys(doc, TOP_KEYS, "document", text)
    if "kind" not in doc:
        raise InputError("missing 'kind'")
    kind = doc["kind"]
    if kind not in KINDS:
        raise InputError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}", _line_of(text, "kind"))

    kw: dict[str, Any] = {"kind": kind}
    params = _check_keys(doc.get("params", {}), PARAM_KEYS, "params", text)
    for k in ("theta", "phi", "p"):
        if k in params:
            kw[k] = _number(params[k], k, text)
    if "n" in params:
        kw["n"] = _positive_int(params["n"], "n", text)
    times = _check_keys(doc.get("times", {}), TIME_KEYS, "times", text)
    for k in TIME_KEYS:
        if k in times:
            kw[k] = _rational(times[k], k, text)
    if "relativity" in doc:
        rel = _check_keys(doc["relativity"], RELATIVITY_KEYS, "relativity", text)
        positions = _check_keys(rel.get("positions", {}), set(rel.get("positions", {})), "positions", text)
        kw["relativity"] = RelativitySettings(
            enabled=bool(rel.get("enabled", True)),
            speed=_number(rel.get("speed", 1.0), "speed", text),
            positions={str(k): _number(v, str(k), text) for k, v in positions.items()},
        )
        if kw["relativity"].speed <= 0:
            raise InputError("speed must be positive", _line_of(text, "speed"))
    variants = _check_keys(doc.get("variants", {}), VARIANT_KEYS, "variants", text)
    if "discard_source" in variants:
        if not isinstance(variants["discard_source"], bool):
            raise InputError("discard_source must be a boolean", _line_of(text, "discard_source"))
        kw["discard_source"] = variants["discard_source"]
    if variants.get("mixed_input_p") is not None:
        kw["mixed_input_p"] = _number(variants["mixed_input_p"], "mixed_input_p", text)
    try:
        spec = ScenarioSpec(**kw)
        build(spec)
    except VQIError as exc:
        raise InputError(str(exc), _line_of(text, "params") or _line_of(text, "times")) from None
    family = parse_family(doc["family"], text) if "family" in doc else default_family(spec)
    mode = parse_mode(doc.get("mode", "ensemble"), text)
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return ScenarioFile(spec, family, mode, digest, path)


def load_scenario(path) -> ScenarioFile:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise InputError("file is not UTF-8") from None
    return parse_scenario(text, str(path))


# -- serialisation --------------------------------------------------------------


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x!r} in report")
    s = format(x, ".17g")
    if all(c not in s for c in ".en"):
        s += ".0"
    return s


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits."""
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k), ensure_ascii=False)}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{inner}{dumps(v, indent, _level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _time(t: Fraction) -> str:
    return str(t)


def spec_to_dict(spec: ScenarioSpec) -> dict:
    d = {
        "kind": spec.kind,
        "params": {"theta": spec.theta, "phi": spec.phi, "p": spec.p, "n": spec.n},
        "times": {"t1": _time(spec.t1), "t_send": _time(spec.t_send), "t2": _time(spec.t2)},
        "variants": {"discard_source": spec.discard_source, "mixed_input_p": spec.mixed_input_p},
    }
    if spec.t_arrive is not None:
        d["times"]["t_arrive"] = _time(spec.t_arrive)
    if spec.relativity.enabled:
        d["relativity"] = {
            "enabled": True,
            "speed": spec.relativity.speed,
            "positions": dict(spec.relativity.positions),
        }
    return d


def report_to_dict(report: AuditReport) -> dict:
    c1, c2, c3 = report.condition_i, report.condition_ii, report.condition_iii
    return {
        "scenario": spec_to_dict(report.spec),
        "family": {**report.family.as_dict(), "samples": report.samples, "content": report.family.describe()},
        "window": [_time(report.window[0]), _time(report.window[1])],
        "condition_i": {
            "tolerance": c1.tolerance,
            "groupings": [
                {
                    "labels": list(g.labels),
                    "probe_time": _time(g.probe_time),
                    "max_trace_distance": g.max_distance,
                    "passed": g.passed,
                }
                for g in c1.groupings
            ],
            "passed": c1.passed,
        },
        "condition_ii": {
            "tolerance": c2.tolerance,
            "cut": [list(c2.cut[0]), list(c2.cut[1])],
            "profile": c2.profile.as_dict(),
            "bound_bits": c2.bound_bits,
            "family_content": c2.family_content,
            "record_max_deviation_from_uniform": dict(c2.record_max_deviation),
            "joint_state_max_trace_distance": c2.joint_state_max_distance,
            "passed": c2.passed,
        },
        "condition_iii": {
            "tolerance": c3.tolerance,
            "retriever": list(c3.retriever),
            "systems": list(c3.labels),
            "min_fidelity": c3.min_fidelity,
            "mean_fidelity": c3.mean_fidelity,
            "max_trace_distance": c3.max_trace_distance,
            "passed": c3.passed,
        },
        "window_states_first_sample": {
            k: {"re": m.real.tolist(), "im": m.imag.tolist()} for k, m in report.window_states.items()
        },
        "verdict": report.verdict,
        "notes": list(report.notes),
    }


def trajectory_to_dict(traj: Trajectory) -> dict:
    out = []
    for cp in traj.checkpoints:
        rows = []
        for b in cp.branches:
            rows.append(
                {
                    "records": {k: int(v) for k, v in sorted(b.records.items())},
                    "probability": float(b.probability),
                    "entropy_bits": _party_entropies(traj, b.state),
                }
            )
        out.append({"time": _time(cp.time), "branches": rows})
    return {"checkpoints": out}


def _party_entropies(traj: Trajectory, state) -> dict[str, float]:
    ent = {}
    for name, party in traj.parties.items():
        labels = [l for l in state.labels if l in party.systems]
        if labels:
            ent[name] = von_neumann_entropy(partial_trace(state, labels))
    return ent


def _envelope(payload: dict, sf: ScenarioFile, kind: str) -> dict:
    return {
        "tool": "vqi",
        "version": __version__,
        "kind": kind,
        "input": {"path": sf.path, "sha256": sf.digest},
        "body": payload,
        # excluded from determinism comparisons
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


# -- text output ----------------------------------------------------------------


def format_matrix(m: np.ndarray, cap: int = 8) -> str:
    a = np.abs(np.asarray(m))[:cap, :cap]
    lines = ["  ".join(f"{x:.4f}" for x in row) for row in a]
    if m.shape[0] > cap:
        lines.append(f"... ({m.shape[0]}x{m.shape[1]}, showing {cap}x{cap})")
    return "\n".join(lines)


def format_report(report: AuditReport) -> str:
    c1, c2, c3 = report.condition_i, report.condition_ii, report.condition_iii

    def mark(v):
        return "n/a" if v is None else ("PASS" if v else "FAIL")

    prof = c2.profile
    fig3 = (
        f"min fidelity {c3.min_fidelity:.12g} (mean {c3.mean_fidelity:.6g})"
        if c3.min_fidelity is not None
        else f"max trace distance {c3.max_trace_distance:.3g}"
    )
    rows = [
        ("(i)", f"max pairwise trace distance {c1.max_distance:.3g}", mark(c1.passed)),
        (
            "(ii)",
            f"I={prof.mutual_information_bits:.12g} bits <= {c2.bound_bits:g}; neg={prof.negativity:.3g}"
            f"; ppt={prof.ppt}",
            mark(c2.passed),
        ),
        ("(iii)", f"{', '.join(c3.retriever) or '-'}: {fig3}", mark(c3.passed)),
    ]
    out = [
        f"scenario {report.spec.kind}  window ({report.window[0]}, {report.window[1]})  samples {report.samples}",
        f"{'cond':<6}{'figure':<72}verdict",
    ]
    out += [f"{a:<6}{b:<72}{c}" for a, b, c in rows]
    out.append("groupings:")
    for g in c1.groupings:
        out.append(f"  {{{','.join(g.labels)}}} @ t={g.probe_time}: {g.max_distance:.3g} {mark(g.passed)}")
    if prof.discord_measured_side_bits:
        out.append(
            "discord: "
            + ", ".join(f"measured on {{{k}}} {v:.3g} bits" for k, v in prof.discord_measured_side_bits.items())
        )
    for labels, m in report.window_states.items():
        out.append(f"window state of {{{labels}}}, first sample (|entries|):")
        out.append(format_matrix(m))
    out.append("notes:")
    out += [f"  - {n}" for n in report.notes]
    if report.exploratory:
        out.append("exploratory: no verdict")
    else:
        out.append(report.verdict)
    return "\n".join(out)


def format_trajectory(traj: Trajectory) -> str:
    out = []
    names = list(traj.parties)
    out.append(f"{'time':<8}{'records':<16}{'prob':<12}" + "".join(f"S({n})".ljust(12) for n in names))
    for cp in traj.checkpoints:
        for b in cp.branches:
            recs = ",".join(f"{k}={v}" for k, v in sorted(b.records.items())) or "-"
            ent = _party_entropies(traj, b.state)
            cells = "".join(f"{ent[n]:.4f}".ljust(12) if n in ent else "-".ljust(12) for n in names)
            out.append(f"{str(cp.time):<8}{recs:<16}{b.probability:<12.6g}{cells}")
    return "\n".join(out)


# -- commands -------------------------------------------------------------------


def _write(path: Optional[str], obj: dict) -> None:
    if path:
        Path(path).write_text(dumps(obj) + "\n", encoding="utf-8")


def cmd_run(args) -> int:
    sf = load_scenario(args.path)
    mode = dict(sf.mode)
    if args.mode:
        mode["mode"] = args.mode
    if args.seed is not None:
        mode["seed"] = args.seed
    if args.shots is not None:
        mode["shots"] = args.shots
    sc = build(sf.spec)
    violations = validate(sc.timeline, sc.parties, sf.spec.relativity.rule())
    if violations:
        for v in violations:
            print(f"error: {v}", file=sys.stderr)
        return EXIT_ENGINE
    traj = execute(sc.timeline, sc.parties, mode=mode["mode"], seed=mode.get("seed", 0), shots=mode.get("shots", 4096))
    print(f"scenario {sf.spec.kind}  mode {mode['mode']}")
    print(format_trajectory(traj))
    _write(args.out, _envelope({"mode": mode, **trajectory_to_dict(traj)}, sf, "trajectory"))
    return EXIT_OK


def cmd_audit(args) -> int:
    sf = load_scenario(args.path)
    sc = build(sf.spec)
    violations = validate(sc.timeline, sc.parties, sf.spec.relativity.rule())
    if violations:
        for v in violations:
            print(f"error: {v}", file=sys.stderr)
        return EXIT_ENGINE
    report = full_audit(sf.spec, sf.family, grid_resolution=args.grid_resolution)
    body = report_to_dict(report)
    if args.format == "json":
        print(dumps(body))
    else:
        print(format_report(report))
    _write(args.out, _envelope(body, sf, "audit"))
    if report.exploratory or report.volatile:
        return EXIT_OK
    return EXIT_FAIL


def example_files() -> dict[str, Path]:
    root = resources.files("vqi") / "examples"
    return {k: Path(str(root / f"{k}.json")) for k in KINDS}


def cmd_list(args) -> int:
    files = example_files()
    for kind in KINDS:
        print(f"{kind:<22}{DESCRIPTIONS[kind]}")
        print(f"{'':<22}example: {files[kind]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vqi", description="Timed LOCC simulator and volatility auditor")
    ap.add_argument("--version", action="version", version=f"vqi {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scenario and print its branch table")
    run.add_argument("path")
    run.add_argument("--mode", choices=["ensemble", "sampled"])
    run.add_argument("--seed", type=int)
    run.add_argument("--shots", type=int)
    run.add_argument("--out", help="write the trajectory summary as JSON")
    run.set_defaults(func=cmd_run)

    aud = sub.add_parser("audit", help="evaluate volatility conditions (i)-(iii)")
    aud.add_argument("path")
    aud.add_argument("--format", choices=["text", "json"], default="text")
    aud.add_argument("--out", help="write the report as JSON")
    aud.add_argument("--grid-resolution", type=int, default=0, help="Bloch grid for receiver-side discord (0 = off)")
    aud.set_defaults(func=cmd_audit)

    ls = sub.add_parser("list", help="list scenario kinds and shipped example files")
    ls.set_defaults(func=cmd_list)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except VQIError as exc:
        print(f"execution error: {exc}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
