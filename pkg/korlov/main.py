# korlov/main.py

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import pandas as pd

from korlov.core.config import settings
from korlov.core.errors import CertificationError, InvalidInputError, KorlovError
from korlov.models.documents import parse_algebra_document
from korlov.models.readings import GorensteinReading, StrongnessVerdict
from korlov.models.reports import CertificationSummary, OutputFormat, Report, TaskKind, TaskSpec
from korlov.models.tables import BidegWindow, BigradedDimTable
from korlov.services.dgmodules import cohomology_table, realize
from korlov.services.documents import build_algebra
from korlov.services.exactlin import Field
from korlov.services.invariants import (
    ext_table,
    frobenius_shift,
    gorenstein_for_koszul_shortcut,
    gorenstein_parameter,
    strongness_negative,
    strongness_positive,
    tor_table,
)
from korlov.services.presentations import DgAlgebraPresentation, validate
from korlov.services.qgr import clear_caches, duality_applies, duality_hom, qgr_twist_hom, sections_hom, verify_exceptional_collection
from korlov.services.reference_suite import run_reference_suite
from korlov.services.resolutions import semifree_resolution

logger = logging.getLogger("korlov")

DEFAULT_BOUND = 8
VALIDATION_SAMPLES = 100


def configure_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if (verbose or settings.DEBUG) else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )


# ---------------------------------------------------------------------------
# Task outcomes
# ---------------------------------------------------------------------------
@dataclass
class Outcome:
    result: Dict[str, Any]
    text: List[str] = dc_field(default_factory=list)
    frame: Optional[pd.DataFrame] = None
    summary: CertificationSummary = dc_field(default_factory=CertificationSummary)
    ok: bool = True


def _absorb_table(summary: CertificationSummary, table: BigradedDimTable) -> None:
    for e in table.entries:
        summary.absorb(e.certified, e.stabilized, where=f"{table.label} at ({e.i}, {e.j})")


def _bound(spec: TaskSpec) -> int:
    return spec.parameters.bound if spec.parameters.bound is not None else DEFAULT_BOUND


def _data_window(spec: TaskSpec) -> BidegWindow:
    return spec.window or BidegWindow(imax=2 * _bound(spec))


def _module(A: DgAlgebraPresentation, shorthand: str, window: BidegWindow, spec: TaskSpec):
    return realize(A, shorthand, window, a=spec.parameters.parameter, ideal=spec.parameters.ideal)


def _reading(A: DgAlgebraPresentation, spec: TaskSpec) -> GorensteinReading:
    return gorenstein_parameter(A, window=spec.window, D=_bound(spec), threads=settings.get_threads(spec.parameters.threads))


def _parameter(A: DgAlgebraPresentation, spec: TaskSpec) -> int:
    if spec.parameters.parameter is not None:
        return spec.parameters.parameter
    reading = _reading(A, spec)
    if reading.a is None or not reading.certified:
        raise CertificationError(f"no certified Gorenstein parameter for {A.describe()} ({reading.note}); pass --parameter")
    return reading.a


# ---------------------------------------------------------------------------
# Handlers
# ---------------------------------------------------------------------------
def _validate(A: DgAlgebraPresentation, spec: TaskSpec) -> Outcome:
    report = validate(A, samples=VALIDATION_SAMPLES, seed=0)
    lines = [f"{A.describe()}: {'valid' if report.ok else 'INVALID'}"]
    lines += [f"  {c.name}: {'ok' if c.ok else 'FAILED ' + (c.witness or '')}" for c in report.checks]
    frame = pd.DataFrame([c.model_dump() for c in report.checks], columns=["name", "ok", "witness"])
    return Outcome(result={"algebra": A.describe(), "validation": report.model_dump()}, text=lines, frame=frame, ok=report.ok)


def _cohomology(A: DgAlgebraPresentation, spec: TaskSpec) -> Outcome:
    window = spec.window
    if window is None:
        if not A.is_finite():
            raise InvalidInputError(f"{A.describe()} is infinite-dimensional; pass --window")
        window = A.support()
    M = _module(A, spec.parameters.target, window, spec)
    table = cohomology_table(M, window, threads=settings.get_threads(spec.parameters.threads))
    out = Outcome(result={"module": M.describe(), "table": table.model_dump()}, text=[table.render_text()], frame=table.to_frame())
    _absorb_table(out.summary, table)
    return out


def _resolve(A: DgAlgebraPresentation, spec: TaskSpec) -> Outcome:
    D = _bound(spec)
    M = _module(A, spec.parameters.source, spec.window or BidegWindow(imax=D), spec)
    res, certificate = semifree_resolution(M, D, floor=spec.parameters.floor, verify=True)
    if not certificate.verified:
        raise CertificationError(f"resolution of {M.describe()} failed verification: {certificate.note}")
    G = res.module
    counts = [{"i": i, "j": j, "count": c} for (i, j), c in G.generator_counts().items()]
    lines = [f"semi-free resolution of {M.describe()} through internal degree {D}"]
    lines += [f"  ({row['i']}, {row['j']}): {row['count']}" for row in counts]
    return Outcome(
        result={"module": M.describe(), "resolution": G.to_json(), "generator_counts": counts, "certificate": certificate.model_dump()},
        text=lines,
        frame=pd.DataFrame(counts, columns=["i", "j", "count"]),
    )


def _ext_or_tor(A: DgAlgebraPresentation, spec: TaskSpec, tor: bool) -> Outcome:
    D = _bound(spec)
    window = _data_window(spec)
    M = _module(A, spec.parameters.source, window, spec)
    N = _module(A, spec.parameters.target, window, spec)
    compute = tor_table if tor else ext_table
    table = compute(M, N, D, threads=settings.get_threads(spec.parameters.threads))
    out = Outcome(result={"source": M.describe(), "target": N.describe(), "table": table.model_dump()}, text=[table.render_text()], frame=table.to_frame())
    _absorb_table(out.summary, table)
    return out


def _gorenstein(A: DgAlgebraPresentation, spec: TaskSpec) -> Outcome:
    reading = _reading(A, spec)
    if reading.a is None:
        raise CertificationError(f"no Gorenstein reading for {A.describe()}: {reading.note}")
    result: Dict[str, Any] = {"reading": reading.model_dump()}
    lines = [f"{A.describe()}: a = {reading.a}, n = {reading.n}, certified = {reading.certified}"]
    try:
        shortcut = gorenstein_for_koszul_shortcut(A)
        result["shortcut"] = shortcut.model_dump()
        lines.append(f"  shortcut formula: a = {shortcut.a}, n = {shortcut.n}")
    except InvalidInputError:
        pass
    if A.is_finite():
        fs = frobenius_shift(A)
        result["frobenius_shift"] = list(fs) if fs else None
        lines.append(f"  Frobenius shift: {fs}")
    out = Outcome(result=result, text=lines, frame=pd.DataFrame([{"a": reading.a, "n": reading.n, "certified": reading.certified}]))
    out.summary.absorb(reading.certified, where="Gorenstein reading")
    return out


def _strong_check(A: DgAlgebraPresentation, spec: TaskSpec) -> Outcome:
    a = _parameter(A, spec)
    if a > 0:
        verdict = strongness_positive(A, a, spec.window)
    elif a < 0:
        verdict = strongness_negative(A, a, spec.parameters.bound, threads=settings.get_threads(spec.parameters.threads))
    else:
        verdict = StrongnessVerdict(strong=True, criterion="equivalence", note="a = 0: no exceptional collection")
    witness = f" (witness {verdict.witness.i}, {verdict.witness.j})" if verdict.witness else ""
    out = Outcome(
        result={"a": a, "verdict": verdict.model_dump()},
        text=[f"{A.describe()}, a = {a}: {'strong' if verdict.strong else 'not strong'}{witness} [{verdict.criterion}]"],
        frame=pd.DataFrame([{"a": a, "strong": verdict.strong, "criterion": verdict.criterion, "certified": verdict.certified}]),
    )
    out.summary.absorb(verdict.certified, where="strongness verdict")
    return out


def _qgr_hom(A: DgAlgebraPresentation, spec: TaskSpec) -> Outcome:
    params = spec.parameters
    s, t = params.twists
    value = qgr_twist_hom(A, s, t, params.p, params.qmax, params.bound, window=params.stabilization)
    result: Dict[str, Any] = {"s": s, "t": t, "p": params.p, "value": value.model_dump()}
    lines = [f"Hom(πA({s}), πA({t})[{params.p}]) = {value.value} (stabilized={value.stabilized}, values {value.values})"]
    rows = [{"route": "truncation", **value.model_dump(exclude={"values", "q_range"})}]
    out = Outcome(result=result, text=lines)
    out.summary.absorb(value.certified, value.stabilized, where="qgr_hom")
    if params.oracle:
        oracle = sections_hom(A, s, t, params.p, params.qmax, window=params.stabilization)
        result["oracle"] = oracle.model_dump()
        lines.append(f"  sections oracle: {oracle.value} (stabilized={oracle.stabilized})")
        rows.append({"route": "sections", **oracle.model_dump(exclude={"values", "q_range"})})
        out.summary.absorb(oracle.certified, oracle.stabilized, where="sections oracle")
        if value.stabilized and oracle.stabilized and value.value != oracle.value:
            out.summary.warnings.append(f"routes disagree: {value.value} != {oracle.value}")
            out.ok = False
    dual = duality_hom(A, s, t, params.p) if duality_applies(A) else None
    if dual is not None:
        result["duality"] = dual.model_dump()
        lines.append(f"  local duality: {dual.value}")
        rows.append({"route": "duality", **dual.model_dump(exclude={"values", "q_range"})})
        if value.stabilized and value.value != dual.value:
            out.summary.warnings.append(f"routes disagree: {value.value} != {dual.value} (duality)")
            out.ok = False
    out.frame = pd.DataFrame(rows)
    return out


def _exc_verify(A: DgAlgebraPresentation, spec: TaskSpec) -> Outcome:
    params = spec.parameters
    a = _parameter(A, spec)
    report = verify_exceptional_collection(
        A,
        a,
        i=params.index,
        window=spec.window,
        q_max=params.qmax,
        D=params.bound,
        include_upward=params.include_upward,
        stabilization=params.stabilization,
    )
    if report.verdict is None:
        raise CertificationError(f"exceptional collection on {A.describe()} undecided: {report.note}; raise --qmax or --bound")
    lines = [f"{A.describe()}, a = {a}, i = {params.index}: collection {', '.join(report.collection) or '(empty)'}: {'verified' if report.verdict else 'FAILED'}"]
    if report.note:
        lines.append(f"  {report.note}")
    out = Outcome(result={"report": report.model_dump()}, text=lines, frame=report.to_frame(), ok=report.verdict)
    for pv in report.pairs:
        out.summary.absorb(pv.certified, pv.stabilized, where=f"Hom({pv.s} -> {pv.t}[{pv.p}])")
    return out


HANDLERS: Dict[TaskKind, Callable[[DgAlgebraPresentation, TaskSpec], Outcome]] = {
    TaskKind.VALIDATE: _validate,
    TaskKind.COHOMOLOGY: _cohomology,
    TaskKind.RESOLVE: _resolve,
    TaskKind.EXT: lambda A, spec: _ext_or_tor(A, spec, tor=False),
    TaskKind.TOR: lambda A, spec: _ext_or_tor(A, spec, tor=True),
    TaskKind.GORENSTEIN: _gorenstein,
    TaskKind.STRONG_CHECK: _strong_check,
    TaskKind.QGR_HOM: _qgr_hom,
    TaskKind.EXC_VERIFY: _exc_verify,
}


def _paper_suite(spec: TaskSpec) -> Outcome:
    field = Field.parse(spec.field, default_prime=settings.DEFAULT_PRIME) if spec.field else None
    checks = run_reference_suite(field)
    counts = {status: sum(1 for c in checks if c.status == status) for status in ("pass", "fail", "warn")}
    out = Outcome(
        result={"checks": [c.model_dump() for c in checks], **counts},
        text=[f"[{c.status.upper():4}] {c.name}: expected {c.expected}, observed {c.observed}" for c in checks]
        + [f"{counts['pass']} passed, {counts['fail']} failed, {counts['warn']} warnings"],
        frame=pd.DataFrame([c.model_dump() for c in checks]),
        ok=counts["fail"] == 0,
    )
    for c in checks:
        out.summary.absorb(c.certified, c.stabilized, where=c.name)
    return out


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------
def run(spec: TaskSpec) -> Report:
    """Dispatch one job and wrap its outcome in a Report."""
    start = time.perf_counter()
    logger.info(f"Task {spec.task.value} started")
    try:
        if spec.task == TaskKind.PAPER_SUITE:
            outcome = _paper_suite(spec)
            field_tag = (settings.get_field_override() or (Field.parse(spec.field) if spec.field else Field.rationals())).tag
            digest = spec.input_hash(field_tag=field_tag)
        else:
            doc = parse_algebra_document(spec.algebra)
            override = Field.parse(spec.field, default_prime=settings.DEFAULT_PRIME) if spec.field else None
            A = build_algebra(doc, override)
            outcome = HANDLERS[spec.task](A, spec)
            field_tag = A.field.tag
            digest = spec.input_hash(canonical_algebra=doc.model_dump(mode="json"), field_tag=field_tag)
    finally:
        clear_caches()
    elapsed = time.perf_counter() - start
    logger.info(f"Task {spec.task.value} finished in {elapsed:.2f}s (ok={outcome.ok})")
    report = Report(
        task=spec.model_dump(mode="json"),
        result=outcome.result,
        certification=outcome.summary,
        ok=outcome.ok,
        timing_seconds=round(elapsed, 3),
        tool_version=settings.TOOL_VERSION,
        field=field_tag,
        input_hash=digest,
    )
    report._text = outcome.text
    report._frame = outcome.frame
    return report


def render(report: Report, fmt: OutputFormat) -> str:
    if fmt == OutputFormat.JSON:
        return report.to_json() + "\n"
    if fmt == OutputFormat.CSV:
        frame = report._frame if report._frame is not None else pd.DataFrame()
        buf = io.StringIO()
        frame.to_csv(buf, index=False, lineterminator="\n")
        return buf.getvalue()
    lines = list(report._text)
    c = report.certification
    if not (c.certified and c.stabilized):
        lines.append(f"warning: {c.uncertified} uncertified, {c.not_stabilized} not stabilized entries")
    lines.append(f"korlov {report.tool_version}, field {report.field}, {report.timing_seconds:.3f}s, input {report.input_hash[:12]}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="korlov", description="Exact invariants of connected bigraded dg-algebras.")
    parser.add_argument("task", choices=[k.value for k in TaskKind])
    parser.add_argument("--input", type=Path, default=None, help="Job file: an algebra document or {algebra, parameters}")
    parser.add_argument("--window", default=None, help="imin:imax,jmin:jmax")
    parser.add_argument("--bound", type=int, default=None, help="Resolution bound D")
    parser.add_argument("--floor", type=int, default=None, help="Cohomological floor of the resolution")
    parser.add_argument("--qmax", type=int, default=None, help="Largest truncation degree")
    parser.add_argument("--p", type=int, default=None, help="Hom degree")
    parser.add_argument("--twists", default=None, help="s,t")
    parser.add_argument("--parameter", type=int, default=None, help="Gorenstein parameter a (skips detection)")
    parser.add_argument("--index", type=int, default=None, help="Collection index i")
    parser.add_argument("--source", default=None, help="Source module shorthand (ext/tor/resolve)")
    parser.add_argument("--target", default=None, help="Target module shorthand (ext/tor/cohomology)")
    parser.add_argument("--ideal", action="append", default=None, help="Ideal generator for R/I; repeat the flag")
    parser.add_argument("--stabilization", type=int, default=None, help="Stabilization window W")
    parser.add_argument("--include-upward", action="store_true", default=None)
    parser.add_argument("--oracle", action="store_true", default=None, help="Cross-check qgr-hom over the degree-zero part")
    parser.add_argument("--field", default=None, help="Q or a prime; KORLOV_FIELD wins")
    parser.add_argument("--format", choices=[f.value for f in OutputFormat], default=OutputFormat.TEXT.value)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--out", type=Path, default=None)
    parser.add_argument("--verbose", action="store_true")
    return parser


_PARAMETER_FLAGS = ("bound", "floor", "qmax", "p", "twists", "parameter", "index", "source", "target", "ideal", "stabilization", "include_upward", "oracle", "threads")


def load_job(path: Optional[Path]) -> Dict[str, Any]:
    if path is None:
        return {}
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise InvalidInputError(f"job file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise InvalidInputError(f"{path}: expected a JSON object")
    if "algebra" in data and "kind" not in data:
        return data
    return {"algebra": data}


def spec_from_args(args: argparse.Namespace) -> TaskSpec:
    job = load_job(args.input)
    parameters = dict(job.get("parameters") or {})
    for name in _PARAMETER_FLAGS:
        value = getattr(args, name)
        if value is not None:
            parameters[name] = value
    data = {
        "task": args.task,
        "algebra": job.get("algebra"),
        "window": args.window if args.window is not None else job.get("window"),
        "parameters": parameters,
        "format": args.format,
        "out": str(args.out) if args.out else None,
        "field": args.field if args.field is not None else job.get("field"),
    }
    return TaskSpec.parse(data)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    fmt = OutputFormat(args.format)
    try:
        spec = spec_from_args(args)
        report = run(spec)
        text = render(report, fmt)
        if args.out:
            args.out.write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
        return 0 if report.ok else 1
    except KorlovError as exc:
        logger.warning(f"{exc.kind}: {exc.message}")
        print(f"korlov: {exc.kind}: {exc.message}", file=sys.stderr)
        if fmt == OutputFormat.JSON:
            sys.stdout.write(json.dumps(exc.to_dict(), indent=2) + "\n")
        return exc.exit_code
    except Exception:
        logger.exception("Unexpected failure")
        return 1


if __name__ == "__main__":
    sys.exit(main())
