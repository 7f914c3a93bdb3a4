"""Corpus CSV, unit-level CSV and calibration artifact formats.

Corpus CSV (UTF-8, header row)::

    id,theta_hat,sigma_hat,selected,replication_theta_hat,replication_sigma_hat
    exp-1,1.12,0.05,true,1.04,0.05

Only the first three columns are required.  Unit-level data use a long
format ``experiment_id,unit_id,z,y`` with ``z`` in ``{0, 1}``.

The calibration artifact is ``key=value`` text, one pair per line, headed by
``format_version``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
from collections import OrderedDict
from typing import Iterable, Sequence

from .calibration import CalibrationMethod, CalibrationReport
from .errors import InvalidInputError, ReportIOError
from .model import ExperimentSummary, HyperParams, Method, PosteriorSummary, UnitLevelData

log = logging.getLogger(__name__)

CORPUS_REQUIRED = ("id", "theta_hat", "sigma_hat")
CORPUS_OPTIONAL = ("selected", "replication_theta_hat", "replication_sigma_hat")
UNIT_COLUMNS = ("experiment_id", "unit_id", "z", "y")
ESTIMATE_COLUMNS = (
    "id", "method", "mean", "variance", "interval_low", "interval_high", "level",
    "lambda_used", "converged",
)
ARTIFACT_VERSION = "1"
ARTIFACT_KEYS = (
    "format_version", "method", "m0", "tau", "a", "b", "n_experiments_used",
    "log_marginal_likelihood", "tau_floored", "corpus_sha256",
)

_TRUE = {"true", "1", "yes", "y", "t"}
_FALSE = {"false", "0", "no", "n", "f"}


def read_text(path) -> str:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ReportIOError(f"cannot read {path}: {exc}") from exc
    try:
        return raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise InvalidInputError(f"{path} is not valid UTF-8: {exc}") from None


def write_text(path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc}") from exc


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def _float(value: str, column: str, row: int, optional: bool = False):
    value = (value or "").strip()
    if not value:
        if optional:
            return None
        raise InvalidInputError(f"row {row}: {column} is empty")
    try:
        out = float(value)
    except ValueError:
        raise InvalidInputError(f"row {row}: {column}={value!r} is not a number") from None
    if not math.isfinite(out):
        raise InvalidInputError(f"row {row}: {column} must be finite")
    return out


def _bool(value: str, row: int, column: str = "selected") -> bool:
    v = (value or "").strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise InvalidInputError(f"row {row}: {column}={value!r} is not a boolean")


def parse_corpus(text: str) -> list[ExperimentSummary]:
    """Parse corpus CSV text.  Row numbers in errors count the header as row 1."""
    reader = csv.DictReader(io.StringIO(text))
    header = [h.strip() for h in (reader.fieldnames or [])]
    reader.fieldnames = header
    missing = [c for c in CORPUS_REQUIRED if c not in header]
    if missing:
        raise InvalidInputError(f"corpus is missing required column(s): {', '.join(missing)}")
    if "selected" not in header:
        log.warning("corpus has no 'selected' column; treating every experiment as selected")
    out, seen = [], set()
    for row, rec in enumerate(reader, start=2):
        if None in rec:
            raise InvalidInputError(f"row {row}: more fields than header columns")
        eid = (rec["id"] or "").strip()
        if not eid:
            raise InvalidInputError(f"row {row}: id is empty")
        if eid in seen:
            raise InvalidInputError(f"row {row}: duplicate id {eid!r}")
        seen.add(eid)
        sigma = _float(rec["sigma_hat"], "sigma_hat", row)
        if not sigma > 0:
            raise InvalidInputError(f"row {row}: sigma_hat must be > 0, got {sigma}")
        rep_sigma = _float(rec.get("replication_sigma_hat"), "replication_sigma_hat", row, True)
        if rep_sigma is not None and not rep_sigma > 0:
            raise InvalidInputError(f"row {row}: replication_sigma_hat must be > 0")
        out.append(ExperimentSummary(
            id=eid,
            theta_hat=_float(rec["theta_hat"], "theta_hat", row),
            sigma_hat=sigma,
            selected=_bool(rec["selected"], row) if "selected" in header else True,
            replication_theta_hat=_float(rec.get("replication_theta_hat"), "replication_theta_hat", row, True),
            replication_sigma_hat=rep_sigma,
        ))
    if not out:
        raise InvalidInputError("corpus has no data rows")
    return out


def read_corpus(path) -> list[ExperimentSummary]:
    return parse_corpus(read_text(path))


def format_corpus(corpus: Iterable[ExperimentSummary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CORPUS_REQUIRED + CORPUS_OPTIONAL)
    for e in corpus:
        w.writerow([
            e.id, repr(e.theta_hat), repr(e.sigma_hat), "true" if e.selected else "false",
            "" if e.replication_theta_hat is None else repr(e.replication_theta_hat),
            "" if e.replication_sigma_hat is None else repr(e.replication_sigma_hat),
        ])
    return buf.getvalue()


def write_corpus(path, corpus: Iterable[ExperimentSummary]) -> None:
    write_text(path, format_corpus(corpus))


def parse_unit_level(text: str) -> "OrderedDict[str, UnitLevelData]":
    """Group long-format unit rows by experiment, keeping first-seen order."""
    reader = csv.DictReader(io.StringIO(text))
    header = [h.strip() for h in (reader.fieldnames or [])]
    reader.fieldnames = header
    missing = [c for c in UNIT_COLUMNS if c not in header]
    if missing:
        raise InvalidInputError(f"unit-level data missing column(s): {', '.join(missing)}")
    groups: OrderedDict[str, tuple[list, list]] = OrderedDict()
    for row, rec in enumerate(reader, start=2):
        eid = (rec["experiment_id"] or "").strip()
        if not eid:
            raise InvalidInputError(f"row {row}: experiment_id is empty")
        z = (rec["z"] or "").strip()
        if z not in ("0", "1"):
            raise InvalidInputError(f"row {row}: z must be 0 or 1, got {z!r}")
        ys, zs = groups.setdefault(eid, ([], []))
        ys.append(_float(rec["y"], "y", row))
        zs.append(int(z))
    if not groups:
        raise InvalidInputError("unit-level data has no rows")
    return OrderedDict((k, UnitLevelData(ys, zs)) for k, (ys, zs) in groups.items())


def read_unit_level(path) -> "OrderedDict[str, UnitLevelData]":
    return parse_unit_level(read_text(path))


def format_estimates(estimates: Sequence[PosteriorSummary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ESTIMATE_COLUMNS)
    for e in estimates:
        w.writerow([
            e.experiment_id, e.method.value, repr(e.mean), repr(e.variance),
            repr(e.interval_low), repr(e.interval_high), repr(e.level),
            "" if e.lambda_used is None or math.isnan(e.lambda_used) else repr(e.lambda_used),
            "true" if e.converged else "false",
        ])
    return buf.getvalue()


def parse_estimates(text: str) -> list[PosteriorSummary]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != ESTIMATE_COLUMNS:
        raise InvalidInputError(f"estimate table header must be {','.join(ESTIMATE_COLUMNS)}")
    out = []
    for row, rec in enumerate(reader, start=2):
        out.append(PosteriorSummary(
            mean=_float(rec["mean"], "mean", row),
            variance=_float(rec["variance"], "variance", row),
            interval_low=_float(rec["interval_low"], "interval_low", row),
            interval_high=_float(rec["interval_high"], "interval_high", row),
            level=_float(rec["level"], "level", row),
            method=Method.parse(rec["method"]),
            lambda_used=_float(rec["lambda_used"], "lambda_used", row, True),
            converged=_bool(rec["converged"], row, "converged"),
            experiment_id=rec["id"],
        ))
    return out


def format_artifact(report: CalibrationReport, corpus_sha256: str) -> str:
    hp = report.hyperparams
    values = {
        "format_version": ARTIFACT_VERSION,
        "method": report.method.value,
        "m0": repr(hp.m0),
        "tau": repr(hp.tau),
        "a": repr(hp.a),
        "b": repr(hp.b),
        "n_experiments_used": str(report.n_experiments_used),
        "log_marginal_likelihood": repr(report.log_marginal_likelihood),
        "tau_floored": "true" if report.tau_floored else "false",
        "corpus_sha256": corpus_sha256,
    }
    return "".join(f"{k}={values[k]}\n" for k in ARTIFACT_KEYS)


def parse_artifact(text: str) -> tuple[CalibrationReport, str]:
    """Returns ``(report, corpus_sha256)``."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InvalidInputError(f"calibration artifact line {lineno}: expected key=value")
        values[key.strip()] = value.strip()
    missing = [k for k in ARTIFACT_KEYS if k not in values]
    if missing:
        raise InvalidInputError(f"calibration artifact missing key(s): {', '.join(missing)}")
    if values["format_version"] != ARTIFACT_VERSION:
        raise InvalidInputError(f"unsupported calibration format_version {values['format_version']!r}")
    try:
        hp = HyperParams(*(float(values[k]) for k in ("m0", "tau", "a", "b")))
        report = CalibrationReport(
            hyperparams=hp,
            n_experiments_used=int(values["n_experiments_used"]),
            log_marginal_likelihood=float(values["log_marginal_likelihood"]),
            method=CalibrationMethod(values["method"]),
            tau_floored=_bool(values["tau_floored"], 0, "tau_floored"),
        )
    except ValueError as exc:
        raise InvalidInputError(f"calibration artifact: {exc}") from None
    return report, values["corpus_sha256"]


def write_artifact(path, report: CalibrationReport, corpus_sha256: str) -> None:
    write_text(path, format_artifact(report, corpus_sha256))


def read_artifact(path) -> tuple[CalibrationReport, str]:
    return parse_artifact(read_text(path))
