"""JSON documents for channels, POVMs, Holevo forms, solver outcomes and reports.

Complex matrices are stored as ``{"re": [[...]], "im": [[...]]}``. Floats
are written with 17 significant digits (always with a decimal point or an
exponent), which is enough for every binary64 value to survive a
write-read-write cycle byte for byte. Non-finite floats use the
``Infinity``/``NaN`` tokens that Python's ``json`` module reads back.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional

import numpy as np

from .channels import Channel, Ensemble, HolevoForm, KrausForm, Povm, channel_from_kraus, holevo_to_channel, qc_channel
from .config import RunConfig
from .errors import DocumentError, EbtkError
from .feasibility import FeasibilityOutcome, Verdict

NORMALIZATION = "trace_one"
DOC_TOLERANCE = 1e-9


# --- writer -------------------------------------------------------------------------


def _format_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, ".17g")
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def _write(obj, out: list, indent: Optional[int], level: int):
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_format_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
        end = "" if indent is None else "\n" + " " * (indent * level)
        sep = ": " if indent is not None else ":"
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            out.append(("," if i else "") + pad + json.dumps(str(k)) + sep)
            _write(v, out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        # numeric rows stay on one line even when indenting
        flat = all(not isinstance(v, (dict, list, tuple)) for v in obj)
        if not obj:
            out.append("[]")
            return
        if indent is None or flat:
            out.append("[")
            for i, v in enumerate(obj):
                if i:
                    out.append(",")
                _write(v, out, None, level + 1)
            out.append("]")
            return
        pad = "\n" + " " * (indent * (level + 1))
        out.append("[")
        for i, v in enumerate(obj):
            out.append(("," if i else "") + pad)
            _write(v, out, indent, level + 1)
        out.append("\n" + " " * (indent * level) + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(doc, indent: Optional[int] = None) -> str:
    out: list[str] = []
    _write(doc, out, indent, 0)
    return "".join(out)


def loads(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError("<document>", f"invalid JSON ({exc.msg} at line {exc.lineno} column {exc.colno})") from None


# --- field helpers ------------------------------------------------------------------


def _get(doc, key: str, path: str, kind=None):
    if not isinstance(doc, dict):
        raise DocumentError(path or "<document>", "expected a JSON object")
    if key not in doc:
        raise DocumentError(_join(path, key), "missing field")
    v = doc[key]
    if kind is not None and not _is_kind(v, kind):
        raise DocumentError(_join(path, key), f"expected {kind}, got {type(v).__name__}")
    return v


def _join(path: str, key) -> str:
    return f"{path}.{key}" if path else str(key)


def _is_kind(v, kind) -> bool:
    if kind == "int":
        return isinstance(v, int) and not isinstance(v, bool)
    if kind == "number":
        return isinstance(v, (int, float)) and not isinstance(v, bool)
    if kind == "string":
        return isinstance(v, str)
    if kind == "list":
        return isinstance(v, list)
    if kind == "object":
        return isinstance(v, dict)
    if kind == "bool":
        return isinstance(v, bool)
    raise ValueError(kind)


def _opt_number(v, path):
    if v is None:
        return None
    if not _is_kind(v, "number"):
        raise DocumentError(path, "expected a number or null")
    return float(v)


def _check_type(doc, expected: str, path: str = ""):
    t = _get(doc, "type", path, "string")
    if t != expected:
        raise DocumentError(_join(path, "type"), f"expected {expected!r}, got {t!r}")


def _wrap(path: str, fn, *args):
    """Re-raise validation errors from the data model against ``path``."""
    try:
        return fn(*args)
    except DocumentError:
        raise
    except (EbtkError, ValueError, TypeError) as exc:
        raise DocumentError(path, str(exc)) from None


# --- matrices -----------------------------------------------------------------------


def matrix_to_doc(m) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def _real_grid(v, path: str, shape) -> np.ndarray:
    if not isinstance(v, list) or any(not isinstance(r, list) for r in v):
        raise DocumentError(path, "expected a 2D array of numbers")
    if any(not _is_kind(x, "number") for r in v for x in r):
        raise DocumentError(path, "array entries must be numbers")
    try:
        a = np.array(v, dtype=float)
    except ValueError:
        raise DocumentError(path, "rows have different lengths") from None
    if a.ndim != 2 or (shape is not None and a.shape != shape):
        raise DocumentError(path, f"expected shape {shape}, got {a.shape}")
    return a


def matrix_from_doc(doc, path: str = "matrix", shape=None) -> np.ndarray:
    re = _real_grid(_get(doc, "re", path), _join(path, "re"), shape)
    im = _real_grid(_get(doc, "im", path), _join(path, "im"), re.shape)
    return re + 1j * im


def _matrices_from(v, path: str, shape=None) -> list:
    if not isinstance(v, list) or not v:
        raise DocumentError(path, "expected a non-empty list of matrices")
    return [matrix_from_doc(m, f"{path}[{i}]", shape) for i, m in enumerate(v)]


# --- channels, POVMs, Holevo forms --------------------------------------------------


@dataclass(frozen=True)
class ChannelDocument:
    channel: Channel
    kraus: Optional[KrausForm] = None
    holevo: Optional[HolevoForm] = None


def povm_to_doc(p: Povm) -> dict:
    return {"type": "povm", "dim": p.dim, "effects": [matrix_to_doc(e) for e in p.effects]}


def povm_from_doc(doc, path: str = "") -> Povm:
    _check_type(doc, "povm", path)
    d = _get(doc, "dim", path, "int")
    effects = _matrices_from(_get(doc, "effects", path), _join(path, "effects"), (d, d))
    return _wrap(_join(path, "effects"), Povm, tuple(effects))


def holevo_to_doc(h: HolevoForm) -> dict:
    return {
        "type": "holevo",
        "dim_in": h.dim_in,
        "dim_out": h.dim_out,
        "povm": povm_to_doc(h.povm),
        "preparations": [matrix_to_doc(t) for t in h.preparations],
    }


def holevo_from_doc(doc, path: str = "") -> HolevoForm:
    _check_type(doc, "holevo", path)
    di = _get(doc, "dim_in", path, "int")
    do = _get(doc, "dim_out", path, "int")
    povm = povm_from_doc(_get(doc, "povm", path), _join(path, "povm"))
    if povm.dim != di:
        raise DocumentError(_join(path, "povm.dim"), f"POVM acts on dim {povm.dim}, dim_in is {di}")
    preps = _matrices_from(_get(doc, "preparations", path), _join(path, "preparations"), (do, do))
    return _wrap(_join(path, "preparations"), HolevoForm, povm, tuple(preps))


def channel_to_doc(c: Channel, kraus: KrausForm | None = None, holevo: HolevoForm | None = None) -> dict:
    doc = {
        "type": "channel",
        "dim_in": c.dim_in,
        "dim_out": c.dim_out,
        "normalization": NORMALIZATION,
        "choi": matrix_to_doc(c.choi),
    }
    if kraus is not None:
        doc["kraus"] = [matrix_to_doc(k) for k in kraus.operators]
    if holevo is not None:
        doc["holevo"] = holevo_to_doc(holevo)
    return doc


def channel_document_from_doc(doc, path: str = "") -> ChannelDocument:
    _check_type(doc, "channel", path)
    di = _get(doc, "dim_in", path, "int")
    do = _get(doc, "dim_out", path, "int")
    for key, v in (("dim_in", di), ("dim_out", do)):
        if v < 1:
            raise DocumentError(_join(path, key), "must be a positive integer")
    norm = _get(doc, "normalization", path, "string")
    if norm != NORMALIZATION:
        raise DocumentError(_join(path, "normalization"), f"expected {NORMALIZATION!r}, got {norm!r}")
    choi = matrix_from_doc(_get(doc, "choi", path), _join(path, "choi"), (di * do, di * do))
    c = _wrap(_join(path, "choi"), Channel, di, do, choi)
    kraus = holevo = None
    if "kraus" in doc:
        ops = _matrices_from(doc["kraus"], _join(path, "kraus"), (do, di))
        kraus = _wrap(_join(path, "kraus"), KrausForm, tuple(ops))
        if np.max(np.abs(channel_from_kraus(kraus).choi - c.choi)) > DOC_TOLERANCE:
            raise DocumentError(_join(path, "kraus"), "Kraus operators do not reproduce the Choi matrix")
    if "holevo" in doc:
        holevo = holevo_from_doc(doc["holevo"], _join(path, "holevo"))
        if (holevo.dim_in, holevo.dim_out) != (di, do) or np.max(
            np.abs(holevo_to_channel(holevo).choi - c.choi)
        ) > DOC_TOLERANCE:
            raise DocumentError(_join(path, "holevo"), "Holevo form does not reproduce the Choi matrix")
    return ChannelDocument(c, kraus, holevo)


def channel_from_doc(doc, path: str = "") -> Channel:
    return channel_document_from_doc(doc, path).channel


# --- config -------------------------------------------------------------------------


def config_to_doc(cfg: RunConfig) -> dict:
    return {"type": "run_config", **cfg.to_dict()}


def config_from_doc(doc, path: str = "") -> RunConfig:
    if not isinstance(doc, dict):
        raise DocumentError(path or "<config>", "expected a JSON object")
    data = dict(doc)
    if "type" in data:
        _check_type(data, "run_config", path)
        del data["type"]
    try:
        return RunConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        msg = str(exc)
        field = next((k for k in data if k in msg), "<config>")
        raise DocumentError(_join(path, field) if field != "<config>" else (path or field), msg) from None


# --- solver outcomes ----------------------------------------------------------------


def _plain(v):
    """JSON-ready copy of a ``details`` value."""
    if isinstance(v, Channel):
        return channel_to_doc(v)
    if isinstance(v, RunConfig):
        return config_to_doc(v)
    if isinstance(v, Enum):
        return v.value
    if isinstance(v, np.ndarray):
        if v.ndim == 2:
            return matrix_to_doc(v)
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def outcome_to_doc(o: FeasibilityOutcome) -> dict:
    return {
        "type": "feasibility",
        "verdict": o.verdict.value,
        "residual": float(o.residual),
        "iterations": int(o.iterations),
        "window_drop": None if o.window_drop is None else float(o.window_drop),
        "witness": None if o.witness is None else matrix_to_doc(o.witness),
        "details": _plain(o.details),
    }


def outcome_from_doc(doc, path: str = "") -> FeasibilityOutcome:
    _check_type(doc, "feasibility", path)
    verdict = _get(doc, "verdict", path, "string")
    try:
        verdict = Verdict(verdict)
    except ValueError:
        raise DocumentError(_join(path, "verdict"), f"unknown verdict {verdict!r}") from None
    w = _get(doc, "witness", path)
    witness = None if w is None else matrix_from_doc(w, _join(path, "witness"))
    return FeasibilityOutcome(
        verdict,
        witness,
        float(_get(doc, "residual", path, "number")),
        _get(doc, "iterations", path, "int"),
        _opt_number(_get(doc, "window_drop", path), _join(path, "window_drop")),
        dict(_get(doc, "details", path, "object")),
    )


# --- reports ------------------------------------------------------------------------


def _ensemble_to_doc(e: Ensemble) -> dict:
    return {
        "weights": [float(w) for w in e.weights],
        "left": [matrix_to_doc(s) for s in e.left_states],
        "right": [matrix_to_doc(t) for t in e.right_states],
    }


def _ensemble_from_doc(doc, path: str) -> Ensemble:
    w = _get(doc, "weights", path, "list")
    if any(not _is_kind(x, "number") for x in w):
        raise DocumentError(_join(path, "weights"), "weights must be numbers")
    left = _matrices_from(_get(doc, "left", path), _join(path, "left"))
    right = _matrices_from(_get(doc, "right", path), _join(path, "right"))
    return _wrap(path, Ensemble, np.array(w, dtype=float), tuple(left), tuple(right))


def report_to_doc(r, timings: bool = False) -> dict:
    """Document for an :class:`~ebtk.criteria.report.EbReport`.

    Timings vary from run to run, so they are only written on request.
    """
    dec = r.decomposition
    doc = {
        "type": "eb_report",
        "verdict": r.verdict.value,
        "ppt": {
            "result": "Pass" if r.ppt.passed else "Fail",
            "min_eigenvalue": float(r.ppt.min_eigenvalue),
            "verified_min_eigenvalue": r.ppt.verified_min_eigenvalue,
        },
        "separable_decomposition": None
        if dec is None
        else {
            "success": dec.success,
            "residual": float(dec.residual),
            "terms": int(dec.terms),
            "attempts": int(dec.attempts),
            "reason": dec.reason,
            "ensemble": None if dec.ensemble is None else _ensemble_to_doc(dec.ensemble),
        },
        "holevo": None if r.holevo is None else holevo_to_doc(r.holevo),
        "holevo_error": r.holevo_error,
        "joint_feasibility": {str(n): outcome_to_doc(o) for n, o in r.joint.items()},
        "qc_factorization": None
        if r.qc is None
        else {
            "k": r.qc.k,
            "residual": float(r.qc.residual),
            "povm": povm_to_doc(r.qc.povm),
            "alpha": channel_to_doc(r.qc.alpha),
        },
        "broadcast": None if r.broadcast is None else outcome_to_doc(r.broadcast),
        "skipped": dict(r.skipped),
        "anomalies": list(r.anomalies),
        "config": config_to_doc(r.config),
    }
    if r.source is not None:
        doc["source"] = r.source
    if timings:
        doc["timings"] = {k: float(v) for k, v in r.timings.items()}
    return doc


def report_from_doc(doc, path: str = ""):
    from .criteria.relations import QcFactorization
    from .criteria.report import EbReport, EbVerdict
    from .criteria.separable import DecompositionResult, PptResult

    _check_type(doc, "eb_report", path)
    try:
        verdict = EbVerdict(_get(doc, "verdict", path, "string"))
    except ValueError:
        raise DocumentError(_join(path, "verdict"), "unknown verdict") from None
    p = _get(doc, "ppt", path, "object")
    pp = _join(path, "ppt")
    result = _get(p, "result", pp, "string")
    if result not in ("Pass", "Fail"):
        raise DocumentError(_join(pp, "result"), "expected 'Pass' or 'Fail'")
    ppt = PptResult(
        result == "Pass",
        float(_get(p, "min_eigenvalue", pp, "number")),
        _opt_number(_get(p, "verified_min_eigenvalue", pp), _join(pp, "verified_min_eigenvalue")),
    )
    d = _get(doc, "separable_decomposition", path)
    dec = None
    if d is not None:
        dp = _join(path, "separable_decomposition")
        ens = _get(d, "ensemble", dp)
        dec = DecompositionResult(
            None if ens is None else _ensemble_from_doc(ens, _join(dp, "ensemble")),
            float(_get(d, "residual", dp, "number")),
            _get(d, "terms", dp, "int"),
            _get(d, "attempts", dp, "int"),
            _get(d, "reason", dp, "string"),
        )
    h = _get(doc, "holevo", path)
    holevo = None if h is None else holevo_from_doc(h, _join(path, "holevo"))
    joint_doc = _get(doc, "joint_feasibility", path, "object")
    joint = {}
    for k, v in joint_doc.items():
        if not k.isdigit():
            raise DocumentError(_join(path, f"joint_feasibility.{k}"), "keys must be copy counts")
        joint[int(k)] = outcome_from_doc(v, _join(path, f"joint_feasibility.{k}"))
    q = _get(doc, "qc_factorization", path)
    qc = None
    if q is not None:
        qp = _join(path, "qc_factorization")
        povm = povm_from_doc(_get(q, "povm", qp), _join(qp, "povm"))
        qc = QcFactorization(
            povm,
            qc_channel(povm),
            channel_from_doc(_get(q, "alpha", qp), _join(qp, "alpha")),
            float(_get(q, "residual", qp, "number")),
            _get(q, "k", qp, "int"),
        )
    b = _get(doc, "broadcast", path)
    return EbReport(
        ppt=ppt,
        decomposition=dec,
        holevo=holevo,
        holevo_error=_opt_number(_get(doc, "holevo_error", path), _join(path, "holevo_error")),
        joint=joint,
        qc=qc,
        broadcast=None if b is None else outcome_from_doc(b, _join(path, "broadcast")),
        verdict=verdict,
        config=config_from_doc(_get(doc, "config", path), _join(path, "config")),
        skipped=dict(_get(doc, "skipped", path, "object")),
        anomalies=list(_get(doc, "anomalies", path, "list")),
        timings={k: float(v) for k, v in doc.get("timings", {}).items()},
        source=doc.get("source"),
    )


def bargmann_to_doc(b, timings: bool = False) -> dict:
    return {
        "type": "bargmann_report",
        "cutoff": b.cutoff,
        "scale": float(b.scale),
        "conjugate": b.conjugate,
        "radial_nodes": b.radial_nodes,
        "angular_nodes": b.angular_nodes,
        "overcompleteness_error": float(b.overcompleteness_error),
        "closed_form_deviation": float(b.closed_form_deviation),
        "repair_magnitude": float(b.repair_magnitude),
        "raw_min_eigenvalue": float(b.raw_min_eigenvalue),
        "injectivity_rank": b.injectivity_rank,
        "eb_report": report_to_doc(b.report, timings),
    }


def bargmann_from_doc(doc, path: str = ""):
    from .bargmann import BargmannReport

    _check_type(doc, "bargmann_report", path)
    rank = _get(doc, "injectivity_rank", path)
    return BargmannReport(
        cutoff=_get(doc, "cutoff", path, "int"),
        scale=float(_get(doc, "scale", path, "number")),
        conjugate=_get(doc, "conjugate", path, "bool"),
        radial_nodes=_get(doc, "radial_nodes", path, "int"),
        angular_nodes=_get(doc, "angular_nodes", path, "int"),
        overcompleteness_error=float(_get(doc, "overcompleteness_error", path, "number")),
        closed_form_deviation=float(_get(doc, "closed_form_deviation", path, "number")),
        repair_magnitude=float(_get(doc, "repair_magnitude", path, "number")),
        raw_min_eigenvalue=float(_get(doc, "raw_min_eigenvalue", path, "number")),
        injectivity_rank=rank,
        report=report_from_doc(_get(doc, "eb_report", path, "object"), _join(path, "eb_report")),
    )


# --- dispatch -----------------------------------------------------------------------


def to_doc(obj, **kw) -> dict:
    from .bargmann import BargmannReport
    from .criteria.report import EbReport

    if isinstance(obj, Channel):
        return channel_to_doc(obj)
    if isinstance(obj, ChannelDocument):
        return channel_to_doc(obj.channel, obj.kraus, obj.holevo)
    if isinstance(obj, Povm):
        return povm_to_doc(obj)
    if isinstance(obj, HolevoForm):
        return holevo_to_doc(obj)
    if isinstance(obj, FeasibilityOutcome):
        return outcome_to_doc(obj)
    if isinstance(obj, RunConfig):
        return config_to_doc(obj)
    if isinstance(obj, EbReport):
        return report_to_doc(obj, **kw)
    if isinstance(obj, BargmannReport):
        return bargmann_to_doc(obj, **kw)
    raise TypeError(f"no document type for {type(obj).__name__}")


_READERS = {
    "channel": channel_document_from_doc,
    "povm": povm_from_doc,
    "holevo": holevo_from_doc,
    "feasibility": outcome_from_doc,
    "run_config": config_from_doc,
    "eb_report": report_from_doc,
    "bargmann_report": bargmann_from_doc,
}


def from_doc(doc) -> Any:
    t = _get(doc, "type", "", "string")
    if t not in _READERS:
        raise DocumentError("type", f"unknown document type {t!r}")
    return _READERS[t](doc)


def serialize(obj, indent: Optional[int] = None, **kw) -> str:
    return dumps(to_doc(obj, **kw), indent)


def deserialize(text: str):
    return from_doc(loads(text))
