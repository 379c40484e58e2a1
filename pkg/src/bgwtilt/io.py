"""Model, tilt, trace and ensemble files.

Model files are JSON with 1-based type labels::

    {"name": "binary", "num_types": 1, "gamma": [1],
     "law": {"kind": "projection",
             "types": [{"entries": [{"counts": [0], "prob": "2/3"},
                                    {"counts": [2], "prob": "1/3"}]}]}}

``law.kind`` is ``ordered`` (entries carry ``word``), ``projection``
(entries carry ``counts``) or ``exp_poly`` (``polynomials[].terms[]`` with
``exponents`` and ``coeff``; the generating function is ``exp(f - f(1))``).
Probabilities given as strings are parsed exactly (``"1/3"``); numbers are
taken as floats. ``gamma_matrix`` may replace ``gamma`` for several rows.
"""
from __future__ import annotations

import csv
import json
from fractions import Fraction

from .pgf import OffspringModel
from .tilting import ConditionSpec, TiltParams


class ModelFormatError(ValueError):
    def __init__(self, message, line=None, column=None, path=None):
        where = f"line {line}, column {column}: " if line is not None else ""
        loc = f" (at {path})" if path else ""
        super().__init__(f"{where}{message}{loc}")
        self.line, self.column, self.path = line, column, path


def _number(v, path):
    if isinstance(v, bool):
        raise ModelFormatError(f"expected a number, got {v!r}", path=path)
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return v
    if isinstance(v, str):
        try:
            return Fraction(v.strip())
        except (ValueError, ZeroDivisionError):
            raise ModelFormatError(f"cannot parse {v!r} as a rational number", path=path) from None
    raise ModelFormatError(f"expected a number, got {type(v).__name__}", path=path)


def _int_list(v, path, length=None):
    if not isinstance(v, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise ModelFormatError("expected a list of integers", path=path)
    if length is not None and len(v) != length:
        raise ModelFormatError(f"expected {length} entries, got {len(v)}", path=path)
    return v


def model_from_dict(data: dict):
    """Return ``(model, condition)``; ``condition`` is ``None`` when no Gamma is given."""
    if not isinstance(data, dict):
        raise ModelFormatError("top level must be an object")
    k = data.get("num_types")
    if not isinstance(k, int) or k < 1:
        raise ModelFormatError("num_types must be a positive integer", path="num_types")
    law = data.get("law")
    if not isinstance(law, dict):
        raise ModelFormatError("missing law object", path="law")
    kind = law.get("kind")
    name = str(data.get("name", ""))
    try:
        if kind == "exp_poly":
            polys = law.get("polynomials")
            if not isinstance(polys, list) or len(polys) != k:
                raise ModelFormatError(f"need {k} polynomials", path="law.polynomials")
            out = []
            for i, poly in enumerate(polys):
                terms = {}
                for n, term in enumerate(poly.get("terms", [])):
                    p = f"law.polynomials[{i}].terms[{n}]"
                    e = tuple(_int_list(term.get("exponents"), p + ".exponents", k))
                    terms[e] = float(_number(term.get("coeff"), p + ".coeff"))
                out.append(terms)
            model = OffspringModel.from_exp_poly(out, name=name)
        elif kind in ("ordered", "projection"):
            types = law.get("types")
            if not isinstance(types, list) or len(types) != k:
                raise ModelFormatError(f"need {k} entries in types", path="law.types")
            laws = []
            for i, t in enumerate(types):
                dist = {}
                for n, entry in enumerate(t.get("entries", [])):
                    p = f"law.types[{i}].entries[{n}]"
                    if kind == "ordered":
                        word = _int_list(entry.get("word"), p + ".word")
                        if any(not 1 <= x <= k for x in word):
                            raise ModelFormatError(f"word letters must lie in 1..{k}", path=p + ".word")
                        key = tuple(x - 1 for x in word)
                    else:
                        key = tuple(_int_list(entry.get("counts"), p + ".counts", k))
                    dist[key] = dist.get(key, 0) + _number(entry.get("prob"), p + ".prob")
                laws.append(dist)
            if kind == "ordered":
                model = OffspringModel.from_ordered(laws, name=name)
            else:
                model = OffspringModel.from_projection(laws, name=name)
        else:
            raise ModelFormatError(f"unknown law kind {kind!r}", path="law.kind")
    except ModelFormatError:
        raise
    except (ValueError, TypeError, AttributeError) as exc:
        raise ModelFormatError(str(exc), path="law") from None

    condition = None
    if "gamma_matrix" in data:
        rows = data["gamma_matrix"]
        if not isinstance(rows, list) or not rows:
            raise ModelFormatError("gamma_matrix must be a nonempty list of rows", path="gamma_matrix")
        rows = [[_number(v, f"gamma_matrix[{r}]") for v in _check_row(row, k, r)] for r, row in enumerate(rows)]
        condition = ConditionSpec.from_matrix(rows)
    elif "gamma" in data:
        condition = ConditionSpec.from_matrix([[_number(v, "gamma") for v in _check_row(data["gamma"], k, None)]])
    return model, condition


def _check_row(row, k, r):
    path = "gamma" if r is None else f"gamma_matrix[{r}]"
    if not isinstance(row, list) or len(row) != k:
        raise ModelFormatError(f"expected {k} entries", path=path)
    return row


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return loads_model(text)


def loads_model(text: str):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(exc.msg, exc.lineno, exc.colno) from None
    return model_from_dict(data)


def _prob_out(p):
    if isinstance(p, Fraction):
        return str(p)
    return float(p)


def model_to_dict(model: OffspringModel, condition: ConditionSpec | None = None) -> dict:
    k = model.num_types
    out = {"name": model.name, "num_types": k}
    if condition is not None:
        rows = [[_prob_out(Fraction(v)) for v in r] for r in condition.gamma_matrix]
        if len(rows) == 1:
            out["gamma"] = rows[0]
        else:
            out["gamma_matrix"] = rows
    if model.exp_poly is not None:
        out["law"] = {"kind": "exp_poly", "polynomials": [
            {"terms": [{"exponents": list(e), "coeff": float(c)} for e, c in sorted(poly.items())]}
            for poly in model.exp_poly
        ]}
    elif model.ordered is not None:
        out["law"] = {"kind": "ordered", "types": [
            {"entries": [{"word": [x + 1 for x in w], "prob": _prob_out(p)} for w, p in sorted(law.items())]}
            for law in model.ordered
        ]}
    else:
        out["law"] = {"kind": "projection", "types": [
            {"entries": [{"counts": list(c), "prob": _prob_out(p)} for c, p in sorted(mu.items())]}
            for mu in model.projection
        ]}
    return out


def dumps_json(data) -> str:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def write_json(path, data):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_json(data))


def load_tilt(path) -> TiltParams:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(exc.msg, exc.lineno, exc.colno) from None
    if "tilt" in data:
        data = data["tilt"]
    try:
        return TiltParams.from_json(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"bad tilt file: {exc}") from None


def write_trace_csv(path, trace):
    k = len(trace.points[0].b) if trace.points else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["arclength", *[f"b_{j + 1}" for j in range(k)], "beta", "rho_tilde",
                    *[f"detI_{j + 1}" for j in range(k)], "degenerate_flag"])
        for p in trace.points:
            w.writerow([repr(p.arclength), *map(repr, p.b), repr(p.beta), repr(p.rho_tilde),
                        *map(repr, p.jacobian_dets), int(p.degenerate_flag)])


def write_ensemble_csv(path, ensemble):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["serialized_tree", "weight_num", "weight_den"])
        for row in ensemble.csv_rows():
            w.writerow(row)


def read_ensemble_csv(path):
    """Rows as ``(serialized_tree, weight)`` with ``Fraction`` weights where possible."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            try:
                wt = Fraction(int(row["weight_num"]), int(row["weight_den"]))
            except ValueError:
                wt = row["weight_num"]
            out.append((row["serialized_tree"], wt))
    return out
