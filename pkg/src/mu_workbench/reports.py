"""Markdown rendering of report JSON (schema in ``docs/report_schema.md``)."""

from __future__ import annotations

import json


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return f"{x:.3e}"
    if isinstance(x, (list, dict)):
        return json.dumps(x, sort_keys=True)
    return str(x)


def residual_table(section: dict) -> list[str]:
    res = section.get("residuals", {})
    if not res:
        return ["_no residuals_", ""]
    tol = section.get("tolerance")
    tols = section.get("tolerances", {})
    passed = section.get("passed", {})
    lines = ["| check | residual | tolerance | pass |", "|---|---|---|---|"]
    for name in sorted(res):
        lines.append(f"| {name} | {_fmt(float(res[name]))} | "
                     f"{_fmt(float(tols.get(name, tol)))} | "
                     f"{'yes' if passed.get(name) else 'NO'} |")
    return lines + [""]


def _sections(report: dict):
    """Yield ``(title, CheckReport dict)`` pairs found in a report envelope."""
    if "residuals" in report:
        yield "checks", report
    for key in sorted(report.get("sections", {})):
        yield key, report["sections"][key]


def render_markdown(report: dict) -> str:
    lines = [f"# {report.get('command', 'report')}", "",
             f"- tool: {report.get('tool', '?')} {report.get('version', '?')}",
             f"- config hash: `{report.get('config_hash', '?')}`",
             f"- verdict: **{report.get('verdict', '?')}**"]
    for k in sorted(report.get("inputs", {})):
        lines.append(f"- input {k}: `{report['inputs'][k]}`")
    lines.append("")
    for title, sec in _sections(report):
        lines += [f"## {title}", "", f"verdict: {sec.get('verdict', '?')}", ""]
        lines += residual_table(sec)
        info = sec.get("info", {})
        if info:
            lines += ["| info | value |", "|---|---|"]
            lines += [f"| {k} | {_fmt(info[k])} |" for k in sorted(info)]
            lines.append("")
        for note in sec.get("notes", []):
            lines.append(f"> {note}")
        if sec.get("notes"):
            lines.append("")
    for note in report.get("notes", []) if "residuals" not in report else []:
        lines.append(f"> {note}")
    return "\n".join(lines).rstrip() + "\n"


def flatten_residuals(report: dict) -> tuple[dict, dict]:
    """All residuals and tolerances across sections, names prefixed by section."""
    res, tols = {}, {}
    for title, sec in _sections(report):
        prefix = "" if title == "checks" else f"{title}."
        for k, v in sec.get("residuals", {}).items():
            res[prefix + k] = float(v)
            tols[prefix + k] = float(sec.get("tolerances", {}).get(k, sec.get("tolerance")))
    return res, tols
