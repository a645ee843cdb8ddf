"""Formatos de saída dos relatórios de execução.

Funcionalidades:
- report.json canônico (chaves ordenadas, sem campos de relógio de parede)
- trace.jsonl com um evento por linha e versão de esquema
- metrics.csv com uma linha por propriedade
- Renderizações legíveis do relatório em TXT e PDF
- Tabelas CSV de varreduras e de limites
"""
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence
import csv
import json
import logging

try:
    from reportlab.lib.pagesizes import A4
    from reportlab.platypus import SimpleDocTemplate, Paragraph, Spacer
    from reportlab.lib.styles import getSampleStyleSheet, ParagraphStyle
    from reportlab.lib import colors
except ImportError:
    SimpleDocTemplate = None
    Paragraph = None
    getSampleStyleSheet = None

logger = logging.getLogger(__name__)

TRACE_SCHEMA_VERSION = 1
METRIC_COLUMNS = ("seed", "property", "params", "checked", "violations", "status")
STRING_PREVIEW = 120


def _prepare(path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def report_json_text(report: Dict[str, Any]) -> str:
    return json.dumps(report, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def write_report_json(report: Dict[str, Any], output_path: Path) -> Path:
    """Grava o relatório canônico; execuções com mesma seed geram bytes idênticos."""
    path = _prepare(output_path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(report_json_text(report))
    logger.info(f"Relatório salvo: {path}")
    return path


def write_trace_jsonl(events: Iterable[Dict[str, Any]], output_path: Path) -> Path:
    path = _prepare(output_path)
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps({"event": "schema", "version": TRACE_SCHEMA_VERSION}) + "\n")
        for event in events:
            f.write(json.dumps(event, sort_keys=True, ensure_ascii=False) + "\n")
            count += 1
    logger.info(f"Trace salvo: {path} ({count} eventos)")
    return path


def read_trace_jsonl(path: Path) -> List[Dict[str, Any]]:
    """Lê um trace; rejeita versões de esquema desconhecidas."""
    events = []
    with open(path, "r", encoding="utf-8") as f:
        header = json.loads(f.readline())
        if header.get("event") != "schema" or header.get("version") != TRACE_SCHEMA_VERSION:
            raise ValueError(f"Trace com esquema desconhecido: {header}")
        for line in f:
            if line.strip():
                events.append(json.loads(line))
    return events


def metric_rows(report: Dict[str, Any]) -> List[Dict[str, Any]]:
    rows = []
    for name, prop in sorted(report.get("properties", {}).items()):
        n = len(prop.get("violations", []))
        rows.append({
            "seed": report.get("seed"),
            "property": name,
            "params": json.dumps(prop.get("params", {}), sort_keys=True),
            "checked": prop.get("checked", 0),
            "violations": n,
            "status": "ok" if n == 0 else "violated",
        })
    return rows


def write_metrics_csv(report: Dict[str, Any], output_path: Path) -> Path:
    path = _prepare(output_path)
    write_table(metric_rows(report), path, columns=METRIC_COLUMNS)
    return path


def write_table(rows: Sequence[Dict[str, Any]], output_path: Path,
                columns: Optional[Sequence[str]] = None) -> Path:
    """CSV genérico; colunas na ordem de primeira aparição quando não informadas."""
    path = _prepare(output_path)
    if columns is None:
        seen: Dict[str, None] = {}
        for row in rows:
            for key in row:
                seen.setdefault(key, None)
        columns = list(seen)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: _cell(row.get(c)) for c in columns})
    logger.info(f"Tabela salva: {path} ({len(rows)} linhas)")
    return path


def _cell(value: Any) -> Any:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True, ensure_ascii=False)
    return "" if value is None else value


def _preview(text: str) -> str:
    if len(text) <= STRING_PREVIEW:
        return text
    return text[:STRING_PREVIEW] + f"... ({len(text)} símbolos)"


# ----------------------------------------------------------------------
# Renderizações legíveis
# ----------------------------------------------------------------------
def report_to_txt(report: Dict[str, Any], output_path: Path) -> Path:
    """Converte o relatório para TXT legível."""
    path = _prepare(output_path)
    w = report.get("characteristic_string", "")
    with open(path, "w", encoding="utf-8") as f:
        f.write("=" * 80 + "\n")
        f.write("RELATÓRIO DE EXECUÇÃO DO SIMULADOR\n")
        f.write("=" * 80 + "\n\n")
        f.write(f"Seed: {report.get('seed')}\n")
        f.write(f"Status: {report.get('status')}\n")
        if report.get("verdict"):
            f.write(f"Veredito: {report['verdict']}\n")
        f.write(f"Slots simulados: {report.get('slots')}\n")
        f.write(f"Ticks: {report.get('ticks')}\n")
        chain = report.get("final_chain", {})
        f.write(f"Cadeia final: {chain.get('length', 0)} blocos\n\n")

        f.write("-" * 80 + "\n")
        f.write("STRING CARACTERÍSTICA\n")
        f.write("-" * 80 + "\n")
        f.write(f"W:   {_preview(w)}\n")
        f.write(f"W^r: {_preview(report.get('reduced_string', ''))}\n")
        counts = {s: w.count(s) for s in ("0", "1", "⊥")}
        f.write(f"Contagens: 0={counts['0']} 1={counts['1']} ⊥={counts['⊥']}\n\n")

        f.write("-" * 80 + "\n")
        f.write("PROPRIEDADES\n")
        f.write("-" * 80 + "\n")
        for name, prop in sorted(report.get("properties", {}).items()):
            n = len(prop.get("violations", []))
            f.write(f"{name}: {prop.get('checked', 0)} verificações, {n} violações {prop.get('params', {})}\n")
            for v in prop.get("violations", [])[:5]:
                f.write(f"   slot {v['slot']} parte {v['party']}: {v['witness']}\n")
        f.write("\n")

        f.write("-" * 80 + "\n")
        f.write("DURAÇÃO DE ROUND POR ÉPOCA\n")
        f.write("-" * 80 + "\n")
        for ep, t_round in sorted(report.get("round_lengths", {}).items(), key=lambda kv: int(kv[0])):
            f.write(f"Época {ep}: {t_round} ticks\n")
        f.write("\n")

        bounds = report.get("bounds", {})
        if bounds:
            f.write("-" * 80 + "\n")
            f.write("LIMITES\n")
            f.write("-" * 80 + "\n")
            for key in sorted(bounds):
                f.write(f"{key}: {bounds[key]}\n")
    logger.info(f"Relatório TXT salvo: {path}")
    return path


def report_to_pdf(report: Dict[str, Any], output_path: Path) -> Path:
    """Converte o relatório para PDF.

    Raises:
        RuntimeError: Se reportlab não estiver instalado
    """
    if not SimpleDocTemplate:
        raise RuntimeError("Dependência reportlab não encontrada. Instale: pip install reportlab")
    path = _prepare(output_path)
    pdf_doc = SimpleDocTemplate(str(path), pagesize=A4, rightMargin=72, leftMargin=72,
                                topMargin=72, bottomMargin=18)
    styles = getSampleStyleSheet()
    title_style = ParagraphStyle("CustomTitle", parent=styles["Heading1"], fontSize=16,
                                 spaceAfter=30, alignment=1, textColor=colors.darkblue)
    heading_style = ParagraphStyle("CustomHeading", parent=styles["Heading2"], fontSize=12,
                                   spaceAfter=12, textColor=colors.darkblue)
    normal = styles["Normal"]

    content = [Paragraph("RELATÓRIO DE EXECUÇÃO DO SIMULADOR", title_style), Spacer(1, 12)]
    content.append(Paragraph(f"<b>Seed:</b> {report.get('seed')}", normal))
    content.append(Paragraph(f"<b>Status:</b> {report.get('status')}", normal))
    if report.get("verdict"):
        content.append(Paragraph(f"<b>Veredito:</b> {report['verdict']}", normal))
    content.append(Paragraph(f"<b>Slots simulados:</b> {report.get('slots')}", normal))
    content.append(Spacer(1, 20))

    content.append(Paragraph("String característica", heading_style))
    content.append(Paragraph(_preview(report.get("characteristic_string", "")), normal))
    content.append(Spacer(1, 12))

    content.append(Paragraph("Propriedades", heading_style))
    for name, prop in sorted(report.get("properties", {}).items()):
        n = len(prop.get("violations", []))
        content.append(Paragraph(f"<b>{name}:</b> {prop.get('checked', 0)} verificações, {n} violações", normal))
    content.append(Spacer(1, 12))

    content.append(Paragraph("Duração de round por época", heading_style))
    for ep, t_round in sorted(report.get("round_lengths", {}).items(), key=lambda kv: int(kv[0])):
        content.append(Paragraph(f"Época {ep}: {t_round} ticks", normal))

    bounds = report.get("bounds", {})
    if bounds:
        content.append(Spacer(1, 12))
        content.append(Paragraph("Limites", heading_style))
        for key in sorted(bounds):
            content.append(Paragraph(f"<b>{key}:</b> {bounds[key]}", normal))

    pdf_doc.build(content)
    logger.info(f"Relatório PDF salvo: {path}")
    return path
