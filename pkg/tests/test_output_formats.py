import csv
import json

import pytest

from autosyn.output_formats import (
    TRACE_SCHEMA_VERSION,
    metric_rows,
    read_trace_jsonl,
    report_json_text,
    report_to_pdf,
    report_to_txt,
    write_metrics_csv,
    write_report_json,
    write_table,
    write_trace_jsonl,
)

REPORT = {
    "seed": 7,
    "status": "violation",
    "verdict": "Abort simulation: chain quality violation",
    "slots": 3,
    "ticks": 40,
    "characteristic_string": "01⊥",
    "reduced_string": "01⊥",
    "properties": {
        "CQ": {"params": {"mu": 0.1, "k": 2}, "checked": 4,
               "violations": [{"slot": 3, "party": "P1", "witness": {"honest": 0}}]},
        "CP": {"params": {"k": 2}, "checked": 4, "violations": []},
    },
    "round_lengths": {"1": 10, "2": 12},
    "bounds": {"eps_cp": 0.5},
    "final_chain": {"length": 2},
}


def test_report_json_is_canonical(tmp_path):
    path = write_report_json(REPORT, tmp_path / "sub" / "report.json")
    text = path.read_text(encoding="utf-8")
    assert text == report_json_text(dict(reversed(list(REPORT.items()))))
    assert json.loads(text)["seed"] == 7


def test_trace_has_schema_header(tmp_path):
    path = write_trace_jsonl([{"event": "fetch", "tick": 3}], tmp_path / "trace.jsonl")
    first = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
    assert first == {"event": "schema", "version": TRACE_SCHEMA_VERSION}
    assert read_trace_jsonl(path) == [{"event": "fetch", "tick": 3}]


def test_trace_with_unknown_schema_is_rejected(tmp_path):
    path = tmp_path / "antigo.jsonl"
    path.write_text(json.dumps({"event": "schema", "version": 99}) + "\n", encoding="utf-8")
    with pytest.raises(ValueError):
        read_trace_jsonl(path)


def test_metric_rows_one_per_property(tmp_path):
    rows = metric_rows(REPORT)
    assert [r["property"] for r in rows] == ["CP", "CQ"]
    assert rows[1]["status"] == "violated" and rows[1]["violations"] == 1
    assert rows[0]["status"] == "ok"
    path = write_metrics_csv(REPORT, tmp_path / "metrics.csv")
    with open(path, encoding="utf-8") as f:
        parsed = list(csv.DictReader(f))
    assert parsed[1]["params"] == json.dumps({"k": 2, "mu": 0.1}, sort_keys=True)


def test_write_table_infers_columns(tmp_path):
    path = write_table([{"a": 1, "b": 0.1}, {"a": 2, "c": None}], tmp_path / "t.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "a,b,c"
    assert lines[1] == "1,0.1,"
    assert lines[2] == "2,,"


def test_txt_report(tmp_path):
    path = report_to_txt(REPORT, tmp_path / "report.txt")
    text = path.read_text(encoding="utf-8")
    assert "Status: violation" in text
    assert "Contagens: 0=1 1=1 ⊥=1" in text
    assert "CQ: 4 verificações, 1 violações" in text
    assert "Época 2: 12 ticks" in text


def test_txt_preview_truncates_long_strings(tmp_path):
    report = dict(REPORT, characteristic_string="0" * 500)
    text = report_to_txt(report, tmp_path / "longo.txt").read_text(encoding="utf-8")
    assert "(500 símbolos)" in text


def test_pdf_report(tmp_path):
    pytest.importorskip("reportlab")
    path = report_to_pdf(REPORT, tmp_path / "report.pdf")
    assert path.read_bytes().startswith(b"%PDF")
