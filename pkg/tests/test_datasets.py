"""Dataset ingestion: raw-file mapping, unified schema, subsetting, templates."""

from __future__ import annotations

import json

import pytest

from agora.datasets import (
    EmptyDataset,
    FieldMapping,
    FormatError,
    MappingError,
    UnknownTemplate,
    instruction_for,
    load_dataset,
    load_input_file,
    load_unified,
    registered_instructions,
    resolve_instruction,
    serialize_unified,
    sidecar_path,
    subset,
    unified_record_to_instance,
)
from agora.domain import TaskInstance


BASIC_MAPPING = FieldMapping(input_fields=("question",), reference_fields=("answer",))


def write_json(tmp_path, name: str, data) -> str:
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def write_jsonl(tmp_path, name: str, records) -> str:
    path = tmp_path / name
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")
    return str(path)


# -- field mapping --


def test_mapping_requires_input_and_reference_fields():
    with pytest.raises(ValueError):
        FieldMapping(input_fields=(), reference_fields=("a",))
    with pytest.raises(ValueError):
        FieldMapping(input_fields=("q",), reference_fields=())


def test_mapping_from_dict():
    mapping = FieldMapping.from_dict(
        {
            "input_fields": ["question"],
            "reference_fields": ["answer"],
            "id_field": "qid",
            "context_fields": ["passage"],
            "answer_letter_field": "letter",
        }
    )
    assert mapping.input_fields == ("question",)
    assert mapping.id_field == "qid"
    assert mapping.context_fields == ("passage",)


# -- raw loading --


def test_load_dataset_json_array(tmp_path):
    path = write_json(
        tmp_path,
        "data.json",
        [
            {"question": "Why?", "answer": "Because."},
            {"question": "How?", "answer": "Like so."},
        ],
    )
    instances = load_dataset(path, "json", BASIC_MAPPING)
    assert [i.input_lines for i in instances] == [("Why?",), ("How?",)]
    assert instances[0].references == ("Because.",)


def test_load_dataset_synthesizes_zero_padded_ids(tmp_path):
    path = write_json(
        tmp_path, "data.json", [{"question": f"q{i}", "answer": "a"} for i in range(3)]
    )
    instances = load_dataset(path, "json", BASIC_MAPPING)
    assert [i.id for i in instances] == ["0001", "0002", "0003"]


def test_load_dataset_uses_id_field(tmp_path):
    mapping = FieldMapping(("question",), ("answer",), id_field="qid")
    path = write_json(
        tmp_path, "data.json", [{"qid": "x-9", "question": "q", "answer": "a"}]
    )
    assert load_dataset(path, "json", mapping)[0].id == "x-9"


def test_load_dataset_collects_all_bad_rows(tmp_path):
    path = write_json(
        tmp_path,
        "data.json",
        [
            {"question": "ok", "answer": "ok"},
            {"question": "no answer"},
            {"answer": "no question"},
        ],
    )
    with pytest.raises(MappingError) as exc:
        load_dataset(path, "json", BASIC_MAPPING)
    message = str(exc.value)
    assert "row 2: missing field(s) answer" in message
    assert "row 3: missing field(s) question" in message


def test_load_dataset_duplicate_ids(tmp_path):
    mapping = FieldMapping(("question",), ("answer",), id_field="qid")
    path = write_json(
        tmp_path,
        "data.json",
        [
            {"qid": "a", "question": "q", "answer": "a"},
            {"qid": "a", "question": "q2", "answer": "a2"},
        ],
    )
    with pytest.raises(MappingError, match="duplicate sample ids: a"):
        load_dataset(path, "json", mapping)


def test_load_dataset_list_fields_become_lines(tmp_path):
    mapping = FieldMapping(("parts",), ("answer",), context_fields=("notes",))
    path = write_json(
        tmp_path,
        "data.json",
        [{"parts": ["first", "second"], "answer": "a", "notes": ["n1", "n2"]}],
    )
    instance = load_dataset(path, "json", mapping)[0]
    assert instance.input_lines == ("first", "second")
    assert instance.context_lines == ("n1", "n2")


def test_load_dataset_context_is_optional_per_row(tmp_path):
    mapping = FieldMapping(("question",), ("answer",), context_fields=("passage",))
    path = write_json(
        tmp_path,
        "data.json",
        [{"question": "q", "answer": "a"}, {"question": "q2", "answer": "a2", "passage": "p"}],
    )
    instances = load_dataset(path, "json", mapping)
    assert instances[0].context_lines == ()
    assert instances[1].context_lines == ("p",)


def test_load_dataset_answer_letter(tmp_path):
    mapping = FieldMapping(("question",), ("answer",), answer_letter_field="letter")
    path = write_json(
        tmp_path,
        "data.json",
        [{"question": "q", "answer": "a", "letter": " b "}],
    )
    assert load_dataset(path, "json", mapping)[0].answer_letter == "b"


def test_load_dataset_jsonl_and_csv(tmp_path):
    jsonl = write_jsonl(
        tmp_path, "data.jsonl", [{"question": "q", "answer": "a"}]
    )
    assert len(load_dataset(jsonl, "jsonl", BASIC_MAPPING)) == 1
    csv_path = tmp_path / "data.csv"
    csv_path.write_text("question,answer\nq,a\n", encoding="utf-8")
    instances = load_dataset(str(csv_path), "csv", BASIC_MAPPING)
    assert instances[0].input_lines == ("q",)


def test_load_dataset_rejects_unknown_format(tmp_path):
    path = write_json(tmp_path, "data.json", [{"question": "q", "answer": "a"}])
    with pytest.raises(FormatError):
        load_dataset(path, "xml", BASIC_MAPPING)


def test_load_dataset_rejects_missing_file(tmp_path):
    with pytest.raises(FormatError):
        load_dataset(tmp_path / "absent.json", "json", BASIC_MAPPING)


def test_load_dataset_rejects_empty(tmp_path):
    path = write_json(tmp_path, "data.json", [])
    with pytest.raises(EmptyDataset):
        load_dataset(path, "json", BASIC_MAPPING)


def test_load_dataset_rejects_non_array_json(tmp_path):
    path = write_json(tmp_path, "data.json", {"not": "a list"})
    with pytest.raises(FormatError):
        load_dataset(path, "json", BASIC_MAPPING)


# -- unified schema --


def unified_record(**overrides):
    record = {
        "id": "0001",
        "instruction": "xsum",
        "inputs": ["An article."],
        "references": ["A summary."],
    }
    record.update(overrides)
    return record


def test_unified_record_roundtrip():
    instance = unified_record_to_instance(unified_record(context=["c"], answerLetter="B"))
    assert instance.id == "0001"
    assert instance.instruction_key == "xsum"
    assert instance.context_lines == ("c",)
    assert instance.answer_letter == "B"
    (back,) = serialize_unified([instance])
    assert back["id"] == "0001"
    assert back["answerLetter"] == "B"
    assert unified_record_to_instance(back) == instance


def test_unified_record_requirements():
    with pytest.raises(MappingError, match="missing id"):
        unified_record_to_instance({"inputs": ["x"], "references": ["y"]})
    with pytest.raises(MappingError, match="inputs"):
        unified_record_to_instance(unified_record(inputs=[]))
    with pytest.raises(MappingError, match="references or answerLetter"):
        unified_record_to_instance(unified_record(references=[]))


def test_unified_letter_only_record_is_valid():
    instance = unified_record_to_instance(
        unified_record(references=[], answerLetter="C")
    )
    assert instance.references == ()
    assert instance.answer_letter == "C"


def test_load_unified_json_and_jsonl(tmp_path):
    records = [unified_record(), unified_record(id="0002")]
    json_path = write_json(tmp_path, "u.json", records)
    jsonl_path = write_jsonl(tmp_path, "u.jsonl", records)
    assert load_unified(json_path) == load_unified(jsonl_path)


def test_load_unified_reports_rows(tmp_path):
    path = write_json(tmp_path, "u.json", [unified_record(), {"inputs": ["x"]}])
    with pytest.raises(MappingError, match="row 2: missing id"):
        load_unified(path)


# -- sidecar flow --


def test_load_input_file_unified_without_sidecar(tmp_path):
    path = write_json(tmp_path, "u.json", [unified_record()])
    assert load_input_file(path)[0].id == "0001"


def test_load_input_file_with_sidecar_mapping(tmp_path):
    data_path = write_jsonl(
        tmp_path, "raw.jsonl", [{"question": "q", "answer": "a"}]
    )
    sidecar = sidecar_path(data_path)
    sidecar.write_text(
        json.dumps(
            {
                "input_fields": ["question"],
                "reference_fields": ["answer"],
                "instruction": "xsum",
            }
        ),
        encoding="utf-8",
    )
    (instance,) = load_input_file(data_path)
    assert instance.input_lines == ("q",)
    assert instance.instruction_key == "xsum"


def test_load_input_file_sidecar_format_override(tmp_path):
    # A .txt extension would infer json; the sidecar pins jsonl.
    data_path = tmp_path / "raw.txt"
    data_path.write_text('{"question": "q", "answer": "a"}\n', encoding="utf-8")
    sidecar_path(data_path).write_text(
        json.dumps(
            {"input_fields": ["question"], "reference_fields": ["answer"], "format": "jsonl"}
        ),
        encoding="utf-8",
    )
    assert len(load_input_file(data_path)) == 1


def test_load_input_file_bad_sidecar(tmp_path):
    data_path = write_json(tmp_path, "raw.json", [{"question": "q", "answer": "a"}])
    sidecar_path(data_path).write_text("not json", encoding="utf-8")
    with pytest.raises(FormatError):
        load_input_file(data_path)


def test_sidecar_path_appends_suffix():
    assert str(sidecar_path("data/input.json")).endswith("input.json.mapping.json")


# -- subsetting --


def make_samples(n: int) -> list[TaskInstance]:
    return [
        TaskInstance(id=f"{i:04d}", instruction_key="", input_lines=(f"q{i}",), references=("r",))
        for i in range(1, n + 1)
    ]


def test_subset_is_seeded_and_order_preserving():
    samples = make_samples(10)
    first = subset(samples, 4, seed=7)
    second = subset(samples, 4, seed=7)
    assert first == second
    assert [s.id for s in first] == sorted(s.id for s in first)
    assert subset(samples, 4, seed=8) != first


def test_subset_returns_everything_when_large_enough():
    samples = make_samples(3)
    assert subset(samples, 3, seed=1) == samples
    assert subset(samples, 99, seed=1) == samples


def test_subset_rejects_non_positive():
    with pytest.raises(ValueError):
        subset(make_samples(3), 0, seed=1)


# -- instruction registry --


def test_registry_covers_the_shipped_tasks():
    assert registered_instructions() == (
        "etpc",
        "gpqa",
        "mmlu_pro",
        "strategyqa",
        "winogrande",
        "xsum",
    )


def test_multiple_choice_templates_carry_the_footer():
    for key in ("winogrande", "strategyqa", "gpqa", "mmlu_pro"):
        template = instruction_for(key)
        assert template.multiple_choice
        assert "FINAL SOLUTION" in template.text
    for key in ("etpc", "xsum"):
        template = instruction_for(key)
        assert not template.multiple_choice
        assert "FINAL SOLUTION" not in template.text


def test_unknown_template_lists_known_keys():
    with pytest.raises(UnknownTemplate, match="etpc"):
        instruction_for("nope")


def test_resolve_instruction_passthrough():
    assert resolve_instruction("xsum") == instruction_for("xsum").text
    assert resolve_instruction("Do the thing.") == "Do the thing."
