#!/usr/bin/env python
# -*- coding: utf-8 -*-

import json
import pathlib

import pytest

from compiled_games.io import (
    dumps_canonical,
    pathlike_to_fs,
    read_json,
    write_json,
    write_jsonl,
)


@pytest.mark.parametrize(
    "enforce_exists",
    [
        pytest.param(
            True,
            marks=pytest.mark.xfail(raises=FileNotFoundError),
        ),
        (False),
    ],
)
def test_pathlike_to_fs_with_missing_file(
    enforce_exists: bool, tmp_path: pathlib.Path
) -> None:
    pathlike_to_fs(tmp_path / "missing-game.json", enforce_exists)


def test_dumps_canonical_is_order_independent() -> None:
    assert dumps_canonical({"b": 1, "a": [1, 2]}) == dumps_canonical(
        {"a": [1, 2], "b": 1}
    )


def test_write_then_read(tmp_path: pathlib.Path) -> None:
    document = {"value": 0.75, "kind": "classical"}
    path = tmp_path / "result.json"
    write_json(path, document)

    assert read_json(path) == document
    assert path.read_text().endswith("\n")


def test_write_jsonl(tmp_path: pathlib.Path) -> None:
    path = tmp_path / "transcripts.jsonl"
    count = write_jsonl(path, ({"trial": i} for i in range(3)))

    lines = path.read_text().splitlines()
    assert count == 3
    assert [json.loads(line)["trial"] for line in lines] == [0, 1, 2]


def test_read_json_rejects_garbage(tmp_path: pathlib.Path) -> None:
    path = tmp_path / "broken.json"
    path.write_text("{not json")

    with pytest.raises(ValueError):
        read_json(path)
