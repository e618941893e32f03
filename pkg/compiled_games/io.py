#!/usr/bin/env python
# -*- coding: utf-8 -*-

import json
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Iterable, Mapping, Tuple

from fsspec.core import url_to_fs

if TYPE_CHECKING:
    from fsspec.spec import AbstractFileSystem

from .types import PathLike

###############################################################################


def pathlike_to_fs(
    uri: PathLike,
    enforce_exists: bool = False,
    fs_kwargs: Dict[str, Any] = {},
) -> Tuple["AbstractFileSystem", str]:
    """
    Resolve a game, strategy or result location to an fsspec filesystem and the
    path on it.

    Parameters
    ----------
    uri: PathLike
        A local path or any URL fsspec understands (memory://, s3://, ...).
    enforce_exists: bool
        Raise FileNotFoundError when nothing is stored at the location.
        Default: False
    fs_kwargs: Dict[str, Any]
        Passed to the filesystem constructor.
        Default: {}

    Returns
    -------
    fs: AbstractFileSystem
        The resolved filesystem.
    path: str
        The location on that filesystem.
    """
    fs, path = url_to_fs(str(uri) if isinstance(uri, Path) else uri, **fs_kwargs)
    if enforce_exists and not fs.exists(path):
        raise FileNotFoundError(f"{fs.protocol}://{path}")

    return fs, path


def read_json(uri: PathLike, fs_kwargs: Dict[str, Any] = {}) -> Any:
    """
    Read and decode a JSON document from a local or remote path.

    Raises
    ------
    FileNotFoundError
        The resource does not exist.
    ValueError
        The resource is not valid JSON.
    """
    fs, path = pathlike_to_fs(uri, enforce_exists=True, fs_kwargs=fs_kwargs)
    with fs.open(path, "r") as open_resource:
        return json.load(open_resource)


def dumps_canonical(document: Any) -> str:
    """
    Serialize a document deterministically (sorted keys, fixed separators) so that
    identical inputs always produce identical bytes.
    """
    return json.dumps(document, sort_keys=True, separators=(",", ": "), indent=2)


def write_json(uri: PathLike, document: Any, fs_kwargs: Dict[str, Any] = {}) -> None:
    fs, path = pathlike_to_fs(uri, fs_kwargs=fs_kwargs)
    with fs.open(path, "w") as open_resource:
        open_resource.write(dumps_canonical(document))
        open_resource.write("\n")


def write_jsonl(
    uri: PathLike,
    records: Iterable[Mapping[str, Any]],
    fs_kwargs: Dict[str, Any] = {},
) -> int:
    """
    Write one JSON object per line. Returns the number of records written.
    """
    fs, path = pathlike_to_fs(uri, fs_kwargs=fs_kwargs)
    count = 0
    with fs.open(path, "w") as open_resource:
        for record in records:
            open_resource.write(json.dumps(record, sort_keys=True))
            open_resource.write("\n")
            count += 1

    return count
