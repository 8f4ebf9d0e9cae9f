"""Paths to the bundled desk-scale fixture data."""

from __future__ import annotations

from importlib import resources


def _data_path(name: str) -> str:
    return str(resources.files("kgchat").joinpath(f"data/{name}"))


def desk_store_path() -> str:
    return _data_path("desk-kg.nt")


def desk_rules_path() -> str:
    return _data_path("desk_rules.json")


def desk_single_path() -> str:
    return _data_path("desk_single.json")


def desk_dialogues_path() -> str:
    return _data_path("desk_dialogues.json")


def desk_nohallucination_path() -> str:
    return _data_path("desk_nohallucination.json")


def gold_qirs_path() -> str:
    return _data_path("gold_qirs.json")
