from __future__ import annotations

import pytest

from kgchat import datafiles
from kgchat.kg.store import TripleStore
from kgchat.llm import PromptLibrary, ScriptedBackend
from kgchat.model import BackendSpec, EngineConfig
from kgchat.orchestrator import Engine

E = "http://desk.example/e/"
P = "http://desk.example/p/"


@pytest.fixture(scope="session")
def prompts() -> PromptLibrary:
    return PromptLibrary.bundled()


@pytest.fixture(scope="session")
def desk_store() -> TripleStore:
    return TripleStore.from_file(datafiles.desk_store_path())


@pytest.fixture()
def desk_backend() -> ScriptedBackend:
    return ScriptedBackend.from_file(datafiles.desk_rules_path())


@pytest.fixture()
def desk_config() -> EngineConfig:
    return EngineConfig(
        store_file=datafiles.desk_store_path(),
        llm_backend=BackendSpec(kind="scripted", rules_file=datafiles.desk_rules_path()),
    )


@pytest.fixture()
def desk_engine(desk_config, desk_store, desk_backend, prompts) -> Engine:
    return Engine(desk_config, target=desk_store, backend=desk_backend, prompts=prompts)
