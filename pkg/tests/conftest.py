import sys
from pathlib import Path

import pytest

from stageprompt.bench import BenchComponents
from stageprompt.clients import (
    ScriptedVisionClient,
    default_scripted_chat_client,
    hash_score_plan,
)
from stageprompt.decomposer import LlmConfig
from stageprompt.judge import VlmConfig


@pytest.fixture
def scripted_llm():
    return default_scripted_chat_client()


@pytest.fixture
def scripted_vlm():
    return ScriptedVisionClient(hash_score_plan)


@pytest.fixture
def components(tmp_path, scripted_llm, scripted_vlm):
    """Offline bench components writing under a per-test directory."""
    return BenchComponents(
        llm_client=scripted_llm,
        vlm_client=scripted_vlm,
        out_dir=tmp_path / "out",
        llm=LlmConfig(max_retries=1),
        vlm=VlmConfig(max_retries=1),
    )


@pytest.fixture
def out_dir(tmp_path) -> Path:
    d = tmp_path / "out"
    d.mkdir()
    return d


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo one verdict line per acceptance criterion after the run."""
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    verdicts = getattr(module, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for line in verdicts:
            terminalreporter.write_line(line)
