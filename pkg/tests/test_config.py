"""
Tests for process settings and scoped overrides
"""
import sys
from pathlib import Path

import pytest

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.coneweyl.config import get_settings, override_settings, reset_settings, settings_dict
from src.coneweyl.errors import ConfigError


def test_override_is_restored_on_exit():
    before = get_settings()
    with override_settings(edge_grid=64) as inside:
        assert inside.edge_grid == 64
        assert get_settings().edge_grid == 64
    assert get_settings() == before


def test_override_is_restored_after_an_error():
    before = get_settings().pivot_tol
    with pytest.raises(RuntimeError):
        with override_settings(pivot_tol=1e-3):
            raise RuntimeError("boom")
    assert get_settings().pivot_tol == before


def test_unknown_setting_is_rejected():
    before = get_settings()
    with pytest.raises(ConfigError) as exc:
        with override_settings(no_such_knob=1):
            pass
    assert exc.value.field == "numerics"
    assert get_settings() == before


def test_reset_rereads_defaults():
    reset_settings()
    assert settings_dict()["pivot_tol"] == 1e-13
    assert get_settings() is get_settings()
