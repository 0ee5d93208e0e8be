import os

import pytest

from veriml import config as cfgmod
from veriml import runner
from veriml.data import make_blobs


@pytest.fixture(scope="session", autouse=True)
def _isolated_cache(tmp_path_factory):
    """Point the fixture cache at a per-session temp dir: tests never touch
    (or depend on) the user's real cache, but still share training work."""
    path = tmp_path_factory.mktemp("veriml-cache")
    previous = os.environ.get("VERIML_CACHE_DIR")
    os.environ["VERIML_CACHE_DIR"] = str(path)
    yield str(path)
    if previous is None:
        os.environ.pop("VERIML_CACHE_DIR", None)
    else:
        os.environ["VERIML_CACHE_DIR"] = previous


def _built(scenario, provider_kind="SubstituteModel", trials=2):
    raw = cfgmod.builtin_config(scenario, provider_kind=provider_kind,
                                trials=trials)
    cfg = cfgmod.validate_config(raw)
    return cfg, runner.build_fixtures(cfg)


@pytest.fixture(scope="session")
def steg_env(_isolated_cache):
    """(config, fixtures) for the steg-probe campaign: trained classifier
    with reveal head, steg nets, calibrated rates, probe covers."""
    return _built(cfgmod.STEG_PROBE)


@pytest.fixture(scope="session")
def det_env(_isolated_cache):
    return _built(cfgmod.DETERMINISTIC_BENCH)


@pytest.fixture(scope="session")
def prob_env(_isolated_cache):
    return _built(cfgmod.PROBABILISTIC_BENCH)


@pytest.fixture(scope="session")
def meta_env(_isolated_cache):
    return _built(cfgmod.METARESULT)


@pytest.fixture(scope="session")
def robust_env(_isolated_cache):
    return _built(cfgmod.ROBUSTNESS)


@pytest.fixture(scope="session")
def auditor_env(_isolated_cache):
    return _built(cfgmod.AUDITOR)


@pytest.fixture(scope="session")
def easy_data():
    """Well-separated blobs any sane classifier aces."""
    return make_blobs(3, 60, 6, 0.05, seed=11)
