import json
import os

import pytest

from ear_sift import Config, ConfigError, ImageFileNotFound, config_fingerprint, load_config
from ear_sift.config_utils import ENV_CONFIG_KEY, config_from_dict, read_config_file

# Define a test folder to isolate test artifacts
TEST_FOLDER = os.path.join(os.getcwd(), "ear_sift_test_folder_config")
os.makedirs(TEST_FOLDER, exist_ok=True)


@pytest.fixture(scope="module", autouse=True)
def setup_teardown():
    """
    Fixture to handle setup and teardown for all tests.

    - Cleans up all files and folders in `TEST_FOLDER` after tests complete.
    """
    yield
    for root, dirs, files in os.walk(TEST_FOLDER, topdown=False):
        for file in files:
            os.remove(os.path.join(root, file))
        for d in dirs:
            os.rmdir(os.path.join(root, d))
    os.rmdir(TEST_FOLDER)


def _write(name: str, content: str) -> str:
    path = os.path.join(TEST_FOLDER, name)
    with open(path, "wt") as fout:
        fout.write(content)
    return path


def test_defaults():
    """
    Test the default configuration.

    - k 5, tau_kl 2, w_min 0.05, after mode, NN at ratio 0.8, psi 0.3.
    """
    config = Config()
    assert (config.k, config.tau_kl, config.w_min) == (5, 2.0, 0.05)
    assert (config.mode, config.gate_mode, config.seed) == ("after", "reference", 0)
    assert (config.match.strategy, config.match.ratio, config.match.psi) == ("nn", 0.8, 0.3)
    assert config.sift.sigma0 == 1.6 and config.sift.initial_upsample


def test_config_from_dict():
    """
    Test the `config_from_dict` function.

    - Nested and dotted keys are equivalent; text values are coerced.
    - Unknown keys and unparsable or out-of-range values raise ConfigError.
    """
    nested = config_from_dict({"k": 4, "sift": {"initial_upsample": False}, "match": {"strategy": "ED"}})
    dotted = config_from_dict({"K": "4", "sift.initial_upsample": "no", "match.strategy": "ed"})
    assert nested == dotted
    assert nested.k == 4 and not nested.sift.initial_upsample and nested.match.strategy == "ed"

    for bad in ({"colour": 3}, {"sift.unknown": 1}, {"k": "four"}, {"k": 2.5}, {"k": 0}, {"mode": "during"}):
        with pytest.raises(ConfigError):
            config_from_dict(bad)


def test_read_config_file():
    """
    Test `read_config_file` on JSON, YAML and key = value files.
    """
    as_json = _write("config.json", json.dumps({"k": 3, "match": {"psi": 0.25}}))
    as_yaml = _write("config.yaml", "k: 3\nmatch:\n  psi: 0.25\n")
    as_text = _write("config.env", "# comment\nk = 3\nmatch.psi = 0.25\n")
    expected = config_from_dict({"k": 3, "match.psi": 0.25})
    for path in (as_json, as_yaml, as_text):
        assert config_from_dict(read_config_file(path)) == expected

    broken = _write("broken.json", "{not json")
    with pytest.raises(ConfigError):
        read_config_file(broken)
    listed = _write("listed.yaml", "- 1\n- 2\n")
    with pytest.raises(ConfigError):
        read_config_file(listed)
    with pytest.raises(ImageFileNotFound):
        read_config_file(os.path.join(TEST_FOLDER, "missing.json"))


def test_load_config_fallback(monkeypatch):
    """
    Test the fallback order of `load_config`.

    - An explicit file wins over EARSIFT_CONFIG.
    - EARSIFT_CONFIG can come from a .env file.
    - Overrides apply last and None overrides are ignored.
    """
    explicit = _write("explicit.yaml", "k: 7\n")
    from_env = _write("from_env.yaml", "k: 6\nseed: 11\n")
    env_file = _write("test.env", f"{ENV_CONFIG_KEY}={from_env}\n")

    monkeypatch.setenv(ENV_CONFIG_KEY, from_env)
    monkeypatch.delenv(ENV_CONFIG_KEY)
    assert load_config(env_files=()).k == 5
    assert load_config(env_files=(env_file,)).k == 6

    assert load_config(explicit, env_files=()).k == 7
    config = load_config(explicit, {"seed": 3, "match.strategy": "ed", "mode": None}, env_files=())
    assert (config.k, config.seed, config.match.strategy, config.mode) == (7, 3, "ed", "after")


def test_fingerprint():
    """
    Test that `config_fingerprint` follows every field.
    """
    base = config_fingerprint(Config())
    assert len(base) == 16
    assert base == config_fingerprint(config_from_dict({}))
    assert base != config_fingerprint(config_from_dict({"sift.contrast_threshold": 0.04}))
    assert base != config_fingerprint(config_from_dict({"match.psi": 0.31}))
