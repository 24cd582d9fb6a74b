"""Tests for config module."""

import pytest

from fcds_packing.config import (
    ConfigError,
    RunConfig,
    build_config,
    load_graph_source,
    parse_generator_spec,
    read_config_file,
)
from fcds_packing.graph_core import GraphParameterError, generate_harary, save_graph


class TestRunConfig:
    """Tests for RunConfig validation."""

    def test_defaults(self):
        """Test the default settings."""
        config = RunConfig(graph="harary:8:4")
        assert (config.lmul, config.seed, config.seeds, config.jobs) == (1.0, 0, 1, 1)
        assert config.verify_level == "structural"
        assert config.t is None

    @pytest.mark.parametrize("kwargs", [
        {"graph": ""},
        {"graph": "g.txt", "t": 0},
        {"graph": "g.txt", "lmul": 0.0},
        {"graph": "g.txt", "seeds": 0},
        {"graph": "g.txt", "jobs": 0},
        {"graph": "g.txt", "verify_level": "deep"},
    ])
    def test_invalid(self, kwargs):
        """Test that each bad setting raises ConfigError."""
        with pytest.raises(ConfigError):
            RunConfig(**kwargs)

    def test_as_dict_echo(self):
        """Test that the echo holds the result-determining settings only."""
        data = RunConfig(graph="harary:8:4", seed=3, jobs=4).as_dict()
        assert data["seed"] == 3
        assert "jobs" not in data
        assert "out" not in data


class TestConfigFile:
    """Tests for flat config files."""

    def test_read(self, tmp_path):
        """Test comments, dashes and whitespace."""
        path = tmp_path / "run.conf"
        path.write_text("# experiment\ngraph = harary:16:4\nverify-level = full  # deep\n\nseed=7\n")

        assert read_config_file(path) == {"graph": "harary:16:4", "verify_level": "full", "seed": "7"}

    def test_unknown_key(self, tmp_path):
        """Test that unknown keys are rejected with the line number."""
        path = tmp_path / "run.conf"
        path.write_text("graph = g.txt\ncolour = blue\n")

        with pytest.raises(ConfigError, match=r":2: unknown key"):
            read_config_file(path)

    def test_repeated_key(self, tmp_path):
        """Test that a key may appear once."""
        path = tmp_path / "run.conf"
        path.write_text("seed = 1\nseed = 2\n")

        with pytest.raises(ConfigError, match="twice"):
            read_config_file(path)

    def test_malformed_line(self, tmp_path):
        """Test that a line without '=' is rejected."""
        path = tmp_path / "run.conf"
        path.write_text("graph harary:8:4\n")

        with pytest.raises(ConfigError, match="key = value"):
            read_config_file(path)

    def test_missing_file(self, tmp_path):
        """Test that an unreadable file is a config error."""
        with pytest.raises(ConfigError, match="Cannot read"):
            read_config_file(tmp_path / "absent.conf")


class TestBuildConfig:
    """Tests for merging file values and overrides."""

    def test_overrides_win(self):
        """Test that set overrides replace file values and None leaves them."""
        config = build_config(
            {"graph": "harary:8:4", "seed": "4", "t": "auto", "verbose": "yes"},
            {"seed": 9, "lmul": None},
        )
        assert config.seed == 9
        assert config.lmul == 1.0
        assert config.t is None
        assert config.verbose is True

    def test_bad_value(self):
        """Test that unparsable values raise ConfigError."""
        with pytest.raises(ConfigError, match="Bad value"):
            build_config({"graph": "g.txt", "seed": "many"})

    def test_bad_boolean(self):
        """Test that a boolean must be spelled as one."""
        with pytest.raises(ConfigError):
            build_config({"graph": "g.txt", "verbose": "perhaps"})

    def test_graph_required(self):
        """Test that a graph source is mandatory."""
        with pytest.raises(ConfigError, match="graph source"):
            build_config({"seed": "1"}, {"t": 2})

    def test_unknown_override(self):
        """Test that unknown overrides are refused."""
        with pytest.raises(ConfigError):
            build_config({"graph": "g.txt"}, {"colour": "blue"})


class TestGraphSource:
    """Tests for graph source specs."""

    def test_generator_spec(self):
        """Test splitting generator names and arguments."""
        assert parse_generator_spec("harary:8:4") == ("harary", (8, 4))
        assert parse_generator_spec("complete:5") == ("complete", (5,))
        assert parse_generator_spec("graphs/h.txt") is None
        assert parse_generator_spec("harary") is None

    def test_wrong_arity(self):
        """Test that the argument count is checked."""
        with pytest.raises(ConfigError):
            parse_generator_spec("harary:8")

    def test_non_integer(self):
        """Test that generator arguments must be integers."""
        with pytest.raises(ConfigError):
            parse_generator_spec("ringclique:4:x")

    def test_load_generated(self):
        """Test building graphs from specs."""
        assert load_graph_source("harary:8:4") == generate_harary(8, 4)
        assert len(load_graph_source("complete:5").edges) == 10
        assert load_graph_source("ringclique:3:4").node_count == 12

    def test_load_file(self, tmp_path):
        """Test that other specs are read as files."""
        path = tmp_path / "g.txt"
        save_graph(generate_harary(6, 3), path)
        assert load_graph_source(str(path)) == generate_harary(6, 3)

    def test_invalid_generator_arguments(self):
        """Test that generator errors surface unchanged."""
        with pytest.raises(GraphParameterError):
            load_graph_source("harary:3:5")

    def test_missing_file(self, tmp_path):
        """Test that a missing file raises OSError."""
        with pytest.raises(OSError):
            load_graph_source(str(tmp_path / "absent.txt"))
