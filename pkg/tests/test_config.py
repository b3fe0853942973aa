import pytest

from balanced_flow import ConfigValidationError, RunConfig, parse_config
from balanced_flow.config import parse_pairs


def test_minimal_defaults():
    cfg = parse_config("beta=0.3")
    assert (cfg.N, cfg.M, cfg.s, cfg.f_tol) == (40, 20, 0.95, 1e-6)
    assert cfg.command == "solve" and cfg.tail_mode == "frozen_exp"


@pytest.mark.parametrize("text,key", [
    ("beta=1.2", "beta"),
    ("beta=-0.1", "beta"),
    ("beta=0.3 s=0", "s"),
    ("beta=0.3 s=1.5", "s"),
    ("beta=0.3 N=3", "N"),
    ("beta=0.3 N=10 M=9", "M"),
    ("beta=0.3 N=4.5", "N"),
    ("beta=0.3 colour=red", "colour"),
    ("beta=0.3 tail_mode=magic", "tail_mode"),
    ("", "beta"),
])
def test_validation_names_key(text, key):
    with pytest.raises(ConfigValidationError) as info:
        parse_config(text)
    assert info.value.key == key


def test_unperturbed_flow_accepted():
    assert parse_config("beta=0.3 s=1.0").s == 1.0


def test_comments_dashes_and_lines():
    text = """
    # base run
    beta=0.2   # inline
    t-max=50
    s_grid=0.1,0.5
    """
    cfg = parse_config(text)
    assert cfg.t_max == 50.0 and cfg.s_grid == (0.1, 0.5)
    assert parse_pairs("beta=1 # s=2") == {"beta": "1"}


def test_command_rules():
    with pytest.raises(ConfigValidationError):
        parse_config("beta=0.3", command="sweep-s")
    with pytest.raises(ConfigValidationError):
        parse_config("beta=0.3 s_list=0.99,0.9", command="sweep-s")
    with pytest.raises(ConfigValidationError):
        parse_config("", command="verify")
    with pytest.raises(ConfigValidationError):
        parse_config("beta=0.96", command="continue-beta")
    cfg = parse_config("snapshot=x.json", command="verify")
    assert cfg.beta is None


def test_overrides_win():
    assert parse_config("beta=0.3", N=60).M == 30


def test_digest_deterministic():
    a = parse_config("beta=0.3 N=40")
    b = parse_config("N=40\nbeta=0.3")
    assert a.digest() == b.digest()
    assert a.digest() != parse_config("beta=0.31").digest()


def test_digest_tracks_snapshot_bytes(tmp_path):
    snap = tmp_path / "s.json"
    snap.write_text("{}")
    a = parse_config(f"snapshot={snap}", command="verify").digest()
    snap.write_text("{ }")
    assert parse_config(f"snapshot={snap}", command="verify").digest() != a


def test_config_builders():
    cfg = parse_config("beta=0.9 delta=0.05", command="continue-beta")
    assert cfg.plan().schedule[0] == 0.4
    fc = cfg.flow_config()
    assert fc.N == 40 and fc.quad.rel_tol == 1e-10
    assert isinstance(cfg, RunConfig)


def test_digest_ignores_plot_switches():
    assert parse_config("beta=0.3 svg=true plots=false").digest() == \
        parse_config("beta=0.3").digest()
