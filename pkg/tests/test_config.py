from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from andcoop.channel import NetworkConfig
from andcoop.config import (KINDS, ExperimentSection, RunSection, Scenario, ScenarioError, bundled,
                            emit, parse_scenario, parse_text, with_overrides)
from andcoop.protocol import ProtocolParams

HEAD = "[network]\n[protocol]\n[run]\n[experiment]\n"


def test_bundled_baseline():
    scn = parse_scenario(bundled("table2_m1.cfg"))
    cfg = scn.network
    assert cfg.n_devices == 50 and cfg.n_aps == 1
    assert cfg.payload_bytes == 50 and cfg.payload_bits == 400
    assert cfg.cycle_s == 1e-3 and cfg.bandwidth_hz == 20e6 and cfg.p_ap_dbm == 23


def test_all_bundled_parse():
    for name in ("table2_m1.cfg", "power_sweep_iid.cfg", "coverage.cfg"):
        parse_scenario(bundled(name))


def test_empty_file_lists_missing_sections():
    with pytest.raises(ScenarioError) as err:
        parse_text("")
    for s in ("[network]", "[protocol]", "[run]", "[experiment]"):
        assert s in str(err.value)


def test_beta_out_of_range_reports_line():
    text = "[network]\n[protocol]\nscheme = andcoop\nbeta = 1.5\n[run]\n[experiment]\n"
    with pytest.raises(ScenarioError) as err:
        parse_text(text, "x.cfg")
    assert err.value.line == 4 and "beta" in str(err.value) and "x.cfg:4" in str(err.value)


@pytest.mark.parametrize("text,line", [
    ("[network]\nbogus = 1\n[protocol]\n[run]\n[experiment]\n", 2),
    ("[network]\nn_devices = 3\nn_devices = 4\n[protocol]\n[run]\n[experiment]\n", 3),
    ("[network]\nn_devices = many\n[protocol]\n[run]\n[experiment]\n", 2),
    ("n_devices = 3\n" + HEAD, 1),
    ("[network]\n[network]\n[protocol]\n[run]\n[experiment]\n", 2),
    ("[nope]\n", 1),
    ("[network]\njust words\n", 2),
    (HEAD + "kind = banana\n", 5),
    ("[network]\n[protocol]\n[run]\ncycles = 0\n[experiment]\n", 4),
])
def test_errors_carry_line(text, line):
    with pytest.raises(ScenarioError) as err:
        parse_text(text)
    assert err.value.line == line


def test_comments_and_defaults():
    scn = parse_text("# header\n" + HEAD.replace("[run]", "[run]  # trailing\nseed = 5 # five"))
    assert scn.run.seed == 5
    assert scn.network == NetworkConfig()


def test_unreadable_file(tmp_path):
    with pytest.raises(ScenarioError):
        parse_scenario(tmp_path / "missing.cfg")


scenarios = st.builds(
    Scenario,
    network=st.builds(NetworkConfig, n_devices=st.integers(1, 100), n_aps=st.integers(1, 4),
                      payload_bytes=st.floats(0.5, 500.0), p_ap_dbm=st.floats(-30, 40),
                      shadow_std_db=st.tuples(*[st.floats(0, 20)] * 4)),
    protocol=st.one_of(
        st.builds(ProtocolParams, beta=st.floats(0, 1), alpha=st.floats(0.01, 0.99),
                  scheme=st.sampled_from(["andcoop", "single_hop", "two_hop", "k_best"])),
        st.builds(ProtocolParams, csi_mode=st.just("imperfect"), pilots=st.integers(1, 20),
                  theta=st.floats(0.01, 1.0))),
    run=st.builds(RunSection, cycles=st.integers(1, 10**7), seed=st.integers(0, 2**31),
                  iid_snr_db=st.one_of(st.none(), st.floats(-10, 40)),
                  placement=st.sampled_from(["fixed", "per_cycle", "per_block"])),
    experiment=st.builds(
        ExperimentSection, kind=st.sampled_from(KINDS),
        power_dbm=st.one_of(st.none(), st.lists(st.floats(-20, 40), min_size=1, max_size=4).map(tuple)),
        pilots=st.one_of(st.none(), st.lists(st.integers(1, 30), min_size=1, max_size=3).map(tuple)),
        analytic=st.booleans(),
        relays=st.lists(st.tuples(st.floats(0, 100), st.floats(0, 100)), max_size=3).map(tuple)),
)


@given(scenarios)
def test_round_trip(scn):
    assert parse_text(emit(scn)) == scn


def test_overrides():
    scn = parse_text(HEAD)
    out = with_overrides(scn, kind="dmt", seed=9, cycles=10, workers=2)
    assert (out.experiment.kind, out.run.seed, out.run.cycles, out.run.workers) == ("dmt", 9, 10, 2)
    assert with_overrides(scn) == scn
    with pytest.raises(ValueError):
        with_overrides(scn, cycles=0)
