import numpy as np
import pytest

from mpguard.core import InvalidArgument
from mpguard.ingest import load_csv, write_csv
from mpguard.matrix_profile import compute_matrix_profile
from mpguard.synthgen import (
    SWAT_MIX,
    AttackSpec,
    ChannelSpec,
    ProcessConfig,
    build_preset,
    default_process,
    dpit_repeat_config,
    generate,
    inject_attacks,
    lit_ten_config,
    load_config,
    swat_mix_attacks,
    synthesize,
)


def small_config(seed=0, length=5000):
    return ProcessConfig((
        ChannelSpec("LIT", "triangle", 200, amplitude=50.0, baseline=100.0, noise_std=1.0),
        ChannelSpec("DPIT", "spiky", 150, amplitude=5.0, noise_std=0.2),
        ChannelSpec("P", "boolean", 120),
    ), length=length, seed=seed)


def test_generate_has_no_attacks_and_is_deterministic():
    a, b = generate(small_config()), generate(small_config())
    assert a.labels.per_step.sum() == 0 and a.labels.intervals == ()
    assert a.features.values.tobytes() == b.features.values.tobytes()
    c = generate(small_config(seed=1))
    assert c.features.values.tobytes() != a.features.values.tobytes()


def test_triangle_autocorrelation_peaks_at_period():
    x = generate(small_config()).features.column("LIT")
    x = x - x.mean()
    lags = np.arange(100, 301)
    ac = [np.dot(x[:-lag], x[lag:]) / (len(x) - lag) for lag in lags]
    assert lags[int(np.argmax(ac))] == 200


def test_boolean_channel_values():
    p = generate(small_config()).features.column("P")
    assert set(np.unique(p)) == {0.0, 1.0}


def test_level_hold_attack():
    ds = generate(small_config())
    atk = AttackSpec("SSSP", ("LIT",), 1000, 1500, ("level_hold",), (0.0,))
    out = inject_attacks(ds, [atk])
    assert out.labels.intervals == ((1000, 1500),)
    held = out.features.column("LIT")[1000:1501]
    assert np.all(held == held[0])
    # other channels and the rest of the target channel are untouched
    np.testing.assert_array_equal(out.features.column("DPIT"), ds.features.column("DPIT"))
    np.testing.assert_array_equal(out.features.column("LIT")[:1000], ds.features.column("LIT")[:1000])
    np.testing.assert_array_equal(out.features.column("LIT")[1501:], ds.features.column("LIT")[1501:])


def test_effects():
    ds = generate(small_config())
    lit = ds.features.column("LIT")
    attacks = [
        AttackSpec("SSSP", ("LIT",), 100, 199, ("setpoint_shift",), (7.5,)),
        AttackSpec("SSMP", ("P", "LIT"), 400, 449, ("stuck_actuator",), (1.0,)),
        AttackSpec("MSSP", ("DPIT",), 600, 799, ("frequency_change", "level_hold"), (2.0, 0.0)),
    ]
    out = inject_attacks(ds, attacks)
    np.testing.assert_allclose(out.features.column("LIT")[100:200], lit[100:200] + 7.5)
    assert np.all(out.features.column("P")[400:450] == 1.0)
    assert np.all(out.features.column("LIT")[400:450] == 1.0)
    dpit = ds.features.column("DPIT")
    np.testing.assert_allclose(out.features.column("DPIT")[600:700], dpit[600:800:2])
    assert np.all(out.features.column("DPIT")[700:800] == dpit[700])
    assert out.labels.intervals == ((100, 199), (400, 449), (600, 799))


def test_injection_errors():
    ds = generate(small_config())
    with pytest.raises(InvalidArgument):
        inject_attacks(ds, [AttackSpec("SSSP", ("LIT",), 4990, 5010, ("level_hold",), (0,))])
    with pytest.raises(InvalidArgument):
        inject_attacks(ds, [AttackSpec("SSSP", ("XYZ",), 10, 20, ("level_hold",), (0,))])
    with pytest.raises(InvalidArgument):
        inject_attacks(ds, [AttackSpec("SSSP", ("P",), 10, 20, ("setpoint_shift",), (1,))])
    with pytest.raises(InvalidArgument):
        inject_attacks(ds, [AttackSpec("SSSP", ("P",), 10, 20, ("stuck_actuator",), (0.5,))])


@pytest.mark.parametrize("kwargs", [
    dict(kind="XX", targets=("a",), effects=("level_hold",), magnitudes=(0,)),
    dict(kind="SSMP", targets=("a",), effects=("level_hold",), magnitudes=(0,)),
    dict(kind="SSSP", targets=("a", "b"), effects=("level_hold",), magnitudes=(0,)),
    dict(kind="MSSP", targets=("a",), effects=("level_hold",), magnitudes=(0,)),
    dict(kind="SSSP", targets=("a",), effects=("level_hold", "level_hold"), magnitudes=(0, 0)),
    dict(kind="SSSP", targets=("a",), effects=("explode",), magnitudes=(0,)),
    dict(kind="SSSP", targets=("a",), effects=("level_hold",), magnitudes=()),
])
def test_attack_taxonomy_validation(kwargs):
    with pytest.raises(InvalidArgument):
        AttackSpec(start=0, end=10, **kwargs)


def test_config_validation():
    with pytest.raises(InvalidArgument):
        ChannelSpec("a", "triangle", 1)
    with pytest.raises(InvalidArgument):
        ChannelSpec("a", "triangle", 10, noise_std=-1)
    with pytest.raises(InvalidArgument):
        ChannelSpec("a", "square", 10)
    with pytest.raises(InvalidArgument):
        ProcessConfig((), 100)
    with pytest.raises(InvalidArgument):
        ProcessConfig((ChannelSpec("a", "triangle", 10), ChannelSpec("a", "spiky", 10)), 100)


def test_swat_mix_counts_and_labels():
    cfg, attacks = build_preset("swat-mix", seed=7)
    kinds = [a.kind for a in attacks]
    assert {k: kinds.count(k) for k in SWAT_MIX} == SWAT_MIX
    ds = synthesize(cfg, attacks)
    assert ds.labels.intervals == tuple(sorted((a.start, a.end) for a in attacks))
    names = {c.name: c.waveform for c in cfg.channels}
    for a in attacks:
        fams = {names[t] == "boolean" for t in a.targets}
        assert len(fams) == 1


def test_swat_mix_is_seeded():
    cfg = default_process(200_000, 3)
    a = swat_mix_attacks(cfg, 3, start=80_000)
    assert a == swat_mix_attacks(cfg, 3, start=80_000)
    assert a != swat_mix_attacks(cfg, 4, start=80_000)


def test_presets():
    cfg, attacks = lit_ten_config()
    assert cfg.length == 100_000 and len(attacks) == 10
    assert all(a.end - a.start + 1 >= 500 for a in attacks)
    assert min(a.start for a in attacks) >= 40_000
    cfg, attacks = dpit_repeat_config()
    assert len(attacks) == 2
    assert attacks[0].effects == attacks[1].effects
    assert (attacks[1].start - attacks[0].start) % cfg.channels[0].period == 0
    assert build_preset("clean", 0, 1000)[1] == []
    with pytest.raises(InvalidArgument):
        build_preset("nope", 0)


def test_detectability_premise():
    cfg = ProcessConfig((ChannelSpec("LIT", "triangle", 200, amplitude=50.0, baseline=100.0,
                                     noise_std=1.0),), length=8000, seed=0)
    m = 200
    for effect, mag in (("setpoint_shift", 3.0), ("level_hold", 0.0), ("frequency_change", 2.0)):
        atk = AttackSpec("SSSP", ("LIT",), 6000, 6000 + m - 1, (effect,), (mag,))
        x = synthesize(cfg, [atk]).features.column("LIT")
        res = compute_matrix_profile(x, m)
        pre = res.distances[:atk.start - m]
        assert res.distances[atk.start - m + 1:atk.end + 1].max() > np.percentile(pre, 99)


def test_csv_self_compatibility(tmp_path):
    cfg, attacks = build_preset("swat-mix", seed=1, length=100_000)
    ds = synthesize(cfg, attacks)
    path = tmp_path / "synth.csv"
    write_csv(ds, path)
    back = load_csv(path)
    assert back.features.values.tobytes() == ds.features.values.tobytes()
    assert back.features.kinds == ds.features.kinds
    assert back.labels.intervals == ds.labels.intervals


def test_load_config(tmp_path):
    path = tmp_path / "gen.txt"
    path.write_text("length=3000\nseed=4\n"
                    "channel.LIT-101=triangle,period=300,amplitude=20,baseline=50,noise=0.5\n"
                    "channel.P-101=boolean,period=100\n"
                    "attack.a1=SSMP,targets=LIT-101|P-101,start=1000,end=1200,"
                    "effects=stuck_actuator,magnitudes=1\n")
    cfg, attacks = load_config(path)
    assert cfg.length == 3000 and cfg.seed == 4 and len(cfg.channels) == 2
    assert cfg.channels[0].noise_std == 0.5
    ds = synthesize(cfg, attacks)
    assert ds.labels.intervals == ((1000, 1200),)
    path.write_text("length=100\nchannel.a=triangle,period=10\nattack.x=SSSP,targets=a,start=1\n")
    with pytest.raises(InvalidArgument, match="missing field"):
        load_config(path)
    path.write_text("length=100\nwhat=1\n")
    with pytest.raises(InvalidArgument, match="unknown"):
        load_config(path)
