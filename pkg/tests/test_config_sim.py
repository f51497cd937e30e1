import numpy as np
import pytest

from ibturbo import cli
from ibturbo.channel import preset
from ibturbo.config import RunConfig, load_config, parse_config
from ibturbo.ldpc import peg_matrix, write_alist
from ibturbo.sim import noise_psd, report_hw, run_sweep, snr_at_ber

TEXT = """
[channel]
preset = epr4
[equalizer]
kind = conventional-exact   ; floating BCJR
[code]
alist = {alist}
[turbo]
decoder_iters = 5, 5
warm_start = yes
[sweep]
snr = 3.0 6.0 inf
min_frame_errors = 3
max_frames = 6
seed = 7
[output]
dir = {out}
"""


@pytest.fixture
def cfg_text(tmp_path):
    alist = tmp_path / "small.alist"
    write_alist(peg_matrix(128, 64, seed=2), alist)
    return TEXT.format(alist=alist, out=tmp_path / "out")


def test_parse(cfg_text):
    cfg = parse_config(cfg_text)
    assert cfg.equalizer == "conventional-exact"
    assert cfg.decoder_iters == (5, 5) and cfg.turbo_iterations == 1
    assert cfg.snr[:2] == (3.0, 6.0) and np.isinf(cfg.snr[2])
    assert cfg.warm_start is True


@pytest.mark.parametrize("bad", ["[bogus]\nx = 1\n", "[sweep]\nfoo = 1\n", "[sweep]\nsnr =\n",
                                 "[equalizer]\nkind = magic\n", "[sweep]\nmax_frames = 0\n"])
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        parse_config(bad)


def test_widths_per_iteration():
    cfg = RunConfig(w_alpha=(8, 8, 7), i_design=(0.0, 0.5))
    assert [cfg.widths_at(i).w_alpha for i in range(4)] == [8, 8, 7, 7]
    assert cfg.i_design_at(3) == 0.5
    assert cfg.digest() == RunConfig(w_alpha=(8, 8, 7), i_design=(0.0, 0.5), out_dir="x").digest()


def test_noise_psd():
    spec = preset("epr4")
    assert noise_psd(0.0, spec, 0.5) == pytest.approx(2.0)
    assert noise_psd(float("inf"), spec, 0.5) == 0.0


def test_snr_at_ber():
    assert snr_at_ber([1, 2, 3], [1e-1, 1e-2, 1e-4]) == pytest.approx(2.5)
    assert np.isnan(snr_at_ber([1, 2], [0.1, 0.05]))


def test_sweep_deterministic(cfg_text, tmp_path):
    cfg = parse_config(cfg_text)
    a = run_sweep(cfg)
    b = run_sweep(cfg, write=False)
    strip = lambda rows: [(r.snr_db, r.frames, r.bit_errors, r.frame_errors) for r in rows]
    assert strip(a) == strip(b)
    for r in a:
        assert r.ber == r.bit_errors / (r.frames * 64)
        assert r.fer == r.frame_errors / r.frames
        assert r.config_hash == cfg.digest()
    assert a[-1].bit_errors == 0
    assert a[0].ber >= a[-1].ber
    assert list((tmp_path / "out").glob("sweep_*.csv"))


def test_sweep_thread_count_invariant(cfg_text, monkeypatch):
    cfg = parse_config(cfg_text)
    one = run_sweep(cfg, write=False)
    monkeypatch.setenv("IBTURBO_THREADS", "2")
    two = run_sweep(cfg, write=False)
    assert [(r.frames, r.bit_errors) for r in one] == [(r.frames, r.bit_errors) for r in two]


def test_report_hw_conventional(cfg_text, tmp_path):
    cfg = parse_config(cfg_text)
    reps = report_hw(cfg)
    assert reps[0].label == "conventional (7,77)"
    assert (tmp_path / "out" / "hwcost.csv").exists()


def test_cli(cfg_text, tmp_path, capsys):
    path = tmp_path / "run.cfg"
    path.write_text(cfg_text)
    assert load_config(path).seed == 7
    assert cli.main(["simulate", str(path)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("snr_db,") and len(out) == 4
    assert cli.main(["hwcost", str(path)]) == 0
    assert "xi_eq" in capsys.readouterr().out
    assert cli.main(["selftest", "--only", "check_entry_counts"]) == 0
    assert "[PASS] lut_entry_counts" in capsys.readouterr().out
