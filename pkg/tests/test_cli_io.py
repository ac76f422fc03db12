import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from momtomo import io
from momtomo.cli import main, resolve_config, build_parser
from momtomo.config import ENV_OUTDIR, RunConfig
from momtomo.errors import DataError
from momtomo.forward import MomentaSinogram, momenta_sinogram
from momtomo.geometry import BoundaryGrid, DiscGrid, make_attenuation, make_phantom_tensor
from momtomo.sequences import ModeSequenceField

SMALL = ["--grid-n", "65", "--n-beta", "128", "--n-theta", "128", "--N", "32", "--error-radius", "0.8"]


@pytest.fixture
def tensor65():
    return make_phantom_tensor(1, "polynomial", {"center": (0.1, 0.0), "radius": 0.5}, DiscGrid(65))


# ---------------------------------------------------------------------------
# binary round trips


@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=1, max_dims=3, max_side=6),
                  elements=st.floats(allow_nan=False, width=64)))
def test_real_array_round_trip_bitwise(tmp_path_factory, arr):
    stem = tmp_path_factory.mktemp("a") / "x"
    io.write_array(stem, arr, "blob")
    back, header = io.read_array(stem, "blob")
    assert back.tobytes() == arr.tobytes() and header["dtype"] == "float64"


def test_complex_array_interleaved(tmp_path):
    arr = np.array([[1 + 2j, -3.5 - 0j]])
    io.write_array(tmp_path / "c", arr, "blob")
    raw = np.frombuffer((tmp_path / "c.bin").read_bytes(), dtype="<f8")
    assert list(raw) == [1.0, 2.0, -3.5, -0.0]
    back, _ = io.read_array(tmp_path / "c")
    assert np.array_equal(back, arr)


def test_tensor_round_trip(tmp_path, tensor65):
    io.save_tensor(tmp_path / "t", tensor65)
    back = io.load_tensor(tmp_path / "t")
    assert back.m == 1 and back.components.tobytes() == tensor65.components.tobytes()
    assert back.provenance == json.loads(json.dumps(io._jsonable(tensor65.provenance)))


def test_attenuation_round_trip(tmp_path):
    a = make_attenuation("gaussian", {"radius": 0.5}, DiscGrid(33), 0.5)
    io.save_attenuation(tmp_path / "a", a)
    assert io.load_attenuation(tmp_path / "a").values.tobytes() == a.values.tobytes()


def test_sinogram_round_trip_and_hash(tmp_path, tensor65):
    s = momenta_sinogram(tensor65, None, 32, 32)
    io.save_sinogram(tmp_path / "s", s)
    back = io.load_sinogram(tmp_path / "s")
    assert back.data.tobytes() == s.data.tobytes() and back.m == 1 and not back.attenuated
    header = json.loads((tmp_path / "s.json").read_text())
    header["meta"]["provenance"]["n_beta"] = 999
    (tmp_path / "s.json").write_text(json.dumps(header))
    with pytest.raises(DataError, match="provenance"):
        io.load_sinogram(tmp_path / "s")


def test_sequence_round_trip(tmp_path):
    v = np.arange(3 * 16, dtype=float).reshape(3, 16) * (1 + 1j)
    io.save_sequence(tmp_path / "q", ModeSequenceField(v, BoundaryGrid(16)))
    back = io.load_sequence(tmp_path / "q")
    assert back.on_boundary and np.array_equal(back.values, v)


def test_corrupt_payload_rejected(tmp_path):
    io.write_array(tmp_path / "x", np.ones(4), "blob")
    (tmp_path / "x.bin").write_bytes(b"\0" * 32)
    with pytest.raises(DataError, match="checksum"):
        io.read_array(tmp_path / "x")


def test_missing_and_wrong_kind(tmp_path):
    with pytest.raises(DataError, match="missing"):
        io.read_array(tmp_path / "nothing")
    io.write_array(tmp_path / "x", np.ones(4), "blob")
    with pytest.raises(DataError, match="expected"):
        io.read_array(tmp_path / "x", "tensor")


def test_sinogram_slice_count_checked(tmp_path):
    io.write_array(tmp_path / "s", np.zeros((2, 8, 8)), "sinogram",
                   {"m": 2, "n_beta": 8, "n_theta": 8, "attenuated": False,
                    "grid_hash": io.provenance_hash({}), "provenance": {}})
    with pytest.raises(DataError, match="slices"):
        io.load_sinogram(tmp_path / "s")


def test_csv_and_pgm(tmp_path):
    s = MomentaSinogram(1, np.arange(2 * 2 * 3, dtype=float).reshape(2, 2, 3))
    rows = io.export_sinogram_csv(tmp_path / "s.csv", s).read_text().splitlines()
    assert rows[0] == "k,j_beta,l_theta,value" and len(rows) == 13 and rows[-1] == "1,1,2,11.0"
    p = io.write_pgm(tmp_path / "f.pgm", np.array([[0.0, 1.0], [2.0, 3.0]]))
    data = p.read_bytes()
    assert data.startswith(b"P5\n2 2\n255\n") and data[-4:] == bytes([170, 255, 0, 85])


# ---------------------------------------------------------------------------
# CLI


def test_cli_full_run(tmp_path, capsys):
    out = str(tmp_path)
    assert main(["phantom", "--m", "1", "--output-dir", out] + SMALL) == 0
    assert main(["forward", "--m", "1", "--output-dir", out] + SMALL) == 0
    first = (tmp_path / "sinogram.bin").read_bytes()
    assert main(["forward", "--m", "1", "--output-dir", out] + SMALL) == 0
    assert (tmp_path / "sinogram.bin").read_bytes() == first
    assert io.load_sinogram(tmp_path / "sinogram").data.shape[0] == 2
    capsys.readouterr()
    assert main(["reconstruct", "--m", "1", "--output-dir", out, "--csv"] + SMALL) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["summary"]["relative_error"] < 0.05
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["m"] == 1 and "level_norms" in report
    assert (tmp_path / "levels.csv").exists() and (tmp_path / "f0.pgm").exists()
    assert io.load_tensor(tmp_path / "reconstruction").m == 1


def test_cli_zero_phantom(tmp_path, capsys):
    out = str(tmp_path)
    args = ["--m", "1", "--output-dir", out, "--phantom-kind", "zero"] + SMALL
    assert main(["phantom"] + args) == 0 and main(["forward"] + args) == 0
    assert not np.any(io.load_sinogram(tmp_path / "sinogram").data)
    assert main(["reconstruct"] + args) == 0
    assert not np.any(io.load_tensor(tmp_path / "reconstruction").components)


def test_exit_code_configuration(tmp_path, capsys):
    assert main(["phantom", "--N", "10", "--output-dir", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_exit_code_data(tmp_path):
    assert main(["reconstruct", "--output-dir", str(tmp_path)] + SMALL) == 3


def test_exit_code_order_mismatch(tmp_path):
    out = str(tmp_path)
    assert main(["phantom", "--m", "1", "--output-dir", out] + SMALL) == 0
    assert main(["forward", "--m", "2", "--output-dir", out] + SMALL) == 2


def test_output_dir_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"output_dir": "from_file"}))
    parse = build_parser().parse_args
    assert resolve_config(parse(["phantom", "--config", str(cfg)])).output_dir == "from_file"
    monkeypatch.setenv(ENV_OUTDIR, "from_env")
    assert resolve_config(parse(["phantom", "--config", str(cfg)])).output_dir == "from_env"
    assert resolve_config(parse(["phantom", "--config", str(cfg), "--output-dir", "flag"])).output_dir == "flag"


def test_env_outdir_used(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_OUTDIR, str(tmp_path / "env"))
    assert main(["phantom", "--m", "1"] + SMALL) == 0
    assert (tmp_path / "env" / "phantom.json").exists()


def test_config_file_flags(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(RunConfig(m=2, grid_n=65).to_json())
    args = build_parser().parse_args(["phantom", "--config", str(cfg), "--n-beta", "64"])
    c = resolve_config(args)
    assert (c.m, c.grid_n, c.n_beta) == (2, 65, 64)


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["phantom", "--config", str(cfg)]) == 2


@pytest.mark.slow
def test_verify_passes_and_detects_sign_flip(monkeypatch, capsys):
    import momtomo.analytic as an

    assert main(["verify"]) == 0
    assert capsys.readouterr().out.count("PASS") == 5
    orig = an._pompeiu_kernels
    monkeypatch.setattr(an, "_pompeiu_kernels", lambda n, h, J: (lambda s, K: (s, -K))(*orig(n, h, J)))
    an._CORR_CACHE.clear()
    try:
        assert main(["verify"]) == 4
        assert "FAIL  pompeiu" in capsys.readouterr().out
    finally:
        an._CORR_CACHE.clear()
        an._KERNEL_CACHE.clear()
