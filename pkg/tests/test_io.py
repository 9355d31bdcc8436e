"""File formats: JSON round trips, CSV layouts, Netpbm encoding, and the
light-field directory store.

Byte-level goldens pin the external formats (PGM sample order, PBM bit
polarity, CSV float formatting) so a change that silently breaks
interchange or run-to-run reproducibility fails here.
"""

import numpy as np
import pytest

from lfrect.errors import ConfigError
from lfrect.geometry import LFIntrinsics, RelativePose, euler_xyz_intrinsic
from lfrect.lfio import (
    CORRESPONDENCE_HEADER,
    load_intrinsics,
    load_json,
    load_pose,
    load_sampled_lf,
    load_setup,
    load_sim_config,
    parse_pose_dict,
    parse_sim_config,
    read_correspondence_csv,
    read_pbm,
    read_pgm16,
    save_intrinsics,
    save_json,
    save_pose,
    save_sampled_lf,
    save_setup,
    write_correspondence_csv,
    write_pbm,
    write_pgm16,
    write_trial_report_csv,
)
from lfrect.rectify import build_rectified_setup
from lfrect.simulate import TrialReport, default_intrinsics_pair

from test_resample import MAP, S3, random_lf
from lfrect.resample import plan_aligned_grid
from test_resample import identity_setup


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def test_json_error_reports_line_and_column(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "a": 1,\n}\n')
    with pytest.raises(ConfigError) as exc:
        load_json(p)
    msg = str(exc.value)
    assert "bad.json" in msg
    assert "line 3" in msg
    assert "column" in msg


def test_json_requires_object_top_level(tmp_path):
    p = tmp_path / "arr.json"
    p.write_text("[1, 2]\n")
    with pytest.raises(ConfigError, match="object"):
        load_json(p)
    with pytest.raises(ConfigError, match="cannot read"):
        load_json(tmp_path / "missing.json")


def test_intrinsics_pose_setup_round_trips(tmp_path, sweep_pose):
    k1, _ = default_intrinsics_pair()
    save_intrinsics(tmp_path / "k.json", k1)
    assert load_intrinsics(tmp_path / "k.json") == k1

    save_pose(tmp_path / "p.json", sweep_pose)
    back = load_pose(tmp_path / "p.json")
    assert np.array_equal(back.R, sweep_pose.R)
    assert np.array_equal(back.T, sweep_pose.T)

    setup = build_rectified_setup(sweep_pose.inverse())
    save_setup(tmp_path / "s.json", setup)
    back = load_setup(tmp_path / "s.json")
    assert np.array_equal(back.R_rect, setup.R_rect)
    assert np.array_equal(back.T_r, setup.T_r)

    save_json(tmp_path / "k2.json", {"fx": 1.0})
    with pytest.raises(ConfigError, match="k2.json"):
        load_intrinsics(tmp_path / "k2.json")


# ---------------------------------------------------------------------------
# correspondence CSV
# ---------------------------------------------------------------------------


def test_correspondence_csv_round_trip_is_exact(tmp_path, corr_noisy):
    p = tmp_path / "corr.csv"
    write_correspondence_csv(p, corr_noisy)
    first_line = p.read_text().splitlines()[0]
    assert first_line == ",".join(CORRESPONDENCE_HEADER)
    back = read_correspondence_csv(p, corr_noisy.k1, corr_noisy.k2)
    # repr() floats survive the text round trip bit for bit
    assert np.array_equal(back.first, corr_noisy.first)
    assert np.array_equal(back.second, corr_noisy.second)
    assert back.k1 == corr_noisy.k1

    write_correspondence_csv(tmp_path / "again.csv", corr_noisy)
    assert (tmp_path / "again.csv").read_bytes() == p.read_bytes()


def test_correspondence_csv_rejects_malformed(tmp_path):
    k1, k2 = default_intrinsics_pair()
    p = tmp_path / "c.csv"
    p.write_text("u,v\n1,2\n")
    with pytest.raises(ConfigError, match="first line"):
        read_correspondence_csv(p, k1, k2)

    head = ",".join(CORRESPONDENCE_HEADER)
    p.write_text(f"{head}\n1,2,3\n")
    with pytest.raises(ConfigError, match="6 columns"):
        read_correspondence_csv(p, k1, k2)

    p.write_text(f"{head}\n1,2,3,4,5,x\n")
    with pytest.raises(ConfigError, match=":2:"):
        read_correspondence_csv(p, k1, k2)

    # three points: structurally fine, semantically too few
    rows = "\n".join("0.1,0.2,-0.3,0.4,0.5,-0.6" for _ in range(3))
    p.write_text(f"{head}\n{rows}\n")
    with pytest.raises(ConfigError):
        read_correspondence_csv(p, k1, k2)


def test_correspondence_csv_skips_blank_lines(tmp_path):
    k1, k2 = default_intrinsics_pair()
    head = ",".join(CORRESPONDENCE_HEADER)
    rows = "\n\n".join(
        f"0.1,{0.2 + 0.01 * i},-0.3,0.4,{0.5 - 0.01 * i},-0.6" for i in range(4)
    )
    p = tmp_path / "c.csv"
    p.write_text(f"{head}\n{rows}\n\n")
    back = read_correspondence_csv(p, k1, k2)
    assert back.first.shape == (4, 3)


# ---------------------------------------------------------------------------
# trial CSV
# ---------------------------------------------------------------------------


def test_trial_report_csv_golden(tmp_path):
    report = TrialReport(
        sigma_px=0.1,
        err_R_deg=np.array([0.5, 0.25]),
        err_T_deg=np.array([1.5, 0.75]),
        converged=np.array([True, False]),
        iterations=np.array([3, 5]),
    )
    p = tmp_path / "trials.csv"
    write_trial_report_csv(p, report)
    assert p.read_text() == (
        "trial,err_R_deg,err_T_deg,converged,iterations\n"
        "0,0.5,1.5,1,3\n"
        "1,0.25,0.75,0,5\n"
        "mean,0.375,1.125,1,4.0\n"
    )


def test_trial_report_csv_marks_failed_trials(tmp_path):
    report = TrialReport(
        sigma_px=0.1,
        err_R_deg=np.array([0.5, np.nan]),
        err_T_deg=np.array([1.5, np.nan]),
        converged=np.array([True, False]),
        iterations=np.array([3, 0]),
        failures=[(1, "RankDeficient: x")],
    )
    p = tmp_path / "trials.csv"
    write_trial_report_csv(p, report)
    lines = p.read_text().splitlines()
    assert lines[2] == "1,nan,nan,0,0"
    assert lines[3] == "mean,0.5,1.5,1,1.5"


# ---------------------------------------------------------------------------
# Netpbm
# ---------------------------------------------------------------------------


def test_pgm16_golden_bytes(tmp_path):
    p = tmp_path / "a.pgm"
    write_pgm16(p, np.array([[1.0, 0.0], [0.25, 258.0 / 65535.0]]))
    raw = p.read_bytes()
    assert raw.startswith(b"P5\n2 2\n65535\n")
    payload = raw[len(b"P5\n2 2\n65535\n"):]
    # big-endian 16-bit samples, row-major: 65535, 0, 16384, 258
    assert payload == b"\xff\xff\x00\x00\x40\x00\x01\x02"


def test_pgm16_round_trip_quantizes_to_half_lsb(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.uniform(0, 1, (9, 13))
    p = tmp_path / "r.pgm"
    write_pgm16(p, img)
    back = read_pgm16(p)
    assert back.shape == img.shape
    assert np.abs(back - img).max() <= 0.5 / 65535.0 + 1e-12
    # out-of-range input clips
    write_pgm16(p, np.array([[-0.5, 1.5]]))
    assert np.array_equal(read_pgm16(p), [[0.0, 1.0]])


def test_pgm_reader_handles_comments_and_8bit(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# a comment\n3 2\n255\n" + bytes([0, 51, 102, 153, 204, 255]))
    img = read_pgm16(p)
    assert img.shape == (2, 3)
    assert img[0, 1] == pytest.approx(0.2)
    assert img[1, 2] == 1.0
    (tmp_path / "bad").write_bytes(b"P6\n1 1\n255\nxxx")
    with pytest.raises(ValueError, match="not a binary PGM"):
        read_pgm16(tmp_path / "bad")


def test_pbm_polarity_black_is_invalid(tmp_path):
    p = tmp_path / "m.pbm"
    write_pbm(p, np.array([[True, False, True]]))
    raw = p.read_bytes()
    assert raw == b"P4\n3 1\n\x40"  # middle bit set = black = invalid
    assert np.array_equal(read_pbm(p), [[True, False, True]])


def test_pbm_round_trip_odd_width(tmp_path):
    rng = np.random.default_rng(1)
    mask = rng.uniform(size=(5, 11)) > 0.4
    p = tmp_path / "m.pbm"
    write_pbm(p, mask)
    assert np.array_equal(read_pbm(p), mask)


# ---------------------------------------------------------------------------
# light-field directories
# ---------------------------------------------------------------------------


def test_sampled_lf_directory_round_trip(tmp_path):
    lf = random_lf(seed=4)
    grid = plan_aligned_grid(random_lf(1), random_lf(2), identity_setup(4.0))
    d = tmp_path / "lf"
    save_sampled_lf(d, lf, grid)
    assert (d / "sai_r0_c0.pgm").exists()
    assert (d / "sai_r2_c2.pbm").exists()
    back, back_grid = load_sampled_lf(d)
    assert np.array_equal(back.s_mm, lf.s_mm)
    assert np.array_equal(back.t_mm, lf.t_mm)
    assert back.mapping == lf.mapping
    assert np.abs(back.images - lf.images).max() <= 0.5 / 65535.0 + 1e-12
    assert np.array_equal(back.mask, lf.mask)
    assert np.array_equal(back_grid.provenance, grid.provenance)
    assert np.array_equal(back_grid.cols_mm, grid.cols_mm)


def test_sampled_lf_without_grid_or_masks(tmp_path):
    lf = random_lf(seed=5)
    d = tmp_path / "lf"
    save_sampled_lf(d, lf)
    (d / "sai_r1_c1.pbm").unlink()  # a missing mask file means all-valid
    back, grid = load_sampled_lf(d)
    assert grid is None
    assert back.mask[1, 1].all()


def test_sampled_lf_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_sampled_lf(tmp_path / "nowhere")
    d = tmp_path / "broken"
    d.mkdir()
    save_json(d / "grid.json", {"rows_mm": [], "cols_mm": [], "mapping": MAP.to_json_dict()})
    with pytest.raises(ConfigError, match="no sub-aperture images"):
        load_sampled_lf(d)
    save_json(d / "grid.json", {"rows_mm": [0.0], "cols_mm": [0.0]})
    with pytest.raises(ConfigError, match="mapping"):
        load_sampled_lf(d)


# ---------------------------------------------------------------------------
# simulation configs
# ---------------------------------------------------------------------------


def test_parse_pose_euler_and_matrix_forms():
    pose_a = parse_pose_dict({"euler_deg": [5.0, 20.0, 5.0], "T_mm": [80.0, 5.0, 5.0]})
    assert np.abs(pose_a.R - euler_xyz_intrinsic(5.0, 20.0, 5.0)).max() <= 1e-15
    assert np.array_equal(pose_a.T, [80.0, 5.0, 5.0])

    pose_b = parse_pose_dict(pose_a.to_json_dict())
    assert np.array_equal(pose_b.R, pose_a.R)

    default_t = parse_pose_dict({"euler_deg": [0.0, 0.0, 0.0]})
    assert np.array_equal(default_t.T, np.zeros(3))

    with pytest.raises(ValueError, match="three angles"):
        parse_pose_dict({"euler_deg": [1.0, 2.0]})


def test_parse_sim_config_defaults_and_overrides():
    cfg = parse_sim_config({"pose": {"euler_deg": [5, 20, 5], "T_mm": [80, 5, 5]}})
    k1, k2 = default_intrinsics_pair()
    assert cfg.k1 == k1 and cfg.k2 == k2
    assert cfg.sai_rows == 13 and cfg.sai_cols == 13
    assert cfg.sigma_px == 0.0 and cfg.trials == 100 and cfg.seed == 0
    assert len(cfg.board_poses) == 4

    cfg = parse_sim_config(
        {
            "pose": {"euler_deg": [0, 0, 0], "T_mm": [50, 0, 0]},
            "board": {"rows": 3, "cols": 4, "spacing_mm": 30.0},
            "board_poses": [
                {"euler_deg": [0, 20, 0], "center_mm": [0, 0, 900]},
                {"euler_deg": [15, 0, 0], "center_mm": [100, 50, 1200]},
            ],
            "sigma_px": 0.4,
            "trials": 7,
            "seed": 5,
            "sai_rows": 9,
        }
    )
    assert cfg.board.rows == 3 and cfg.board.spacing_mm == 30.0
    assert len(cfg.board_poses) == 2
    assert cfg.sigma_px == 0.4 and cfg.trials == 7 and cfg.sai_rows == 9


def test_parse_sim_config_errors():
    with pytest.raises(ConfigError, match="pose"):
        parse_sim_config({})
    with pytest.raises(ConfigError):
        parse_sim_config({"pose": {"euler_deg": [0, 0, 0]}, "sigma_px": -1.0})
    with pytest.raises(ConfigError):
        parse_sim_config({"pose": {"euler_deg": [0, 0, 0]}, "trials": "many"})


def test_load_sim_config_names_file_in_errors(tmp_path):
    p = tmp_path / "sim.json"
    save_json(p, {"trials": 5})
    with pytest.raises(ConfigError, match="sim.json"):
        load_sim_config(p)
    save_json(p, {"pose": {"euler_deg": [1, 2, 3], "T_mm": [10, 0, 0]}, "trials": 5})
    cfg = load_sim_config(p)
    assert cfg.trials == 5
    assert cfg.pose.T[0] == 10.0
