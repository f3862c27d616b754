import numpy as np

from hlmc.cli import main


def read_body(path):
    return path.read_text()


def test_verify_exits_zero_and_reports(tmp_path, capsys):
    out = tmp_path / "verify.csv"
    assert main(["verify", "--out", str(out)]) == 0
    text = read_body(out)
    header = [ln for ln in text.splitlines() if not ln.startswith("#")][0]
    assert header == "k,gamma,h,regime,dev_drift,dev_cov,dev_direct"
    assert "# max_dev_drift" in text
    assert "critical" in text and "overdamped" in text and "underdamped" in text


def test_sample_csv_and_determinism(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sample", "--model", "oscillation", "--scheme", "pgp",
            "--gamma", "2", "--h", "0.01", "--steps", "200", "--thin", "5",
            "--seed", "42"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert read_body(out1) == read_body(out2)
    lines = [ln for ln in read_body(out1).splitlines() if not ln.startswith("#")]
    assert lines[0] == "step,x_1,x_2,v_1,v_2"
    assert len(lines) == 1 + 41  # header + 200/5 + initial state


def test_sample_seed_env_var(tmp_path, monkeypatch):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sample", "--model", "gaussian", "--scheme", "pg", "--gamma", "2",
            "--h", "0.1", "--steps", "50"]
    monkeypatch.setenv("HLMC_SEED", "777")
    assert main(args + ["--out", str(out1)]) == 0
    monkeypatch.delenv("HLMC_SEED")
    assert main(args + ["--seed", "777", "--out", str(out2)]) == 0
    assert read_body(out1) == read_body(out2)


def test_sample_rejects_unknown_model(tmp_path):
    code = main(["sample", "--model", "bogus", "--scheme", "pg", "--gamma", "2",
                 "--h", "0.1", "--steps", "10", "--out", str(tmp_path / "x.csv")])
    assert code == 1


def test_sample_malformed_init(tmp_path):
    code = main(["sample", "--model", "gaussian", "--scheme", "pg", "--gamma", "2",
                 "--h", "0.1", "--steps", "10", "--init", "1,2,3",
                 "--out", str(tmp_path / "x.csv")])
    assert code == 1


def test_sample_numerical_abort_exit_code(tmp_path, capsys):
    # obabo is only conditionally stable; a huge step blows up -> exit 2
    code = main(["sample", "--model", "oscillation", "--scheme", "obabo",
                 "--gamma", "2", "--h", "5", "--steps", "500",
                 "--out", str(tmp_path / "x.csv")])
    assert code == 2


def test_couple_csv_schema_and_determinism(tmp_path, capsys):
    out1, out2 = tmp_path / "c1.csv", tmp_path / "c2.csv"
    args = ["couple", "--model", "oscillation", "--schemes", "pgp,obabo",
            "--gamma", "2", "--h", "0.01", "--steps", "60", "--replicas", "4",
            "--seed", "3", "--init-a", "1,1,1,1", "--init-b", "-1,-1,-1,-1"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert read_body(out1) == read_body(out2)
    lines = [ln for ln in read_body(out1).splitlines() if not ln.startswith("#")]
    assert lines[0] == "scheme,step,time,mean_rho,se_rho,mean_euclid,se_euclid"
    assert len(lines) == 1 + 2 * 61
    assert lines[1].startswith("pgp,0,0,")
    assert any(ln.startswith("obabo,0,") for ln in lines)


def test_couple_validity_warning_printed(tmp_path, capsys):
    args = ["couple", "--model", "oscillation", "--schemes", "pgp",
            "--gamma", "2", "--h", "0.06", "--steps", "30", "--replicas", "2",
            "--seed", "3", "--init-a", "1,1,1,1", "--init-b", "0,0,0,0",
            "--out", str(tmp_path / "c.csv")]
    assert main(args) == 0  # warnings never block
    assert "step conditions not satisfied" in capsys.readouterr().err


def test_bias_csv_schema_and_determinism(tmp_path, capsys):
    out1, out2 = tmp_path / "b1.csv", tmp_path / "b2.csv"
    args = ["bias", "--model", "gaussian", "--schemes", "pg", "--gamma", "2",
            "--h-list", "0.05,0.1", "--steps", "50000", "--replicas", "25",
            "--seed", "8", "--estimator", "plain"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert read_body(out1) == read_body(out2)
    lines = [ln for ln in read_body(out1).splitlines() if not ln.startswith("#")]
    assert lines[0] == "h,scheme,moment,estimate,reference,abs_bias,se,used"
    assert len(lines) > 1
    assert "order[pg, x1^2]" in capsys.readouterr().out


def test_config_file_defaults(tmp_path):
    cfg = tmp_path / "defaults.cfg"
    cfg.write_text("model = gaussian\nscheme = pg\ngamma = 2\nh = 0.1\nsteps = 40\n")
    out1 = tmp_path / "o1.csv"
    out2 = tmp_path / "o2.csv"
    assert main(["sample", "--config", str(cfg), "--seed", "1",
                 "--out", str(out1)]) == 0
    # explicit flag wins over the config value
    assert main(["sample", "--config", str(cfg), "--seed", "1", "--steps", "20",
                 "--out", str(out2)]) == 0
    lines1 = [ln for ln in read_body(out1).splitlines() if not ln.startswith("#")]
    lines2 = [ln for ln in read_body(out2).splitlines() if not ln.startswith("#")]
    assert len(lines1) == 1 + 41
    assert len(lines2) == 1 + 21


def test_usage_error_exit_code():
    assert main(["sample", "--model", "gaussian"]) == 1
    assert main(["nonsense"]) == 1


def test_float_formatting_roundtrip(tmp_path):
    out = tmp_path / "s.csv"
    main(["sample", "--model", "oscillation", "--scheme", "pg", "--gamma", "2",
          "--h", "0.01", "--steps", "20", "--seed", "4", "--out", str(out)])
    lines = [ln for ln in read_body(out).splitlines() if not ln.startswith("#")]
    vals = np.array([[float(tok) for tok in ln.split(",")] for ln in lines[1:]])
    # 17 significant digits reproduce the binary doubles exactly
    from hlmc import (PhaseState, SchemeConfig, Scheme, oscillation_model,
                      run_chain)
    out_ref = run_chain(oscillation_model(), SchemeConfig(Scheme.PG, 2.0, 0.01, 4),
                        PhaseState(np.zeros(2), np.zeros(2)), 20)
    assert np.array_equal(vals[:, 1:3], out_ref.xs)
    assert np.array_equal(vals[:, 3:5], out_ref.vs)
