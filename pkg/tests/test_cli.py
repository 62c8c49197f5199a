import json

import pytest

import concertq as cq
from concertq.cli import main


@pytest.fixture()
def scenarios(tmp_path):
    two = tmp_path / "two_queues.json"
    two.write_text(
        '{"queues":[{"mu":1,"t_start":0},{"mu":1,"t_start":0.5}],'
        '"populations":[{"alpha":1,"beta":1}],"options":{"seed":42}}'
    )
    one = tmp_path / "single_queue.json"
    one.write_text(
        '{"queues":[{"mu":1,"t_start":0}],"populations":[{"alpha":1,"beta":1}]}'
    )
    multi = tmp_path / "multi.json"
    multi.write_text(
        '{"queues":[{"mu":1,"t_start":0}],'
        '"populations":[{"alpha":1,"beta":3},{"alpha":1,"beta":1}]}'
    )
    return {"two": two, "one": one, "multi": multi, "dir": tmp_path}


def test_eq_single_json(scenarios, capsys):
    out = scenarios["dir"] / "eq.json"
    code = main(["eq-single", "--scenario", str(scenarios["two"]), "--out", str(out)])
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["terminal_time"] == 0.75
    assert payload["first_arrivals"] == {"1": -0.75, "2": 0.25}
    assert "terminal_time=0.75" in capsys.readouterr().out


def test_eq_single_csv_round_trips(scenarios):
    out = scenarios["dir"] / "profile.csv"
    assert main(["eq-single", "--scenario", str(scenarios["two"]), "--format", "csv", "--out", str(out)]) == 0
    profile = cq.ArrivalProfile.from_csv(out.read_text())
    assert profile.total_mass == pytest.approx(1.0, abs=1e-12)


def test_verify_solver_output_and_perturbation(scenarios, capsys):
    d = scenarios["dir"]
    profile_path = d / "profile.csv"
    main(["eq-single", "--scenario", str(scenarios["two"]), "--format", "csv", "--out", str(profile_path)])
    out = d / "verify.json"
    code = main([
        "verify", "--scenario", str(scenarios["two"]),
        "--profile", str(profile_path), "--out", str(out),
    ])
    assert code == 0
    assert json.loads(out.read_text())["is_equilibrium"] is True
    assert "is_equilibrium=true" in capsys.readouterr().out

    # perturbed copy: same masses, tilted density
    profile = cq.ArrivalProfile.from_csv(profile_path.read_text())
    segs = []
    for g in profile.segments:
        mid = 0.5 * (g.start + g.end)
        segs.append(cq.Segment(g.population, g.queue, g.start, mid, g.density * 1.02))
        segs.append(cq.Segment(g.population, g.queue, mid, g.end, g.density * 0.98))
    bad_path = d / "bad_profile.csv"
    bad_path.write_text(cq.ArrivalProfile(tuple(segs)).to_csv())
    code = main([
        "verify", "--scenario", str(scenarios["two"]),
        "--profile", str(bad_path), "--out", str(d / "verify_bad.json"),
    ])
    assert code == 0
    assert json.loads((d / "verify_bad.json").read_text())["is_equilibrium"] is False


def test_poa_summary_line(scenarios, capsys):
    code = main(["poa", "--scenario", str(scenarios["one"]), "--out", str(scenarios["dir"] / "poa.json")])
    assert code == 0
    line = capsys.readouterr().out
    assert "eta=2" in line and "bound_ok=true" in line
    payload = json.loads((scenarios["dir"] / "poa.json").read_text())
    assert payload["eta"] == pytest.approx(2.0, abs=1e-12)


def test_eq_multi(scenarios):
    out = scenarios["dir"] / "multi.json"
    assert main(["eq-multi", "--scenario", str(scenarios["multi"]), "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["arrival_epochs"] == [-4.0, 0.0, 2.0]


def test_serve_count_command(scenarios, capsys):
    out = scenarios["dir"] / "sc.json"
    assert main(["serve-count", "--l", "7", "--mu", "1", "--tau", "0.1", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["k_star"] == 12
    assert "k_star=12" in capsys.readouterr().out


def test_eq_two_with_trace(scenarios):
    d = scenarios["dir"]
    out, trace = d / "two.json", d / "trace.csv"
    code = main([
        "eq-two", "--mu1", "1", "--mu2", "1", "--alpha", "1", "--beta", "1",
        "--out", str(out), "--trace", str(trace),
    ])
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["t_first"] == pytest.approx(-(3 ** 0.5), abs=1e-12)
    assert payload["diagnostics"]["routing_sum_residual"] <= 1e-12
    header = trace.read_text().splitlines()[0]
    assert header == "t,f,p1,P11,P21,cost"


def test_fluid_command(scenarios):
    out = scenarios["dir"] / "fluid.csv"
    assert main(["fluid", "--scenario", str(scenarios["two"]), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "queue,process,t,value"
    assert any(",queue_length," in ln for ln in lines[1:])


def test_simulate_writes_paths_and_summary(scenarios):
    d = scenarios["dir"]
    out = d / "paths.csv"
    code = main([
        "simulate", "--scenario", str(scenarios["two"]),
        "--n", "500", "--reps", "2", "--seed", "42", "--out", str(out),
    ])
    assert code == 0
    assert out.read_text().splitlines()[0] == "rep,t,queue,A_scaled,Q_scaled,B,W"
    summary = json.loads((d / "paths.summary.json").read_text())
    assert summary["n"] == 500
    assert summary["replications"] == 2


def test_cli_reruns_are_byte_identical(scenarios):
    d = scenarios["dir"]
    pairs = []
    for tag in ("a", "b"):
        out = d / f"paths_{tag}.csv"
        main([
            "simulate", "--scenario", str(scenarios["two"]),
            "--n", "400", "--reps", "2", "--seed", "7", "--out", str(out),
        ])
        pairs.append((out.read_bytes(), (d / f"paths_{tag}.summary.json").read_bytes()))
    assert pairs[0] == pairs[1]

    for tag in ("a", "b"):
        main(["poa", "--scenario", str(scenarios["one"]), "--out", str(d / f"poa_{tag}.json")])
    assert (d / "poa_a.json").read_bytes() == (d / "poa_b.json").read_bytes()


def test_cli_is_a_thin_adapter(scenarios):
    # byte-identical to calling the library and serializer directly
    from concertq.serialize import to_json

    d = scenarios["dir"]
    main(["poa", "--scenario", str(scenarios["two"]), "--out", str(d / "poa_cli.json")])
    s = cq.parse_scenario(scenarios["two"].read_text())
    direct = to_json(cq.poa_multi(s).to_dict())
    assert (d / "poa_cli.json").read_text() == direct

    profile_path = d / "profile_adapter.csv"
    main(["eq-single", "--scenario", str(scenarios["two"]), "--format", "csv",
          "--out", str(profile_path)])
    main(["verify", "--scenario", str(scenarios["two"]), "--profile",
          str(profile_path), "--out", str(d / "verify_cli.json")])
    profile = cq.ArrivalProfile.from_csv(profile_path.read_text())
    direct = to_json(cq.verify_equilibrium(s, profile).to_dict())
    assert (d / "verify_cli.json").read_text() == direct


def test_fluid_command_accepts_profile_csv(scenarios):
    d = scenarios["dir"]
    profile_path = d / "p.csv"
    main(["eq-single", "--scenario", str(scenarios["two"]), "--format", "csv",
          "--out", str(profile_path)])
    out = d / "fluid_p.csv"
    code = main(["fluid", "--scenario", str(scenarios["two"]),
                 "--profile", str(profile_path), "--out", str(out)])
    assert code == 0
    assert ",virtual_wait," in out.read_text()


def test_format_json_and_csv_carry_identical_numbers(scenarios):
    d = scenarios["dir"]
    main(["eq-single", "--scenario", str(scenarios["two"]), "--out", str(d / "eq.json")])
    main(["eq-single", "--scenario", str(scenarios["two"]), "--format", "csv", "--out", str(d / "eq.csv")])
    payload = json.loads((d / "eq.json").read_text())
    assert payload["profile_csv"] == (d / "eq.csv").read_text()


def test_stdout_artifact_is_clean_json(scenarios, capsys):
    # without --out the artifact owns stdout and the summary moves to stderr
    assert main(["eq-single", "--scenario", str(scenarios["two"])]) == 0
    captured = capsys.readouterr()
    payload = json.loads(captured.out)
    assert payload["terminal_time"] == 0.75
    assert "terminal_time=0.75" in captured.err


def test_exit_code_io_error(tmp_path, capsys):
    assert main(["eq-single", "--scenario", str(tmp_path / "missing.json")]) == 2
    assert "error:" in capsys.readouterr().err


def test_exit_code_domain_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"queues":[{"mu":-1,"t_start":0}],"populations":[{"alpha":1,"beta":1}]}')
    assert main(["eq-single", "--scenario", str(bad)]) == 1
    assert "mu" in capsys.readouterr().err


def test_exit_code_parse_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["eq-single", "--scenario", str(bad)]) == 2


def test_unknown_flag_rejected(scenarios):
    assert main(["eq-single", "--scenario", str(scenarios["one"]), "--bogus"]) == 2


def test_seed_flag_overrides_scenario(scenarios):
    d = scenarios["dir"]
    main([
        "simulate", "--scenario", str(scenarios["two"]),
        "--n", "300", "--reps", "1", "--seed", "1", "--out", str(d / "s1.csv"),
    ])
    main([
        "simulate", "--scenario", str(scenarios["two"]),
        "--n", "300", "--reps", "1", "--seed", "2", "--out", str(d / "s2.csv"),
    ])
    assert (d / "s1.csv").read_bytes() != (d / "s2.csv").read_bytes()
