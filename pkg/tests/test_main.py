import json
import math
from pathlib import Path

import pytest

from branchenv import __version__
from branchenv.main import build_parser, run_cli
from branchenv.model import load_model
from branchenv.simulate import load_ct_model
from branchenv.tools.reports import read_csv

BINARY_ATOMS = [{"offspring": [0], "p": 0.5}, {"offspring": [2], "p": 0.5}]


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    """
    Fixture to provide an isolated working directory for logs and artifacts.
    """
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture
def critical_file(workdir):
    """
    Fixture to provide a model file for critical binary splitting.
    """
    path = workdir / "critical.json"
    document = {
        "d": 1,
        "schedule": [{"start": 0, "laws": [BINARY_ATOMS]}],
        "tail": {"mode": "repeat_last"},
    }
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


@pytest.fixture
def degenerate_file(workdir):
    """
    Fixture to provide a two-type model whose first type never has two type-2 children.
    """
    path = workdir / "degenerate.json"
    document = {
        "d": 2,
        "schedule": [
            {
                "start": 0,
                "laws": [
                    [{"offspring": [0, 0], "p": 0.5}, {"offspring": [2, 1], "p": 0.5}],
                    [{"offspring": [0, 0], "p": 0.5}, {"offspring": [2, 2], "p": 0.5}],
                ],
            }
        ],
        "tail": {"mode": "repeat_last"},
    }
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


@pytest.fixture
def ct_file(workdir):
    """
    Fixture to provide a continuous-time model with mean 2 at rate one.
    """
    path = workdir / "growth.json"
    document = {
        "d": 1,
        "pieces": [
            {
                "start": 0.0,
                "rates": [1.0],
                "laws": [
                    [
                        {"offspring": [0], "p": 0.25},
                        {"offspring": [2], "p": 0.25},
                        {"offspring": [3], "p": 0.5},
                    ]
                ],
            }
        ],
    }
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def read_json(path):
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


def test_parser_subcommands():
    """
    Test that every subcommand is registered.
    """
    parser = build_parser()
    for command in ["validate", "spectral", "series", "classify", "simulate", "ct-simulate", "moment-ode", "skip"]:
        args = parser.parse_args([command, "model.json"])
        assert args.command == command


def test_version(capsys):
    """
    Test the --version flag.
    """
    assert run_cli(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_validate(critical_file, workdir):
    """
    Test the validate subcommand and its provenance block.
    """
    out = workdir / "out"
    assert run_cli(["validate", str(critical_file), "--out", str(out), "--quiet"]) == 0
    document = read_json(out / "critical_validate.json")
    assert document["report"]["epsilon0"] == pytest.approx(0.5)
    assert document["provenance"]["subcommand"] == "validate"
    assert document["provenance"]["seed"] is None
    assert document["provenance"]["config"]["horizon"] == 1024
    assert "out" not in document["provenance"]["config"]


def test_missing_model_file(workdir, capsys):
    """
    Test that a missing model file exits with 2 and writes nothing.
    """
    out = workdir / "out"
    assert run_cli(["spectral", str(workdir / "missing.json"), "--out", str(out)]) == 2
    assert "model file not found" in capsys.readouterr().err
    assert not out.exists()


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["explode", "model.json"],
        ["simulate", "model.json", "-R", "-5"],
        ["simulate", "model.json", "--initial", "1,x"],
        ["spectral", "model.json", "--u0", "1,0"],
        ["skip", "model.json", "--skip", "0"],
    ],
)
def test_bad_arguments(workdir, argv):
    """
    Test that unparsable arguments exit with 2.
    """
    assert run_cli(argv) == 2


def test_spectral_and_series(critical_file, workdir):
    """
    Test the spectral and series CSV artifacts.
    """
    out = workdir / "out"
    assert run_cli(["spectral", str(critical_file), "--out", str(out), "--horizon", "32", "--quiet"]) == 0
    header, rows = read_csv(out / "critical_spectral.csv")
    assert header[:3] == ["n", "lambda", "lambda_tilde"]
    assert len(rows) == 33

    assert run_cli(["series", str(critical_file), "--out", str(out), "--horizon", "32", "--quiet"]) == 0
    header, rows = read_csv(out / "critical_series.csv")
    assert header[:3] == ["n", "Xi", "Gamma"]
    assert float(rows[32][1]) == pytest.approx(32.0)
    assert float(rows[32][2]) == pytest.approx(16.0)


def test_assumption_failure_exits_with_one(degenerate_file, workdir, capsys):
    """
    Test that a model failing Assumption 1 cannot be analysed.
    """
    out = workdir / "out"
    assert run_cli(["spectral", str(degenerate_file), "--out", str(out), "--horizon", "8"]) == 1
    assert "Assumption 1" in capsys.readouterr().err
    assert not (out / "degenerate_spectral.csv").exists()


def test_classify_exit_code(critical_file, workdir):
    """
    Test that classify exits with 0 whatever the verdict.
    """
    out = workdir / "out"
    assert run_cli(["classify", str(critical_file), "--out", str(out), "--horizon", "64", "--quiet"]) == 0
    document = read_json(out / "critical_classify.json")
    assert document["classification"]["verdict"] == "EXTINCT_EXPONENTIAL_LIMIT"
    assert document["model"]["name"] == "critical"


def test_simulate_is_byte_identical(critical_file, workdir):
    """
    Test that reruns with the same seed write identical files whatever the thread count.
    """
    first, second = workdir / "first", workdir / "second"
    base = ["simulate", str(critical_file), "-n", "6", "-R", "300", "--seed", "7", "--quiet"]
    assert run_cli(base + ["--out", str(first)]) == 0
    assert run_cli(base + ["--out", str(second), "--threads", "2"]) == 0
    for name in ["critical_ensemble.csv", "critical_stats.json"]:
        assert (first / name).read_bytes() == (second / name).read_bytes()

    stats = read_json(first / "critical_stats.json")
    assert stats["provenance"]["seed"] == 7
    assert stats["ensemble"]["R"] == 300
    assert 0.0 < stats["exact_survival"] < 0.375
    header, rows = read_csv(first / "critical_ensemble.csv")
    assert header == ["trajectory", "survived", "Z_1", "capped"]
    assert len(rows) == 300


def test_simulate_with_traces(critical_file, workdir):
    """
    Test the martingale block written with --traces.
    """
    out = workdir / "out"
    argv = ["simulate", str(critical_file), "-n", "4", "-R", "200", "--traces", "--out", str(out), "--quiet"]
    assert run_cli(argv) == 0
    stats = read_json(out / "critical_stats.json")
    assert stats["martingale"]["target"] == pytest.approx(1.0)
    assert len(stats["martingale"]["mean"]) == 5


def test_simulate_without_survivors(workdir):
    """
    Test that an ensemble with no survivors records null conditioned statistics.
    """
    path = workdir / "doomed.json"
    document = {
        "d": 1,
        "schedule": [{"start": 0, "laws": [[{"offspring": [0], "p": 1.0}]]}],
        "tail": {"mode": "repeat_last"},
    }
    path.write_text(json.dumps(document), encoding="utf-8")
    out = workdir / "out"
    assert run_cli(["simulate", str(path), "-n", "3", "-R", "20", "--out", str(out), "--quiet"]) == 0
    stats = read_json(out / "doomed_stats.json")
    assert stats["conditioned"] is None
    assert stats["ensemble"]["survival_frequency"] == 0.0


def test_skip_writes_loadable_model(critical_file, workdir):
    """
    Test that the skip artifact is a valid model file with the two-step law.
    """
    out = workdir / "out"
    assert run_cli(["skip", str(critical_file), "--out", str(out), "--quiet"]) == 0
    skipped = load_model(out / "critical_skip2.json")
    assert skipped.law(0, 0).as_dict() == {(0,): 0.625, (2,): 0.25, (4,): 0.125}
    provenance = read_json(out / "critical_skip2.json")["provenance"]
    assert provenance["config"]["skip"] == 2
    assert provenance["config"]["truncation"]["l"] == 2


def test_moment_ode_command(ct_file, workdir):
    """
    Test the moment-ode CSV: M(1) = e for mean 2 at rate one.
    """
    out = workdir / "out"
    assert run_cli(["moment-ode", str(ct_file), "-T", "1", "--out", str(out), "--quiet"]) == 0
    header, rows = read_csv(out / "growth_moments.csv")
    assert header == ["t", "M_1"]
    assert float(rows[-1][0]) == pytest.approx(1.0)
    assert float(rows[-1][1]) == pytest.approx(math.e, rel=1e-8)


def test_ct_simulate_command(ct_file, workdir):
    """
    Test the continuous-time ensemble artifacts.
    """
    out = workdir / "out"
    argv = ["ct-simulate", str(ct_file), "-T", "1.5", "-R", "100", "--seed", "3", "--out", str(out), "--quiet"]
    assert run_cli(argv) == 0
    stats = read_json(out / "growth_ct_stats.json")
    assert stats["ensemble"]["kind"] == "continuous"
    assert stats["moment_ode_mean"][0] == pytest.approx(math.exp(1.5), rel=1e-8)
    assert len(stats["skeleton_survival"]) == 2
    assert stats["inverse_mean_integral"] == pytest.approx(1 - math.exp(-1.5), rel=1e-4)
    assert stats["assumptions"]["assumption0"] is True
    assert (out / "growth_ct_ensemble.csv").exists()


def test_config_file(critical_file, workdir):
    """
    Test that settings files are applied and recorded, and unknown keys rejected.
    """
    config = workdir / "branchenv.env"
    config.write_text("BRANCHENV_MASS_TOL=1e-8\n", encoding="utf-8")
    out = workdir / "out"
    argv = ["skip", str(critical_file), "--out", str(out), "--config", str(config), "--quiet"]
    assert run_cli(argv) == 0
    provenance = read_json(out / "critical_skip2.json")["provenance"]
    assert provenance["config"]["settings"]["mass_tol"] == pytest.approx(1e-8)

    # Test that an explicit flag overrides the file
    argv += ["--mass-tol", "1e-7"]
    assert run_cli(argv) == 0
    provenance = read_json(out / "critical_skip2.json")["provenance"]
    assert provenance["config"]["settings"]["mass_tol"] == pytest.approx(1e-7)

    config.write_text("BRANCHENV_COLOUR=red\n", encoding="utf-8")
    assert run_cli(["skip", str(critical_file), "--config", str(config)]) == 2


def test_summary_table(critical_file, workdir, capsys):
    """
    Test that the summary table and artifact paths are printed without --quiet.
    """
    assert run_cli(["validate", str(critical_file), "--out", str(workdir / "out")]) == 0
    output = capsys.readouterr().out
    assert "Assumptions of 'critical'" in output
    assert "wrote" in output


def test_shipped_models_load():
    """
    Test that the example model files in models/ are valid.
    """
    models = Path(__file__).resolve().parent.parent / "models"
    assert load_model(models / "critical.json").name == "critical"
    period2 = load_model(models / "period2.json")
    assert period2.tail.period == 2
    assert load_ct_model(models / "ct_growth.json").starts == (0.0, 2.0)


def test_runs_from_different_directories(critical_file, workdir, monkeypatch):
    """
    Test that consecutive runs from different working directories both succeed.
    """
    assert run_cli(["validate", str(critical_file), "--out", str(workdir / "a"), "--quiet"]) == 0

    other = workdir / "other"
    other.mkdir()
    monkeypatch.chdir(other)
    argv = ["spectral", str(critical_file), "--out", str(other / "b"), "--horizon", "8", "--quiet"]
    assert run_cli(argv) == 0
    assert run_cli(["classify", str(critical_file), "--out", str(other / "b"), "--horizon", "8", "--quiet"]) == 0


@pytest.mark.parametrize(
    "extra",
    [
        ["spectral", "--horizon", "0"],
        ["spectral", "--tol", "-1"],
        ["spectral", "--u0", "1,1"],
        ["classify", "--horizon", "1"],
        ["simulate", "--initial", "1,2"],
        ["skip", "--mass-tol", "1e-3"],
    ],
)
def test_bad_values_for_model(critical_file, workdir, capsys, extra):
    """
    Test that argument values that do not fit the model exit with 2.
    """
    command, *flags = extra
    out = workdir / "out"
    assert run_cli([command, str(critical_file), "--out", str(out), *flags]) == 2
    assert "input error" in capsys.readouterr().err
    assert not out.exists()


def test_bad_values_for_ct_model(ct_file, workdir):
    """
    Test that continuous-time argument values that do not fit exit with 2.
    """
    assert run_cli(["moment-ode", str(ct_file), "--step", "0"]) == 2
    assert run_cli(["moment-ode", str(ct_file), "-T", "-1"]) == 2
    assert run_cli(["ct-simulate", str(ct_file), "--initial", "1,1", "-R", "5"]) == 2
