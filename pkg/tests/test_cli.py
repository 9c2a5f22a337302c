import pandas as pd
import pytest

from irtcoresets.cli import EXIT_CONFIG
from irtcoresets.cli import EXIT_OK
from irtcoresets.cli import main


@pytest.fixture
def generated(tmp_path):
    out = tmp_path / "data"
    argv = ["-q", "gen", "--n", "100", "--m", "5", "--seed", "3", "--out", str(out)]
    assert main(argv) == EXIT_OK
    return out


def test_gen_writes_responses_and_truth(generated):
    responses = pd.read_csv(generated / "responses.csv")
    assert list(responses.columns) == ["item", "examinee", "y"]
    assert len(responses) == 500
    assert (generated / "truth" / "items.csv").is_file()
    assert (generated / "truth" / "abilities.csv").is_file()


def test_fit(generated, tmp_path, capsys):
    out = tmp_path / "fit"
    argv = [
        "fit", "--responses", str(generated / "responses.csv"), "--iters", "3", "--out", str(out)
    ]
    assert main(argv) == EXIT_OK
    assert "objective" in capsys.readouterr().out
    assert 2 <= len(pd.read_csv(out / "trace.csv")) <= 4
    assert len(pd.read_csv(out / "abilities.csv")) == 100


def test_coreset_fit_then_report(generated, tmp_path, capsys):
    out = tmp_path / "core"
    argv = [
        "coreset-fit", "--responses", str(generated / "responses.csv"), "--k", "40",
        "--reps", "2", "--iters", "3", "--out", str(out),
    ]
    assert main(argv) == EXIT_OK
    assert "best repetition" in capsys.readouterr().out

    assert main(["report", str(out)]) == EXIT_OK
    assert "best of 2" in capsys.readouterr().out


def test_compare(tmp_path, capsys):
    argv = [
        "compare", "--n", "80", "--m", "4", "--k", "30", "--reps", "1", "--iters", "2",
        "--methods", "uniform", "distance", "--out", str(tmp_path / "cmp"),
    ]
    assert main(argv) == EXIT_OK
    printed = capsys.readouterr().out
    assert "uniform" in printed and "distance" in printed


def test_mu_command(generated, tmp_path):
    out = tmp_path / "mu"
    argv = [
        "mu", "--responses", str(generated / "responses.csv"), "--params",
        str(generated / "truth"), "--mu-method", "exact", "--out", str(out),
    ]
    assert main(argv) == EXIT_OK
    table = pd.read_csv(out / "mu.csv")
    assert len(table) == 5
    assert set(table["method"]) == {"exact"}


def test_config_file_with_overrides(tmp_path):
    config = tmp_path / "config.yaml"
    config.write_text("schema: 1\nn: 60\nm: 4\nk: 20\nrepetitions: 1\niterations: 2\n")
    out = tmp_path / "configured"
    argv = ["coreset-fit", "--config", str(config), "--k", "30", "--out", str(out)]
    assert main(argv) == EXIT_OK
    assert pd.read_csv(out / "reports.csv")["k"].tolist() == [30]


@pytest.mark.parametrize(
    "argv",
    [
        ["coreset-fit", "--n", "50", "--m", "3", "--k", "50"],
        ["fit", "--responses", "no/such/file.csv"],
        ["coreset-fit", "--config", "no/such/config.yaml"],
    ],
)
def test_configuration_errors_exit_with_two(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path / "out")]) == EXIT_CONFIG


def test_report_on_empty_directory(tmp_path):
    assert main(["report", str(tmp_path)]) == EXIT_CONFIG


def test_unknown_command():
    with pytest.raises(SystemExit):
        main(["transmogrify"])
