import pytest

from app import main as cli
from app.props import PropCheck
from conftest import COIN_TRUTH_TEXT, MIXTURE_SPEC_TEXT


@pytest.fixture
def coin_paths(model_files):
    return str(model_files('truth.txt', COIN_TRUTH_TEXT)), str(model_files('learner.txt', MIXTURE_SPEC_TEXT))


def test_coeff_line(coin_paths, capsys):
    truth, learner = coin_paths
    assert cli.main(['coeff', '--spec', learner, '--truth', truth]) == cli.EXIT_OK
    assert capsys.readouterr().out.strip() == "d=3 half_d=1.5 lemma2=0.5 lemma3=1.0 mu=1.5"


def test_coeff_from_state_counts(coin_paths, capsys):
    _, learner = coin_paths
    assert cli.main(['coeff', '--spec', learner, '--true-states', '1']) == cli.EXIT_OK
    assert "mu=1.5" in capsys.readouterr().out


def test_invalid_learner_is_input_error(model_files):
    learner = model_files('bad.txt', "K = 1\nT = 1\nM = 1\nY = 2\n")
    assert cli.main(['coeff', '--spec', str(learner), '--true-states', '1']) == cli.EXIT_INPUT


def test_missing_file_is_input_error(tmp_path):
    assert cli.main(['coeff', '--spec', str(tmp_path / 'nope.txt'), '--true-states', '1']) == cli.EXIT_INPUT


def test_usage_error_exits_one():
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == cli.EXIT_INPUT


def test_sample_is_reproducible(coin_paths, tmp_path):
    truth, _ = coin_paths
    for name in ('a.csv', 'b.csv'):
        assert cli.main(['sample', '--truth', truth, '--n', '20', '--seed', '5', '--out', str(tmp_path / name)]) == 0
    text = (tmp_path / 'a.csv').read_text()
    assert text.startswith("x1\n")
    assert len(text.splitlines()) == 21
    assert (tmp_path / 'a.csv').read_bytes() == (tmp_path / 'b.csv').read_bytes()


def test_sample_then_evidence(coin_paths, tmp_path, capsys):
    truth, learner = coin_paths
    data = str(tmp_path / 'data.csv')
    assert cli.main(['sample', '--truth', truth, '--n', '6', '--seed', '1', '--out', data]) == 0
    assert cli.main(['evidence', '--spec', learner, '--data', data, '--truth', truth]) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("log_Z0=")
    fields = dict(part.split('=') for part in line.split())
    assert float(fields['log_Z0']) < 0
    assert fields['stderr'] == '0.0'


def test_exact_evidence_over_limit_is_infeasible(coin_paths, tmp_path, monkeypatch):
    truth, learner = coin_paths
    data = str(tmp_path / 'data.csv')
    cli.main(['sample', '--truth', truth, '--n', '6', '--out', data])
    monkeypatch.setattr('stats.evidence.EXACT_COST_LIMIT', 1)
    assert cli.main(['evidence', '--spec', learner, '--data', data]) == cli.EXIT_INFEASIBLE


def test_kl_at_the_embedded_truth(coin_paths, capsys):
    truth, learner = coin_paths
    assert cli.main(['kl', '--truth', truth, '--spec', learner]) == 0
    assert float(capsys.readouterr().out.strip().removeprefix('kl=')) == pytest.approx(0.0, abs=1e-12)


def test_failed_check_exits_three(monkeypatch, capsys):
    monkeypatch.setattr(cli, 'run_props', lambda seed, replicates: [
        PropCheck('prop2_monotone', True, 0.1),
        PropCheck('prop1_jensen', False, -0.2),
    ])
    assert cli.main(['check-props']) == cli.EXIT_NUMERICAL
    assert "passed=false" in capsys.readouterr().out


def test_evidence_of_empty_sample(coin_paths, tmp_path, capsys):
    truth, learner = coin_paths
    data = str(tmp_path / 'data.csv')
    assert cli.main(['sample', '--truth', truth, '--n', '0', '--out', data]) == cli.EXIT_OK
    assert cli.main(['evidence', '--spec', learner, '--data', data, '--truth', truth]) == cli.EXIT_OK
    fields = dict(part.split('=') for part in capsys.readouterr().out.split())
    assert fields['log_Z0'] == '0.0'
    assert fields['S'] == '0.0'
    assert fields['F'] == '0.0'


def test_evidence_without_truth_prints_nan(coin_paths, tmp_path, capsys):
    truth, learner = coin_paths
    data = str(tmp_path / 'data.csv')
    cli.main(['sample', '--truth', truth, '--n', '3', '--out', data])
    assert cli.main(['evidence', '--spec', learner, '--data', data]) == cli.EXIT_OK
    fields = dict(part.split('=') for part in capsys.readouterr().out.split())
    assert fields['S'] == 'nan'
    assert fields['F'] == 'nan'
