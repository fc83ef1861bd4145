import json

import pytest

from rarebai.cli import main
from rarebai.harness import dump_instance, instance_to_dict
from rarebai.instance import ArmSpec, BanditInstance
from rarebai.suite import S1, S4

EASY = BanditInstance(0.1, [ArmSpec(1, [(2.0, .5), (4.0, .15)], 6), ArmSpec(1, [(2.0, .4)], 6),
                            ArmSpec(1, [(1.0, .4)], 6)], name="easy")


@pytest.fixture
def easy_file(tmp_path):
    p = tmp_path / "easy.yaml"
    dump_instance(EASY, str(p))
    return str(p)


def test_validate_ok(easy_file, capsys):
    assert main(["validate", "--instance", easy_file]) == 0
    assert capsys.readouterr().out == "ok\n"


def test_validate_violation(tmp_path, capsys):
    doc = instance_to_dict(EASY)
    doc["arms"][1]["atoms"] = [[9.0, 0.4]]
    p = tmp_path / "bad.yaml"
    p.write_text(json.dumps(doc))
    assert main(["validate", "--instance", str(p), "--format", "structured"]) == 2
    out = json.loads(capsys.readouterr().out)
    assert out["valid"] is False and out["violations"]


def test_missing_file(tmp_path, capsys):
    assert main(["bound", "--instance", str(tmp_path / "nope.yaml")]) == 2


def test_empty_algos(easy_file, capsys):
    assert main(["run", "--instance", easy_file, "--algos", ""]) == 2


def test_solver_failure_exit(easy_file, monkeypatch):
    import rarebai.cli as cli
    from rarebai.exact import ConvergenceError

    def boom(*a, **k):
        raise ConvergenceError("cascade did not converge")
    monkeypatch.setattr(cli, "report_lower_bound", boom)
    assert main(["bound", "--instance", easy_file]) == 3


def test_run_structured_deterministic(easy_file, tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        args = ["run", "--instance", easy_file, "--algos", "tsa,se", "--trials", "2", "--delta", "0.1",
                "--batch-size", "100", "--seed", "3", "--no-timing", "--format", "structured",
                "--out", str(out)]
        assert main(args) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    doc = json.loads(outs[0])
    assert "timing" not in doc and len(doc["trials"]) == 4


def test_run_table(easy_file, capsys):
    assert main(["run", "--instance", easy_file, "--algos", "tsa", "--trials", "1", "--delta", "0.1",
                 "--batch-size", "100"]) == 0
    out = capsys.readouterr().out
    assert "tsa" in out and "samples" in out


def test_bound_and_classify(tmp_path, capsys):
    p = tmp_path / "s4.yaml"
    dump_instance(S4, str(p))
    assert main(["classify", "--instance", str(p), "--format", "structured"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["regime"] in (1, 2, 3, 4, 5) and len(doc["exponents"]) == 5
    q = tmp_path / "s1.yaml"
    dump_instance(S1, str(q))
    assert main(["bound", "--instance", str(q)]) == 0
    assert "lower_bound_samples" in capsys.readouterr().out
