import json

import pytest

from rarebai.algorithms import run_tse
from rarebai.exact import lower_bound_samples, solve_exact_maxmin
from rarebai.asymptotics import classify
from rarebai.harness import (CampaignConfig, CampaignSummary, InstanceFormatError, dump_instance, emit,
                             instance_to_dict, load_instance, report_lower_bound,
                             run_campaign, trial_seed)
from rarebai.instance import ArmSpec, BanditInstance
from rarebai.suite import S1

EASY = BanditInstance(0.1, [ArmSpec(1, [(2.0, .5), (4.0, .15)], 6), ArmSpec(1, [(2.0, .4)], 6),
                            ArmSpec(1, [(1.0, .4)], 6)], name="easy")


class TestConfig:
    def test_empty_algorithms(self):
        with pytest.raises(ValueError):
            CampaignConfig(instance="x.yaml", algorithms=())

    @pytest.mark.parametrize("kw", [{"delta": 0.0}, {"delta": 1.0}, {"trials": 0},
                                    {"algorithms": ("tsa", "ucb")}, {"format": "csv"}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            CampaignConfig(instance="x.yaml", **kw)

    def test_invalid_instance_object(self):
        bad = BanditInstance(0.1, [ArmSpec(1, [(2.0, .5)], 6), ArmSpec(1, [(1.0, 1.0)], 6)])
        with pytest.raises(InstanceFormatError):
            CampaignConfig(instance=bad).load()


class TestInstanceIO:
    def test_round_trip(self, tmp_path):
        p = tmp_path / "s1.yaml"
        dump_instance(S1, str(p))
        back = load_instance(str(p))
        assert back == S1

    def test_json_accepted(self, tmp_path):
        p = tmp_path / "easy.json"
        p.write_text(json.dumps(instance_to_dict(EASY)))
        assert load_instance(str(p)).means.tolist() == pytest.approx(EASY.means.tolist())

    @pytest.mark.parametrize("doc", ["- 1\n- 2\n", "gamma: 0.1\n", "arms: [\n", "gamma: 0.1\narms: [{alpha: 1}]\n"])
    def test_malformed(self, tmp_path, doc):
        p = tmp_path / "bad.yaml"
        p.write_text(doc)
        with pytest.raises(InstanceFormatError):
            load_instance(str(p))

    def test_violation_reported(self, tmp_path):
        doc = instance_to_dict(EASY)
        doc["arms"][0]["atoms"][0][0] = 99.0  # above the bound
        with pytest.raises(InstanceFormatError, match="bound"):
            load_instance_from(doc, tmp_path)


def load_instance_from(doc, tmp_path):
    p = tmp_path / "v.yaml"
    p.write_text(json.dumps(doc))
    return load_instance(str(p))


class TestCampaign:
    def test_single_se_trial(self):
        s = run_campaign(CampaignConfig(instance=EASY, algorithms=("se",), trials=1, delta=0.1))
        assert len(s.trials) == 1
        rec = s.trials[0]
        assert rec["algorithm"] == "se" and rec["correct"] == (rec["recommended"] == 0)
        assert s.algorithms["se"]["trials"] == 1

    def test_deterministic_bytes(self):
        cfg = CampaignConfig(instance=EASY, algorithms=("tsa", "se"), trials=3, delta=0.1,
                             batch_size=100, seed=7, record_timing=False)
        a = emit(run_campaign(cfg), "structured")
        b = emit(run_campaign(cfg), "structured")
        assert a == b

    def test_pairing_and_ratios(self):
        cfg = CampaignConfig(instance=EASY, algorithms=("tsa", "tse"), trials=3, delta=0.1, batch_size=100)
        s = run_campaign(cfg)
        seeds = {a: [r["seed"] for r in s.trials if r["algorithm"] == a] for a in ("tsa", "tse")}
        assert seeds["tsa"] == seeds["tse"] == sorted(trial_seed(0, k) for k in range(3))
        assert 0.5 < s.ratios["tsa_samples_over_tse"] < 2
        assert s.timing["tse_time_over_tsa"] > 0
        ci = s.algorithms["tsa"]["error_ci"]
        assert ci[0] == 0.0 and 0 < ci[1] < 1

    def test_structured_round_trip(self, tmp_path):
        cfg = CampaignConfig(instance=EASY, algorithms=("tsa",), trials=2, delta=0.1, batch_size=100)
        s = run_campaign(cfg)
        path = tmp_path / "out.json"
        emit(s, "structured", str(path))
        back = CampaignSummary.from_dict(json.loads(path.read_text()))
        assert back.to_dict() == s.to_dict()

    def test_table_rows(self):
        cfg = CampaignConfig(instance=EASY, algorithms=("tsa", "tse", "se"), trials=1, delta=0.1,
                             batch_size=100)
        text = emit(run_campaign(cfg), "table")
        rows = [ln for ln in text.splitlines() if ln.startswith("easy ")]
        assert sorted(r.split()[1] for r in rows) == ["se", "tsa", "tse"]
        assert text.splitlines()[0].split()[:4] == ["instance", "algorithm", "samples", "stderr"]

    def test_persisted(self, tmp_path):
        out = tmp_path / "c.txt"
        run_campaign(CampaignConfig(instance=EASY, algorithms=("se",), trials=1, out=str(out)))
        assert "se" in out.read_text()

    def test_workers(self):
        base = dict(instance=EASY, algorithms=("tsa",), trials=2, delta=0.1, batch_size=100,
                    record_timing=False)
        a = run_campaign(CampaignConfig(**base)).to_dict()
        b = run_campaign(CampaignConfig(workers=2, **base)).to_dict()
        assert a == b

    def test_unwritable(self, tmp_path):
        s = run_campaign(CampaignConfig(instance=EASY, algorithms=("se",), trials=1))
        with pytest.raises(OSError):
            emit(s, "table", str(tmp_path / "missing" / "x.txt"))


class TestLowerBoundReport:
    def test_contents(self):
        rep = report_lower_bound(CampaignConfig(instance=S1, delta=0.01))
        ex = solve_exact_maxmin(S1)
        assert rep["V_exact"] == pytest.approx(ex.value)
        assert rep["lower_bound_samples"] == pytest.approx(lower_bound_samples(ex.value, 0.01))
        assert rep["relative_gap"] <= 0.05
        assert rep["regime"] == classify(S1).regime
        assert rep["predicted_exponents"] == classify(S1).exponents.tolist()

    def test_bound_below_observed(self):
        rep = report_lower_bound(CampaignConfig(instance=EASY, delta=0.1))
        assert run_tse(EASY, 0.1, m=100, seed=0).tau > rep["lower_bound_samples"]
