import pytest

from shufflesod.gradsuite import CASES, run_case, run_suite

FAST = [c.name for c in CASES if c.name not in ("full_network", "crm_stage", "transformer_block")]


def test_case_names_unique_and_cover_the_stack():
    names = [c.name for c in CASES]
    assert len(names) == len(set(names))
    assert {"conv2d", "batch_norm", "layer_norm", "pixel_shuffle", "sr_attention", "crm_stage",
            "full_network"} <= set(names)


@pytest.mark.parametrize("name", FAST)
def test_fast_cases_pass_on_two_seeds(name):
    case = next(c for c in CASES if c.name == name)
    for seed in range(2):
        assert run_case(case, seed).passed


def test_suite_reports_each_case():
    seen = []
    results = run_suite(range(1), ["matmul", "softmax"], lambda case, res: seen.append(case.name))
    assert seen == ["matmul", "softmax"] and set(results) == {"matmul", "softmax"}


def test_unknown_case_rejected():
    with pytest.raises(ValueError):
        run_suite(range(1), ["nope"])
