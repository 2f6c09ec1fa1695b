"""Acceptance gate: every criterion runs from its checked-in config.

One pass/fail line prints per criterion (run pytest with -s or check the
captured output); tolerances live in the config files, not here.
"""

import warnings

import pytest

from specdet.harness import ExperimentConfig, acceptance_configs, run_experiment

warnings.filterwarnings("ignore")

CONFIGS = acceptance_configs()
IDS = [p.stem for p in CONFIGS]

# Criterion 3 includes the q = 1.5 moment at mu = 0.5 J with 10^4 samples.
# The sampled tilt variable would need a 1.5/sqrt(1/N) = 21-sigma excursion
# (probability exp(-N q^2 mu^2 / (2 (2-q)^2 J^2)) ~ exp(-56) at N = 50), so
# no direct estimator at this sample size can reach the target; the row is
# expected to fail and is reported honestly rather than loosened.
KNOWN_DEFECTS = {
    "03_moments_d0": ["sigma_q_q=1.5"],
}


@pytest.mark.parametrize("path", CONFIGS, ids=IDS)
def test_acceptance_criterion(path):
    cfg = ExperimentConfig.from_file(path)
    report = run_experiment(cfg)
    lines = []
    failed = []
    for row in report.rows:
        mark = "PASS" if row.passed else "FAIL"
        lines.append(f"[{mark}] {cfg.name}: {row.label} "
                     f"target={row.analytic:.8g} got={row.empirical:.8g} "
                     f"stderr={row.stderr:.3g} tol={row.tolerance:.3g}")
        if not row.passed:
            failed.append(row.label)
    print()
    for line in lines:
        print(line)
    defects = KNOWN_DEFECTS.get(cfg.name, [])
    unexpected = [f for f in failed if f not in defects]
    assert not unexpected, (
        f"{cfg.name}: failing rows {unexpected}\n" + "\n".join(lines))
    if failed:
        pytest.fail(
            f"{cfg.name}: rows {failed} fail as analysed in the decisions "
            "ledger (statistically unreachable tilt at the stated sample "
            "size); kept red rather than loosened.")
