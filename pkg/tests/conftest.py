import hypothesis
import pytest

from seiscurate.pipeline import run_pipeline
from seiscurate.synthetic import make_synthetic_survey, three_layer_spec

hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile("ci")


@pytest.fixture(scope="session")
def synthetic_survey(tmp_path_factory):
    return make_synthetic_survey(three_layer_spec(), tmp_path_factory.mktemp("survey"))


@pytest.fixture(scope="session")
def pipeline_run(synthetic_survey):
    out = synthetic_survey.root / "run1"
    result = run_pipeline(synthetic_survey.config, out, threads=1)
    return out, result


def pytest_configure(config):
    config.acceptance_lines = {}


def pytest_terminal_summary(terminalreporter, config):
    lines = config.acceptance_lines
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
