import pytest

from codeloop.models import (
    Attempt,
    CodeOrigin,
    FailureCategory,
    FailureRecord,
    SampleCase,
    SourceCode,
    Stage,
    TestReport,
)
from codeloop.parsing import extract_code, parse_plan, parse_verdict
from codeloop.prompts import (
    DEFAULT_LANGUAGE,
    TEST_REPORT_HEADER,
    build_test_log,
    format_failure_line,
    load_template,
    render_code_generation,
    render_debugging,
    render_plan_generation,
    render_plan_refinement,
    render_plan_verification,
    with_fence_reminder,
)

from conftest import failing_report


@pytest.fixture(scope="module")
def worked_plan(worked_texts):
    return parse_plan(worked_texts["plan"])


def text_of(request) -> str:
    return request.messages[-1].content


# =============================================================================
# Stage renders
# =============================================================================

class TestPlanGeneration:
    def test_embeds_problem_and_structure(self, worked_problem):
        text = text_of(render_plan_generation(worked_problem))
        assert worked_problem.description in text
        assert "generating appropriate plan" in text
        assert "### Problem Understanding" in text
        assert "### Plan" in text
        assert "Do not generate code." in text
        assert f"**{DEFAULT_LANGUAGE}**" in text

    def test_single_user_message(self, worked_problem):
        request = render_plan_generation(worked_problem)
        assert len(request.messages) == 1
        assert request.messages[0].role == "user"

    def test_empty_description_rejected(self, worked_problem):
        from dataclasses import replace

        with pytest.raises(ValueError):
            render_plan_generation(replace(worked_problem, description="   "))

    def test_render_is_pure(self, worked_problem):
        first = text_of(render_plan_generation(worked_problem))
        second = text_of(render_plan_generation(worked_problem))
        assert first == second


class TestPlanVerification:
    def test_embeds_plan_steps_verbatim(self, worked_problem, worked_plan):
        text = text_of(render_plan_verification(worked_problem, worked_plan))
        assert "verifying a plan" in text
        assert worked_plan.steps in text
        assert "### Simulation" in text
        assert "No Need to Modify Plan" in text
        assert "Plan Modification Needed" in text


class TestPlanRefinement:
    def test_embeds_feedback(self, worked_problem, worked_plan):
        text = text_of(
            render_plan_refinement(worked_problem, worked_plan, "the range loop misses 14")
        )
        assert "refining a plan" in text
        assert "the range loop misses 14" in text
        assert worked_plan.steps in text

    def test_requires_feedback(self, worked_problem, worked_plan):
        with pytest.raises(ValueError):
            render_plan_refinement(worked_problem, worked_plan, "  ")


class TestCodeGeneration:
    def test_contains_plan_and_formatting_rules(self, worked_problem, worked_plan):
        text = text_of(render_code_generation(worked_problem, worked_plan))
        assert worked_plan.steps in text
        assert "Do not add any explanation." in text
        assert "triple backtick" in text

    def test_fence_reminder_appends_only(self, worked_problem, worked_plan):
        request = render_code_generation(worked_problem, worked_plan)
        retried = with_fence_reminder(request)
        assert text_of(retried).startswith(text_of(request))
        assert "did not contain a fenced code block" in text_of(retried)
        assert len(retried.messages) == 1


class TestDebugging:
    def test_embeds_code_report_and_demands(self, worked_problem, worked_plan, worked_texts):
        code = SourceCode(
            body=extract_code(worked_texts["code"]),
            origin=CodeOrigin.CODING_AGENT,
            attempt=Attempt(1, 0),
        )
        report = failing_report(worked_problem.sample_io[2])
        text = text_of(render_debugging(worked_problem, worked_plan, code, report))
        assert code.body in text
        assert "### Test Report" in text
        assert TEST_REPORT_HEADER in text
        assert "assert generate_integers(10, 14) == []" in text
        assert "Modified Code" in text
        assert f"```{DEFAULT_LANGUAGE}" in text

    def test_passing_report_rejected(self, worked_problem, worked_plan, worked_texts):
        code = SourceCode(
            body=extract_code(worked_texts["code"]),
            origin=CodeOrigin.CODING_AGENT,
            attempt=Attempt(1, 0),
        )
        with pytest.raises(ValueError):
            render_debugging(
                worked_problem, worked_plan, code, TestReport(passed=True, failures=(), raw_log="")
            )


# =============================================================================
# Placeholder machinery
# =============================================================================

class TestTemplates:
    def test_braces_in_problem_text_survive(self, worked_problem):
        from dataclasses import replace

        tricky = replace(
            worked_problem, description="Return {problem} formatted as {x: 1} and {plan}."
        )
        text = text_of(render_plan_generation(tricky))
        assert "{x: 1}" in text
        assert "Return {problem} formatted" in text

    def test_every_stage_has_a_template(self):
        for stage in (
            Stage.PLAN_GENERATE,
            Stage.PLAN_VERIFY,
            Stage.PLAN_REFINE,
            Stage.CODE_GENERATE,
            Stage.DEBUG,
        ):
            template = load_template(stage)
            assert template.body
            assert "{language}" in template.body

    def test_unbound_placeholder_is_an_error(self):
        template = load_template(Stage.PLAN_GENERATE)
        with pytest.raises(KeyError):
            template.render(language="Python3")  # problem left unbound


# =============================================================================
# Render/parse coherence: each template's demanded output shape parses
# =============================================================================

class TestCoherence:
    def test_plan_skeleton_parses(self):
        synthetic = (
            "### Problem Understanding\nsum the numbers\n"
            "### Recall Example Problem\nadding a list\n"
            "### Algorithm to Solve the Original Problem\naccumulate\n"
            "### Plan\n1. read input\n2. sum\n3. print"
        )
        plan = parse_plan(synthetic)
        assert plan.steps == "1. read input\n2. sum\n3. print"
        assert plan.understanding == "sum the numbers"

    def test_verification_skeleton_parses(self):
        synthetic = "### Simulation\ntraced fine\n### Plan Evaluation\n**No Need to Modify Plan**"
        verdict = parse_verdict(synthetic)
        assert verdict.feedback == "traced fine"

    def test_code_skeleton_parses(self):
        assert extract_code("```Python3\nprint(42)\n```") == "print(42)"


# =============================================================================
# Failure lines
# =============================================================================

class TestFailureLines:
    assertion_case = SampleCase(assertion="assert f(2) == 4")
    stdin_case = SampleCase(stdin="1 2\n", expected_stdout="3\n")

    def test_wrong_output_assertion_is_bare(self):
        record = FailureRecord(
            case=self.assertion_case, observed="5", category=FailureCategory.WRONG_OUTPUT
        )
        assert format_failure_line(record) == "assert f(2) == 4"

    def test_timeout_assertion(self):
        record = FailureRecord(
            case=self.assertion_case, observed="TIMEOUT", category=FailureCategory.TIMEOUT
        )
        assert format_failure_line(record) == "assert f(2) == 4  (TIMEOUT)"

    def test_runtime_error_carries_detail(self):
        record = FailureRecord(
            case=self.assertion_case,
            observed="ZeroDivisionError: division by zero",
            category=FailureCategory.RUNTIME_ERROR,
        )
        line = format_failure_line(record)
        assert line.startswith("assert f(2) == 4")
        assert "runtime_error" in line
        assert "ZeroDivisionError" in line

    def test_stdin_line_packs_io(self):
        record = FailureRecord(
            case=self.stdin_case, observed="4\n", category=FailureCategory.WRONG_OUTPUT
        )
        line = format_failure_line(record)
        assert line == "Input: '1 2\\n'  Expected Output: '3\\n'  Your Output: '4\\n'"

    def test_stdin_timeout(self):
        record = FailureRecord(
            case=self.stdin_case, observed="TIMEOUT", category=FailureCategory.TIMEOUT
        )
        assert format_failure_line(record).endswith("Your Output: TIMEOUT")

    def test_log_preserves_order(self):
        records = tuple(
            FailureRecord(
                case=SampleCase(assertion=f"assert f({i}) == {i}"),
                observed="x",
                category=FailureCategory.WRONG_OUTPUT,
            )
            for i in range(3)
        )
        report = TestReport(passed=False, failures=records, raw_log="ignored")
        log = build_test_log(report)
        assert log.splitlines() == [f"assert f({i}) == {i}" for i in range(3)]
