import pytest

from prc_emo import Conversation, Corpus, Utterance

ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(name): marks a test as one acceptance criterion"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        name = marker.kwargs.get("name", item.name)
        if report.when == "call":
            ACCEPTANCE_RESULTS[name] = report.outcome
        elif report.when == "setup" and report.outcome == "skipped":
            ACCEPTANCE_RESULTS[name] = "skipped"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    words = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}
    for name, outcome in ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"[{words.get(outcome, outcome.upper())}] {name}")


def make_conversation(conv_id, turns, domain=None):
    """turns: sequence of (speaker, text, label-or-None)."""
    utterances = tuple(
        Utterance(index=i, speaker=s, text=t, label=lab)
        for i, (s, t, lab) in enumerate(turns)
    )
    return Conversation(id=conv_id, utterances=utterances, domain=domain)


def make_corpus(name, label_set, convs, split="none"):
    return Corpus(name=name, label_set=tuple(label_set), conversations=tuple(convs), split=split)


@pytest.fixture
def demo_corpus():
    """Three short labeled conversations over a three-label set."""
    c1 = make_conversation(
        "d1",
        [
            ("A", "I wonder if we can make it on time.", "sad"),
            ("B", "We have plenty of margin, relax.", "neutral"),
            ("A", "Okay, I feel a little better now.", "happy"),
        ],
    )
    c2 = make_conversation(
        "d2",
        [
            ("A", "The report is due tomorrow and I have not started.", "sad"),
            ("B", "You always pull it together in the end.", "happy"),
            ("A", "That does not make the deadline move.", "sad"),
            ("B", "Fine, I will help you tonight.", "neutral"),
        ],
    )
    c3 = make_conversation(
        "d3",
        [
            ("C", "Dinner was wonderful, thank you.", "happy"),
            ("D", "I am glad you liked it.", "happy"),
        ],
    )
    return make_corpus("demo", ("happy", "sad", "neutral"), [c1, c2, c3])
