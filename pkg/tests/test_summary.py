from __future__ import annotations

import pytest

from config.constants import PROMPT_LEARNING, PROMPT_SIMULATION
from datasources import assets
from domain.errors import SchemaError
from services import summary_service
from tests.conftest import make_user


def test_summary_is_capped_and_lists_recent_posts_newest_first():
    user = make_user("a", texts=["first post", "second post", "third post", "fourth post"], followers_count=12)
    text = summary_service.summarize_user(user, top_k=2)
    assert "Followers: 12." in text
    assert text.index("fourth post") < text.index("third post")
    assert "second post" not in text
    assert len(summary_service.summarize_user(user, cap=40)) <= 40


def test_counts_fall_back_to_neighbors_and_tweets():
    user = make_user("a", texts=["x", "y"])
    text = summary_service.summarize_user(user, [make_user("b"), make_user("c")])
    assert "Followers: 2." in text and "Tweets: 2." in text


def test_neighbor_summary_limits_lines():
    nbs = [make_user(f"n{i}") for i in range(8)]
    lines = summary_service.summarize_neighbors(nbs, limit=3).splitlines()
    assert len(lines) == 3 and all(line.startswith("- Name: n") for line in lines)
    assert summary_service.summarize_neighbors([]) == ""


def test_user_context_reads_both_directions(two_user_dataset):
    s_v, s_n = summary_service.user_context(two_user_dataset, "a")
    assert s_v.startswith("Name: a.")
    assert "Name: b." in s_n


def test_endpoint_summarizer_sends_the_summarization_prompt():
    seen = []

    def fake(prompt):
        seen.append(prompt)
        return "  a friendly   gardener  "

    out = summary_service.EndpointSummarizer(fake).summarize(make_user("a", texts=["tomatoes"]))
    assert out == "a friendly gardener"
    assert "Name: a" in seen[0] and "tomatoes" in seen[0]


def test_learning_prompt_embeds_both_summaries():
    prompt = summary_service.learning_prompt("I like tea", "- Name: b.")
    assert "I like tea" in prompt and "- Name: b." in prompt


def test_render_requires_every_placeholder():
    assert "agent_name" in assets.template_fields(PROMPT_SIMULATION)
    with pytest.raises(SchemaError):
        assets.render_template(PROMPT_LEARNING, user_summary="only one")


def test_unknown_template_name():
    with pytest.raises(SchemaError):
        assets.load_template("poetry")
