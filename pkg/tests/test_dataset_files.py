from __future__ import annotations

import json
from pathlib import Path

import pytest

from datasources.dataset_files import EDGES_FILE, TWEETS_FILE, USERS_FILE, load_dataset_dir, save_dataset
from domain.corpus import Dataset
from domain.errors import DatasetParseError, ReferentialIntegrityError, SchemaError
from tests.conftest import follow, make_user


def _write(dir_: Path, users, tweets, edges_csv: str) -> Path:
    (dir_ / USERS_FILE).write_text("\n".join(json.dumps(u) for u in users) + "\n", encoding="utf-8")
    (dir_ / TWEETS_FILE).write_text("\n".join(json.dumps(t) for t in tweets) + "\n", encoding="utf-8")
    (dir_ / EDGES_FILE).write_text(edges_csv, encoding="utf-8")
    return dir_


def _users():
    return [
        {"id": "a", "label": "human", "numeric_props": {"followers_count": 3}, "categorical_props": {"verified": "true"}},
        {"id": "b", "label": "bot"},
    ]


def test_load_sorts_tweets_and_drops_self_loops(tmp_path):
    tweets = [
        {"user_id": "a", "timestamp": "2022-01-02T00:00:00+00:00", "text": "second"},
        {"user_id": "a", "timestamp": "2022-01-01T00:00:00+00:00", "text": "first"},
    ]
    _write(tmp_path, _users(), tweets, "src,dst,relation\na,b,follow\na,a,follow\na,b,follow\n")
    ds = load_dataset_dir(str(tmp_path))
    assert [t.text for t in ds.user("a").tweets] == ["first", "second"]
    assert [e.to_tuple() for e in ds.edges] == [("a", "b", "follow")]
    assert ds.user("a").numeric_props["followers_count"] == 3.0


def test_unknown_label_reports_line(tmp_path):
    users = _users() + [{"id": "c", "label": "cyborg"}]
    _write(tmp_path, users, [], "src,dst,relation\n")
    with pytest.raises(DatasetParseError) as err:
        load_dataset_dir(str(tmp_path))
    assert err.value.line == 3


def test_edge_to_unknown_user(tmp_path):
    _write(tmp_path, _users(), [], "src,dst,relation\na,zz,follow\n")
    with pytest.raises(ReferentialIntegrityError) as err:
        load_dataset_dir(str(tmp_path))
    assert err.value.offending_id == "zz"


def test_unknown_relation(tmp_path):
    _write(tmp_path, _users(), [], "src,dst,relation\na,b,blocks\n")
    with pytest.raises(DatasetParseError):
        load_dataset_dir(str(tmp_path))


def test_bad_timestamp(tmp_path):
    _write(tmp_path, _users(), [{"user_id": "a", "timestamp": "yesterday", "text": "x"}], "src,dst,relation\n")
    with pytest.raises(DatasetParseError):
        load_dataset_dir(str(tmp_path))


def test_partial_community_tags(tmp_path):
    users = _users()
    users[0]["community_id"] = 0
    _write(tmp_path, users, [], "src,dst,relation\n")
    with pytest.raises(SchemaError):
        load_dataset_dir(str(tmp_path))


def test_save_then_load_preserves_structure(tmp_path):
    users = [make_user("a", texts=["hi there"], followers_count=2), make_user("b", "bot", texts=["buy now", "buy again"])]
    ds = Dataset(users=users, edges=follow([("a", "b")]))
    save_dataset(ds, str(tmp_path))
    back = load_dataset_dir(str(tmp_path))
    assert back.structure_equals(ds)


def test_save_is_byte_stable(tmp_path, tiny_dataset):
    save_dataset(tiny_dataset, str(tmp_path / "one"))
    save_dataset(tiny_dataset, str(tmp_path / "two"))
    for name in (USERS_FILE, TWEETS_FILE, EDGES_FILE):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()
