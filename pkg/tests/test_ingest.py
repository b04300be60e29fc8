import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mpguard.core import InvalidArgument
from mpguard.ingest import (
    IngestError,
    LabelIntervals,
    SchemaConfig,
    load_csv,
    runs_of_ones,
    split_train_test,
    write_csv,
)
from mpguard.preprocess import BOOLEAN, CONTINUOUS


def write(tmp_path, text, name="log.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_three_row_fixture(tmp_path):
    p = write(tmp_path, "Timestamp,LIT-101,P-101,Normal/Attack\n"
                        "t0,500.5,1,Normal\n t1 ,501.0,0, Attack \nt2,499.75,1,normal\n")
    ds = load_csv(p)
    assert ds.labels.per_step.tolist() == [0, 1, 0]
    assert ds.labels.intervals == ((1, 1),)
    assert ds.timestamps == ("t0", "t1", "t2")
    assert ds.features.names == ("LIT-101", "P-101")
    assert ds.features.kinds == (CONTINUOUS, BOOLEAN)
    assert ds.channel("LIT-101").values.tolist() == [500.5, 501.0, 499.75]


def test_numeric_labels_and_no_timestamp(tmp_path):
    p = write(tmp_path, "a,Normal/Attack\n1.5,0\n2.5,1\n3.5,1\n")
    ds = load_csv(p)
    assert ds.timestamps is None
    assert ds.labels.intervals == ((1, 2),)


def test_unknown_label_names_line_and_token(tmp_path):
    p = write(tmp_path, "a,Normal/Attack\n1,Normal\n2,A ttack\n")
    with pytest.raises(IngestError, match=r"line 3.*'A ttack'"):
        load_csv(p)


@pytest.mark.parametrize("row,pattern", [("1,2,Normal", "expected 2 fields"),
                                          ("abc,Normal", "cannot parse 'abc'"),
                                          ("nan,Normal", "non-finite"),
                                          ("inf,Normal", "non-finite")])
def test_bad_rows(tmp_path, row, pattern):
    p = write(tmp_path, f"a,Normal/Attack\n1,Normal\n{row}\n")
    with pytest.raises(IngestError, match=f"line 3.*{pattern}|{pattern}"):
        load_csv(p)


def test_missing_label_column_and_empty_file(tmp_path):
    with pytest.raises(IngestError, match="label column"):
        load_csv(write(tmp_path, "a,b\n1,2\n"))
    with pytest.raises(IngestError, match="empty"):
        load_csv(write(tmp_path, "", "empty.csv"))


def test_schema_file(tmp_path):
    schema_path = write(tmp_path, "# custom names\nlabel_column = state\nlabel_attack_token=BAD\n"
                                  "label_normal_token=ok\ntimestamp_column=when\n"
                                  "continuous_columns=flag\ndrop_columns=junk\n", "schema.txt")
    schema = SchemaConfig.from_file(schema_path)
    p = write(tmp_path, "when,flag,junk,state\nx,1,9,ok\ny,0,9,bad\n")
    ds = load_csv(p, schema)
    assert ds.features.names == ("flag",)
    assert ds.features.kinds == (CONTINUOUS,)
    assert ds.labels.per_step.tolist() == [0, 1]
    with pytest.raises(InvalidArgument, match="unknown schema key"):
        SchemaConfig.from_mapping({"colour": "x"})
    with pytest.raises(IngestError):
        SchemaConfig.from_file(write(tmp_path, "no equals sign\n", "bad.txt"))


def test_swat_shaped_fixture(tmp_path):
    rng = np.random.default_rng(0)
    names = [f"S{i}" for i in range(51)]
    lines = ["Timestamp," + ",".join(names) + ",Normal/Attack"]
    for r in range(1000):
        vals = [repr(float(v)) for v in rng.normal(size=26)] + [str(int(v)) for v in rng.integers(0, 2, 25)]
        lines.append(f"{r}," + ",".join(vals) + ("," + ("Attack" if 400 <= r < 450 else "Normal")))
    ds = load_csv(write(tmp_path, "\n".join(lines) + "\n"))
    assert ds.features.shape == (1000, 51)
    assert sum(k == BOOLEAN for k in ds.features.kinds) == 25
    assert ds.labels.intervals == ((400, 449),)


def test_write_then_load_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    p = write(tmp_path, "Timestamp,x,y,Normal/Attack\n" + "".join(
        f"{i},{rng.normal()!r},{i % 2},{'Attack' if i in (3, 4) else 'Normal'}\n" for i in range(10)))
    ds = load_csv(p)
    out = tmp_path / "copy.csv"
    write_csv(ds, out)
    again = load_csv(out)
    assert again.features.values.tobytes() == ds.features.values.tobytes()
    assert again.labels.per_step.tolist() == ds.labels.per_step.tolist()
    assert again.timestamps == ds.timestamps


@given(st.lists(st.integers(0, 1), max_size=200))
def test_intervals_per_step_round_trip(bits):
    li = LabelIntervals.from_per_step(bits)
    back = LabelIntervals.from_intervals(li.intervals, len(bits))
    assert back.per_step.tolist() == list(bits)
    ivs = list(li.intervals)
    assert ivs == sorted(ivs)
    assert all(a[1] + 1 < b[0] for a, b in zip(ivs, ivs[1:]))


def test_label_validation():
    with pytest.raises(InvalidArgument):
        LabelIntervals.from_per_step([0, 2])
    with pytest.raises(InvalidArgument):
        LabelIntervals.from_intervals([(3, 12)], 10)
    assert runs_of_ones([1, 1, 0, 1]) == [(0, 1), (3, 3)]


def _dataset(tmp_path, n=20):
    body = "".join(f"{i}.0,{'Attack' if i % 7 == 3 else 'Normal'}\n" for i in range(n))
    return load_csv(write(tmp_path, "v,Normal/Attack\n" + body))


def test_split_sizes_and_order(tmp_path):
    ds = _dataset(tmp_path)
    train, test = split_train_test(ds, 12)
    assert (len(train), len(test)) == (12, 8)
    joined = np.concatenate([train.features.values[:, 0], test.features.values[:, 0]])
    assert joined.tolist() == ds.features.values[:, 0].tolist()
    assert test.labels.per_step.tolist() == ds.labels.per_step[12:].tolist()


def test_split_normal_only(tmp_path):
    ds = _dataset(tmp_path)
    train, _ = split_train_test(ds, 15, normal_only=True)
    assert train.labels.per_step.sum() == 0
    assert len(train) == 13


@pytest.mark.parametrize("boundary", [-1, 21, 2.5])
def test_split_out_of_range(tmp_path, boundary):
    with pytest.raises(InvalidArgument):
        split_train_test(_dataset(tmp_path), boundary)
