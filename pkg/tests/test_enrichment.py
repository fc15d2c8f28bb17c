import pytest

from demopred.enrichment import (
    ENRICHMENT_HEADER,
    MPAA,
    MovieEnrichment,
    load_enrichment,
    merge_meta,
    mpaa_vector,
    synth_enrichment,
    write_enrichment,
)
from demopred.errors import ParseError, ValidationError
from demopred.ingest import MovieRecord, genre_vector

HEADER = ",".join(ENRICHMENT_HEADER) + "\n"


def movies(n):
    return [MovieRecord(i, f"m{i}", genre_vector(["Drama"])) for i in range(1, n + 1)]


def test_row_maps_to_fields(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text(HEADER + "1,G,0,1,0,0,1\n2,nc-17,3,3,3,3,3\n")
    e = load_enrichment(p)
    assert e[1].mpaa == (1, 0, 0, 0, 0, 0) and e[1].parental == (0, 1, 0, 0, 1)
    assert e[2].mpaa == (0, 0, 0, 0, 1, 0) and e[2].mpaa_category == "NC-17"


@pytest.mark.parametrize(
    "row, message",
    [("1,PG,0,0,0,0,4", "outside"), ("1,XX,0,0,0,0,0", "MPAA"), ("1,PG,0,0,0,0", "fields"), ("0,PG,0,0,0,0,0", "positive")],
)
def test_bad_rows(tmp_path, row, message):
    p = tmp_path / "e.csv"
    p.write_text(HEADER + row + "\n")
    with pytest.raises(ParseError, match=message) as info:
        load_enrichment(p)
    assert info.value.lineno == 2


def test_duplicate_row(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text(HEADER + "1,G,0,0,0,0,0\n1,R,0,0,0,0,0\n")
    with pytest.raises(ParseError, match="duplicate"):
        load_enrichment(p)


def test_header_required(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("1,G,0,0,0,0,0\n")
    with pytest.raises(ParseError, match="header"):
        load_enrichment(p)


def test_exactly_one_mpaa_flag():
    with pytest.raises(ValidationError):
        MovieEnrichment(1, (1, 1, 0, 0, 0, 0), (0,) * 5)
    with pytest.raises(ValidationError):
        MovieEnrichment(1, (0,) * 6, (0,) * 5)


def test_missing_movie_defaults_to_unrated():
    enrich = {1: MovieEnrichment(1, mpaa_vector("R"), (1, 1, 1, 1, 1))}
    meta, coverage = merge_meta(movies(2), enrich)
    assert len(meta) == 2 and coverage == 0.5
    assert meta[1].mpaa[MPAA.index("UNRATED")] == 1 and meta[1].parental == (0.0,) * 5


def test_full_coverage():
    ms = movies(3)
    _, coverage = merge_meta(ms, synth_enrichment(ms, 1))
    assert coverage == 1.0


def test_synth_is_deterministic_and_valid(tmp_path):
    ms = movies(150)
    a, b = synth_enrichment(ms, 7), synth_enrichment(ms, 7)
    assert a == b
    assert synth_enrichment(ms, 8) != a
    for e in a.values():
        assert sum(e.mpaa) == 1 and all(0 <= p <= 3 for p in e.parental)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_enrichment(a, p1)
    write_enrichment(b, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert load_enrichment(p1) == a


def test_synth_row_independent_of_other_movies():
    ms = movies(20)
    assert synth_enrichment(ms, 3)[5] == synth_enrichment(ms[4:6], 3)[5]


def test_synth_rejects_negative_seed():
    with pytest.raises(ValidationError):
        synth_enrichment(movies(1), -1)


def test_meta_invariants(synth):
    _, meta = synth
    for m in meta:
        v = m.vector()
        assert v.shape == (29,)
        assert sum(m.mpaa) == 1 and all(0 <= p <= 3 for p in m.parental)
