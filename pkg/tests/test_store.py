import numpy as np
from pytest import raises

from conftest import write_lines
from modules.errors import DataValidationError, ParseError
from modules.kg.store import KnowledgeGraph, load_kg


def test_load_kg_interns_tokens_in_order(tmp_path):
    triples = write_lines(tmp_path / "kg.tsv", ["m1\tgenre\tdrama", "m2\tgenre\tdrama", "drama\tsub\tfilm"])
    items = write_lines(tmp_path / "items.tsv", ["i1\tm1", "i2\tm2"])
    kg = load_kg(triples, items)

    assert kg.entity_tokens == ("m1", "drama", "m2", "film")
    assert kg.relation_tokens == ("genre", "sub")
    assert kg.item_tokens == ("i1", "i2")
    assert kg.item_entities.tolist() == [0, 2]
    assert kg.edge_count == 3
    assert kg.degree(1) == 3
    assert sorted(kg.neighbors_of(1)) == [(0, 0), (2, 0), (3, 1)]


def test_reverse_triple_keeps_first_relation(tmp_path):
    triples = write_lines(tmp_path / "kg.tsv", ["a\tr1\tb", "b\tr2\ta", "a\tr1\ta"])
    items = write_lines(tmp_path / "items.tsv", ["i\ta"])
    kg = load_kg(triples, items)

    assert kg.edge_count == 1
    assert kg.neighbors_of(0) == [(1, 0)]
    assert kg.neighbors_of(1) == [(0, 0)]


def test_relations_of_dropped_triples_are_not_counted(tmp_path):
    triples = write_lines(tmp_path / "kg.tsv", ["0\tr0\t1", "1\tr1\t0", "0\tr2\t2", "2\tr3\t2"])
    items = write_lines(tmp_path / "items.tsv", ["i0\t0"])
    kg = load_kg(triples, items)

    assert kg.edges.tolist() == [[0, 1, 0], [0, 2, 1]]
    assert kg.relation_count == 2
    assert kg.relation_tokens == ("r0", "r2")


def test_adjacency_is_symmetric(toy_kg):
    for entity in range(toy_kg.entity_count):
        for neighbor, relation in toy_kg.neighbors_of(entity):
            assert (entity, relation) in toy_kg.neighbors_of(neighbor)
    assert toy_kg.degrees().sum() == 2 * toy_kg.edge_count


def test_ambiguous_item_is_excluded(tmp_path):
    triples = write_lines(tmp_path / "kg.tsv", ["a\tr\tb", "b\tr\tc"])
    items = write_lines(tmp_path / "items.tsv", ["i1\ta", "i1\tc", "i2\tb"])
    kg = load_kg(triples, items)

    assert kg.item_tokens == ("i2",)
    assert kg.item_index() == {"i2": 0}


def test_unknown_item_entity_is_an_error(tmp_path):
    triples = write_lines(tmp_path / "kg.tsv", ["a\tr\tb"])
    items = write_lines(tmp_path / "items.tsv", ["i1\ta", "i2\tzzz"])
    with raises(DataValidationError, match="zzz"):
        load_kg(triples, items)


def test_empty_triples_gives_isolated_items(tmp_path):
    triples = write_lines(tmp_path / "kg.tsv", [])
    items = write_lines(tmp_path / "items.tsv", ["i1\ta", "i2\tb"])
    kg = load_kg(triples, items)

    assert kg.entity_count == 2
    assert kg.edge_count == 0
    assert kg.degrees().tolist() == [0, 0]
    assert kg.stats()["isolated_entities"] == 2


def test_parse_error_reports_line(tmp_path):
    triples = write_lines(tmp_path / "kg.tsv", ["a\tr\tb", "", "a\tr"])
    items = write_lines(tmp_path / "items.tsv", ["i\ta"])
    with raises(ParseError) as error:
        load_kg(triples, items)
    assert error.value.line == 3


def test_missing_file(tmp_path):
    with raises(FileNotFoundError):
        load_kg(str(tmp_path / "nope.tsv"), str(tmp_path / "items.tsv"))


def test_from_edges_validation():
    with raises(DataValidationError):
        KnowledgeGraph.from_edges(3, [(0, 5, 0)], item_entities=[0])
    with raises(DataValidationError):
        KnowledgeGraph.from_edges(3, [(0, 1, 0)], item_entities=[0, 0])


def test_graph_is_read_only(toy_kg):
    with raises(ValueError):
        toy_kg.neighbors[0] = 3


def test_stats(toy_kg):
    stats = toy_kg.stats()
    assert stats == {
        "entities": 10,
        "items": 4,
        "relations": 3,
        "edges": 11,
        "isolated_entities": 0,
        "max_degree": int(np.max(toy_kg.degrees())),
    }
