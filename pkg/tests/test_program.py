import pytest

from xnm.errors import ProgramTypeError, UnknownTokenError
from xnm.parser import parse
from xnm.program import chain_depth, post_order, program_size, split_compare_token, validate


def test_post_order_puts_children_first():
    p = parse("compare[greater](count(filter[red](scene())),count(scene()))")
    assert [n.module for n in post_order(p)] == ["scene", "filter", "count", "scene", "count", "compare"]
    assert program_size(p) == 6


def test_chain_depth_counts_set_modules_on_the_longest_path():
    assert chain_depth(parse("count(scene())")) == 0
    assert chain_depth(parse("count(filter[red](filter[cube](scene())))")) == 2
    p = parse("exist(union(filter[red](scene()),relate[left](unique(filter[cube](filter[small](scene()))))))")
    assert chain_depth(p) == 4


def test_split_compare_token():
    assert split_compare_token("eq_attr:color") == ("eq_attr", "color")
    assert split_compare_token("greater") == ("greater", None)


@pytest.mark.parametrize(
    "text",
    [
        "count(filter[red](scene()))",
        "exist(relate[behind](unique(filter[sphere](scene()))))",
        "count(same[material](unique(filter[cube](scene()))))",
        "compare[less](count(scene()),count(filter[metal](scene())))",
        "compare[eq_attr:shape](describe[shape](unique(scene())),describe[shape](unique(scene())))",
    ],
)
def test_valid_programs(text, vocab):
    assert validate(parse(text), vocab) is not None


@pytest.mark.parametrize(
    "text, error",
    [
        ("count(filter[left](scene()))", UnknownTokenError),
        ("count(filter[pink](scene()))", UnknownTokenError),
        ("count(relate[red](scene()))", UnknownTokenError),
        ("describe[red](unique(scene()))", UnknownTokenError),
        ("compare[between](count(scene()),count(scene()))", UnknownTokenError),
        ("compare[eq_attr:weight](count(scene()),count(scene()))", UnknownTokenError),
        ("compare[greater](describe[color](scene()),count(scene()))", ProgramTypeError),
        ("compare[eq_attr:color](describe[shape](scene()),describe[shape](scene()))", ProgramTypeError),
    ],
)
def test_invalid_tokens(text, error, vocab):
    with pytest.raises(error):
        validate(parse(text), vocab)


def test_token_errors_point_at_the_node(vocab):
    with pytest.raises(UnknownTokenError) as info:
        validate(parse("count(filter[left](scene()))"), vocab)
    assert info.value.span == (6, 27)
