import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from milnor.homotopy_tables import (
    POINT,
    TRIVIAL,
    UNKNOWN,
    AbGroupToken,
    Opaque,
    PiTable,
    PointSet,
    Q,
    Z,
    ZmodN,
    bg_table,
    catalog_tables,
    parse_token,
    pi_bg,
    verify_les,
)


def test_token_parsing_and_printing():
    assert parse_token("0") is TRIVIAL and parse_token("1") == TRIVIAL
    assert parse_token("Z") == Z() and parse_token("Z^2") == Z(2) == parse_token("Z2")
    assert parse_token("Z/2") == ZmodN(2) and parse_token("Z/1") == TRIVIAL
    assert parse_token("Q") == Q and parse_token("?") == UNKNOWN and parse_token("pt") == POINT
    assert parse_token("PointSet(K,3)") == PointSet("K", 3)
    assert parse_token("pi_0(Diff)") == Opaque("pi_0(Diff)")
    assert Z(0) == TRIVIAL
    for text in ("0", "Z", "Z^3", "Z/5", "Q", "?", "pt", "pi_2(PDO)"):
        assert str(parse_token(text)) == text
    assert not UNKNOWN.known and not Opaque("x").concrete and Z(2).concrete
    with pytest.raises(ValueError):
        Z(-1)
    with pytest.raises(ValueError):
        ZmodN(0)


@settings(max_examples=100)
@given(st.sampled_from(["Z", "Q", "Z/", "0"]), st.integers(1, 9))
def test_token_round_trip(kind, n):
    tok = {"Z": Z(n), "Q": Q, "Z/": ZmodN(n), "0": TRIVIAL}[kind]
    assert parse_token(str(tok)) == tok


def test_pi_bg_examples():
    t = catalog_tables()
    assert pi_bg(t["T_alpha"], 2) == Z(2)
    assert pi_bg(t["T_alpha"], 1) == TRIVIAL
    assert pi_bg(t["T_alpha"], 0) == POINT
    assert pi_bg(t["U1"], 2) == Z()
    assert pi_bg(t["SO3"], 2) == ZmodN(2) and pi_bg(t["SO3"], 4) == Z()
    assert pi_bg(t["Q"], 1) == Q
    with pytest.raises(KeyError):
        pi_bg(t["SO3"], 5)
    with pytest.raises(ValueError):
        pi_bg(t["U1"], -1)
    # a group with several components has nontrivial pi_1(BG)
    disc = PiTable("Z/2", {0: "PointSet(Z2,2)", 1: "0"}, 1)
    assert pi_bg(disc, 1) == PointSet("Z2", 2)


def test_bg_table_shifts():
    t = catalog_tables()["U1"]
    b = bg_table(t)
    assert b.bound == t.bound + 1
    assert [b[k] for k in range(4)] == [POINT, TRIVIAL, Z(), TRIVIAL]
    bb = bg_table(b)
    assert bb[3] == Z() and bb[2] == TRIVIAL


def test_table_json_round_trip():
    t = PiTable.from_json("X", {"0": "pt", "1": "Z/3", "bound": 3})
    assert t[2] == UNKNOWN and t.bound == 3
    assert PiTable.from_json("X", t.to_json()).entries == t.entries


def test_real_mod_rational_ladder():
    t = catalog_tables()
    rep = verify_les(t["Q"], t["R"], t["R/Q"], 6)
    assert rep.status == "exact"
    assert rep.violations == [] and rep.constraints == []
    assert rep.deductions["pi_1(BR/Q)"] == "0"
    assert rep.deductions["pi_2(BR/Q)"] == "Q"
    for k in range(3, 7):
        assert rep.deductions[f"pi_{k}(BR/Q)"] == "0"


def test_all_trivial_tables_are_exact():
    t = PiTable("A", {k: "0" if k else "pt" for k in range(5)}, 4)
    for bound in range(1, 5):
        rep = verify_les(t, t, t, bound)
        assert rep.status == "exact" and not rep.deductions


def test_compatible_circle_extension():
    # 1 -> Z -> R -> U1 -> 1
    t = catalog_tables()
    # pi_0 of a discrete group is the group itself, so pi_1(BZ) = Z
    Zt = PiTable("Z", {0: "Z", 1: "0", 2: "0", 3: "0"}, 3)
    rep = verify_les(Zt, t["R"], t["U1"], 3)
    assert rep.status == "exact"
    wrong = PiTable("Z/2", {0: "Z/2", 1: "0", 2: "0", 3: "0"}, 3)
    assert verify_les(wrong, t["R"], t["U1"], 3).status == "violated"


VIOLATIONS = [
    # (sub, total, quotient) pi_k tables; each breaks exactness somewhere
    ({0: "pt", 1: "0"}, {0: "pt", 1: "Z"}, {0: "pt", 1: "0"}),
    ({0: "pt", 1: "Z"}, {0: "pt", 1: "0"}, {0: "pt", 1: "0"}),
    ({0: "pt", 1: "0"}, {0: "pt", 1: "0"}, {0: "pt", 1: "Z/2"}),
    ({0: "pt", 1: "0", 2: "Z"}, {0: "pt", 1: "0", 2: "0"}, {0: "pt", 1: "0", 2: "0"}),
    ({0: "pt", 1: "0"}, {0: "pt", 1: "Z"}, {0: "pt", 1: "Z^2"}),
    ({0: "pt", 1: "Z/2"}, {0: "pt", 1: "Z/3"}, {0: "pt", 1: "0"}),
    ({0: "pt", 1: "0", 2: "0"}, {0: "pt", 1: "0", 2: "Q"}, {0: "pt", 1: "0", 2: "0"}),
    ({0: "pt", 1: "0", 2: "0"}, {0: "pt", 1: "0", 2: "Z"}, {0: "pt", 1: "0", 2: "Q"}),
    ({0: "Q", 1: "0"}, {0: "pt", 1: "0"}, {0: "pt", 1: "0"}),
    ({0: "pt", 1: "Z^2"}, {0: "pt", 1: "Z"}, {0: "pt", 1: "0"}),
]


@pytest.mark.parametrize("sub,total,quot", VIOLATIONS)
def test_hand_built_violations_are_caught(sub, total, quot):
    # pad with one trivial level so the term above the window is known
    bound = max(sub) + 1
    tabs = [PiTable(n, {**t, bound: "0"}, bound) for n, t in zip("ABC", (sub, total, quot))]
    rep = verify_les(*tabs, bound)
    assert rep.status == "violated" and rep.violations


def test_opaque_groups_give_constraints():
    pdo = PiTable("PDO", {0: "pi_0(PDO)", 1: "pi_1(PDO)", 2: "pi_2(PDO)"}, 2)
    fio = PiTable("FIO", {0: "pi_0(FIO)", 1: "pi_1(FIO)", 2: "pi_2(FIO)"}, 2)
    diff = PiTable("Diff", {0: "pt"}, 2)
    rep = verify_les(pdo, fio, diff, 3)
    assert rep.status == "undetermined"
    assert rep.constraints and not rep.violations
    # an opaque group squeezed between zeros must vanish, but that is not a contradiction
    a = PiTable("A", {0: "pt", 1: "G"}, 1)
    triv = PiTable("B", {0: "pt", 1: "0", 2: "0"}, 2)
    rep = verify_les(a, triv, triv, 2)
    assert rep.status == "undetermined"
    assert any("must vanish" in c for c in rep.constraints)


def test_stretch_above_bound_is_reported():
    t = catalog_tables()
    rep = verify_les(t["U1"], t["U1"], t["U1"], 1)
    assert rep.status in ("undetermined", "violated")
    with pytest.raises(ValueError):
        verify_les(t["U1"], t["U1"], t["U1"], 0)


def test_report_json_shape():
    t = catalog_tables()
    doc = verify_les(t["Q"], t["R"], t["R/Q"], 2).to_json()
    assert set(doc) == {"status", "terms", "violations", "deductions", "constraints"}
    assert doc["terms"][0] == ["pi_2(BQ)", "0"]
    assert isinstance(AbGroupToken("Z", rank=1), AbGroupToken)
