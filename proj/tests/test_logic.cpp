#include "crm/clause.hpp"
#include "crm/errors.hpp"
#include "crm/facts.hpp"
#include "crm/parse.hpp"
#include "crm/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace crm;

TEST_CASE("terms print and order") {
    Term f = Term::cmp("f", {Term::var("X"), Term::cst("a")});
    CHECK(f.str() == "f(X,a)");
    Term tup = Term::tuple({Term::cst("1"), Term::cst("2"), Term::cst("3")});
    CHECK(tup.str() == "(1,2,3)");
    CHECK(Term::cst("a") < Term::cst("b"));
    CHECK(Term::var("X") == Term::var("X"));
    CHECK(!(Term::var("X") == Term::cst("X")));
    CHECK(f.is_ground() == false);
    CHECK(tup.is_ground());
}

TEST_CASE("term parsing round-trips") {
    CHECK(parse_term("f(X, g(a, Y))").str() == "f(X,g(a,Y))");
    CHECK(parse_term("(a, b, c)").str() == "(a,b,c)");
    CHECK(parse_term("42").is_ground());
    CHECK_THROWS_AS(parse_term("f(X"), ParseError);
    CHECK_THROWS_AS(parse_term(""), ParseError);
}

TEST_CASE("clause parsing") {
    OrderedClause c = parse_clause("p(X) :- has_car(X, Y), short(Y).");
    CHECK(c.head.predicate == "p");
    CHECK(c.body.size() == 2);
    CHECK(c.str() == "p(X) :- has_car(X,Y), short(Y).");

    OrderedClause facts_only = parse_clause("p(X)");
    CHECK(facts_only.body.empty());
    CHECK(facts_only.str() == "p(X).");

    // duplicate body literals are dropped at construction
    OrderedClause dedup = parse_clause("p(X) :- q(X), q(X)");
    CHECK(dedup.body.size() == 1);

    // the head predicate may not recur in the body
    CHECK_THROWS_AS(parse_clause("p(X) :- p(X)"), ParseError);
}

TEST_CASE("substitution application is simultaneous") {
    Substitution s;
    s.bind("X", Term::var("Y"));
    s.bind("Y", Term::cst("a"));
    Term r = s.apply(Term::cmp("f", {Term::var("X"), Term::var("Y")}));
    CHECK(r.str() == "f(Y,a)");
}

TEST_CASE("unification") {
    Substitution s;
    CHECK(unify(parse_term("f(X, b)"), parse_term("f(a, Y)"), s));
    CHECK(resolve(Term::var("X"), s).str() == "a");
    CHECK(resolve(Term::var("Y"), s).str() == "b");

    Substitution occ;
    CHECK_FALSE(unify(parse_term("X"), parse_term("f(X)"), occ));

    Substitution arity;
    CHECK_FALSE(unify(parse_term("(a, b)"), parse_term("(a, b, c)"), arity));

    Substitution chain;
    CHECK(unify(parse_term("X"), parse_term("Y"), chain));
    CHECK(unify(parse_term("Y"), parse_term("c"), chain));
    CHECK(resolve(Term::var("X"), chain).str() == "c");
}

TEST_CASE("theta subsumption") {
    OrderedClause gen = parse_clause("p(X) :- q(X, Y)");
    OrderedClause spe = parse_clause("p(A) :- q(A, B), r(B)");
    CHECK(theta_subsumes(gen, spe));
    CHECK_FALSE(theta_subsumes(spe, gen));
    CHECK(theta_subsumes(gen, gen));

    // head patterns must match head-onto-head
    OrderedClause pat = parse_clause("p((A, B, A))");
    OrderedClause wide = parse_clause("p((U, V, W))");
    CHECK(theta_subsumes(wide, pat));
    CHECK_FALSE(theta_subsumes(pat, wide));
}

TEST_CASE("equality normalization") {
    auto n = equality_normalize(parse_clause("p(X) :- X = Y, q(Y)"));
    REQUIRE(n.has_value());
    CHECK(equivalent(*n, parse_clause("p(X) :- q(X)")));

    // contradictory constants make the clause unsatisfiable
    CHECK_FALSE(equality_normalize(parse_clause("p(X) :- a = b")).has_value());

    // trivially true ground equality just disappears
    auto triv = equality_normalize(parse_clause("p(X) :- a = a, q(X)"));
    REQUIRE(triv.has_value());
    CHECK(*triv == parse_clause("p(X) :- q(X)"));
}

TEST_CASE("clause reduction and equivalence") {
    OrderedClause c = parse_clause("p(X) :- q(X, Y)");
    OrderedClause doubled = parse_clause("p(X) :- q(X, Y), q(X, Z)");
    CHECK(reduce_clause(doubled).body.size() == 1);
    CHECK(equivalent(c, doubled));
    CHECK(equivalence_key(c) == equivalence_key(doubled));

    OrderedClause other = parse_clause("p(X) :- q(X, Y), r(Y)");
    CHECK_FALSE(equivalent(c, other));

    // equality-linked variants collapse to the same key
    OrderedClause eq_form = parse_clause("p(X) :- q(X, Y), Y = Z, r(Z)");
    CHECK(equivalent(eq_form, other));
    CHECK(equivalence_key(eq_form) == equivalence_key(other));

    // two unsatisfiable clauses are equivalent
    CHECK(equivalent(parse_clause("p(X) :- a = b"), parse_clause("p(X) :- c = d, q(X)")));
}

TEST_CASE("canonical renaming and variants") {
    OrderedClause c = parse_clause("p(Foo) :- q(Foo, Bar), r(Bar, Baz)");
    CHECK(canonical_rename(c).str() == "p(A) :- q(A,B), r(B,C).");

    CHECK(is_variant(c, canonical_rename(c)));
    // variants are order-sensitive
    OrderedClause swapped = parse_clause("p(X) :- r(Y, Z), q(X, Y)");
    CHECK_FALSE(is_variant(c, swapped));
    // shape keys ignore literal order
    CHECK(clause_shape_key(canonical_rename(c)) == clause_shape_key(canonical_rename(swapped)));
}

TEST_CASE("standardize apart keeps requested variables") {
    OrderedClause c = parse_clause("p(X) :- q(X, Y), r(Y, Z)");
    std::vector<std::string> keep{"X"};
    std::set<std::string> avoid{"Y", "Z", "X"};
    OrderedClause r = standardize_apart(c, keep, avoid);
    CHECK(r.head.str() == "p(X)");
    auto vars = r.vars();
    for (const std::string& v : vars)
        if (v != "X") CHECK(avoid.count(v) == 0);
}

TEST_CASE("fact store sections and lookup") {
    FactStore store = FactStore::from_string(
        "adj(1, 2).\n"
        "adj(2, 1).\n"
        "#instance t1\n"
        "has_car(t1, c1).\n"
        "short(c1).\n"
        "#instance t2\n"
        "has_car(t2, c2).\n");
    CHECK(store.knows_predicate("adj", 2));
    CHECK(store.knows_predicate("short", 1));
    CHECK_FALSE(store.knows_predicate("closed", 1));

    auto cand = store.candidates("has_car", 2, "t1");
    REQUIRE(cand.size() == 1);
    CHECK(cand[0]->str() == "has_car(t1,c1)");

    // global facts come first and are visible everywhere
    CHECK(store.candidates("adj", 2, "t2").size() == 2);
    CHECK(store.has_fact(Literal("adj", {Term::cst("1"), Term::cst("2")}), "t2"));
    CHECK_FALSE(store.has_fact(Literal("adj", {Term::cst("1"), Term::cst("3")}), "t2"));

    FactStore bad;
    CHECK_THROWS_AS(bad.add_global(Literal("q", {Term::var("X")})), DataError);
}

TEST_CASE("fact store round-trips through text") {
    std::string text =
        "adj(1, 2).\n"
        "#instance t1\n"
        "has_car(t1, c1).\n"
        "short(c1).\n";
    FactStore store = FactStore::from_string(text);
    Dataset data{Instance(Term::cst("t1"), "+")};
    CHECK(FactStore::from_string(store.str(data)).str(data) == store.str(data));
}

TEST_CASE("dataset io") {
    Dataset d = dataset_from_string("t1\t+\nt2\t-\t+\n(1, 2)\t+\n");
    REQUIRE(d.size() == 3);
    CHECK(d[0].id.str() == "t1");
    CHECK(d[0].label == "+");
    CHECK(d[0].target == "+");
    CHECK(d[1].label == "-");
    CHECK(d[1].target == "+");
    CHECK(d[2].id.str() == "(1,2)");
    CHECK(dataset_from_string(dataset_str(d)).size() == 3);
}

TEST_CASE("feature evaluation") {
    FactStore store = FactStore::from_string(
        "#instance t1\n"
        "has_car(t1, c1).\n"
        "has_car(t1, c2).\n"
        "short(c1).\n"
        "closed(c1).\n"
        "#instance t2\n"
        "has_car(t2, c3).\n"
        "short(c3).\n");
    OrderedClause f = parse_clause("p(X) :- has_car(X, Y), short(Y), closed(Y)");
    CHECK(evaluate_feature(f, store, Term::cst("t1")));
    CHECK_FALSE(evaluate_feature(f, store, Term::cst("t2")));

    // equality literal binds a still-free variable
    OrderedClause eq = parse_clause("p(X) :- has_car(X, Y), Y = c1");
    CHECK(evaluate_feature(eq, store, Term::cst("t1")));
    CHECK_FALSE(evaluate_feature(eq, store, Term::cst("t2")));

    OrderedClause unknown = parse_clause("p(X) :- wheels(X, W)");
    CHECK_THROWS_AS(evaluate_feature(unknown, store, Term::cst("t1")), DataError);
}

TEST_CASE("feature evaluation with head patterns") {
    FactStore store = FactStore::from_string("adj(1, 2).\nadj(2, 2).\n");
    store.declare_predicate("adj", 2);
    OrderedClause same = parse_clause("p((A, B, A))");
    CHECK(evaluate_feature(same, store, parse_term("(1, 2, 1)")));
    CHECK_FALSE(evaluate_feature(same, store, parse_term("(1, 2, 3)")));

    OrderedClause mix = parse_clause("p((A, B)) :- adj(A, B)");
    CHECK(evaluate_feature(mix, store, parse_term("(1, 2)")));
    CHECK_FALSE(evaluate_feature(mix, store, parse_term("(2, 1)")));
}

TEST_CASE("rng determinism") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng c(42);
    Rng forked = c.fork(7);
    Rng again = Rng(42).fork(7);
    CHECK(forked.next_u64() == again.next_u64());
    CHECK(Rng(42).fork(7).next_u64() != Rng(42).fork(8).next_u64());

    Rng d(1);
    for (int i = 0; i < 1000; ++i) {
        CHECK(d.below(10) < 10);
        double u = d.unit();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }

    std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<int> w = v;
    Rng s1(9), s2(9);
    s1.shuffle(v);
    s2.shuffle(w);
    CHECK(v == w);
}
