#include "crm/depgraph.hpp"
#include "crm/errors.hpp"
#include "crm/rho.hpp"

#include "testutil.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace crm;

namespace {

std::pair<ModeSet, TypeDefs> trains() {
    return parse_modes(
        "modeh(p(+train)).\n"
        "modeb(has_car(+train, -car)).\n"
        "modeb(short(+car)).\n"
        "modeb(closed(+car)).\n"
        "modeb(smaller(+car, +car)).\n"
        "type(train, [t1, t2]).\n"
        "type(car, [c1, c2, c3]).\n");
}

} // namespace

TEST_CASE("clause dependency graph") {
    auto [m, t] = trains();
    OrderedClause c =
        parse_clause("p(X) :- has_car(X, Y), has_car(X, Z), short(Y), closed(Z)");
    ClauseDependencyGraph g = build_dependency_graph(c, m, t);
    REQUIRE(g.size() == 5);
    // vertex 0 is the head; the two has_car literals feed short and closed
    CHECK(g.out[0] == std::set<std::size_t>{1, 2});
    CHECK(g.out[1] == std::set<std::size_t>{3});
    CHECK(g.out[2] == std::set<std::size_t>{4});
    CHECK(g.out[3].empty());
    CHECK(g.out[4].empty());
    CHECK(g.sources() == std::vector<std::size_t>{0});
    CHECK(g.sinks() == std::vector<std::size_t>{3, 4});

    CHECK_THROWS_AS(build_dependency_graph(parse_clause("p(X) :- wheels(X, W)"), m, t),
                    DataError);
}

TEST_CASE("induced rooted dags") {
    auto [m, t] = trains();
    OrderedClause c =
        parse_clause("p(X) :- has_car(X, Y), has_car(X, Z), short(Y), closed(Z)");
    ClauseDependencyGraph g = build_dependency_graph(c, m, t);
    InducedDag d = dag_to(g, 3);
    CHECK(d.vertices == std::set<std::size_t>{0, 1, 3});
    CHECK(d.edges == std::set<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 3}});
}

TEST_CASE("m-simplicity and basis") {
    auto [m, t] = trains();
    OrderedClause c =
        parse_clause("p(X) :- has_car(X, Y), has_car(X, Z), short(Y), closed(Z)");
    CHECK_FALSE(is_m_simple(c, m, t));
    CHECK(is_m_simple(parse_clause("p(X) :- has_car(X, Y), short(Y)"), m, t));
    CHECK(is_m_simple(parse_clause("p(X)"), m, t));

    std::vector<OrderedClause> b = basis(c, m, t);
    REQUIRE(b.size() == 2);
    CHECK(b[0] == parse_clause("p(X) :- has_car(X, Y), short(Y)"));
    CHECK(b[1] == parse_clause("p(X) :- has_car(X, Z), closed(Z)"));

    // an m-simple clause is its own basis
    std::vector<OrderedClause> own = basis(b[0], m, t);
    REQUIRE(own.size() == 1);
    CHECK(own[0] == b[0]);
}

TEST_CASE("rho1 appends one equality per unlinked output pair") {
    auto [m, t] = trains();
    OrderedClause c1 = parse_clause("p(X) :- has_car(X, U), has_car(X, V), smaller(U, V)");
    std::vector<OrderedClause> kids = rho1(c1, m, t);
    REQUIRE(kids.size() == 1);
    CHECK(kids[0] ==
          parse_clause("p(X) :- has_car(X, U), has_car(X, V), smaller(U, V), U = V"));

    // already-linked pairs are skipped, including transitively
    std::vector<OrderedClause> grand = rho1(kids[0], m, t);
    CHECK(grand.empty());

    // no output pair, no children
    CHECK(rho1(parse_clause("p(X) :- has_car(X, Y), short(Y)"), m, t).empty());

    OrderedClause three =
        parse_clause("p(X) :- has_car(X, A), has_car(X, B), has_car(X, C), A = B");
    std::vector<OrderedClause> more = rho1(three, m, t);
    // pairs (A,C) and (B,C) remain; (A,B) is already linked
    CHECK(more.size() == 2);
}

TEST_CASE("rho2 concatenates bodies under aligned heads") {
    auto [m, t] = trains();
    OrderedClause a = parse_clause("p(X) :- has_car(X, Y), short(Y)");
    OrderedClause b = parse_clause("p(W) :- has_car(W, Z), closed(Z)");
    OrderedClause ab = rho2(a, b);
    CHECK(ab == parse_clause("p(X) :- has_car(X, Y), short(Y), has_car(X, Z), closed(Z)"));

    // colliding non-head variables on the right are renamed
    OrderedClause b2 = parse_clause("p(X) :- has_car(X, Y), closed(Y)");
    OrderedClause ab2 = rho2(a, b2);
    CHECK(ab2.body.size() == 4);
    CHECK(equivalent(ab2, ab));

    // composing a clause with itself collapses to the clause
    CHECK(equivalent(rho2(a, a), a));

    CHECK_THROWS_AS(rho2(a, parse_clause("q(X) :- has_car(X, Y)")), DataError);
    CHECK_THROWS_AS(rho2(parse_clause("p((A, B, A))"), parse_clause("p((A, B, C))")),
                    DataError);
}

TEST_CASE("derivations verify and print") {
    auto [m, t] = trains();
    OrderedClause c1 = parse_clause("p(X) :- has_car(X, U), has_car(X, V), smaller(U, V)");
    OrderedClause c2 = parse_clause("p(X) :- has_car(X, Y), short(Y)");
    std::vector<OrderedClause> phi{c1, c2};

    std::vector<DerivationStep> steps;
    steps.push_back(DerivationStep::given(c1));
    steps.push_back(DerivationStep::by_rho1(rho1(c1, m, t)[0], 0, "U", "V"));
    steps.push_back(DerivationStep::given(c2));
    std::vector<Literal> body = steps[1].clause.body;
    for (const Literal& l : c2.body) body.push_back(l);
    steps.push_back(DerivationStep::by_rho2(OrderedClause(c1.head, body), 1, 2));
    OrderedClause last = parse_clause(
        "p(X) :- has_car(X, U), has_car(X, V), smaller(U, V), U = V, has_car(X, Y), "
        "short(Y), U = Y");
    steps.push_back(DerivationStep::by_rho1(last, 3, "U", "Y"));

    CHECK(verify_derivation(steps, phi, Omega{}, m, t));
    CHECK_FALSE(is_linear(steps)); // rho1 precedes the rho2 chain

    CHECK(transcript_str(steps) ==
          "1\tp(X) :- has_car(X,U), has_car(X,V), smaller(U,V).\tGiven\n"
          "2\tp(X) :- has_car(X,U), has_car(X,V), smaller(U,V), U=V.\t1, rho1, U, V\n"
          "3\tp(X) :- has_car(X,Y), short(Y).\tGiven\n"
          "4\tp(X) :- has_car(X,U), has_car(X,V), smaller(U,V), U=V, has_car(X,Y), "
          "short(Y).\t2, 3, rho2\n"
          "5\tp(X) :- has_car(X,U), has_car(X,V), smaller(U,V), U=V, has_car(X,Y), "
          "short(Y), U=Y.\t4, rho1, U, Y\n");

    // tampering breaks verification
    std::vector<DerivationStep> bad = steps;
    bad[3].parent2 = 0;
    CHECK_FALSE(verify_derivation(bad, phi, Omega{}, m, t));

    // a Given step must rename apart from the sequence so far
    std::vector<DerivationStep> dup{DerivationStep::given(c1), DerivationStep::given(c1)};
    CHECK_FALSE(verify_derivation(dup, phi, Omega{}, m, t));

    // omega restricts the operators a derivation may use
    CHECK_FALSE(verify_derivation(steps, phi, Omega{false, true}, m, t));
}

TEST_CASE("linearization") {
    auto [m, t] = trains();
    OrderedClause c1 = parse_clause("p(X) :- has_car(X, U), has_car(X, V), smaller(U, V)");
    OrderedClause c2 = parse_clause("p(X) :- has_car(X, Y), short(Y)");
    std::vector<OrderedClause> phi{c1, c2};

    std::vector<DerivationStep> steps;
    steps.push_back(DerivationStep::given(c1));
    steps.push_back(DerivationStep::by_rho1(rho1(c1, m, t)[0], 0, "U", "V"));
    steps.push_back(DerivationStep::given(c2));
    std::vector<Literal> body = steps[1].clause.body;
    for (const Literal& l : c2.body) body.push_back(l);
    steps.push_back(DerivationStep::by_rho2(OrderedClause(c1.head, body), 1, 2));
    OrderedClause last = parse_clause(
        "p(X) :- has_car(X, U), has_car(X, V), smaller(U, V), U = V, has_car(X, Y), "
        "short(Y), U = Y");
    steps.push_back(DerivationStep::by_rho1(last, 3, "U", "Y"));

    std::vector<DerivationStep> lin = linearize(steps, phi, m, t);
    CHECK(verify_derivation(lin, phi, Omega{}, m, t));
    CHECK(is_linear(lin));
    CHECK(equivalent(lin.back().clause, steps.back().clause));
    REQUIRE(lin.size() == 5);
    CHECK(lin[0].kind == DerivationStep::Kind::given);
    CHECK(lin[1].kind == DerivationStep::Kind::given);
    CHECK(lin[2].kind == DerivationStep::Kind::rho2);
    CHECK(lin[3].kind == DerivationStep::Kind::rho1);
    CHECK(lin[4].kind == DerivationStep::Kind::rho1);
}

TEST_CASE("reconstruction from the basis") {
    auto [m, t] = trains();
    OrderedClause c = parse_clause("p(X) :- has_car(X, A), short(A), closed(A)");
    OrderedClause s1 = parse_clause("p(X) :- has_car(X, Y), short(Y)");
    OrderedClause s2 = parse_clause("p(X) :- has_car(X, Z), closed(Z)");
    Substitution theta;
    theta.bind("Y", Term::var("A"));
    theta.bind("Z", Term::var("A"));

    std::vector<DerivationStep> rec = reconstruct_from_basis(c, {s1, s2}, theta, m, t);
    CHECK(verify_derivation(rec, {s1, s2}, Omega{}, m, t));
    REQUIRE(rec.size() == 4);
    CHECK(rec[3].clause ==
          parse_clause("p(X) :- has_car(X, Y), short(Y), has_car(X, Z), closed(Z), Y = Z"));
    CHECK(equivalent(rec[3].clause, c));

    // a subset that misses a basis member cannot reconstruct
    CHECK_THROWS_AS(reconstruct_from_basis(c, {s1}, theta, m, t), DataError);
}

TEST_CASE("bounded closure") {
    auto [m, t] = trains();
    OrderedClause c1 = parse_clause("p(X) :- has_car(X, U), has_car(X, V), smaller(U, V)");
    OrderedClause c2 = parse_clause("p(X) :- has_car(X, Y), short(Y)");
    auto all = [](const OrderedClause&) { return true; };

    // one rho2 round over two clauses adds exactly their combination
    std::vector<OrderedClause> clo = bounded_closure({c1, c2}, Omega{false, true}, 1, all, m, t);
    CHECK(clo.size() == 3);

    // depth 0 returns the deduplicated inputs
    CHECK(bounded_closure({c1, c2, c2}, Omega{true, true}, 0, all, m, t).size() == 2);

    // rho1 rounds add equality children
    std::vector<OrderedClause> one = bounded_closure({c1}, Omega{true, false}, 1, all, m, t);
    CHECK(one.size() == 2);

    // the filter prunes on sight
    auto none = [](const OrderedClause& x) { return x.body.size() < 4; };
    std::vector<OrderedClause> pruned =
        bounded_closure({c1, c2}, Omega{false, true}, 1, none, m, t);
    CHECK(pruned.size() == 2);

    CHECK_THROWS_AS(bounded_closure({c1, c2}, Omega{false, true}, 3, all, m, t, 2), DataError);
}

TEST_CASE("basis properties hold on random clauses") {
    auto [m, t] = testutil::property_language();
    Rng rng(20260819);
    std::size_t with_multiple_sinks = 0;
    for (int i = 0; i < 150; ++i) {
        OrderedClause c = testutil::random_clause(m, t, rng, 6);
        REQUIRE(in_mode_language(c, m, t).has_value());
        ClauseDependencyGraph g = build_dependency_graph(c, m, t);
        std::vector<OrderedClause> b = basis(c, m, t);
        CHECK(b.size() == g.sinks().size());
        if (b.size() > 1) ++with_multiple_sinks;
        std::set<Literal> body(c.body.begin(), c.body.end());
        for (const OrderedClause& member : b) {
            CHECK(is_m_simple(member, m, t));
            CHECK(in_mode_language(member, m, t).has_value());
            CHECK(member.head == c.head);
            for (const Literal& l : member.body) CHECK(body.count(l) == 1);
        }
    }
    CHECK(with_multiple_sinks > 10); // the generator must exercise the interesting case
}

TEST_CASE("derivation lemma holds on random clauses") {
    auto [m, t] = testutil::property_language();
    Rng rng(7);
    Dataset ids;
    for (const Term& cst : t.at("t")) ids.emplace_back(cst, "+");
    for (int i = 0; i < 60; ++i) {
        OrderedClause c = testutil::random_clause(m, t, rng, 5);
        std::vector<OrderedClause> bas = basis(c, m, t);
        testutil::LemmaSetup setup = testutil::lemma_setup(c, bas);
        std::vector<DerivationStep> rec =
            reconstruct_from_basis(c, setup.s, setup.theta, m, t);
        CHECK(verify_derivation(rec, setup.s, Omega{}, m, t));
        CHECK(equivalent(rec.back().clause, c));

        Rng store_rng = rng.fork(i);
        FactStore store = testutil::random_store(m, t, store_rng, 0.45);
        for (const Instance& inst : ids)
            CHECK(evaluate_feature(c, store, inst.id) ==
                  evaluate_feature(rec.back().clause, store, inst.id));
    }
}

TEST_CASE("linearization holds on random derivations") {
    auto [m, t] = testutil::property_language();
    ModeSet ext = extend_with_equality(m);
    Rng rng(99);
    for (int i = 0; i < 60; ++i) {
        std::vector<OrderedClause> phi;
        for (int k = 0; k < 3; ++k) {
            OrderedClause f = testutil::random_clause(m, t, rng, 3);
            phi.push_back(f);
        }
        std::vector<DerivationStep> steps =
            testutil::random_derivation(phi, m, t, rng, 2 + rng.below(7));
        REQUIRE(verify_derivation(steps, phi, Omega{}, m, t));
        std::vector<DerivationStep> lin = linearize(steps, phi, m, t);
        CHECK(verify_derivation(lin, phi, Omega{}, m, t));
        CHECK(is_linear(lin));
        CHECK(equivalent(lin.back().clause, steps.back().clause));
    }
}
