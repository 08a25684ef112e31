#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "xmc/data.hpp"
#include "xmc/parallel.hpp"
#include "xmc/rng.hpp"

using namespace xmc;

namespace {

SparseVector sv(std::initializer_list<SparseVector::Entry> entries) {
    SparseVector v;
    v.entries = entries;
    return v;
}

} // namespace

TEST_CASE("l2_normalize oracle values") {
    const SparseVector v = l2_normalize(sv({{0, 3.0}, {2, 4.0}}));
    REQUIRE(v.entries.size() == 2);
    CHECK(v.entries[0].value == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(v.entries[1].value == doctest::Approx(0.8).epsilon(1e-12));

    CHECK(l2_normalize(sv({})).entries.empty());
    const SparseVector unit = l2_normalize(sv({{5, 1.0}}));
    CHECK(unit.entries.size() == 1);
    CHECK(unit.entries[0].value == 1.0);
    CHECK(unit.entries[0].index == 5);
}

TEST_CASE("l2_normalize is idempotent within 1e-12") {
    SplitMix64 rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        SparseVector v;
        uint32_t idx = 0;
        for (int e = 0; e < 8; ++e) {
            idx += 1 + static_cast<uint32_t>(rng.next_range(5));
            v.entries.push_back({idx, rng.next_double() * 4 - 2});
        }
        const SparseVector once = l2_normalize(v);
        const SparseVector twice = l2_normalize(once);
        REQUIRE(once.entries.size() == twice.entries.size());
        for (size_t i = 0; i < once.entries.size(); ++i)
            CHECK(std::fabs(once.entries[i].value - twice.entries[i].value) <= 1e-12);
        CHECK(l2_norm(once) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("sparse_dot oracle values") {
    CHECK(sparse_dot(sv({{0, 1.0}, {2, 2.0}}), sv({{2, 3.0}})) == 6.0);
    CHECK(sparse_dot(sv({{0, 1.0}}), sv({{1, 1.0}})) == 0.0);
    CHECK(sparse_dot(sv({{1, 0.5}}), sv({{1, 0.5}})) == 0.25);
}

TEST_CASE("sparse_dot matches a dense oracle, symmetric and bilinear") {
    SplitMix64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> da(64, 0.0), db(64, 0.0);
        SparseVector a, b;
        for (int e = 0; e < 12; ++e) {
            const uint32_t ia = static_cast<uint32_t>(rng.next_range(64));
            const double va = rng.next_double() - 0.5;
            if (da[ia] == 0.0 && va != 0.0) {
                da[ia] = va;
            }
            const uint32_t ib = static_cast<uint32_t>(rng.next_range(64));
            const double vb = rng.next_double() - 0.5;
            if (db[ib] == 0.0 && vb != 0.0) {
                db[ib] = vb;
            }
        }
        a = from_dense(da);
        b = from_dense(db);
        double dense = 0.0;
        for (int i = 0; i < 64; ++i) dense += da[i] * db[i];
        CHECK(sparse_dot(a, b) == doctest::Approx(dense).epsilon(1e-12));
        CHECK(sparse_dot(a, b) == sparse_dot(b, a));
    }
}

TEST_CASE("SparseVector invariants are enforced") {
    CHECK_NOTHROW(sv({{0, 1.0}, {3, 2.0}}).check_invariants());
    CHECK_THROWS(sv({{3, 1.0}, {0, 2.0}}).check_invariants()); // unsorted
    CHECK_THROWS(sv({{1, 1.0}, {1, 2.0}}).check_invariants()); // duplicate
    CHECK_THROWS(sv({{1, 0.0}}).check_invariants());           // stored zero
}

TEST_CASE("from_dense drops zeros, add_into round trips") {
    std::vector<double> dense{0.0, 1.5, 0.0, -2.0};
    const SparseVector v = from_dense(dense);
    REQUIRE(v.entries.size() == 2);
    CHECK(v.entries[0].index == 1);
    CHECK(v.entries[1].index == 3);
    std::vector<double> back(4, 0.0);
    add_into(v, back);
    CHECK(back == dense);
}

TEST_CASE("LabelSet from_unsorted sorts and dedups") {
    const LabelSet s = LabelSet::from_unsorted({5, 1, 5, 3});
    CHECK(s.labels == std::vector<uint32_t>{1, 3, 5});
    CHECK(s.contains(3));
    CHECK(!s.contains(2));
}

namespace {

Dataset tiny_dataset() {
    Dataset d;
    d.num_features = 4;
    d.num_labels = 3;
    d.vocab_size = 4;
    Sample s1;
    s1.features = sv({{0, 1.0}});
    s1.labels = LabelSet::from_unsorted({0});
    Sample s2;
    s2.features = sv({{1, 1.0}});
    s2.labels = LabelSet::from_unsorted({0, 1});
    d.samples = {s1, s2};
    return d;
}

} // namespace

TEST_CASE("label_representations oracle values") {
    const LabelRepResult r = label_representations(tiny_dataset());
    REQUIRE(r.reps.size() == 3);

    // label 0 on both samples: normalize((1,1,0,0))
    REQUIRE(r.reps[0].entries.size() == 2);
    CHECK(r.reps[0].entries[0].value == doctest::Approx(0.70710678).epsilon(1e-8));
    CHECK(r.reps[0].entries[1].value == doctest::Approx(0.70710678).epsilon(1e-8));

    // label 1 on exactly one sample: that sample's normalized features
    REQUIRE(r.reps[1].entries.size() == 1);
    CHECK(r.reps[1].entries[0].index == 1);
    CHECK(r.reps[1].entries[0].value == 1.0);

    // label 2 unused
    CHECK(r.reps[2].entries.empty());
    CHECK(r.unused_labels == 1);
}

TEST_CASE("label representation norms are zero or one") {
    SplitMix64 rng(11);
    Dataset d;
    d.num_features = 32;
    d.num_labels = 20;
    d.vocab_size = 32;
    for (int i = 0; i < 200; ++i) {
        Sample s;
        std::vector<double> dense(32, 0.0);
        for (int e = 0; e < 6; ++e)
            dense[rng.next_range(32)] = 1.0 + rng.next_double();
        s.features = from_dense(dense);
        std::vector<uint32_t> labels;
        for (int l = 0; l < 3; ++l)
            labels.push_back(static_cast<uint32_t>(rng.next_range(18))); // 18/19 may stay unused
        s.labels = LabelSet::from_unsorted(std::move(labels));
        d.samples.push_back(std::move(s));
    }
    const LabelRepResult r = label_representations(d);
    for (const SparseVector& rep : r.reps) {
        const double n = l2_norm(rep);
        CHECK((n == 0.0 || std::fabs(n - 1.0) <= 1e-9));
    }
}

TEST_CASE("label_representations identical across worker counts") {
    Dataset d;
    SplitMix64 rng(13);
    d.num_features = 16;
    d.num_labels = 10;
    d.vocab_size = 16;
    for (int i = 0; i < 64; ++i) {
        Sample s;
        std::vector<double> dense(16, 0.0);
        for (int e = 0; e < 4; ++e) dense[rng.next_range(16)] = rng.next_double() + 0.1;
        s.features = from_dense(dense);
        s.labels = LabelSet::from_unsorted({static_cast<uint32_t>(rng.next_range(10)),
                                            static_cast<uint32_t>(rng.next_range(10))});
        d.samples.push_back(std::move(s));
    }
    set_workers(1);
    const LabelRepResult serial = label_representations(d);
    set_workers(4);
    const LabelRepResult par = label_representations(d);
    set_workers(default_workers());
    CHECK(serial.reps == par.reps);
    CHECK(serial.unused_labels == par.unused_labels);
}

TEST_CASE("dataset invariant checks catch out-of-bound references") {
    Dataset d = tiny_dataset();
    CHECK_NOTHROW(d.check_invariants());
    d.samples[0].labels.labels.push_back(7); // label >= L
    CHECK_THROWS(d.check_invariants());
}
