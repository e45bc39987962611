#include <doctest.h>

#include <stdexcept>

#include <fstream>

#include "edbl/checkpoint.hpp"
#include "edbl/rng.hpp"

using namespace edbl;

TEST_CASE("model checkpoints round trip bit-exactly") {
    Rng rng(1);
    Model model({5, 8, 6}, 4, rng);
    const Model grown = model.expand_head(3, rng);

    const std::string path = "/tmp/edbl_test_model.ckpt";
    save_checkpoint(path, grown, nullptr);
    const Checkpoint loaded = load_checkpoint(path);

    CHECK(loaded.model.class_count() == 7);
    CHECK(loaded.model.old_class_count() == 4);
    CHECK(loaded.model.head().weights.values() == grown.head().weights.values());
    REQUIRE(loaded.model.hidden().size() == grown.hidden().size());
    for (std::size_t l = 0; l < grown.hidden().size(); ++l) {
        CHECK(loaded.model.hidden()[l].weights.values() == grown.hidden()[l].weights.values());
        CHECK(loaded.model.hidden()[l].bias.values() == grown.hidden()[l].bias.values());
    }
    CHECK(!loaded.store.has_value());
}

TEST_CASE("exemplar stores ride along in the same container") {
    Rng rng(2);
    Model model({3, 4}, 2, rng);
    ExemplarStore store = ExemplarStore::fixed_total(40);
    store.reduce(4);
    for (int cls = 0; cls < 4; ++cls) {
        std::vector<Sample> samples;
        for (int i = 0; i < 6; ++i) {
            Sample s;
            s.features = gaussian_matrix(1, 3, 1.0, rng);
            s.class_id = cls;
            s.task_id = static_cast<std::size_t>(cls / 2);
            samples.push_back(std::move(s));
        }
        store.add_class(cls, samples);
    }

    const std::string path = "/tmp/edbl_test_store.ckpt";
    save_checkpoint(path, model, &store);
    const Checkpoint loaded = load_checkpoint(path);

    REQUIRE(loaded.store.has_value());
    CHECK(loaded.store->policy() == BudgetPolicy::FixedTotal);
    CHECK(loaded.store->budget() == 40);
    CHECK(loaded.store->current_cap() == store.current_cap());
    CHECK(loaded.store->class_ids() == store.class_ids());
    for (int cls = 0; cls < 4; ++cls) {
        const auto& got = loaded.store->exemplars(cls);
        const auto& want = store.exemplars(cls);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].features.values() == want[i].features.values());
            CHECK(got[i].class_id == want[i].class_id);
            CHECK(got[i].task_id == want[i].task_id);
        }
    }
}

TEST_CASE("corrupt checkpoints are rejected") {
    const std::string path = "/tmp/edbl_test_bad.ckpt";
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOPE";
    }
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);

    Rng rng(3);
    Model model({2, 2}, 2, rng);
    save_checkpoint(path, model, nullptr);
    // truncate the tail
    std::ifstream in(path, std::ios::binary);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    {
        std::ofstream out(path, std::ios::binary);
        out.write(buf.data(), static_cast<std::streamsize>(buf.size() / 2));
    }
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
    CHECK_THROWS_AS(load_checkpoint("/tmp/edbl_no_such_file.ckpt"), std::runtime_error);
}
