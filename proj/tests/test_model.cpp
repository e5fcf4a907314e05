#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "test_support.hpp"
#include "vrl/model.hpp"

using namespace vrl;
using vrl::testing::random_tensor;

namespace {

ModelParams tiny_model(std::uint64_t seed = 0, int d = 5, int l = 8, int k = 2) {
    return ModelParams::init(ModelConfig{d, l, k}, seed);
}

std::filesystem::path temp_path(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("forward produces one distribution per reference step") {
    const ModelParams mp = tiny_model();
    std::mt19937_64 rng(1);
    for (int q = 1; q <= 6; ++q) {
        for (int r = 1; r <= 6; ++r) {
            Tape tape;
            const ForwardResult out =
                model_forward(tape, mp, random_tensor({5, q}, rng), random_tensor({5, r}, rng));
            CHECK(out.probs.size() == static_cast<std::size_t>(r));
            for (const StepProbs& p : out.probs) {
                double s = 0.0;
                for (double v : p) {
                    CHECK(v > 0.0);
                    s += v;
                }
                CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("forward rejects mismatched feature dimensions and empty sequences") {
    const ModelParams mp = tiny_model();
    std::mt19937_64 rng(2);
    Tape tape;
    CHECK_THROWS_AS(model_forward(tape, mp, random_tensor({4, 3}, rng), random_tensor({5, 3}, rng)),
                    DimensionError);
    CHECK_THROWS_AS(model_forward(tape, mp, Tensor::zeros({5, 0}), random_tensor({5, 3}, rng)),
                    ContractError);
}

TEST_CASE("full-model gradient check against finite differences") {
    const ModelParams mp = tiny_model(3);
    std::mt19937_64 rng(4);
    const Tensor query = random_tensor({5, 4}, rng);
    const Tensor ref = random_tensor({5, 6}, rng);
    std::vector<Tensor> readout;
    for (int i = 0; i < 6; ++i) readout.push_back(random_tensor({4}, rng));

    auto build_loss = [&](Tape& t, const ModelParams& p) {
        const ForwardResult out = model_forward(t, p, query, ref);
        Var loss = t.leaf(Tensor::zeros({1}));
        for (std::size_t i = 0; i < out.prob_vars.size(); ++i)
            loss = t.add(loss, t.sum(t.mul(out.prob_vars[i], t.leaf(readout[i]))));
        return std::pair{loss, out.bound};
    };

    Tape tape;
    const auto [loss, bound] = build_loss(tape, mp);
    tape.backward(loss);

    auto f = [&](const ParamSet& ps) {
        ModelParams p = mp;
        p.p = ps;
        Tape t;
        return t.scalar(build_loss(t, p).first);
    };
    // eps 1e-3: below that, finite differences bottom out on the ulp
    // quantization of the readout value for near-zero gradient entries.
    const GradCheckReport rep = grad_check(mp.p, f, bound.grads(tape), 1e-3, 1e-4);
    CHECK(rep.passed);
    for (const GradCheckBlock& b : rep.blocks) {
        INFO(b.name);
        CHECK(b.max_rel_err < 1e-4);
    }
}

TEST_CASE("output depends on reference order") {
    const ModelParams mp = tiny_model(5);
    std::mt19937_64 rng(6);
    const Tensor query = random_tensor({5, 3}, rng);
    Tensor ref = random_tensor({5, 4}, rng);
    Tensor ref_rev = Tensor::zeros({5, 4});
    for (int i = 0; i < 5; ++i)
        for (int t = 0; t < 4; ++t) ref_rev.at(i, t) = ref.at(i, 3 - t);

    Tape ta, tb;
    const ForwardResult a = model_forward(ta, mp, query, ref);
    const ForwardResult b = model_forward(tb, mp, query, ref_rev);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.probs.size(); ++i)
        for (int c = 0; c < 4; ++c)
            if (std::abs(a.probs[i][static_cast<std::size_t>(c)] -
                         b.probs[i][static_cast<std::size_t>(c)]) > 1e-9)
                any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("forward pass is deterministic") {
    const ModelParams mp = tiny_model(7);
    std::mt19937_64 rng(8);
    const Tensor query = random_tensor({5, 3}, rng);
    const Tensor ref = random_tensor({5, 5}, rng);
    auto run = [&] {
        Tape tape;
        return model_forward(tape, mp, query, ref).probs;
    };
    CHECK(run() == run());
}

TEST_CASE("attention export rows are distributions; q=1 rows are all ones") {
    const ModelParams mp = tiny_model(9);
    std::mt19937_64 rng(10);

    Tape tape;
    const ForwardResult out =
        model_forward(tape, mp, random_tensor({5, 4}, rng), random_tensor({5, 6}, rng));
    const Tensor& alpha = export_attention(out.trace);
    CHECK(alpha.shape == std::vector<int>{6, 4});
    for (int i = 0; i < 6; ++i) {
        double s = 0.0;
        for (int j = 0; j < 4; ++j) s += alpha.at(i, j);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }

    Tape tape1;
    const ForwardResult one =
        model_forward(tape1, mp, random_tensor({5, 1}, rng), random_tensor({5, 6}, rng));
    const Tensor& a1 = export_attention(one.trace);
    for (int i = 0; i < 6; ++i) CHECK(a1.at(i, 0) == doctest::Approx(1.0));
}

TEST_CASE("checkpoint round-trip preserves every parameter bit-for-bit") {
    const ModelParams mp = tiny_model(11);
    const std::filesystem::path path = temp_path("vrl_roundtrip.vrlc");
    save_checkpoint(mp, path);
    const ModelParams back = load_checkpoint(path);
    CHECK(back.cfg.d == mp.cfg.d);
    CHECK(back.cfg.l == mp.cfg.l);
    CHECK(back.cfg.k == mp.cfg.k);
    REQUIRE(back.p.names == mp.p.names);
    for (std::size_t i = 0; i < mp.p.values.size(); ++i) {
        CHECK(back.p.values[i].shape == mp.p.values[i].shape);
        CHECK(back.p.values[i].data == mp.p.values[i].data);
    }
    std::filesystem::remove(path);

    // loaded parameters drive an identical forward pass
    std::mt19937_64 rng(12);
    const Tensor query = random_tensor({5, 3}, rng);
    const Tensor ref = random_tensor({5, 4}, rng);
    Tape ta, tb;
    CHECK(model_forward(ta, mp, query, ref).probs == model_forward(tb, back, query, ref).probs);
}

TEST_CASE("checkpoint loader rejects corruption with distinct errors") {
    const ModelParams mp = tiny_model(13);
    const std::filesystem::path path = temp_path("vrl_corrupt.vrlc");
    save_checkpoint(mp, path);

    SUBCASE("wrong magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XXXXX", 5);
        f.close();
        CHECK_THROWS_AS(load_checkpoint(path), BadMagicError);
    }

    SUBCASE("truncated payload") {
        const auto full = std::filesystem::file_size(path);
        std::filesystem::resize_file(path, full / 2);
        CHECK_THROWS_AS(load_checkpoint(path), TruncatedFileError);
    }

    std::filesystem::remove(path);
}

TEST_CASE("missing checkpoint file raises an I/O error") {
    CHECK_THROWS_AS(load_checkpoint(temp_path("vrl_does_not_exist.vrlc")), IoError);
}
