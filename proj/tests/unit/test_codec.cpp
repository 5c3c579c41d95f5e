#include "tsprompt/codec.hpp"

#include "../support/corpus.hpp"
#include "../support/oracles.hpp"

#include <doctest.h>

#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace tsprompt::codec;

namespace {

CodecConfig unit_config(int precision = 1, double scale = 1.0) {
    CodecConfig c;
    c.precision = precision;
    c.scale = scale;
    return c;
}

using corpus::adversarial_corpus;

} // namespace

TEST_CASE("fit_scale follows the quantile of absolute values") {
    std::vector<double> ramp;
    for (int i = 1; i <= 100; ++i) ramp.push_back(i);
    CHECK(fit_scale(ramp, 1.0) == 100.0);

    const std::vector<double> zeros(10, 0.0);
    CHECK(fit_scale(zeros, 0.95) == kMinScale);

    CHECK_THROWS_AS(fit_scale(std::vector<double>{}, 0.5), tsprompt::EmptyInput);
    CHECK_THROWS_AS(fit_scale(ramp, 0.0), InvalidCodecConfig);

    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> len(1, 300);
    std::uniform_real_distribution<double> alpha(0.01, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        auto xs = oracle::random_vector(rng, len(rng), -1e4, 1e4);
        const double a = alpha(rng);
        CHECK(oracle::rel_close(fit_scale(xs, a), oracle::sorted_abs_quantile(xs, a), 1e-12));
    }
}

TEST_CASE("encode_series renders the grammar") {
    CHECK(encode_series(std::vector<double>{1.0, 2.0}, unit_config(1)) == "10, 20");
    CHECK(encode_series(std::vector<double>{123.4}, unit_config(2, 100.0)) == "123");
    CHECK(encode_series(std::vector<double>{-0.5}, unit_config(1)) == "-5");
    CHECK(encode_series(std::vector<double>{0.0, -0.001}, unit_config(1)) == "0, 0");
    CHECK(encode_series(std::vector<double>{0.05}, unit_config(2)) == "5");
    CHECK(encode_series(std::vector<double>{7.0}, unit_config(0)) == "7");

    auto kept = unit_config(2);
    kept.strip_decimal_point = false;
    CHECK(encode_series(std::vector<double>{1.0, -2.346}, kept) == "1.00, -2.35");

    auto unsigned_cfg = unit_config(1);
    unsigned_cfg.sign_allowed = false;
    CHECK_THROWS_AS(encode_series(std::vector<double>{-1.0}, unsigned_cfg), ValueOutOfRange);
    CHECK_THROWS_AS(encode_series(std::vector<double>{1e16}, unit_config(1)), ValueOutOfRange);

    auto bad = unit_config(1);
    bad.separator = "1";
    CHECK_THROWS_AS(bad.validate(), InvalidCodecConfig);
    bad.separator = "";
    CHECK_THROWS_AS(bad.validate(), InvalidCodecConfig);
    bad = unit_config(11);
    CHECK_THROWS_AS(bad.validate(), InvalidCodecConfig);
}

TEST_CASE("encode is injective on values that differ after rounding") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(-1e4, 1e4);
    for (int p = 0; p <= 6; ++p) {
        const auto cfg = unit_config(p, 10.0);
        for (int i = 0; i < 2000; ++i) {
            const double a = dist(rng);
            const double b = dist(rng);
            const bool differ =
                oracle::rounded_on_grid(a, 10.0, p) != oracle::rounded_on_grid(b, 10.0, p);
            if (differ) CHECK(encode_value(a, cfg) != encode_value(b, cfg));
        }
    }
}

TEST_CASE("decode inverts encode exactly on the rounding grid") {
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> exponent(-6.0, 12.0);
    std::bernoulli_distribution negative(0.5);
    for (int p = 0; p <= 6; ++p) {
        for (double beta : {1e-3, 1.0, 10.0, 100.0}) {
            const auto cfg = unit_config(p, beta);
            std::vector<double> xs;
            for (int i = 0; i < 200; ++i) {
                double u = std::pow(10.0, exponent(rng));
                if (u >= 1e12) u = 9.99e11;
                xs.push_back((negative(rng) ? -u : u) * beta);
            }
            const auto decoded = decode_completion(encode_series(xs, cfg), cfg, xs.size());
            REQUIRE(decoded.values.size() == xs.size());
            for (std::size_t i = 0; i < xs.size(); ++i) {
                CHECK(decoded.values[i] == oracle::rounded_on_grid(xs[i], beta, p));
            }
        }
    }
}

TEST_CASE("adversarial completion corpus") {
    const auto corpus = adversarial_corpus();
    REQUIRE(corpus.size() >= 20);
    const auto cfg = unit_config(1);
    for (const auto& c : corpus) {
        const std::string label = c.label;
        CAPTURE(label);
        if (!c.values) {
            CHECK_THROWS_AS(decode_completion(c.text, cfg, c.expected), NoValuesFound);
            continue;
        }
        if (c.partial) {
            try {
                decode_completion(c.text, cfg, c.expected);
                FAIL("expected PartialDecode");
            } catch (const PartialDecode& e) {
                CHECK(e.values() == *c.values);
                CHECK(e.diagnostics().truncated);
                CHECK(e.diagnostics().values_found == c.values->size());
                CHECK(e.diagnostics().values_expected == c.expected);
            }
            continue;
        }
        const auto r = decode_completion(c.text, cfg, c.expected);
        CHECK(r.values == *c.values);
        CHECK(r.diagnostics.values_found == c.values->size());
        CHECK(r.diagnostics.values_expected == c.expected);
        CHECK_FALSE(r.diagnostics.truncated);
        CHECK(r.diagnostics.repaired_tokens == c.repaired);
        if (c.prefix) CHECK(r.diagnostics.stripped_prefix == *c.prefix);
    }
}

TEST_CASE("decoding honours scale, precision and sign policy") {
    const auto r = decode_completion("123, 45", unit_config(2, 100.0), 2);
    CHECK(r.values == std::vector<double>{123.0, 45.0});

    auto unsigned_cfg = unit_config(1);
    unsigned_cfg.sign_allowed = false;
    try {
        decode_completion("-5, 10", unsigned_cfg, 2);
        FAIL("expected PartialDecode");
    } catch (const PartialDecode& e) {
        CHECK(e.values() == std::vector<double>{1.0});
    }

    auto kept = unit_config(2);
    kept.strip_decimal_point = false;
    const auto k = decode_completion("1.00, -2.35, 4", kept, 3);
    CHECK(k.values == std::vector<double>{1.0, -2.35, 4.0});
    CHECK(k.diagnostics.repaired_tokens == 0);
}

TEST_CASE("refusals are recognised without being decode errors of their own") {
    CHECK(looks_like_refusal("I'm sorry, but I cannot predict future values."));
    CHECK(looks_like_refusal("As an AI language model, I am unable to forecast."));
    CHECK_FALSE(looks_like_refusal("10, 20, 30"));
}

TEST_CASE("decode never fails outside its contract on arbitrary bytes") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> length(0, 200);
    std::uniform_int_distribution<int> byte(0, 255);
    const std::string alphabet = "0123456789-,. \n:;+<>[]()*`$%abcXYZ\xE2\x88\x92";
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::bernoulli_distribution biased(0.5);
    const auto cfg = unit_config(2, 3.0);
    for (int i = 0; i < 20000; ++i) {
        std::string text;
        const int n = length(rng);
        for (int j = 0; j < n; ++j) {
            text.push_back(biased(rng) ? alphabet[pick(rng)] : static_cast<char>(byte(rng)));
        }
        const std::size_t expected = 1 + static_cast<std::size_t>(i % 7);
        try {
            const auto r = decode_completion(text, cfg, expected);
            CHECK(r.values.size() == expected);
            for (double v : r.values) CHECK(std::isfinite(v));
        } catch (const PartialDecode& e) {
            CHECK(e.values().size() < expected);
            CHECK(!e.values().empty());
        } catch (const NoValuesFound&) {
        }
    }
}
