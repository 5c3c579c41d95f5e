#pragma once

// Shared by the unit and acceptance tests.

#include <optional>
#include <string>
#include <vector>

namespace corpus {

struct CorpusCase {
    const char* label;
    std::string text;
    std::size_t expected;
    // nullopt: NoValuesFound is the contracted outcome.
    std::optional<std::vector<double>> values;
    bool partial = false;
    std::size_t repaired = 0;
    std::optional<std::string> prefix{};
};

// Contracted outcomes for completions in the shapes observed from chat
// models; fixed before the parser was written. beta = 1, p = 1.
inline std::vector<CorpusCase> adversarial_corpus() {
    return {
        {"plain", "10, 20, 30", 3, std::vector<double>{1, 2, 3}, false, 0, std::string{}},
        {"prose preamble", "Sure! Here is my forecast: 10, 20", 2, std::vector<double>{1, 2},
         false, 0, std::string{"Sure! Here is my forecast: "}},
        {"truncated", "10, 2", 3, std::vector<double>{1.0, 0.2}, true},
        {"markdown fence", "```\n10, 20, 30\n```", 3, std::vector<double>{1, 2, 3}, false, 0,
         std::string{"```\n"}},
        {"fence with language and trailer",
         "```text\n10, 20, 30\n```\nLet me know if you need more.", 3,
         std::vector<double>{1, 2, 3}},
        {"newline separated", "10\n20\n30", 3, std::vector<double>{1, 2, 3}},
        {"loose whitespace", "10 , 20 ,30", 3, std::vector<double>{1, 2, 3}},
        {"unit words", "10 passengers, 20 passengers, 30 passengers", 3,
         std::vector<double>{1, 2, 3}},
        {"unit symbols", "10°C, 20°C, 30°C", 3, std::vector<double>{1, 2, 3}},
        {"count in preamble", "Here are the next 3 values: 10, 20, 30", 3,
         std::vector<double>{1, 2, 3}, false, 0, std::string{"Here are the next 3 values: "}},
        {"too many values", "10, 20, 30, 40, 50", 3, std::vector<double>{1, 2, 3}},
        {"trailing explanation",
         "10, 20, 30\nThis forecast continues the upward trend of 5 percent.", 3,
         std::vector<double>{1, 2, 3}},
        {"signed", "-5, 10, -15", 3, std::vector<double>{-0.5, 1.0, -1.5}},
        {"unicode minus", "\xE2\x88\x92"
                          "5, 10",
         2, std::vector<double>{-0.5, 1.0}, false, 1},
        {"decimal points kept by the model", "1.5, 2.0, 2.5", 3,
         std::vector<double>{1.5, 2.0, 2.5}, false, 3},
        {"numbered list", "1. 10\n2. 20\n3. 30", 3, std::vector<double>{1, 2, 3}},
        {"labelled steps", "Day 1: 10, Day 2: 20, Day 3: 30", 3, std::vector<double>{1, 2, 3}},
        {"inline breath markers", "10, 20, <breath> 30, 40", 4,
         std::vector<double>{1, 2, 3, 4}},
        {"refusal", "I'm sorry, but I cannot predict future values.", 2, std::nullopt},
        {"empty", "", 1, std::nullopt},
        {"json array", "[10, 20, 30]", 3, std::vector<double>{1, 2, 3}},
        {"note after short run",
         "Forecast:\n10, 20\n\nNote: based on 12 months of data, values 99 may vary", 3,
         std::vector<double>{1, 2}, true},
        {"ellipsis tail", "10, 20, ...", 3, std::vector<double>{1, 2}, true},
        {"overflowing token", std::string(1, '1') + std::string(400, '0') + ", 10", 1,
         std::vector<double>{1.0}},
        {"date labels", "2023-07-01: 10\n2023-07-02: 20", 2, std::vector<double>{1, 2}},
        {"conjunction", "The values are 10, 20, and 30.", 3, std::vector<double>{1, 2, 3}},
        {"space separated", "10 20 30", 3, std::vector<double>{1, 2, 3}},
        {"explicit plus", "+10, +20", 2, std::vector<double>{1, 2}, false, 2},
        {"currency", "$10, $20, $30", 3, std::vector<double>{1, 2, 3}},
        {"semicolons", "Predictions (in thousands): 10; 20; 30", 3,
         std::vector<double>{1, 2, 3}},
        {"bold markdown", "**10**, **20**, **30**", 3, std::vector<double>{1, 2, 3}},
        {"only prose", "The series looks seasonal.", 4, std::nullopt},
    };
}

} // namespace corpus
