#pragma once

#include "tsprompt/core.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tsprompt::prompts {

enum class Strategy { naive, cot, lstprompt, lstprompt_no_decomp, lstprompt_no_breath };

inline constexpr Strategy kAllStrategies[] = {Strategy::naive, Strategy::cot,
                                              Strategy::lstprompt_no_decomp,
                                              Strategy::lstprompt_no_breath, Strategy::lstprompt};

std::string_view to_string(Strategy s);
/// Accepts the canonical names ("naive", "cot", "lstprompt",
/// "lstprompt-no-decomp", "lstprompt-no-breath") plus "base" for naive.
Strategy parse_strategy(std::string_view name);

bool uses_decomposition(Strategy s);
bool uses_breath(Strategy s);

class InvalidSpec : public Error {
public:
    using Error::Error;
};

class TemplateError : public Error {
public:
    using Error::Error;
};

struct DatasetContext {
    std::string dataset_name;
    std::string domain_description;
    Frequency frequency = Frequency::day;
    std::string upper_time_scale;
};

std::string default_upper_time_scale(Frequency f);

/// Breath frequency aligned with the next larger time scale (day -> 5
/// trading days per week, week -> 4 weeks per month, ...).
std::size_t default_breath_k(Frequency f);
std::size_t default_breath_k(std::string_view frequency_label);

enum class PartitionMode { explicit_steps, model_chooses };
enum class BreathMode { instruction, inline_markers };

struct RenderOptions {
    PartitionMode partition_mode = PartitionMode::explicit_steps;
    BreathMode breath_mode = BreathMode::instruction;
    /// Optional text placed before the task statement.
    std::string preamble;
    std::string separator = ", ";
};

struct PromptSpec {
    Strategy strategy = Strategy::lstprompt;
    DatasetContext context;
    std::string history_text;
    std::size_t horizon = 0;
    HorizonPartition partition;
    std::size_t breath_k = 0;
    RenderOptions options;
};

enum class Section { context, decomposition, breath, history, output_contract };

std::string_view to_string(Section s);

struct SectionRange {
    Section section;
    std::size_t begin;
    std::size_t end;
};

struct PromptText {
    std::string text;
    /// Contiguous, ordered, covering [0, text.size()).
    std::vector<SectionRange> sections;
    /// Number of values the prompt asks for.
    std::size_t requested_values = 0;

    bool has_section(Section s) const;
    /// Empty view when the section is absent.
    std::string_view section_text(Section s) const;
};

/// Named text blocks with {placeholder} substitution; see
/// assets/prompt_template.txt for the grammar.
class PromptTemplate {
public:
    static const PromptTemplate& builtin();
    static PromptTemplate parse(std::string_view source);
    static PromptTemplate load(const std::filesystem::path& path);

    /// Substitutes placeholders in the named block.
    std::string render(std::string_view block,
                       const std::map<std::string, std::string, std::less<>>& values) const;

    const std::string& block(std::string_view name) const;
    bool operator==(const PromptTemplate&) const = default;

private:
    std::map<std::string, std::string, std::less<>> blocks_;
};

/// Text embedded from assets/prompt_template.txt at build time.
std::string_view builtin_template_source();

PromptText build_lstprompt(const PromptSpec& spec,
                           const PromptTemplate& tmpl = PromptTemplate::builtin());
PromptText build_baseline(const PromptSpec& spec,
                          const PromptTemplate& tmpl = PromptTemplate::builtin());

/// Dispatches on spec.strategy.
PromptText render_prompt(const PromptSpec& spec,
                         const PromptTemplate& tmpl = PromptTemplate::builtin());

/// Appends the "numbers only" reminder to the output contract; used for the
/// single decode-failure retry.
PromptText with_retry_reminder(const PromptText& prompt, const PromptSpec& spec,
                               const PromptTemplate& tmpl = PromptTemplate::builtin());

} // namespace tsprompt::prompts
