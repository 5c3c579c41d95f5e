#include "tsprompt/llm.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <ctime>

namespace tsprompt::llm {

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 computation failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0x0f]);
    }
    return out;
}

std::string canonical_double(double value) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), res.ptr);
}

std::string request_hash(std::string_view prompt_text, std::string_view model_id,
                         double temperature, std::size_t sample_index) {
    std::string canonical = "tsprompt-request-v1\n";
    canonical += "model_id:";
    canonical += model_id;
    canonical += "\ntemperature:";
    canonical += canonical_double(temperature);
    canonical += "\nsample_index:";
    canonical += std::to_string(sample_index);
    canonical += "\nprompt_bytes:";
    canonical += std::to_string(prompt_text.size());
    canonical += "\n";
    canonical += prompt_text;
    return sha256_hex(canonical);
}

std::string utc_now_iso8601() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::array<char, 32> buf{};
    std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf.data();
}

} // namespace tsprompt::llm
