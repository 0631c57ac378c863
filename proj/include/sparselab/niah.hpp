#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparselab/error.hpp"

namespace sparselab {

// The eight needle-in-a-haystack task variants.
enum class TaskVariant { S1, S2, S3, MK1, MK2, MK3, MQ, MV };

const char* to_string(TaskVariant v);
TaskVariant task_from_string(const std::string& s);
const std::vector<TaskVariant>& all_tasks();

enum class ValueKind { number, uuid_like };

using TokenId = std::uint32_t;

// Symbol-id layout. Tokens are abstract symbol ids, partitioned into
// disjoint pools so the planted backbone can key content by role.
namespace vocab {
constexpr TokenId noise_base = 0;
constexpr TokenId noise_count = 4096;
constexpr TokenId filler_base = 4096;   // structured background (S2)
constexpr TokenId filler_count = 64;
constexpr TokenId key_base = 8192;
constexpr TokenId key_count = 1024;
constexpr TokenId number_base = 16384;  // short values
constexpr TokenId number_count = 256;
constexpr TokenId uuid_base = 32768;    // alphabet for long uuid-like values
constexpr TokenId uuid_count = 64;
constexpr std::size_t number_len = 1;
constexpr std::size_t uuid_len = 8;

bool is_value_symbol(TokenId id);
// All symbols a decoded answer token may legally be; the readout ranks these.
std::vector<TokenId> value_symbols();
}  // namespace vocab

// One inserted key/value pair. `occurrence` is the ordinal among needles
// sharing the same key (only MV has more than one).
struct Needle {
    TokenId key = 0;
    std::vector<TokenId> values;  // inserted right after the key token
    std::size_t position = 0;     // position of the key token
    std::size_t occurrence = 0;

    std::size_t span() const { return 1 + values.size(); }
    friend bool operator==(const Needle&, const Needle&) = default;
};

// One token of the question region; there is exactly one per answer step,
// identifying which (key, occurrence, value index) that step must retrieve.
struct QuestionToken {
    TokenId key = 0;
    std::size_t occurrence = 0;
    std::size_t value_index = 0;
    std::size_t position = 0;
    friend bool operator==(const QuestionToken&, const QuestionToken&) = default;
};

struct NiahSample {
    TaskVariant variant = TaskVariant::S1;
    std::uint64_t seed = 0;
    std::vector<TokenId> tokens;
    std::vector<Needle> needles;  // queried pairs and distractor pairs
    std::vector<TokenId> queries;  // queried keys, in answer order
    std::vector<QuestionToken> question;
    std::vector<std::vector<TokenId>> gold_answers;
    std::vector<std::size_t> gold_positions;  // one per answer step

    std::size_t context_len() const { return tokens.size(); }
    std::size_t answer_steps() const { return gold_positions.size(); }
    friend bool operator==(const NiahSample&, const NiahSample&) = default;
};

ValueKind value_kind(TaskVariant v);
std::size_t distractor_pair_count(TaskVariant v);

// Deterministic per seed. Throws CapacityError when the context cannot hold
// the variant's pairs plus the question region.
NiahSample generate_sample(TaskVariant variant, std::size_t context_len, std::uint64_t seed);

// n samples with per-sample seeds derived from the master seed.
std::vector<NiahSample> generate_split(TaskVariant variant, std::size_t n,
                                       std::size_t context_len, std::uint64_t seed);

// Fraction of gold value sequences reproduced exactly, compared positionally.
double exact_match(const std::vector<std::vector<TokenId>>& prediction,
                   const std::vector<std::vector<TokenId>>& gold);

std::string to_json_line(const NiahSample& s);
NiahSample sample_from_json_line(const std::string& line);

}  // namespace sparselab
