#include "sparselab/niah.hpp"

#include <algorithm>
#include <map>

#include <json.hpp>

#include "sparselab/rng.hpp"

namespace sparselab {

namespace {

constexpr std::uint64_t kSplitStream = 0x5A17;
constexpr std::size_t kPlacementMargin = 64;  // keeps pairs out of the leading context

struct VariantShape {
    std::size_t queried_pairs;
    std::size_t distractor_pairs;
    ValueKind kind;
    bool shared_key;         // MV: all queried values hang off one key
    bool structured_filler;  // S2: correlated background instead of i.i.d. noise
};

VariantShape shape_of(TaskVariant v) {
    switch (v) {
        case TaskVariant::S1:  return {1, 0, ValueKind::number, false, false};
        case TaskVariant::S2:  return {1, 0, ValueKind::number, false, true};
        case TaskVariant::S3:  return {1, 8, ValueKind::uuid_like, false, false};
        case TaskVariant::MK1: return {1, 3, ValueKind::number, false, false};
        case TaskVariant::MK2: return {1, 15, ValueKind::number, false, false};
        case TaskVariant::MK3: return {1, 31, ValueKind::uuid_like, false, false};
        case TaskVariant::MQ:  return {4, 0, ValueKind::number, false, false};
        case TaskVariant::MV:  return {4, 0, ValueKind::number, true, false};
    }
    throw DomainError("shape_of: unknown variant");
}

std::vector<TokenId> draw_value(Rng& rng, ValueKind kind,
                                std::vector<TokenId>& used_numbers) {
    if (kind == ValueKind::number) {
        // numbers are drawn without replacement so golds stay unambiguous
        TokenId v;
        do {
            v = vocab::number_base + static_cast<TokenId>(rng.next_below(vocab::number_count));
        } while (std::find(used_numbers.begin(), used_numbers.end(), v) != used_numbers.end());
        used_numbers.push_back(v);
        return {v};
    }
    std::vector<TokenId> v(vocab::uuid_len);
    for (auto& t : v)
        t = vocab::uuid_base + static_cast<TokenId>(rng.next_below(vocab::uuid_count));
    return v;
}

}  // namespace

const char* to_string(TaskVariant v) {
    switch (v) {
        case TaskVariant::S1:  return "S1";
        case TaskVariant::S2:  return "S2";
        case TaskVariant::S3:  return "S3";
        case TaskVariant::MK1: return "MK1";
        case TaskVariant::MK2: return "MK2";
        case TaskVariant::MK3: return "MK3";
        case TaskVariant::MQ:  return "MQ";
        case TaskVariant::MV:  return "MV";
    }
    return "?";
}

TaskVariant task_from_string(const std::string& s) {
    for (TaskVariant v : all_tasks())
        if (s == to_string(v)) return v;
    throw ConfigError("unknown task variant: " + s);
}

const std::vector<TaskVariant>& all_tasks() {
    static const std::vector<TaskVariant> tasks = {
        TaskVariant::S1, TaskVariant::S2, TaskVariant::S3, TaskVariant::MK1,
        TaskVariant::MK2, TaskVariant::MK3, TaskVariant::MQ, TaskVariant::MV};
    return tasks;
}

ValueKind value_kind(TaskVariant v) { return shape_of(v).kind; }
std::size_t distractor_pair_count(TaskVariant v) { return shape_of(v).distractor_pairs; }

namespace vocab {

bool is_value_symbol(TokenId id) {
    return (id >= number_base && id < number_base + number_count) ||
           (id >= uuid_base && id < uuid_base + uuid_count);
}

std::vector<TokenId> value_symbols() {
    std::vector<TokenId> out;
    out.reserve(number_count + uuid_count);
    for (TokenId i = 0; i < number_count; ++i) out.push_back(number_base + i);
    for (TokenId i = 0; i < uuid_count; ++i) out.push_back(uuid_base + i);
    return out;
}

}  // namespace vocab

NiahSample generate_sample(TaskVariant variant, std::size_t context_len, std::uint64_t seed) {
    const VariantShape shape = shape_of(variant);
    const std::size_t value_len =
        shape.kind == ValueKind::number ? vocab::number_len : vocab::uuid_len;
    const std::size_t pair_count = shape.queried_pairs + shape.distractor_pairs;
    const std::size_t span = 1 + value_len;
    const std::size_t question_len = shape.queried_pairs * value_len;

    const std::size_t needed = kPlacementMargin + pair_count * span + question_len;
    if (context_len < needed)
        throw CapacityError(std::string("generate_sample: ") + to_string(variant) +
                            " needs at least " + std::to_string(needed) +
                            " tokens, got " + std::to_string(context_len));

    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(variant), 0xA15E));

    NiahSample s;
    s.variant = variant;
    s.seed = seed;
    s.tokens.resize(context_len);

    // Non-overlapping pair positions, uniform via sorted gap offsets.
    const std::size_t region_begin = kPlacementMargin;
    const std::size_t region_end = context_len - question_len;
    const std::size_t free_space = (region_end - region_begin) - pair_count * span;
    std::vector<std::size_t> gaps(pair_count);
    for (auto& g : gaps) g = static_cast<std::size_t>(rng.next_below(free_space + 1));
    std::sort(gaps.begin(), gaps.end());

    // Keys without replacement.
    const std::size_t key_count = shape.shared_key ? 1 + shape.distractor_pairs
                                                   : pair_count;
    std::vector<TokenId> keys(key_count);
    for (std::size_t i = 0; i < key_count; ++i) {
        TokenId k;
        bool fresh;
        do {
            k = vocab::key_base + static_cast<TokenId>(rng.next_below(vocab::key_count));
            fresh = std::find(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(i), k) ==
                    keys.begin() + static_cast<std::ptrdiff_t>(i);
        } while (!fresh);
        keys[i] = k;
    }

    // Which placed slots hold the queried pairs; uniform over slots so gold
    // depth is not biased.
    std::vector<std::size_t> queried_slots =
        rng.sample_without_replacement(pair_count, shape.queried_pairs);
    std::sort(queried_slots.begin(), queried_slots.end());
    auto is_queried = [&](std::size_t i) {
        return std::binary_search(queried_slots.begin(), queried_slots.end(), i);
    };

    std::vector<TokenId> used_numbers;
    std::map<TokenId, std::size_t> occurrences;
    s.needles.resize(pair_count);
    std::size_t next_distractor_key = shape.shared_key ? 1 : shape.queried_pairs;
    std::size_t next_queried_key = 0;
    for (std::size_t i = 0; i < pair_count; ++i) {
        Needle& n = s.needles[i];
        if (is_queried(i))
            n.key = shape.shared_key ? keys[0] : keys[next_queried_key++];
        else
            n.key = keys[next_distractor_key++];
        n.values = draw_value(rng, shape.kind, used_numbers);
        n.position = region_begin + gaps[i] + i * span;
        n.occurrence = occurrences[n.key]++;
    }

    // Background.
    if (shape.structured_filler) {
        // Correlated filler: repeat the previous symbol half the time.
        TokenId state = vocab::filler_base +
                        static_cast<TokenId>(rng.next_below(vocab::filler_count));
        for (auto& t : s.tokens) {
            if (rng.next_below(2) == 0)
                state = vocab::filler_base +
                        static_cast<TokenId>(rng.next_below(vocab::filler_count));
            t = state;
        }
    } else {
        for (auto& t : s.tokens)
            t = vocab::noise_base + static_cast<TokenId>(rng.next_below(vocab::noise_count));
    }

    for (const Needle& n : s.needles) {
        s.tokens[n.position] = n.key;
        for (std::size_t i = 0; i < n.values.size(); ++i)
            s.tokens[n.position + 1 + i] = n.values[i];
    }

    // Question region and gold annotations, in position order of the
    // queried pairs (slot order is already position order).
    std::size_t qpos = region_end;
    for (std::size_t qi : queried_slots) {
        const Needle& n = s.needles[qi];
        s.queries.push_back(n.key);
        s.gold_answers.push_back(n.values);
        for (std::size_t vi = 0; vi < n.values.size(); ++vi) {
            s.tokens[qpos] = n.key;
            s.question.push_back({n.key, n.occurrence, vi, qpos});
            s.gold_positions.push_back(n.position + 1 + vi);
            ++qpos;
        }
    }
    return s;
}

std::vector<NiahSample> generate_split(TaskVariant variant, std::size_t n,
                                       std::size_t context_len, std::uint64_t seed) {
    std::vector<NiahSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(generate_sample(variant, context_len, mix_seed(seed, kSplitStream, i)));
    return out;
}

double exact_match(const std::vector<std::vector<TokenId>>& prediction,
                   const std::vector<std::vector<TokenId>>& gold) {
    if (gold.empty()) throw DomainError("exact_match: gold is empty");
    std::size_t matched = 0;
    for (std::size_t i = 0; i < gold.size(); ++i)
        if (i < prediction.size() && prediction[i] == gold[i]) ++matched;
    return static_cast<double>(matched) / static_cast<double>(gold.size());
}

std::string to_json_line(const NiahSample& s) {
    nlohmann::json j;
    j["variant"] = to_string(s.variant);
    j["seed"] = s.seed;
    j["tokens"] = s.tokens;
    j["queries"] = s.queries;
    j["gold_answers"] = s.gold_answers;
    j["gold_positions"] = s.gold_positions;
    auto& needles = j["needles"] = nlohmann::json::array();
    for (const Needle& n : s.needles)
        needles.push_back({{"key", n.key},
                           {"values", n.values},
                           {"position", n.position},
                           {"occurrence", n.occurrence}});
    auto& question = j["question"] = nlohmann::json::array();
    for (const QuestionToken& q : s.question)
        question.push_back({{"key", q.key},
                            {"occurrence", q.occurrence},
                            {"value_index", q.value_index},
                            {"position", q.position}});
    return j.dump();
}

NiahSample sample_from_json_line(const std::string& line) {
    const nlohmann::json j = nlohmann::json::parse(line);
    NiahSample s;
    s.variant = task_from_string(j.at("variant").get<std::string>());
    s.seed = j.at("seed").get<std::uint64_t>();
    s.tokens = j.at("tokens").get<std::vector<TokenId>>();
    s.queries = j.at("queries").get<std::vector<TokenId>>();
    s.gold_answers = j.at("gold_answers").get<std::vector<std::vector<TokenId>>>();
    s.gold_positions = j.at("gold_positions").get<std::vector<std::size_t>>();
    for (const auto& n : j.at("needles"))
        s.needles.push_back({n.at("key").get<TokenId>(),
                             n.at("values").get<std::vector<TokenId>>(),
                             n.at("position").get<std::size_t>(),
                             n.at("occurrence").get<std::size_t>()});
    for (const auto& q : j.at("question"))
        s.question.push_back({q.at("key").get<TokenId>(),
                              q.at("occurrence").get<std::size_t>(),
                              q.at("value_index").get<std::size_t>(),
                              q.at("position").get<std::size_t>()});
    return s;
}

}  // namespace sparselab
